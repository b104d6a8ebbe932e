#include <algorithm>
#include <cmath>

#include "shrinkerlab/heat.hpp"
#include "shrinkerlab/quadrature.hpp"

namespace shrinkerlab::heat {

namespace {

double F_of(const ShrinkerModel& m, const Point& y, double t) {
    Point traj = y;
    if (m.has_flat()) traj.y = y.y / std::sqrt(1.0 - t);
    return (1.0 - t) * m.potential(traj);
}

}  // namespace

std::vector<BoundSample> kernel_bound_suite(const ShrinkerModel& m, int samples,
                                            double delta, double cap_D, double epsilon,
                                            std::uint64_t seed) {
    if (!(delta > 0 && delta < 1)) throw InvalidArgument("need delta in (0,1)");
    if (!(epsilon > 0 && epsilon < 4)) throw InvalidArgument("need epsilon in (0,4)");
    RngStream rng = RngStream(seed).fork("kernel-bounds-" + m.name());
    std::vector<BoundSample> out;
    int skipped = 0;
    while (static_cast<int>(out.size()) < samples && skipped < 50 * samples) {
        BoundSample b{};
        b.t = rng.uniform(-1.0 / delta, 1.0 - delta);
        const double gap = std::exp(rng.uniform(std::log(5e-3), std::log(2.0)));
        b.s = b.t - gap;
        // y within the admissible window d_t(p,y) + sqrt(t-s) <= D
        const double room = cap_D - std::sqrt(gap);
        if (room <= 0.1) {
            ++skipped;
            continue;
        }
        const double tau = 1.0 - b.t;
        b.y.theta = m.has_sphere() ? rng.uniform(0.0, kPi) : 0.0;
        if (m.has_flat()) {
            const double dt_sphere =
                m.has_sphere() ? std::sqrt(tau) * m.sphere_radius * b.y.theta : 0.0;
            if (dt_sphere >= room) {
                ++skipped;
                continue;
            }
            // d_t on the static flat factor equals the coordinate offset
            const double span = std::sqrt(std::max(sq(room) - sq(dt_sphere), 0.0));
            b.y.y = rng.uniform(0.0, std::min(span, m.rho_max() * std::sqrt(tau) * 0.8));
        }
        b.x = b.y;
        if (m.has_sphere())
            b.x.theta = std::clamp(b.y.theta + rng.uniform(-1.0, 1.0) * std::sqrt(gap),
                                   0.0, kPi);
        if (m.has_flat()) b.x.y = b.y.y + rng.uniform(-1.5, 1.5) * std::sqrt(gap);

        b.H = kernel_value(m, b.x, b.t, b.y, b.s);
        if (!(b.H > 0.0)) {
            ++skipped;
            continue;
        }
        b.upper = kernel_upper_bound(m, b.t, b.s);
        double dist_t = 0.0;
        {
            // distance at time t via the pullback form
            Point xt = b.x, yt = b.y;
            if (m.has_flat()) {
                xt.y /= std::sqrt(tau);
                yt.y /= std::sqrt(tau);
            }
            dist_t = std::sqrt(tau) * m.distance(xt, yt);
        }
        const double F = F_of(m, b.y, b.t);
        b.lower = std::exp(m.mu * (4.0 / epsilon - 1.0)) *
                  std::pow(4.0 * kPi * gap, -0.5 * m.n) *
                  std::exp(-sq(dist_t) / ((4.0 - epsilon) * gap) -
                           4.0 * gap * F / (3.0 * sq(tau) * epsilon));
        b.upper_margin = b.upper - b.H;
        b.lower_margin = b.H - b.lower;
        out.push_back(b);
    }
    if (static_cast<int>(out.size()) < samples)
        throw InvalidArgument("sampling window too tight for the requested samples");
    return out;
}

std::vector<TailCheck> kernel_tail_suite(const ShrinkerModel& m, const Point& x,
                                         double t, double s, double epsilon,
                                         const std::vector<double>& rs) {
    std::vector<TailCheck> out;
    for (double r : rs) {
        TailCheck c{};
        c.r = r;
        c.integral = kernel_tail_mass(m, x, t, s, r * std::sqrt(t - s));
        c.exponent_bound = std::exp(-sq(r - 1.0) / (4.0 * (1.0 + epsilon)));
        c.log_constant = std::log(std::max(c.integral, 1e-300)) -
                         std::log(c.exponent_bound);
        out.push_back(c);
    }
    return out;
}

std::vector<ConcentrationPair> concentration_suite(
    const ShrinkerModel& m, const Point& x, double t, double s, double sigma,
    const std::vector<std::pair<double, double>>& annuli) {
    std::vector<ConcentrationPair> out;
    for (auto [r1, r2] : annuli) {
        ConcentrationPair c{};
        c.r1 = r1;
        c.r2 = r2;
        if (!(r2 > r1 && r1 > 0)) throw InvalidArgument("need 0 < r1 < r2");
        c.va = kernel_ball_mass(m, x, t, s, r1);
        c.vb = kernel_tail_mass(m, x, t, s, r2);
        if (c.va < 1e-280 || c.vb < 1e-280) {
            c.skipped = true;
            out.push_back(c);
            continue;
        }
        c.lhs = c.va * std::pow(c.vb, 1.0 / sigma);
        c.rhs = std::exp(-sq(r2 - r1) / (4.0 * (1.0 + sigma) * (t - s)));
        out.push_back(c);
    }
    return out;
}

namespace {

// entropy and fisher sides of the kernel-measure log-Sobolev inequality for
// a density given radially per factor (value and radial derivative)
struct RadialDensity {
    std::string name;
    // of the sphere polar angle about x (absent factor: return {1, 0})
    std::function<std::pair<double, double>(double)> sphere;
    // of the flat distance about x
    std::function<std::pair<double, double>(double)> flat;
};

LogSobolevSample eval_density(const ShrinkerModel& m, double t, double s,
                              const RadialDensity& rho) {
    const double gap = t - s;
    const int md = m.flat_dim();
    const double as = m.has_sphere() ? m.sphere_radius * std::sqrt(1.0 - s) : 0.0;

    // factor measures normalized individually (v_s is a product measure)
    auto flat_measure = [&](const std::function<double(double, double, double)>& f) {
        if (!m.has_flat()) return f(1.0, 0.0, 0.0);
        return quad::integrate(
                   [&](double z) {
                       auto [v, dv] = rho.flat ? rho.flat(z) : std::pair{1.0, 0.0};
                       return sphere_area(md) * std::pow(z, md - 1) *
                              flat_kernel(md, z, gap) * f(v, dv, z);
                   },
                   0.0, 14.0 * std::sqrt(gap) + 1e-3, 1e-9, 1e-15)
            .value;
    };
    auto sphere_measure = [&](const std::function<double(double, double, double)>& f) {
        if (!m.has_sphere()) return f(1.0, 0.0, 0.0);
        SphereKernel ker(m.k, m.sphere_radius, t, s);
        return quad::integrate(
                   [&](double g) {
                       auto [v, dv] = rho.sphere ? rho.sphere(g) : std::pair{1.0, 0.0};
                       return sphere_area(m.k) * std::pow(as, m.k) *
                              std::pow(std::sin(g), m.k - 1) * ker.value(g) *
                              f(v, dv, g);
                   },
                   0.0, kPi, 1e-9, 1e-15)
            .value;
    };

    auto unit = [](double v, double, double) { return (void)v, 1.0; };
    const double zf = flat_measure(unit);
    const double zs = sphere_measure(unit);

    // rho = rho_s(gamma) * rho_f(zeta); integrals split accordingly
    const double mf = flat_measure([](double v, double, double) { return v; }) / zf;
    const double ms = sphere_measure([](double v, double, double) { return v; }) / zs;
    const double mass = mf * ms;

    const double ent_f =
        flat_measure([](double v, double, double) { return xlogx(v); }) / zf;
    const double ent_s =
        sphere_measure([](double v, double, double) { return xlogx(v); }) / zs;
    // E[rho log rho] for a product splits into cross terms
    const double ent_total = ent_f * ms + ent_s * mf;

    auto fisher_part = [&](bool sphere_factor) {
        if (sphere_factor) {
            if (!m.has_sphere()) return 0.0;
            return sphere_measure([&](double v, double dv, double) {
                       return v > 1e-14 ? sq(dv / as) / v : 0.0;
                   }) /
                   zs;
        }
        if (!m.has_flat()) return 0.0;
        return flat_measure([&](double v, double dv, double) {
                   return v > 1e-14 ? sq(dv) / v : 0.0;
               }) /
               zf;
    };
    const double fisher = fisher_part(false) * ms + fisher_part(true) * mf;

    LogSobolevSample out;
    out.density = rho.name;
    out.entropy_side = ent_total - mass * std::log(std::max(mass, 1e-300));
    out.fisher_side = fisher;
    out.defect = gap * fisher - out.entropy_side;
    return out;
}

// exact 1D marginal of the kernel measure along a flat axis; the
// exponential tilt is the equality case on the flat model
LogSobolevSample axial_tilt_sample(double gap, double amp) {
    auto tilt = [&](const std::function<double(double, double)>& f) {
        return quad::integrate(
                   [&](double z) {
                       const double w = flat_kernel(1, z, gap);
                       return w * f(std::exp(amp * z), amp * std::exp(amp * z));
                   },
                   -16.0 * std::sqrt(gap) - 2.0, 16.0 * std::sqrt(gap) + 2.0, 1e-11,
                   1e-16)
            .value;
    };
    const double mass = tilt([](double v, double) { return v; });
    const double ent = tilt([](double v, double) { return xlogx(v); });
    const double fisher = tilt([](double v, double dv) { return sq(dv) / v; });
    LogSobolevSample out;
    out.density = "axial-tilt";
    out.entropy_side = ent - mass * std::log(mass);
    out.fisher_side = fisher;
    out.defect = gap * fisher - out.entropy_side;
    return out;
}

}  // namespace

std::vector<LogSobolevSample> kernel_log_sobolev_suite(const ShrinkerModel& m,
                                                       const Point& x, double t,
                                                       double s) {
    (void)x;
    const double gap = t - s;
    const double w2 = 2.0 * gap;
    std::vector<RadialDensity> batt;
    batt.push_back({"constant", nullptr, nullptr});
    auto bump = [w2](double c) {
        return [w2, c](double d) {
            const double v = 1.0 + c * std::exp(-sq(d) / w2);
            const double dv = c * std::exp(-sq(d) / w2) * (-2.0 * d / w2);
            return std::pair{v, dv};
        };
    };
    if (m.has_flat()) {
        batt.push_back({"flat-bump", nullptr, bump(1.0)});
        batt.push_back({"flat-well", nullptr, bump(-0.5)});
        auto wide = [w2](double d) {
            const double v = 1.0 + std::exp(-sq(d) / (8.0 * w2));
            const double dv = std::exp(-sq(d) / (8.0 * w2)) * (-d / (4.0 * w2));
            return std::pair{v, dv};
        };
        batt.push_back({"flat-wide-bump", nullptr, wide});
    }
    if (m.has_sphere()) {
        auto scaled_bump = [&](double c) {
            const double as = m.sphere_radius * std::sqrt(1.0 - s);
            return [w2, c, as](double g) {
                const double d = as * g;
                const double v = 1.0 + c * std::exp(-sq(d) / w2);
                const double dv = c * std::exp(-sq(d) / w2) * (-2.0 * d * as / w2);
                return std::pair{v, dv};  // derivative in gamma
            };
        };
        batt.push_back({"sphere-bump", scaled_bump(1.0), nullptr});
        batt.push_back({"sphere-mode", [](double g) {
                            return std::pair{1.0 + 0.5 * std::cos(g),
                                             -0.5 * std::sin(g)};
                        },
                        nullptr});
        batt.push_back({"sphere-well", scaled_bump(-0.5), nullptr});
    }
    while (batt.size() < 5) batt.push_back({"constant-extra", nullptr, nullptr});

    std::vector<LogSobolevSample> out;
    for (const auto& d : batt) out.push_back(eval_density(m, t, s, d));
    if (m.is_flat()) out.push_back(axial_tilt_sample(gap, 1.0));
    return out;
}

GradientCheck gradient_estimate_check(const ShrinkerModel& m, const Point& source,
                                      double t_start, double t_check, int nodes) {
    if (!(t_start < t_check && t_check < 1.0))
        throw InvalidArgument("need t_start < t_check < 1");
    // positive bounded solution: the kernel from (source, t_start), restarted
    // at a positive offset so the supremum is finite
    const double t0 = t_start + 0.2 * (t_check - t_start);
    const double elapsed = t_check - t0;

    auto u = [&](const Point& q, double tt) {
        return kernel_value(m, q, tt, source, t_start);
    };
    const double R = m.scalar_curvature() / (1.0 - t_check);

    // supremum over the window [t0, t_check] sits on the diagonal at t0
    const double Lambda = 1.0000001 * u(source, t0);

    GradientCheck out{-1e300, -1e300, 0.0};
    std::vector<Point> pts;
    for (int i = 0; i < nodes; ++i) {
        Point q;
        q.theta = m.has_sphere() ? (i + 0.5) * kPi / nodes : 0.0;
        q.y = m.has_flat()
                  ? source.y + (i % 2 ? 1.0 : -1.0) * (i + 0.5) * 3.0 / nodes
                  : 0.0;
        pts.push_back(q);
    }
    const double tau = 1.0 - t_check;
    auto grad_norm = [&](const Point& q) {
        const double h = 1e-4;
        double g2 = 0.0;
        if (m.has_flat()) {
            const double d = (u(Point{q.theta, q.y + h}, t_check) -
                              u(Point{q.theta, q.y - h}, t_check)) /
                             (2 * h);
            g2 += sq(d);
        }
        if (m.has_sphere()) {
            const double d = (u(Point{q.theta + h, q.y}, t_check) -
                              u(Point{q.theta - h, q.y}, t_check)) /
                             (2 * h);
            g2 += sq(d) / (sq(m.sphere_radius) * tau);
        }
        return std::sqrt(g2);
    };
    auto laplacian = [&](const Point& q) {
        const double h = 2e-3;
        double lap = 0.0;
        if (m.has_flat()) {
            auto fy = [&](double yy) { return u(Point{q.theta, yy}, t_check); };
            const double d2 = (fy(q.y + h) - 2 * fy(q.y) + fy(q.y - h)) / sq(h);
            const double d1 = (fy(q.y + h) - fy(q.y - h)) / (2 * h);
            lap += d2 + (m.flat_dim() - 1) * (std::abs(q.y) > 0.05 ? d1 / q.y : d2);
        }
        if (m.has_sphere()) {
            auto ft = [&](double th) { return u(Point{th, q.y}, t_check); };
            const double d2 = (ft(q.theta + h) - 2 * ft(q.theta) + ft(q.theta - h)) / sq(h);
            const double d1 = (ft(q.theta + h) - ft(q.theta - h)) / (2 * h);
            const double cot = (q.theta > 0.15 && q.theta < kPi - 0.15)
                                   ? std::cos(q.theta) / std::sin(q.theta) * d1
                                   : d2;
            lap += (d2 + (m.k - 1) * cot) / (sq(m.sphere_radius) * tau);
        }
        return lap;
    };

    for (const Point& q : pts) {
        const double uv = u(q, t_check);
        if (uv <= 1e-280) continue;
        const double gn = grad_norm(q);
        const double rhs = std::sqrt(std::max(std::log(Lambda / uv), 0.0) / elapsed);
        out.worst_l301 = std::max(out.worst_l301, gn / uv - rhs);
        const double lap = laplacian(q);
        const double l502 = (std::abs(lap) + sq(gn) / uv - Lambda * R) * elapsed / Lambda;
        out.l502_constant = std::max(out.l502_constant, l502);
    }
    // Harnack pairs at matched times
    for (size_t i = 0; i + 1 < pts.size(); i += 2) {
        const Point &qa = pts[i], &qb = pts[i + 1];
        const double ua = u(qa, t_check), ub = u(qb, t_check);
        if (ua <= 1e-280 || ub <= 1e-280) continue;
        Point qa_t = qa, qb_t = qb;
        if (m.has_flat()) {
            qa_t.y /= std::sqrt(tau);
            qb_t.y /= std::sqrt(tau);
        }
        const double dist_t = std::sqrt(tau) * m.distance(qa_t, qb_t);
        const double sigma = 1.0;
        const double bound = std::pow(Lambda, sigma / (1 + sigma)) *
                             std::pow(ub, 1.0 / (1 + sigma)) *
                             std::exp(sq(dist_t) / (4.0 * sigma * elapsed));
        out.worst_harnack = std::max(out.worst_harnack, ua - bound);
    }
    return out;
}

}  // namespace shrinkerlab::heat
