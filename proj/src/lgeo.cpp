#include "shrinkerlab/lgeo.hpp"

#include <algorithm>
#include <cmath>

#include "shrinkerlab/quadrature.hpp"

namespace shrinkerlab::lgeo {

namespace {

void require_pair(double t, double s) {
    if (!(s < t && t < 1.0))
        throw InvalidArgument("reduced distance needs s < t < 1");
}

// scalar-curvature part of the weighted length; independent of the path on
// catalog models (R is spatially constant), added after minimization
double curvature_term(const ShrinkerModel& m, double t, double s) {
    const double R0 = m.scalar_curvature();
    if (R0 == 0.0) return 0.0;
    return quad::integrate(
               [&](double sig) { return 2.0 * sq(sig) * R0 / (1.0 - t + sq(sig)); },
               0.0, std::sqrt(t - s), 1e-11)
        .value;
}

// kinetic part of the discretized functional and its gradient
struct Kinetic {
    std::vector<double> w_theta;  // sphere metric weight a^2 (1-z) per segment
    double dsig;
    int segs;

    Kinetic(const ShrinkerModel& m, double t, double s, int nodes) {
        segs = nodes;
        dsig = std::sqrt(t - s) / segs;
        w_theta.resize(segs);
        for (int i = 0; i < segs; ++i) {
            const double sig = (i + 0.5) * dsig;
            const double z = t - sq(sig);
            w_theta[i] = m.has_sphere() ? sq(m.sphere_radius) * (1.0 - z) : 0.0;
        }
    }

    double value(const std::vector<double>& th, const std::vector<double>& yy) const {
        double acc = 0.0;
        for (int i = 0; i < segs; ++i)
            acc += (w_theta[i] * sq(th[i + 1] - th[i]) + sq(yy[i + 1] - yy[i])) /
                   (2.0 * dsig);
        return acc;
    }

    void gradient(const std::vector<double>& th, const std::vector<double>& yy,
                  std::vector<double>& gth, std::vector<double>& gy) const {
        gth.assign(th.size(), 0.0);
        gy.assign(yy.size(), 0.0);
        for (int i = 0; i < segs; ++i) {
            const double dth = (th[i + 1] - th[i]) / dsig;
            const double dy = (yy[i + 1] - yy[i]) / dsig;
            gth[i] -= w_theta[i] * dth;
            gth[i + 1] += w_theta[i] * dth;
            gy[i] -= dy;
            gy[i + 1] += dy;
        }
        gth.front() = gth.back() = 0.0;  // endpoints fixed
        gy.front() = gy.back() = 0.0;
    }
};

struct MinimizeOut {
    double kinetic;
    double grad_norm;
    std::vector<double> theta, y;
};

// Polak-Ribiere conjugate gradient with Armijo backtracking on the interior
// nodes; the metric weights are path independent, so the functional is
// convex quadratic and either restart converges quickly.
MinimizeOut minimize_kinetic(const Kinetic& kin, std::vector<double> th,
                             std::vector<double> yy, int max_iter) {
    const size_t n = th.size();
    std::vector<double> gth, gy, pth(n, 0.0), py(n, 0.0), gth_prev, gy_prev;
    double f = kin.value(th, yy);
    kin.gradient(th, yy, gth, gy);
    for (int it = 0; it < max_iter; ++it) {
        double g2 = 0.0;
        for (size_t i = 0; i < n; ++i) g2 += sq(gth[i]) + sq(gy[i]);
        if (std::sqrt(g2) < 1e-12 * (1.0 + std::abs(f))) break;
        double beta = 0.0;
        if (it > 0) {
            double num = 0.0, den = 0.0;
            for (size_t i = 0; i < n; ++i) {
                num += gth[i] * (gth[i] - gth_prev[i]) + gy[i] * (gy[i] - gy_prev[i]);
                den += sq(gth_prev[i]) + sq(gy_prev[i]);
            }
            beta = std::max(0.0, num / std::max(den, 1e-300));
        }
        double slope = 0.0;
        for (size_t i = 0; i < n; ++i) {
            pth[i] = -gth[i] + beta * pth[i];
            py[i] = -gy[i] + beta * py[i];
            slope += gth[i] * pth[i] + gy[i] * py[i];
        }
        if (slope >= 0) {
            slope = 0.0;
            for (size_t i = 0; i < n; ++i) {
                pth[i] = -gth[i];
                py[i] = -gy[i];
                slope -= sq(gth[i]) + sq(gy[i]);
            }
        }
        double step = 1.0;
        std::vector<double> th2(n), yy2(n);
        for (int ls = 0; ls < 50; ++ls) {
            for (size_t i = 0; i < n; ++i) {
                th2[i] = th[i] + step * pth[i];
                yy2[i] = yy[i] + step * py[i];
            }
            const double f2 = kin.value(th2, yy2);
            if (f2 <= f + 1e-4 * step * slope) {
                th.swap(th2);
                yy.swap(yy2);
                f = f2;
                break;
            }
            step *= 0.5;
        }
        gth_prev = gth;
        gy_prev = gy;
        kin.gradient(th, yy, gth, gy);
    }
    double g2 = 0.0;
    for (size_t i = 0; i < n; ++i) g2 += sq(gth[i]) + sq(gy[i]);
    return {f, std::sqrt(g2), std::move(th), std::move(yy)};
}

struct LevelOut {
    double l;
    double grad_norm;
    std::vector<double> theta, y;
};

LevelOut solve_level(const ShrinkerModel& m, const Point& x, double t, const Point& y,
                     double s, int nodes, int max_iter,
                     const std::vector<double>* warm_th,
                     const std::vector<double>* warm_y) {
    Kinetic kin(m, t, s, nodes);
    const double rterm = curvature_term(m, t, s);

    // sigma = 0 is the (x, t) endpoint
    auto make_start = [&](double hold) {
        std::vector<double> th(nodes + 1), yy(nodes + 1);
        for (int i = 0; i <= nodes; ++i) {
            const double f = double(i) / nodes;
            const double g = f <= hold ? 0.0 : (f - hold) / (1.0 - hold);
            th[i] = x.theta + (y.theta - x.theta) * (hold > 0 ? g : f);
            yy[i] = x.y + (y.y - x.y) * (hold > 0 ? g : f);
        }
        return std::pair{th, yy};
    };

    MinimizeOut best{};
    bool have = false;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> starts;
    starts.push_back(make_start(0.0));   // straight line in sigma
    starts.push_back(make_start(0.65));  // near-constant then transit
    if (warm_th && warm_y) starts.push_back({*warm_th, *warm_y});
    for (auto& [th0, yy0] : starts) {
        const double init_val = kin.value(th0, yy0);
        MinimizeOut r = minimize_kinetic(kin, th0, yy0, max_iter);
        if (r.kinetic > init_val) {  // keep the feasible start if better
            r.kinetic = init_val;
            r.theta = th0;
            r.y = yy0;
        }
        if (!have || r.kinetic < best.kinetic) {
            best = std::move(r);
            have = true;
        }
    }
    LevelOut out;
    out.l = (best.kinetic + rterm) / (2.0 * std::sqrt(t - s));
    out.grad_norm = best.grad_norm;
    out.theta = std::move(best.theta);
    out.y = std::move(best.y);
    return out;
}

std::vector<double> refine(const std::vector<double>& v) {
    std::vector<double> out;
    out.reserve(2 * v.size() - 1);
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        out.push_back(v[i]);
        out.push_back(0.5 * (v[i] + v[i + 1]));
    }
    out.push_back(v.back());
    return out;
}

}  // namespace

ReducedDistance reduced_distance(const ShrinkerModel& m, const Point& x, double t,
                                 const Point& y, double s,
                                 const ReducedDistanceOptions& opts) {
    require_pair(t, s);
    LevelOut coarse =
        solve_level(m, x, t, y, s, opts.nodes, opts.max_iterations, nullptr, nullptr);
    LevelOut fine = coarse;
    double gap = opts.refine_levels == 0 ? 0.0 : 1e300;
    int nodes = opts.nodes;
    for (int level = 0; level < opts.refine_levels; ++level) {
        std::vector<double> wth = refine(fine.theta), wy = refine(fine.y);
        coarse = fine;
        nodes *= 2;
        fine = solve_level(m, x, t, y, s, nodes, opts.max_iterations, &wth, &wy);
        gap = std::abs(coarse.l - fine.l);
        if (gap <= opts.tol * std::max(1.0, std::abs(fine.l))) break;
    }
    ReducedDistance out;
    out.refinement_gap = gap;
    if (gap > opts.tol * std::max(1.0, std::abs(fine.l)))
        throw ConvergenceError("path refinement did not settle: gap " +
                               std::to_string(gap) + ", best value " +
                               std::to_string(std::min(coarse.l, fine.l)) +
                               ", gradient norm " + std::to_string(fine.grad_norm));
    out.l = std::min(coarse.l, fine.l);  // refinement never raises the value
    out.grad_norm = fine.grad_norm;
    out.path.theta = fine.theta;
    out.path.y = fine.y;
    const int nn = static_cast<int>(fine.theta.size());
    out.path.sigma.resize(nn);
    const double dsig = std::sqrt(t - s) / (nn - 1);
    for (int i = 0; i < nn; ++i) out.path.sigma[i] = i * dsig;
    out.path.length_value = out.l * 2.0 * std::sqrt(t - s);
    return out;
}

double reduced_distance_dp_oracle(const ShrinkerModel& m, double theta_x, double t,
                                  double theta_y, double s, int sigma_steps,
                                  int theta_steps) {
    require_pair(t, s);
    if (!m.has_sphere()) throw InvalidArgument("dp oracle needs a sphere factor");
    const double dsig = std::sqrt(t - s) / sigma_steps;
    const double dth = kPi / theta_steps;
    std::vector<double> cost(theta_steps + 1, 1e300), next(theta_steps + 1);
    cost[int(std::round(theta_x / dth))] = 0.0;
    for (int i = 0; i < sigma_steps; ++i) {
        const double sig = (i + 0.5) * dsig;
        const double w = sq(m.sphere_radius) * (1.0 - (t - sq(sig)));
        std::fill(next.begin(), next.end(), 1e300);
        for (int j = 0; j <= theta_steps; ++j) {
            if (cost[j] >= 1e300) continue;
            for (int j2 = 0; j2 <= theta_steps; ++j2) {
                const double c = cost[j] + w * sq((j2 - j) * dth) / (2.0 * dsig);
                if (c < next[j2]) next[j2] = c;
            }
        }
        cost.swap(next);
    }
    return (cost[int(std::round(theta_y / dth))] + curvature_term(m, t, s)) /
           (2.0 * std::sqrt(t - s));
}

double constant_path_value(const ShrinkerModel& m, const Point& y, double t,
                           double s) {
    (void)y;
    return curvature_term(m, t, s) / (2.0 * std::sqrt(t - s));
}

KernelLowerDefect kernel_lower_defect(const ShrinkerModel& m, const Point& x, double t,
                                      const Point& y, double s) {
    KernelLowerDefect out;
    out.H = heat::kernel_value(m, x, t, y, s);
    out.l = reduced_distance(m, x, t, y, s).l;
    out.bound = std::exp(-out.l) * std::pow(4.0 * kPi * (t - s), -0.5 * m.n);
    out.margin = out.H - out.bound;
    return out;
}

// ---- differential Harnack ---------------------------------------------------

namespace {

// b(x,t) = -log((4 pi tau)^{n/2} H(q,T,x,t)); the kernel is radial about q
// per factor, so polar coordinates about q carry the derivatives.
double b_value(const ShrinkerModel& m, double gamma, double zeta, double T, double t) {
    const double tau = T - t;
    double H = 1.0;
    if (m.has_flat()) H *= heat::flat_kernel(m.flat_dim(), zeta, tau);
    if (m.has_sphere()) {
        heat::SphereKernel ker(m.k, m.sphere_radius, T, t);
        H *= ker.value(gamma);
    }
    return -std::log(std::pow(4.0 * kPi * tau, 0.5 * m.n) * H);
}

}  // namespace

double b_mean(const ShrinkerModel& m, const Point& q, double T, double t) {
    require_pair(T, t);
    const double tau = T - t;
    // product split: b = b_s + b_f, so the mean splits against the factor
    // masses (the flat-factor mass is 1)
    double Ms = 1.0, Bs = 0.0, Mf = 1.0, Bf = 0.0;
    if (m.has_sphere()) {
        heat::SphereKernel ker(m.k, m.sphere_radius, T, t);
        const double at = m.sphere_radius * std::sqrt(1.0 - t);
        auto weight = [&](double g) {
            return sphere_area(m.k) * std::pow(at, m.k) * std::pow(std::sin(g), m.k - 1);
        };
        Ms = quad::integrate([&](double g) { return weight(g) * ker.value(g); }, 0.0,
                             kPi, 1e-10, 1e-14)
                 .value;
        Bs = quad::integrate(
                 [&](double g) {
                     const double H = ker.value(g);
                     if (H <= 1e-300) return 0.0;
                     const double bs =
                         -std::log(std::pow(4.0 * kPi * tau, 0.5 * m.k) * H);
                     return weight(g) * H * bs;
                 },
                 0.0, kPi, 1e-10, 1e-14)
                 .value;
    }
    if (m.has_flat()) {
        const int md = m.flat_dim();
        const double cut = 14.0 * std::sqrt(tau) + 1e-3;
        Bf = quad::integrate(
                 [&](double z) {
                     return sphere_area(md) * std::pow(z, md - 1) *
                            heat::flat_kernel(md, z, tau) * sq(z) / (4.0 * tau);
                 },
                 0.0, cut, 1e-10, 1e-14)
                 .value;
        Mf = quad::integrate(
                 [&](double z) {
                     return sphere_area(md) * std::pow(z, md - 1) *
                            heat::flat_kernel(md, z, tau);
                 },
                 0.0, cut, 1e-10, 1e-14)
                 .value;
    }
    (void)q;
    return Bs * Mf + Bf * Ms;
}

HarnackReport harnack_check(const ShrinkerModel& m, const Point& q, double T,
                            int sample_count, double tau_min, double tau_max,
                            std::uint64_t seed) {
    if (!(T < 1.0)) throw InvalidArgument("base time must satisfy T < 1");
    RngStream rng = RngStream(seed).fork("harnack-" + m.name());
    HarnackReport rep;

    auto d1 = [](auto f, double c, double hh) {
        return (-f(c + 2 * hh) + 8 * f(c + hh) - 8 * f(c - hh) + f(c - 2 * hh)) /
               (12 * hh);
    };
    auto d2 = [](auto f, double c, double hh) {
        return (-f(c + 2 * hh) + 16 * f(c + hh) - 30 * f(c) + 16 * f(c - hh) -
                f(c - 2 * hh)) /
               (12 * sq(hh));
    };

    for (int i = 0; i < sample_count; ++i) {
        HarnackSample smp{};
        const double tau = std::exp(rng.uniform(std::log(tau_min), std::log(tau_max)));
        smp.t = T - tau;
        const double spread = std::sqrt(tau);
        if (tau <= 4e-4) {  // below the stable differentiation scale
            smp.skipped = true;
            rep.samples.push_back(smp);
            ++rep.skipped;
            continue;
        }
        const double tau_bar = 1.0 - smp.t;
        const double gamma =
            m.has_sphere()
                ? std::min(rng.uniform(0.3, 2.0) * spread /
                               (m.sphere_radius * std::sqrt(tau_bar)),
                           0.6 * kPi)
                : 0.0;
        const double zeta = m.has_flat() ? rng.uniform(0.3, 2.0) * spread : 0.0;
        smp.x = Point{q.theta + gamma, q.y + zeta};

        double grad2 = 0.0, lap = 0.0;
        if (m.has_flat()) {
            auto fz = [&](double z) { return b_value(m, gamma, std::abs(z), T, smp.t); };
            const double hz = std::min(0.02 * spread, 0.24 * zeta);
            const double g1 = d1(fz, zeta, hz);
            grad2 += sq(g1);
            lap += d2(fz, zeta, hz) + (m.flat_dim() - 1) * g1 / zeta;
        }
        if (m.has_sphere()) {
            auto fg = [&](double g) { return b_value(m, std::abs(g), zeta, T, smp.t); };
            const double a2t = sq(m.sphere_radius) * tau_bar;
            const double hg =
                std::min(0.02 * spread / std::sqrt(a2t), 0.24 * gamma);
            const double g1 = d1(fg, gamma, hg);
            grad2 += sq(g1) / a2t;
            lap += (d2(fg, gamma, hg) +
                    (m.k - 1) * std::cos(gamma) / std::sin(gamma) * g1) /
                   a2t;
        }
        const double R = m.scalar_curvature() / tau_bar;
        const double bval = b_value(m, gamma, zeta, T, smp.t);
        smp.v = tau * (2.0 * lap - grad2 + R) + bval - m.n;
        rep.samples.push_back(smp);
        rep.max_v = std::max(rep.max_v, smp.v);
    }
    rep.b_mean_coarse = b_mean(m, q, T, T - 1e-2);
    rep.b_mean_fine = b_mean(m, q, T, T - 1e-3);
    rep.b_mean_extrapolated =
        rep.b_mean_fine +
        (rep.b_mean_fine - rep.b_mean_coarse) * (1e-3 / (1e-2 - 1e-3));
    return rep;
}

}  // namespace shrinkerlab::lgeo
