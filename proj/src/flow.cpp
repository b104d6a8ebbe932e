#include "shrinkerlab/flow.hpp"

#include <algorithm>
#include <cmath>

namespace shrinkerlab::flow {

namespace {

void require_time(double t) {
    if (!(t < 1.0)) throw InvalidArgument("flow time must satisfy t < 1");
}

}  // namespace

Point diffeo_trajectory(const ShrinkerModel& m, const Point& x, double t) {
    require_time(t);
    Point out = x;
    if (m.has_flat()) {
        out.y = x.y / std::sqrt(1.0 - t);
        if (std::abs(out.y) > m.rho_max())
            throw InvalidArgument("trajectory leaves the truncated chart; requires rho_max >= " +
                                  std::to_string(std::abs(out.y)));
    }
    return out;  // identity on the sphere factor (grad f = 0 there)
}

Point diffeo_trajectory_ode(const ShrinkerModel& m, const Point& x, double t,
                            double local_tol) {
    require_time(t);
    if (!m.has_flat()) return x;
    // Cash-Karp embedded pair on dy/dz = y / (2 (1-z))
    auto rhs = [](double y, double z) { return 0.5 * y / (1.0 - z); };
    static const double c2 = 1. / 5, c3 = 3. / 10, c4 = 3. / 5, c5 = 1., c6 = 7. / 8;
    double y = x.y, z = 0.0;
    double h = (t >= 0 ? 1.0 : -1.0) * std::max(1e-4, std::abs(t) / 64.0);
    int guard = 0;
    while (std::abs(z - t) > 0 && guard++ < 200000) {
        if ((t - z) * h < 0 || std::abs(h) > std::abs(t - z)) h = t - z;
        const double k1 = rhs(y, z);
        const double k2 = rhs(y + h * (k1 / 5), z + c2 * h);
        const double k3 = rhs(y + h * (3 * k1 + 9 * k2) / 40, z + c3 * h);
        const double k4 = rhs(y + h * (3 * k1 - 9 * k2 + 12 * k3) / 10, z + c4 * h);
        const double k5 =
            rhs(y + h * (-11 * k1 / 54 + 5 * k2 / 2 - 70 * k3 / 27 + 35 * k4 / 27),
                z + c5 * h);
        const double k6 = rhs(y + h * (1631 * k1 / 55296 + 175 * k2 / 512 +
                                       575 * k3 / 13824 + 44275 * k4 / 110592 +
                                       253 * k5 / 4096),
                              z + c6 * h);
        const double y5 = y + h * (37 * k1 / 378 + 250 * k3 / 621 + 125 * k4 / 594 +
                                   512 * k6 / 1771);
        const double y4 = y + h * (2825 * k1 / 27648 + 18575 * k3 / 48384 +
                                   13525 * k4 / 55296 + 277 * k5 / 14336 + k6 / 4);
        const double err = std::abs(y5 - y4);
        const double scale = local_tol * (1.0 + std::abs(y));
        if (err <= scale) {
            z += h;
            y = y5;
        }
        const double fac = err > 0 ? 0.9 * std::pow(scale / err, 0.2) : 2.0;
        h *= std::clamp(fac, 0.2, 4.0);
    }
    if (std::abs(y) > m.rho_max())
        throw InvalidArgument("trajectory leaves the truncated chart; requires rho_max >= " +
                              std::to_string(std::abs(y)));
    return Point{x.theta, y};
}

namespace {

// 4th-order finite differences of a 1-argument callable
template <typename F>
double fd_d1(F&& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}
template <typename F>
double fd_d2(F&& f, double x, double h) {
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) /
           (12 * h * h);
}

double F_value(const ShrinkerModel& m, const Point& x, double t) {
    Point px = x;
    if (m.has_flat()) px.y = x.y / std::sqrt(1.0 - t);  // no extent check here
    return (1.0 - t) * m.potential(px);
}

// g(t)-gradient norm^2 and Laplacian of a chart-and-time callable by finite
// differences. The flat-factor metric of the induced flow is static while
// the sphere factor carries the (1-t) scale.
struct ChartDerivatives {
    double grad_norm2;
    double laplacian;
};

template <typename G>
ChartDerivatives chart_derivatives(const ShrinkerModel& m, G&& g, const Point& x,
                                   double t, double hy, double hth) {
    const double tau = 1.0 - t;
    ChartDerivatives out{0.0, 0.0};
    if (m.has_flat()) {
        auto fy = [&](double y) { return g(Point{x.theta, y}, t); };
        const double d1 = fd_d1(fy, x.y, hy);
        const double d2 = fd_d2(fy, x.y, hy);
        const double tangential = std::abs(x.y) < 1e-6 ? d2 : d1 / x.y;
        out.grad_norm2 += sq(d1);
        out.laplacian += d2 + (m.flat_dim() - 1) * tangential;
    }
    if (m.has_sphere()) {
        auto fth = [&](double th) { return g(Point{th, x.y}, t); };
        const double d1 = fd_d1(fth, x.theta, hth);
        const double d2 = fd_d2(fth, x.theta, hth);
        const double a2t = sq(m.sphere_radius) * tau;
        const double cot_term =
            (x.theta > 0.1 && x.theta < kPi - 0.1 && std::abs(d1) > 1e-13)
                ? std::cos(x.theta) / std::sin(x.theta) * d1
                : d2;
        out.grad_norm2 += sq(d1) / a2t;
        out.laplacian += (d2 + (m.k - 1) * cot_term) / a2t;
    }
    return out;
}

}  // namespace

PotentialData F_at(const ShrinkerModel& m, const Point& x, double t) {
    require_time(t);
    diffeo_trajectory(m, x, t);  // extent check with diagnostic
    const double tau = 1.0 - t;
    PotentialData out{};
    out.tau_bar = tau;
    out.F = F_value(m, x, t);
    out.R = m.scalar_curvature() / tau;

    const double ht = std::min(0.01, tau / 8.0);
    auto ft = [&](double s) { return F_value(m, x, s); };
    out.dF_dt = fd_d1(ft, t, ht);

    auto g = [&](const Point& p, double s) { return F_value(m, p, s); };
    auto d = chart_derivatives(m, g, x, t, 0.05, 0.05);
    out.grad_norm2 = d.grad_norm2;
    out.laplacian = d.laplacian;
    return out;
}

FlowlineBound flowline_potential_bound(const ShrinkerModel& m, const Point& x, double t) {
    if (t < 0.0) throw InvalidArgument("flowline bound is stated for 0 <= t < 1");
    require_time(t);
    Point px = diffeo_trajectory(m, x, t);
    return {m.potential(px), m.potential(x) / (1.0 - t)};
}

double distance_t(const ShrinkerModel& m, const Point& a, const Point& b, double t) {
    require_time(t);
    Point pa = diffeo_trajectory(m, a, t);
    Point pb = diffeo_trajectory(m, b, t);
    return std::sqrt(1.0 - t) * m.distance(pa, pb);
}

PotentialEnvelope potential_envelope(const ShrinkerModel& m, const Point& x, double t) {
    const double tau = 1.0 - t;
    const double d = distance_t(m, x, Point{}, t);
    PotentialEnvelope e{};
    e.F = F_value(m, x, t);
    const double lo = d - 5.0 * m.n * tau - 4.0;
    e.lower = 0.25 * sq(std::max(lo, 0.0));
    e.upper = 0.25 * sq(d + std::sqrt(2.0 * m.n * tau));
    return e;
}

// ---- cutoff family -------------------------------------------------------

double CutoffProfile::eta(double s) {
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    const double u = s - 1.0;
    return 1.0 - ((6.0 * u - 15.0) * u + 10.0) * u * u * u;
}
double CutoffProfile::eta_d1(double s) {
    if (s <= 1.0 || s >= 2.0) return 0.0;
    const double u = s - 1.0;
    return -30.0 * sq(u) * sq(1.0 - u);
}
double CutoffProfile::eta_d2(double s) {
    if (s <= 1.0 || s >= 2.0) return 0.0;
    const double u = s - 1.0;
    return -60.0 * u * (2.0 * u - 1.0) * (u - 1.0);
}
double CutoffProfile::eta_d3(double s) {
    if (s <= 1.0 || s >= 2.0) return 0.0;
    const double u = s - 1.0;
    return -60.0 * (6.0 * sq(u) - 6.0 * u + 1.0);
}

CutoffData cutoff_eval(const ShrinkerModel& m, double r, const Point& x, double t) {
    if (!(r >= 1.0)) throw InvalidArgument("cutoff scale must satisfy r >= 1");
    PotentialData F = F_at(m, x, t);
    const double s = F.F / r;
    const double e1 = CutoffProfile::eta_d1(s), e2 = CutoffProfile::eta_d2(s);
    CutoffData c{};
    c.F = F.F;
    c.phi = CutoffProfile::eta(s);
    c.grad_norm = std::abs(e1) / r * std::sqrt(F.grad_norm2);
    c.phi_t = e1 / r * F.dF_dt;
    c.laplacian = e2 / sq(r) * F.grad_norm2 + e1 / r * F.laplacian;
    c.box = c.phi_t - c.laplacian;
    c.conj_box = -c.phi_t - c.laplacian + F.R * c.phi;
    return c;
}

CutoffConstants cutoff_constants(const ShrinkerModel& m, double r,
                                 const std::vector<double>& times,
                                 int nodes_per_factor) {
    CutoffConstants out{0.0, 0.0, 0.0};
    for (double t : times) {
        const double tau = 1.0 - t;
        for (const Point& x0 : models::sample_points(m, nodes_per_factor)) {
            // map the sample so its F-value sweeps the transition band
            Point x = x0;
            if (m.has_flat()) {
                const double fmax = 2.5 * r / tau;
                const double ymax =
                    std::min(m.rho_max() * std::sqrt(tau) * 0.999,
                             2.0 * std::sqrt(std::max(fmax - m.potential_min(), 0.0)));
                x.y = x0.y / (12.0 * std::sqrt(double(m.n))) * ymax;
            }
            CutoffData c = cutoff_eval(m, r, x, t);
            if (c.phi > 1e-12)
                out.sup_grad_ratio = std::max(out.sup_grad_ratio, r * sq(c.grad_norm) / c.phi);
            out.sup_time_ratio = std::max(out.sup_time_ratio, tau * std::abs(c.phi_t));
            out.sup_box_ratio = std::max(out.sup_box_ratio, r * std::abs(c.box));
        }
    }
    return out;
}

ProfileConstants cutoff_profile_constants() {
    ProfileConstants p{0.0, 0.0, 0.0};
    for (int i = 1; i < 4096; ++i) {
        const double s = 1.0 + i / 4096.0;
        const double e = CutoffProfile::eta(s);
        if (e > 0)
            p.grad_over_sqrt = std::max(p.grad_over_sqrt,
                                        -CutoffProfile::eta_d1(s) / std::sqrt(e));
        p.sup_d2 = std::max(p.sup_d2, std::abs(CutoffProfile::eta_d2(s)));
        p.sup_d3 = std::max(p.sup_d3, std::abs(CutoffProfile::eta_d3(s)));
    }
    return p;
}

// ---- special solutions ---------------------------------------------------

double special_heat_residual(const ShrinkerModel& m, const Point& x, double t) {
    PotentialData F = F_at(m, x, t);
    return std::abs(F.dF_dt + 0.5 * m.n - F.laplacian);
}

double special_conjugate_residual(const ShrinkerModel& m, const Point& x, double t) {
    const double tau = 1.0 - t;
    auto vbar = [&](const Point& p, double s) {
        const double ts = 1.0 - s;
        return std::pow(4.0 * kPi * ts, -0.5 * m.n) * std::exp(-F_value(m, p, s) / ts);
    };
    const double ht = std::min(0.004 * tau, tau / 16.0);
    auto ft = [&](double s) { return vbar(x, s); };
    const double dv_dt = fd_d1(ft, t, ht);

    const double hscale = 0.01 * std::sqrt(std::min(tau, 1.0));
    auto d = chart_derivatives(m, vbar, x, t, hscale, hscale);
    const double R = m.scalar_curvature() / tau;
    return std::abs(-dv_dt - d.laplacian + R * vbar(x, t));
}

}  // namespace shrinkerlab::flow
