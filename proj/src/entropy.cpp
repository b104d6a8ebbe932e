#include "shrinkerlab/entropy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace shrinkerlab::entropy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---- closed-form helpers ---------------------------------------------------

AnalyticFunction canonical_minimizer(const ShrinkerModel& m) {
    const double f0_shift = m.mu + 0.5 * m.n * std::log(4.0 * kPi);
    AnalyticFunction u;
    u.value = [&m, f0_shift](const Point& x) {
        return std::exp(-0.5 * (m.potential(x) + f0_shift));
    };
    u.grad_norm2 = [&m, f0_shift](const Point& x) {
        const double v = std::exp(-0.5 * (m.potential(x) + f0_shift));
        return 0.25 * m.grad_f_norm2(x) * sq(v);
    };
    return u;
}

double model_integral(const ShrinkerModel& m,
                      const std::function<double(const Point&)>& h, double rel_tol) {
    const double L = m.rho_max();
    if (!m.has_sphere()) {
        const double c = sphere_area(m.flat_dim());
        return quad::integrate(
                   [&](double rho) {
                       return c * std::pow(rho, m.flat_dim() - 1) * h(Point{0.0, rho});
                   },
                   0.0, L, rel_tol, 1e-14)
            .value;
    }
    const double cs = sphere_area(m.k) * std::pow(m.sphere_radius, m.k);
    if (!m.has_flat()) {
        return quad::integrate(
                   [&](double th) {
                       return cs * std::pow(std::sin(th), m.k - 1) * h(Point{th, 0.0});
                   },
                   0.0, kPi, rel_tol, 1e-14)
            .value;
    }
    const double cf = sphere_area(m.flat_dim());
    auto outer = [&](double th) {
        const double wth = cs * std::pow(std::sin(th), m.k - 1);
        auto inner = [&](double rho) {
            return cf * std::pow(rho, m.flat_dim() - 1) * h(Point{th, rho});
        };
        return wth * quad::integrate(inner, 0.0, L, rel_tol * 0.5, 1e-15).value;
    };
    return quad::integrate(outer, 0.0, kPi, rel_tol, 1e-14).value;
}

namespace {

double grad_norm2_or_fd(const ShrinkerModel& m, const AnalyticFunction& u,
                        const Point& x) {
    if (u.grad_norm2) return u.grad_norm2(x);
    const double h = 1e-5;
    double g2 = 0.0;
    if (m.has_flat()) {
        const double d = (u.value(Point{x.theta, x.y + h}) -
                          u.value(Point{x.theta, x.y - h})) /
                         (2 * h);
        g2 += sq(d);
    }
    if (m.has_sphere()) {
        const double d = (u.value(Point{x.theta + h, x.y}) -
                          u.value(Point{x.theta - h, x.y})) /
                         (2 * h);
        g2 += sq(d) / sq(m.sphere_radius);
    }
    return g2;
}

}  // namespace

WValue w_functional(const ShrinkerModel& m, const AnalyticFunction& u, double tau) {
    if (!(tau > 0)) throw InvalidArgument("w_functional needs tau > 0");
    const double mass = model_integral(m, [&](const Point& x) { return sq(u.value(x)); });
    if (std::abs(mass - 1.0) > 1e-10)
        throw InvalidArgument("test function is not L2-normalized (int u^2 = " +
                              std::to_string(mass) + "); normalize before calling");
    const double R = m.scalar_curvature();
    const double dirichlet =
        model_integral(m, [&](const Point& x) { return grad_norm2_or_fd(m, u, x); });
    const double entropy_term =
        model_integral(m, [&](const Point& x) { return xlogx(sq(u.value(x))); });
    WValue out;
    out.value = tau * (4.0 * dirichlet + R * mass) - entropy_term - m.n -
                0.5 * m.n * std::log(4.0 * kPi * tau);
    out.error_estimate = 1e-8 * (1.0 + std::abs(out.value));
    return out;
}

// ---- factor discretizations ------------------------------------------------

namespace {

// One tensor factor: quadrature nodes/weights plus an eigenbasis of the
// negative Laplacian (spectral on the sphere factor, symmetrized finite
// volumes on interval factors).
struct Factor {
    VectorXd nodes;
    VectorXd weights;  // include the factor's area element
    MatrixXd fwd;      // node values -> modal coefficients
    MatrixXd inv;      // modal coefficients -> node values
    VectorXd lam;      // eigenvalues of -Laplacian

    int size() const { return static_cast<int>(nodes.size()); }

    static Factor identity() {
        Factor f;
        f.nodes = VectorXd::Zero(1);
        f.weights = VectorXd::Ones(1);
        f.fwd = f.inv = MatrixXd::Identity(1, 1);
        f.lam = VectorXd::Zero(1);
        return f;
    }
};

// Gegenbauer collocation on the polar angle of S^k(b).
Factor sphere_spectral(int k, double b, int modes) {
    const double alpha = 0.5 * (k - 2);
    quad::Rule gj = quad::gauss_jacobi(modes, alpha, alpha);
    const double carea = sphere_area(k) * std::pow(b, k);

    Factor f;
    const int N = modes;
    f.nodes = VectorXd(N);
    f.weights = VectorXd(N);
    for (int i = 0; i < N; ++i) {
        f.nodes[i] = std::acos(std::clamp(gj.nodes[i], -1.0, 1.0));
        f.weights[i] = carea * gj.weights[i];
    }
    // orthonormal polynomials from the Jacobi recurrence (symmetric weight:
    // the diagonal recurrence coefficients vanish)
    std::vector<double> bb(N, 0.0);
    const double ab = 2.0 * alpha;
    for (int i = 1; i < N; ++i) {
        const double d = 2.0 * i + ab;
        double num = 4.0 * i * (i + alpha) * (i + alpha) * (i + ab);
        double den = sq(d) * (d + 1.0) * (d - 1.0);
        if (i == 1 && std::abs(ab + 1.0) < 1e-14)
            num = 4.0 * sq(1.0 + alpha), den = sq(ab + 2.0) * (ab + 3.0);
        bb[i] = std::sqrt(num / den);
    }
    const double mu0 = std::pow(2.0, ab + 1.0) * sq(std::tgamma(alpha + 1.0)) /
                       std::tgamma(ab + 2.0);
    MatrixXd P(N, N);  // P(i,j) = p_j(x_i), orthonormal wrt the factor weights
    const double scale = 1.0 / std::sqrt(mu0 * carea);
    for (int i = 0; i < N; ++i) {
        const double x = gj.nodes[i];
        double pm1 = 0.0, p0 = scale;
        P(i, 0) = p0;
        for (int j = 1; j < N; ++j) {
            const double pj = (x * p0 - (j >= 2 ? bb[j - 1] * pm1 : 0.0)) / bb[j];
            pm1 = p0;
            p0 = pj;
            P(i, j) = pj;
        }
    }
    f.inv = P;
    f.fwd = P.transpose() * f.weights.asDiagonal();
    f.lam = VectorXd(N);
    for (int j = 0; j < N; ++j) f.lam[j] = j * (j + k - 1.0) / sq(b);
    return f;
}

// Symmetrized finite-volume interval factor with weight w(x) and metric
// scale s (Laplacian = s^{-2} w^{-1} (w u')'), cell-centered grid.
struct IntervalSpec {
    std::function<double(double)> w;
    double x0 = 0.0, x1 = 1.0;
    double scale = 1.0;
    double mass_const = 1.0;  // angular-area constant folded into the weights
    bool dirichlet_right = true;
};

Factor interval_fd(const IntervalSpec& spec, int cells) {
    const int N = cells;
    const double h = (spec.x1 - spec.x0) / N;
    VectorXd wc(N), wf(N + 1);
    Factor f;
    f.nodes = VectorXd(N);
    for (int i = 0; i < N; ++i) {
        f.nodes[i] = spec.x0 + (i + 0.5) * h;
        wc[i] = spec.w(f.nodes[i]);
    }
    for (int i = 0; i <= N; ++i) wf[i] = spec.w(spec.x0 + i * h);
    wf[0] = 0.0;  // zero flux at the axis/pole/reflection face

    const double s2 = sq(spec.scale);
    MatrixXd T = MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) {
        double diag = wf[i] + wf[i + 1];
        if (i == N - 1) diag = wf[i] + (spec.dirichlet_right ? 2.0 * wf[N] : 0.0);
        T(i, i) = diag / (wc[i] * sq(h) * s2);
        if (i + 1 < N)
            T(i, i + 1) = T(i + 1, i) =
                -wf[i + 1] / (std::sqrt(wc[i] * wc[i + 1]) * sq(h) * s2);
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T);
    f.weights = VectorXd(N);
    for (int i = 0; i < N; ++i) f.weights[i] = spec.mass_const * wc[i] * h;
    VectorXd dhalf = wc.cwiseSqrt();
    f.inv = dhalf.cwiseInverse().asDiagonal() * es.eigenvectors();
    f.fwd = es.eigenvectors().transpose() * dhalf.asDiagonal();
    f.lam = es.eigenvalues().cwiseMax(0.0);
    return f;
}

// ---- the normalized gradient flow -----------------------------------------

struct EffectiveGeometry {
    int n;         // total dimension
    int k;         // sphere-factor dimension (0 = none)
    double b;      // sphere-factor radius
    int m;         // flat-factor dimension (0 = none)
    double R;      // scalar curvature (constant)
    double f_min;  // potential at the base point
};

struct GridProblem {
    Factor th;      // sphere factor (identity when absent)
    Factor rho;     // flat factor (identity when absent)
    MatrixXd mask;  // 1 inside the domain (only for non-tensor balls)
    bool masked = false;
};

struct SolveOutput {
    double mu;
    double residual;
    int iterations;
    MatrixXd field;
};

class GridSolver {
  public:
    GridSolver(const GridProblem& p, double tau, double R, int n)
        : p_(p), tau_(tau), R_(R), n_(n) {
        W_ = p_.th.weights * p_.rho.weights.transpose();
        if (p_.masked) {
            W_ = W_.cwiseProduct(p_.mask);
            interior_ = p_.mask;
            for (int i = 0; i < p_.mask.rows(); ++i)
                for (int j = 0; j < p_.mask.cols(); ++j) {
                    bool in = p_.mask(i, j) > 0.5;
                    if (in) {
                        if (i > 0) in = in && p_.mask(i - 1, j) > 0.5;
                        if (i + 1 < p_.mask.rows()) in = in && p_.mask(i + 1, j) > 0.5;
                        if (j > 0) in = in && p_.mask(i, j - 1) > 0.5;
                        if (j + 1 < p_.mask.cols()) in = in && p_.mask(i, j + 1) > 0.5;
                    }
                    interior_(i, j) = in ? 1.0 : 0.0;
                }
        }
        lam_sum_ = MatrixXd(p_.th.size(), p_.rho.size());
        for (int i = 0; i < p_.th.size(); ++i)
            for (int j = 0; j < p_.rho.size(); ++j)
                lam_sum_(i, j) = p_.th.lam[i] + p_.rho.lam[j];
    }

    MatrixXd neg_lap(const MatrixXd& U) const {
        MatrixXd C = p_.th.fwd * U * p_.rho.fwd.transpose();
        C = C.cwiseProduct(lam_sum_);
        return p_.th.inv * C * p_.rho.inv.transpose();
    }

    double inner(const MatrixXd& A, const MatrixXd& B) const {
        return A.cwiseProduct(B).cwiseProduct(W_).sum();
    }

    void normalize(MatrixXd& U) const { U /= std::sqrt(inner(U, U)); }

    // lambda-hat = tau (4 K + R) - int u^2 log u^2 for normalized u
    double rayleigh(const MatrixXd& U, const MatrixXd& negLapU) const {
        const double K = inner(U, negLapU);
        double slog = 0.0;
        for (int i = 0; i < U.rows(); ++i)
            for (int j = 0; j < U.cols(); ++j)
                slog += W_(i, j) * xlogx(sq(U(i, j)));
        return tau_ * (4.0 * K + R_) - slog;
    }

    double residual_norm(const MatrixXd& U, const MatrixXd& negLapU,
                         double lam_hat) const {
        double acc = 0.0;
        for (int i = 0; i < U.rows(); ++i)
            for (int j = 0; j < U.cols(); ++j) {
                const double u = U(i, j);
                const double logterm = u > 1e-300 ? 2.0 * u * std::log(u) : 0.0;
                const double r =
                    4.0 * tau_ * negLapU(i, j) + (tau_ * R_ - lam_hat) * u - logterm;
                acc += W_(i, j) * sq(r);
            }
        return std::sqrt(acc);
    }

    // Euler-Lagrange residual field for the Rayleigh multiplier; the
    // multiplier choice makes it W-orthogonal to u, so the preconditioned
    // descent below has the discrete EL solution as its only fixed point.
    MatrixXd residual_field(const MatrixXd& U, const MatrixXd& negLapU,
                            double lam_hat) const {
        MatrixXd r(U.rows(), U.cols());
        for (int i = 0; i < U.rows(); ++i)
            for (int j = 0; j < U.cols(); ++j) {
                const double u = U(i, j);
                const double logterm = u > 1e-300 ? 2.0 * u * std::log(u) : 0.0;
                r(i, j) = 4.0 * tau_ * negLapU(i, j) + (tau_ * R_ - lam_hat) * u -
                          logterm;
            }
        if (p_.masked) r = r.cwiseProduct(p_.mask);
        return r;
    }

    MatrixXd implicit_solve(const MatrixXd& b, double dt) const {
        if (!p_.masked) {
            MatrixXd C = p_.th.fwd * b * p_.rho.fwd.transpose();
            for (int i = 0; i < C.rows(); ++i)
                for (int j = 0; j < C.cols(); ++j)
                    C(i, j) /= 1.0 + dt * 4.0 * tau_ * lam_sum_(i, j);
            return p_.th.inv * C * p_.rho.inv.transpose();
        }
        // masked domain: (I + dt 4tau (-Lap)) restricted to the mask is
        // W-self-adjoint positive definite; conjugate gradients give the
        // true Dirichlet step the tensor inverse cannot
        auto apply = [&](const MatrixXd& x) {
            MatrixXd y = x + dt * 4.0 * tau_ * neg_lap(x);
            return y.cwiseProduct(p_.mask).eval();
        };
        MatrixXd x = b.cwiseProduct(p_.mask);
        MatrixXd r = b.cwiseProduct(p_.mask) - apply(x);
        MatrixXd d = r;
        double rr = inner(r, r);
        const double b2 = std::max(inner(x, x), 1e-300);
        for (int k = 0; k < 400 && rr > 1e-26 * b2; ++k) {
            MatrixXd Ad = apply(d);
            const double alpha = rr / std::max(inner(d, Ad), 1e-300);
            x += alpha * d;
            r -= alpha * Ad;
            const double rr_new = inner(r, r);
            d = r + (rr_new / rr) * d;
            rr = rr_new;
        }
        return x;
    }

    // One semi-implicit step with shift c. The field is floored at
    // 1e-14 of its maximum so the multiplier stays linear (and positive)
    // at the returned step size; floored nodes contribute O(1e-10) to the
    // residual, far below the tolerance. Returns the pre-normalization
    // norm s; at a fixed point with s = 1 the interior field solves the
    // discrete Euler-Lagrange equation exactly.
    struct StepInfo {
        double s;
        double dt;
    };
    StepInfo step(MatrixXd& U, double dt_want, double c) const {
        const double umax = U.maxCoeff();
        const double floor = 1e-14 * umax;
        MatrixXd g(U.rows(), U.cols());
        double gmax_gap = 0.0;
        for (int i = 0; i < U.rows(); ++i)
            for (int j = 0; j < U.cols(); ++j) {
                if (p_.masked && p_.mask(i, j) < 0.5) {
                    U(i, j) = 0.0;
                    g(i, j) = 0.0;
                    continue;
                }
                double u = U(i, j);
                if (!(u > floor)) u = floor;
                U(i, j) = u;
                g(i, j) = 2.0 * std::log(u) + 1.0 - tau_ * R_;
                gmax_gap = std::max(gmax_gap, c - g(i, j));
            }
        const double dt = std::min(dt_want, 0.9 / (gmax_gap + 5.0));
        MatrixXd stepped =
            U.cwiseProduct(MatrixXd::Constant(U.rows(), U.cols(), 1.0 - dt * c) +
                           dt * g);
        U = implicit_solve(stepped, dt);
        const double s = std::sqrt(inner(U, U));
        U /= s;
        return {s, dt};
    }

    SolveOutput run(MatrixXd U, double residual_tol, int max_iter,
                    bool throw_on_fail = true) const {
        if (p_.masked) U = U.cwiseProduct(p_.mask.cwiseMax(1e-300));
        U = U.cwiseMax(0.0);
        normalize(U);
        double c;
        {
            MatrixXd nl = neg_lap(U);
            c = rayleigh(U, nl);
        }
        double lam_hat = 0.0, res = 1e300;
        int it = 0;
        for (; it < max_iter; ++it) {
            StepInfo si = step(U, 0.35, c);
            c += 0.7 * (si.s - 1.0) / si.dt;
            if (it % 5 == 4 || it == max_iter - 1) {
                MatrixXd nl = neg_lap(U);
                lam_hat = rayleigh(U, nl);
                MatrixXd r = residual_field(U, nl, lam_hat);
                res = std::sqrt(r.cwiseProduct(r).cwiseProduct(W_).sum());
                if (std::getenv("SHRINKERLAB_TRACE_ITP") && it % 250 == 4)
                    std::fprintf(stderr, "itp it=%d dt=%.4g lam=%.12f res=%.3e\n",
                                 it, si.dt, lam_hat, res);
                if (res < residual_tol) break;
            }
        }
        if (res >= residual_tol && throw_on_fail)
            throw ConvergenceError("entropy minimizer did not converge: residual " +
                                   std::to_string(res) + " after " +
                                   std::to_string(it + 1) + " iterations");
        SolveOutput out;
        out.mu = lam_hat - n_ - 0.5 * n_ * std::log(4.0 * kPi * tau_);
        out.residual = res;
        out.iterations = it + 1;
        out.field = U;
        return out;
    }

  private:
    GridProblem p_;
    double tau_, R_;
    int n_;
    MatrixXd W_;
    MatrixXd lam_sum_;
    MatrixXd interior_;
};

struct DomainRealization {
    double flat_L = 0.0;     // flat-factor Dirichlet radius
    double theta_max = kPi;  // sphere-factor polar cap (pi = whole sphere)
    bool ball_mask = false;  // non-tensor ball (cylinder): mask the tensor grid
    double ball_radius = 0.0;
};

struct LevelResult {
    double mu;
    double residual;
    int iterations;
    MatrixXd field;
    GridProblem grid;
};

class MuSolver {
  public:
    MuSolver(const EffectiveGeometry& g, double tau, const MinimizeOptions& opts)
        : g_(g), tau_(tau), opts_(opts) {}

    int sphere_modes_needed() const {
        if (g_.k == 0) return 1;
        const double width = std::min(std::sqrt(8.0 * tau_) / g_.b, kPi);
        const int need = std::max(static_cast<int>(std::ceil(11.0 / width)) + 24, 48);
        if (opts_.sphere_modes > 0) {
            if (opts_.sphere_modes < need - 24)
                throw ConvergenceError(
                    "minimizer concentrates below the sphere-factor resolution; "
                    "refine to >= " +
                    std::to_string(need) + " modes");
            return opts_.sphere_modes;
        }
        if (need > 560)
            throw ConvergenceError(
                "tau too small for the compact factor at desk resolution; refine "
                "beyond 560 modes to proceed");
        return std::min(need, 560);
    }

    double flat_L_default() const { return 17.0 * std::sqrt(tau_); }

    int flat_cells_base(double L) const {
        const double width = std::sqrt(8.0 * tau_);
        if (opts_.flat_cells > 0) {
            if (L / opts_.flat_cells > width / 6.0)
                throw ConvergenceError(
                    "minimizer concentrates below the flat-factor resolution; "
                    "refine the grid");
            return opts_.flat_cells;
        }
        return std::max(static_cast<int>(std::ceil(L / (0.055 * width))), 64);
    }

    GridProblem build_grid(const DomainRealization& dom, int sphere_modes,
                           int flat_cells) const {
        GridProblem p;
        p.th = Factor::identity();
        p.rho = Factor::identity();
        if (g_.k >= 2) {
            if (dom.theta_max >= kPi - 1e-12 && !dom.ball_mask) {
                p.th = sphere_spectral(g_.k, g_.b, sphere_modes);
            } else {
                IntervalSpec s;
                const int k = g_.k;
                s.w = [k](double th) { return std::pow(std::sin(th), k - 1); };
                s.x1 = dom.theta_max;
                s.scale = g_.b;
                s.mass_const = sphere_area(g_.k) * std::pow(g_.b, g_.k);
                p.th = interval_fd(s, sphere_modes);
            }
        }
        if (g_.m >= 1) {
            IntervalSpec s;
            const int m = g_.m;
            s.w = [m](double r) { return std::pow(r, m - 1); };
            s.x1 = dom.flat_L;
            s.mass_const = sphere_area(g_.m);
            p.rho = interval_fd(s, flat_cells);
        }
        if (dom.ball_mask) {
            p.masked = true;
            p.mask = MatrixXd(p.th.size(), p.rho.size());
            std::vector<bool> row(p.th.size(), false), col(p.rho.size(), false);
            for (int i = 0; i < p.th.size(); ++i)
                for (int j = 0; j < p.rho.size(); ++j) {
                    const double d2 = sq(g_.b * p.th.nodes[i]) + sq(p.rho.nodes[j]);
                    p.mask(i, j) = d2 <= sq(dom.ball_radius) ? 1.0 : 0.0;
                    if (p.mask(i, j) > 0.5) row[i] = col[j] = true;
                }
            const auto span = [](const std::vector<bool>& v) {
                return static_cast<int>(std::count(v.begin(), v.end(), true));
            };
            if (span(row) < 4 || span(col) < 4)
                throw InvalidArgument(
                    "domain smaller than 4 grid cells across a factor; enlarge it");
        }
        return p;
    }

    MatrixXd initial_field(const GridProblem& p, bool distance_bump) const {
        MatrixXd U(p.th.size(), p.rho.size());
        for (int i = 0; i < p.th.size(); ++i)
            for (int j = 0; j < p.rho.size(); ++j) {
                double arg;
                if (distance_bump) {
                    const double d2 =
                        (g_.k >= 2 ? sq(g_.b * p.th.nodes[i]) : 0.0) +
                        (g_.m >= 1 ? sq(p.rho.nodes[j]) : 0.0);
                    arg = -d2 / (8.0 * tau_);
                } else {
                    const double f =
                        g_.f_min + (g_.m >= 1 ? 0.25 * sq(p.rho.nodes[j]) : 0.0);
                    arg = -f / (2.0 * tau_);
                }
                U(i, j) = std::exp(std::max(arg, -700.0));
            }
        return U;
    }

    // force_init: -1 tries every initializer, 0/1 pin one of them
    LevelResult solve_level(const DomainRealization& dom, int sphere_modes,
                            int flat_cells, int* winner, double tol_override = 0.0,
                            int force_init = -1) const {
        GridProblem p = build_grid(dom, sphere_modes, flat_cells);
        GridSolver solver(p, tau_, g_.R, g_.n);
        double tol = tol_override > 0.0 ? tol_override : opts_.residual_tol;
        // projected (masked) domains cannot hit the tensor fixed point exactly
        if (p.masked) tol = std::max(tol, 1e-6);
        SolveOutput best{};
        int tag = 0;
        bool have = false;
        const bool try_bump = g_.k >= 2 && force_init < 0;
        // competing starts are told apart at a loose tolerance, then only
        // the winner is polished (warm start on the same grid)
        const double tol_select = try_bump ? std::max(tol, 5e-5) : tol;
        const int budget = try_bump ? std::min(opts_.max_iterations, 4000)
                                    : opts_.max_iterations;
        for (int init = 0; init < (try_bump ? 2 : 1); ++init) {
            if (force_init >= 0 && init != force_init) continue;
            SolveOutput s = solver.run(
                initial_field(p, force_init >= 0 ? force_init == 1 : init == 1),
                tol_select, budget, !try_bump);
            if (!have || s.mu < best.mu) {
                best = s;
                tag = force_init >= 0 ? force_init : init;
                have = true;
            }
        }
        if (try_bump) {
            SolveOutput s = solver.run(best.field, tol, opts_.max_iterations);
            s.iterations += best.iterations;
            best = s;
        }
        if (winner) *winner = tag;
        return LevelResult{best.mu, best.residual, best.iterations, best.field, p};
    }

    MinimizerResult solve(const DomainRealization& dom) const {
        const int sm = sphere_modes_needed();
        MinimizerResult out{};
        if (g_.m == 0) {
            // pure spectral: mode enrichment gives the discretization estimate
            int w1 = 0, w2 = 0;
            LevelResult r1 = solve_level(dom, sm, 1, &w1);
            LevelResult r2 = solve_level(dom, (3 * sm) / 2, 1, &w2, 0.0, w1);
            w2 = w1;
            out.mu = r2.mu;
            out.residual = r2.residual;
            out.iterations = r1.iterations + r2.iterations;
            out.discretization_error = std::abs(r2.mu - r1.mu) + 1e-12;
            out.initializer = w2 == 1 ? "distance-bump" : "scaled-potential";
            pack_field(out, r2);
            return out;
        }
        const int base = flat_cells_base(dom.flat_L);
        const int levels = std::max(1, opts_.richardson_levels);
        std::vector<double> mus;
        LevelResult last{};
        int winner = -1;
        int total_iters = 0;
        for (int l = 0; l < levels; ++l) {
            const double tol = l + 1 < levels
                                   ? std::max(opts_.residual_tol, 1e-6)
                                   : opts_.residual_tol;
            last = solve_level(dom, sm, base << l, &winner, tol,
                               l == 0 ? -1 : winner);
            mus.push_back(last.mu);
            total_iters += last.iterations;
        }
        double value = mus.back(), disc;
        if (levels >= 3) {
            const double m12 = (4.0 * mus[1] - mus[0]) / 3.0;
            const double m23 = (4.0 * mus[2] - mus[1]) / 3.0;
            value = (16.0 * m23 - m12) / 15.0;
            disc = std::abs(value - m23) + 1e-12;
        } else if (levels == 2) {
            value = (4.0 * mus[1] - mus[0]) / 3.0;
            disc = std::abs(value - mus[1]) + 1e-12;
        } else {
            disc = std::abs(value) * 1e-4 + 1e-6;  // single level: coarse certificate
        }
        out.mu = value;
        out.residual = last.residual;
        out.iterations = total_iters;
        out.discretization_error = disc;
        out.initializer = winner == 1 ? "distance-bump" : "scaled-potential";
        pack_field(out, last);
        return out;
    }

    static void pack_field(MinimizerResult& out, const LevelResult& lr) {
        out.n_theta = static_cast<int>(lr.field.rows());
        out.n_rho = static_cast<int>(lr.field.cols());
        out.field.resize(size_t(out.n_theta) * out.n_rho);
        out.field_weights.resize(out.field.size());
        const MatrixXd W = lr.grid.th.weights * lr.grid.rho.weights.transpose();
        for (int i = 0; i < out.n_theta; ++i)
            for (int j = 0; j < out.n_rho; ++j) {
                out.field[size_t(i) * out.n_rho + j] = lr.field(i, j);
                out.field_weights[size_t(i) * out.n_rho + j] = W(i, j);
            }
        double nd = 0.0;
        for (size_t q = 0; q < out.field.size(); ++q)
            nd += out.field_weights[q] * sq(out.field[q]);
        out.normalization_defect = std::abs(nd - 1.0);
    }

  private:
    EffectiveGeometry g_;
    double tau_;
    MinimizeOptions opts_;
};

EffectiveGeometry effective_geometry(const ShrinkerModel& m) {
    EffectiveGeometry g;
    g.n = m.n;
    g.k = m.has_sphere() ? m.k : 0;
    g.b = m.sphere_radius;
    g.m = m.flat_dim();
    g.R = m.scalar_curvature();
    g.f_min = m.potential_min();
    return g;
}

DomainRealization realize_domain(const EffectiveGeometry& g, const Domain& domain,
                                 double L_default) {
    DomainRealization dom;
    dom.flat_L = L_default;
    if (std::holds_alternative<SublevelDomain>(domain)) {
        const double a = std::get<SublevelDomain>(domain).a;
        if (a <= g.f_min) throw InvalidArgument("sublevel {F <= a} is empty");
        if (g.m >= 1) dom.flat_L = 2.0 * std::sqrt(a - g.f_min);
    } else if (std::holds_alternative<BallDomain>(domain)) {
        const double r = std::get<BallDomain>(domain).radius;
        if (!(r > 0)) throw InvalidArgument("ball domain needs a positive radius");
        if (g.k == 0) {
            dom.flat_L = r;
        } else if (g.m == 0) {
            dom.theta_max = std::min(r / g.b, kPi);
        } else {
            dom.ball_mask = true;
            dom.ball_radius = r;
            dom.flat_L = std::min(r, L_default);
        }
    }
    return dom;
}

}  // namespace

MinimizerResult minimize_mu(const ShrinkerModel& m, double tau, const Domain& domain,
                            const MinimizeOptions& opts) {
    if (!(tau > 0)) throw InvalidArgument("minimize_mu needs tau > 0");
    EffectiveGeometry g = effective_geometry(m);
    MuSolver solver(g, tau, opts);

    double L = solver.flat_L_default();
    if (std::holds_alternative<FullDomain>(domain) && g.m >= 1) {
        // grow the Dirichlet sublevel until two successive values agree
        MinimizeOptions coarse = opts;
        coarse.richardson_levels = 1;
        coarse.flat_cells = 0;
        MuSolver cs(g, tau, coarse);
        for (int grow = 0; grow < 4; ++grow) {
            const double v1 = cs.solve(realize_domain(g, domain, L)).mu;
            const double v2 = cs.solve(realize_domain(g, domain, 1.25 * L)).mu;
            if (std::abs(v1 - v2) <= 1e-7) break;
            L *= 1.6;
        }
    }
    return solver.solve(realize_domain(g, domain, L));
}

MinimizerResult minimize_mu_rescaled(const ShrinkerModel& m, double tau,
                                     const MinimizeOptions& opts) {
    if (!(tau > 0)) throw InvalidArgument("minimize_mu_rescaled needs tau > 0");
    EffectiveGeometry g = effective_geometry(m);
    g.b = g.b / std::sqrt(tau);  // g -> tau^{-1} g, solved at scale 1
    g.R = g.k >= 2 ? g.k * (g.k - 1) / sq(g.b) : 0.0;
    MuSolver solver(g, 1.0, opts);
    DomainRealization dom;
    dom.flat_L = 18.0;  // independent heuristic keeps the check non-trivial
    return solver.solve(dom);
}

EntropyProfile mu_profile(const ShrinkerModel& m, const std::vector<double>& tau_grid,
                          const MinimizeOptions& opts) {
    for (double t : tau_grid)
        if (t < 1e-3 || t > 1e3)
            throw InvalidArgument("profile tau grid must lie within [1e-3, 1e3]");
    EntropyProfile p;
    p.taus = tau_grid;
    for (double tau : tau_grid) {
        MinimizerResult r = minimize_mu(m, tau, FullDomain{}, opts);
        p.mus.push_back(r.mu);
        p.residuals.push_back(r.residual);
        p.certificates.push_back(r.residual + r.discretization_error);
        p.iterations.push_back(r.iterations);
    }
    p.decreasing_below_one = p.increasing_above_one = true;
    double worst = 0.0;
    for (size_t i = 0; i + 1 < p.taus.size(); ++i) {
        const double slack = 2.0 * (p.certificates[i] + p.certificates[i + 1]);
        const double step = p.mus[i + 1] - p.mus[i];
        if (p.taus[i + 1] <= 1.0 + 1e-12 && step > slack) {
            p.decreasing_below_one = false;
            worst = std::max(worst, step);
        }
        if (p.taus[i] >= 1.0 - 1e-12 && step < -slack) {
            p.increasing_above_one = false;
            worst = std::max(worst, -step);
        }
    }
    p.worst_monotonicity_violation = worst;
    return p;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i)
        out.push_back(lo *
                      std::pow(hi / lo, count == 1 ? 0.0 : double(i) / (count - 1)));
    return out;
}

SobolevDefect sobolev_defect(const ShrinkerModel& m, const AnalyticFunction& u) {
    if (m.n < 3)
        throw InvalidArgument("Sobolev exponent degenerates at n = 2; need n >= 3");
    const double p = 2.0 * m.n / (m.n - 2.0);
    double lhs_int, rhs;
    try {
        lhs_int = model_integral(
            m, [&](const Point& x) { return std::pow(std::abs(u.value(x)), p); });
        rhs = model_integral(m, [&](const Point& x) {
            return 4.0 * grad_norm2_or_fd(m, u, x) +
                   m.scalar_curvature() * sq(u.value(x));
        });
    } catch (const ConvergenceError&) {
        throw ConvergenceError(
            "test function varies below the quadrature scale; refine the grid or "
            "smooth the function");
    }
    SobolevDefect out;
    out.lhs = std::pow(lhs_int, (m.n - 2.0) / m.n);
    out.rhs = rhs;
    out.constant = out.lhs / (std::exp(-2.0 * m.mu / m.n) * out.rhs);
    return out;
}

namespace {

// Integral over the reduced (theta, signed-axis) slice against the weighted
// measure e^{-f0} dV with the perpendicular flat directions marginalized
// out; exact for densities that depend on theta and the axial coordinate,
// since the Gaussian weight factorizes over the flat coordinates.
double slice_weighted_integral(const ShrinkerModel& m,
                               const std::function<double(const Point&)>& h) {
    const double L = m.rho_max();
    auto axial = [&](const std::function<double(double)>& g) {
        if (!m.has_flat()) return g(0.0);
        return quad::integrate(
                   [&](double s) { return g(s) * std::exp(-0.25 * sq(s)); }, -L, L,
                   1e-10, 1e-15)
                   .value /
               std::sqrt(4.0 * kPi);
    };
    if (!m.has_sphere()) return axial([&](double s) { return h(Point{0.0, s}); });
    double norm_th = quad::integrate(
                         [&](double th) { return std::pow(std::sin(th), m.k - 1); },
                         0.0, kPi, 1e-11)
                         .value;
    auto over_sphere = [&](double s) {
        return quad::integrate(
                   [&](double th) {
                       return std::pow(std::sin(th), m.k - 1) * h(Point{th, s});
                   },
                   0.0, kPi, 1e-10, 1e-15)
                   .value /
               norm_th;
    };
    return axial(over_sphere);
}

}  // namespace

BakryEmeryDefect bakry_emery_defect(const ShrinkerModel& m,
                                    const AnalyticFunction& rho) {
    const double mass =
        slice_weighted_integral(m, [&](const Point& x) { return rho.value(x); });
    if (mass < 1e-12) throw InvalidArgument("density has (numerically) zero mass");
    const double ent =
        slice_weighted_integral(m, [&](const Point& x) { return xlogx(rho.value(x)); });
    const double fisher = slice_weighted_integral(m, [&](const Point& x) {
        const double r = rho.value(x);
        if (r <= 1e-14) return 0.0;
        return rho.grad_norm2(x) / r;
    });
    BakryEmeryDefect out;
    out.entropy_side = ent - mass * std::log(mass);
    out.fisher_side = fisher;
    out.defect = out.fisher_side - out.entropy_side;
    return out;
}

LocalNu local_nu(const ShrinkerModel& m, const Domain& domain, double tau,
                 int s_points, const MinimizeOptions& opts) {
    if (!(tau > 0)) throw InvalidArgument("local_nu needs tau > 0");
    LocalNu out;
    out.mu_reference = minimize_mu(m, 1.0, FullDomain{}, opts).mu;
    if (std::holds_alternative<FullDomain>(domain)) {
        MinimizerResult r = minimize_mu(m, tau, domain, opts);
        out.nu = r.mu;
        out.s_grid = {tau};
        out.mu_values = {r.mu};
        return out;
    }
    out.s_grid = log_spaced(tau / 64.0, tau * (1.0 - 1e-9), s_points);
    out.nu = 1e300;
    for (double s : out.s_grid) {
        MinimizerResult r = minimize_mu(m, s, domain, opts);
        out.mu_values.push_back(r.mu);
        out.nu = std::min(out.nu, r.mu);
    }
    return out;
}

}  // namespace shrinkerlab::entropy
