#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shrinkerlab/flow.hpp"
#include "shrinkerlab/geometry.hpp"

namespace shrinkerlab::heat {

using models::Point;
using models::ShrinkerModel;

// ---- kernels ---------------------------------------------------------------

// Addition-theorem kernel on the shrinking sphere factor S^k(a sqrt(1-t)).
// Modes decay by the exact factor ((1-s)/(1-t))^{-j(j+k-1)/a^2}; the series
// is truncated when the next term's bound drops below `tail` relative to
// the accumulated scale.
class SphereKernel {
  public:
    SphereKernel(int k, double radius, double t, double s, double tail = 1e-12);

    double value(double gamma) const;   // kernel between points at angle gamma
    double mode_factor(int j) const;    // exact time decay of mode j
    int terms() const { return static_cast<int>(coeff_.size()); }
    double volume_s() const { return vol_s_; }
    double volume_t() const { return vol_t_; }
    double truncation_bound() const { return tail_bound_; }

  private:
    int k_;
    double vol_s_, vol_t_;
    double log_ratio_;  // log((1-s)/(1-t))
    double a2_;
    std::vector<double> coeff_;  // N_{j,k} * factor_j / Vol_s
    double tail_bound_;
};

// flat-factor kernel of the induced flow (static euclidean)
double flat_kernel(int m, double dist, double dt);

struct KernelSample {
    Point x, y;
    double t, s;
    double value;
    std::string method;       // closed-form | spectral | fd-bump
    double bump_width;        // fd route only
    double error_estimate;
};

// kernel value through the model's natural backend
double kernel_value(const ShrinkerModel& m, const Point& x, double t, const Point& y,
                    double s);

// ultracontractivity bound e^{-mu} (4 pi (t-s))^{-n/2}
double kernel_upper_bound(const ShrinkerModel& m, double t, double s);

// full sample with an error estimate; method: auto | spectral | fd-bump
KernelSample heat_kernel(const ShrinkerModel& m, const Point& x, double t,
                         const Point& y, double s,
                         const std::string& method = "auto");

// independent finite-difference route: Crank-Nicolson evolution of
// normalized bumps, Richardson-extrapolated in the squared bump width.
// forward = false solves the conjugate equation backward from (x,t).
double kernel_fd(const ShrinkerModel& m, const Point& x, double t, const Point& y,
                 double s, bool forward, double* error_estimate, int cells = 420,
                 int min_steps = 0);

// ---- kernel measure integrals ---------------------------------------------

double kernel_mass_s(const ShrinkerModel& m, const Point& x, double t, double s);
double kernel_mass_t(const ShrinkerModel& m, const Point& y, double t, double s);
double kernel_ball_mass(const ShrinkerModel& m, const Point& x, double t, double s,
                        double radius);
double kernel_tail_mass(const ShrinkerModel& m, const Point& x, double t, double s,
                        double radius);

struct SemigroupDefect {
    double direct;
    double composed;
    double defect;
    double error_estimate;
};
SemigroupDefect semigroup_defect(const ShrinkerModel& m, const Point& x, double t,
                                 const Point& y, double s, double rho);

// ---- parabolic solves on the reduced factors -------------------------------

struct SolveOptions {
    int cells = 320;
    double dt = 0.0;          // 0 = heuristic
    double extent = 0.0;      // flat-factor domain radius (0 = model default)
    int store_every = 1;
    int damped_start_steps = 2;  // implicit-Euler startup (rough data)
    bool graded_times = true;    // refine early steps (bump spreading)
};

// evolution of one factor profile (radial about a stated center)
struct FactorEvolution {
    std::vector<double> nodes;
    std::vector<double> weights0;      // measure at unit metric scale
    std::vector<double> times;
    std::vector<std::vector<double>> slices;
    double metric_dim_scale = 0.0;     // k for the sphere factor, else 0

    double value_at(double coord, size_t tindex) const;
    double mass(size_t tindex, double tau_bar) const;
    double sup(size_t tindex) const;
};

// product-form field on the model (either factor may be absent)
struct HeatField {
    bool forward = true;
    double t0, t1;
    std::vector<double> times;
    std::optional<FactorEvolution> sphere;
    std::optional<FactorEvolution> flat;
    Point center;                       // bump/profile center in the chart
    double discrete_residual = 0.0;     // scheme residual in the grid norm

    double value(double sphere_angle, double flat_dist, size_t tindex) const;
    double mass(const ShrinkerModel& m, size_t tindex) const;
    double sup(size_t tindex) const;
    size_t time_index(double t) const;
};

// initial data: product of per-factor radial profiles about `center`
struct ProductProfile {
    std::function<double(double)> sphere;  // of the polar angle about center
    std::function<double(double)> flat;    // of the flat distance to center
    Point center;
};

HeatField solve_heat(const ShrinkerModel& m, const ProductProfile& u0, double t0,
                     double t1, const SolveOptions& opts = {});
HeatField solve_conjugate(const ShrinkerModel& m, const ProductProfile& w1, double t0,
                          double t1, const SolveOptions& opts = {});

// exact mode decay of the zonal mode j on the sphere factor
double sphere_mode_decay(const ShrinkerModel& m, int j, double t0, double t1);

// ---- estimate suites --------------------------------------------------------

struct BoundSample {
    Point x, y;
    double t, s;
    double H;
    double upper;         // ultracontractivity bound
    double lower;         // explicit sharpened lower bound
    double upper_margin;  // upper - H  (>= 0 expected)
    double lower_margin;  // H - lower  (>= 0 expected)
};

// samples within the (delta, D) window; epsilon enters the lower bound
std::vector<BoundSample> kernel_bound_suite(const ShrinkerModel& m, int samples,
                                            double delta, double cap_D, double epsilon,
                                            std::uint64_t seed);

struct TailCheck {
    double r;
    double integral;
    double exponent_bound;  // exp(-(r-1)^2 / (4 (1+eps)))
    double log_constant;    // log(integral) - log(exponent_bound)
};
std::vector<TailCheck> kernel_tail_suite(const ShrinkerModel& m, const Point& x,
                                         double t, double s, double epsilon,
                                         const std::vector<double>& rs);

struct ConcentrationPair {
    double r1, r2;           // A = ball(r1), B = complement of ball(r2)
    double va, vb;
    double lhs, rhs;         // v(A) v(B)^{1/sigma} <= exp(-r^2/(4(1+sigma)(t-s)))
    bool skipped = false;    // zero-mass side
};
std::vector<ConcentrationPair> concentration_suite(const ShrinkerModel& m,
                                                   const Point& x, double t, double s,
                                                   double sigma,
                                                   const std::vector<std::pair<double, double>>& annuli);

struct LogSobolevSample {
    std::string density;
    double entropy_side;
    double fisher_side;
    double defect;  // fisher*(t-s) - entropy >= 0 expected
};
// density battery for the kernel measure (constants, bumps, angular modes,
// and on flat models the axial exponential tilt via the exact marginal)
std::vector<LogSobolevSample> kernel_log_sobolev_suite(const ShrinkerModel& m,
                                                       const Point& x, double t,
                                                       double s);

struct GradientCheck {
    double worst_l301;     // max over nodes of |grad u|/u - sqrt(log(L/u)/t)
    double worst_harnack;  // E311 margin (<= 0 expected)
    double l502_constant;  // empirical C in (|Lap u| + |grad u|^2/u - L R) t / L
};
GradientCheck gradient_estimate_check(const ShrinkerModel& m, const Point& source,
                                      double t_start, double t_check, int nodes);

}  // namespace shrinkerlab::heat
