#pragma once

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "shrinkerlab/geometry.hpp"

namespace shrinkerlab::entropy {

using models::Point;
using models::ShrinkerModel;

// Test function given in closed form: value and |grad|^2 at a chart point.
struct AnalyticFunction {
    std::function<double(const Point&)> value;
    std::function<double(const Point&)> grad_norm2;  // optional; FD fallback
};

// u0 = e^{-f0/2} with f0 = f + mu + (n/2) log(4 pi); the scale-1 minimizer.
AnalyticFunction canonical_minimizer(const ShrinkerModel& m);

// integral of h over the model by adaptive product quadrature
double model_integral(const ShrinkerModel& m,
                      const std::function<double(const Point&)>& h,
                      double rel_tol = 1e-9);

// W-bar functional of a normalized test function. Rejects unnormalized u
// (the minimizer path normalizes internally, this entry point does not).
struct WValue {
    double value;
    double error_estimate;
};
WValue w_functional(const ShrinkerModel& m, const AnalyticFunction& u, double tau);

// ---- constrained minimization --------------------------------------------

struct FullDomain {};
struct SublevelDomain { double a; };       // {F <= a} at t = 0
struct BallDomain { double radius; };      // geodesic ball about p
using Domain = std::variant<FullDomain, SublevelDomain, BallDomain>;

struct MinimizeOptions {
    double residual_tol = 1e-7;   // Euler-Lagrange residual in the grid norm
    int max_iterations = 20000;
    int flat_cells = 0;           // base flat-factor resolution (0 = heuristic)
    int sphere_modes = 0;         // sphere-factor modes (0 = heuristic)
    int richardson_levels = 3;
};

struct MinimizerResult {
    double mu;
    double residual;            // converged EL residual (finest level)
    double discretization_error;  // Richardson / mode-doubling estimate
    int iterations;
    double normalization_defect;
    std::string initializer;    // which start won
    // minimizer snapshot on the finest grid (flattened theta-major)
    std::vector<double> field;
    std::vector<double> field_weights;
    int n_theta = 1, n_rho = 1;
};

MinimizerResult minimize_mu(const ShrinkerModel& m, double tau,
                            const Domain& domain = FullDomain{},
                            const MinimizeOptions& opts = {});

// Same value through the exact parameter substitution g -> tau^{-1} g,
// solved at scale 1. Used by the scaling-consistency checks.
MinimizerResult minimize_mu_rescaled(const ShrinkerModel& m, double tau,
                                     const MinimizeOptions& opts = {});

// ---- profiles and functional inequalities --------------------------------

struct EntropyProfile {
    std::vector<double> taus;
    std::vector<double> mus;
    std::vector<double> residuals;
    std::vector<double> certificates;  // residual + discretization estimates
    std::vector<int> iterations;
    bool decreasing_below_one = false;
    bool increasing_above_one = false;
    double worst_monotonicity_violation = 0.0;
};
EntropyProfile mu_profile(const ShrinkerModel& m, const std::vector<double>& tau_grid,
                          const MinimizeOptions& opts = {});

std::vector<double> log_spaced(double lo, double hi, int count);

struct SobolevDefect {
    double lhs;        // (int u^{2n/(n-2)})^{(n-2)/n}
    double rhs;        // int 4|grad u|^2 + R u^2
    double constant;   // lhs / (e^{-2 mu / n} rhs)
};
SobolevDefect sobolev_defect(const ShrinkerModel& m, const AnalyticFunction& u);

struct BakryEmeryDefect {
    double entropy_side;
    double fisher_side;
    double defect;     // fisher - entropy
};
// rho >= 0 on the reduced (theta, signed axis) slice, against the weighted
// probability measure e^{-f0} dV with the perpendicular flat directions
// marginalized out (exact for this class: the Gaussian weight factorizes).
// grad_norm2 of rho is required; the battery densities are closed-form.
BakryEmeryDefect bakry_emery_defect(const ShrinkerModel& m, const AnalyticFunction& rho);

struct LocalNu {
    double nu;
    double mu_reference;  // global mu(g,1) for the gap
    std::vector<double> s_grid;
    std::vector<double> mu_values;
};
LocalNu local_nu(const ShrinkerModel& m, const Domain& domain, double tau,
                 int s_points = 6, const MinimizeOptions& opts = {});

}  // namespace shrinkerlab::entropy
