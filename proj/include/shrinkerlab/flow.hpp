#pragma once

#include "shrinkerlab/geometry.hpp"

namespace shrinkerlab::flow {

using models::Point;
using models::ShrinkerModel;

// Trajectory of the diffeomorphism family at time t (t < 1, backward for
// t < 0). Closed form on catalog models; `diffeo_trajectory_ode` solves the
// defining ODE with an adaptive embedded Runge-Kutta pair and is used to
// cross-check the closed form.
Point diffeo_trajectory(const ShrinkerModel& m, const Point& x, double t);
Point diffeo_trajectory_ode(const ShrinkerModel& m, const Point& x, double t,
                            double local_tol = 1e-10);

// Scaled potential F = (1-t) f(psi_t(x)) and its flow derivatives at (x,t).
// Derivatives are produced by finite differences in chart coordinates and
// flow time, so the identity residuals are genuine numerical checks.
struct PotentialData {
    double F;
    double dF_dt;        // time derivative
    double grad_norm2;   // |grad F|^2 in g(t)
    double laplacian;    // Lap_{g(t)} F
    double R;            // scalar curvature at (x,t)
    double tau_bar;      // 1 - t

    double res_time() const { return std::abs(dF_dt + tau_bar * R); }
    double res_trace(int n) const { return std::abs(tau_bar * R + laplacian - 0.5 * n); }
    double res_norm() const { return std::abs(sq(tau_bar) * R + grad_norm2 - F); }
    double res_box(int n) const { return std::abs(dF_dt - laplacian + 0.5 * n); }
};
PotentialData F_at(const ShrinkerModel& m, const Point& x, double t);

// f(psi_t(x)) <= f(x)/(1-t) along flow lines, 0 <= t < 1.
struct FlowlineBound {
    double lhs;
    double rhs;
};
FlowlineBound flowline_potential_bound(const ShrinkerModel& m, const Point& x, double t);

// distance at flow time t (exact pullback form)
double distance_t(const ShrinkerModel& m, const Point& a, const Point& b, double t);

// quadratic growth envelope of F about the base point at time t
struct PotentialEnvelope {
    double lower;
    double upper;
    double F;
    bool holds(double slack = 0.0) const {
        return F >= lower - slack && F <= upper + slack;
    }
};
PotentialEnvelope potential_envelope(const ShrinkerModel& m, const Point& x, double t);

// ---- cutoff family -------------------------------------------------------

// Transition profile: 1 on [0,1], quintic smoothstep down to 0 at 2.
struct CutoffProfile {
    static double eta(double s);
    static double eta_d1(double s);
    static double eta_d2(double s);
    static double eta_d3(double s);
};

struct CutoffData {
    double phi;
    double grad_norm;   // |grad phi| in g(t)
    double phi_t;
    double laplacian;
    double box;         // (d_t - Lap) phi
    double conj_box;    // (-d_t - Lap + R) phi
    double F;
};
CutoffData cutoff_eval(const ShrinkerModel& m, double r, const Point& x, double t);

// Sampled suprema of the scale-invariant cutoff ratios over a chart/time
// window, per scale r.
struct CutoffConstants {
    double sup_grad_ratio;  // r |grad phi|^2 / phi
    double sup_time_ratio;  // tau_bar |phi_t|
    double sup_box_ratio;   // r |box phi|
};
CutoffConstants cutoff_constants(const ShrinkerModel& m, double r,
                                 const std::vector<double>& times, int nodes_per_factor);

// Profile bound constants: sup -eta'/sqrt(eta), sup |eta''|, sup |eta'''|.
struct ProfileConstants {
    double grad_over_sqrt;
    double sup_d2;
    double sup_d3;
};
ProfileConstants cutoff_profile_constants();

// ---- special solutions ---------------------------------------------------

// residual of (d_t - Lap)(F + n t / 2) at (x,t), by finite differences
double special_heat_residual(const ShrinkerModel& m, const Point& x, double t);

// residual of (-d_t - Lap + R) applied to (4 pi tau_bar)^{-n/2} e^{-f(x,t)}
double special_conjugate_residual(const ShrinkerModel& m, const Point& x, double t);

}  // namespace shrinkerlab::flow
