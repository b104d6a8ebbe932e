#pragma once

#include <vector>

#include "shrinkerlab/heat.hpp"

namespace shrinkerlab::lgeo {

using models::Point;
using models::ShrinkerModel;

// Discretized path in the sqrt(t - z) parametrization: sigma runs from 0
// (the late endpoint x at time t) to sqrt(t - s) (the early endpoint y).
struct LPath {
    std::vector<double> sigma;
    std::vector<double> theta;
    std::vector<double> y;
    double length_value = 0.0;  // the weighted length functional
};

struct ReducedDistanceOptions {
    int nodes = 64;
    double tol = 1e-6;      // agreement between two resolutions
    int max_iterations = 4000;
    int refine_levels = 7;  // 0 = single fixed-resolution solve (oracle use)
};

struct ReducedDistance {
    double l;               // normalized minimum over the reduced path class
    double refinement_gap;  // |l at N - l at 2N|
    double grad_norm;       // optimizer gradient norm at the solution
    LPath path;             // finest minimizing path
};

ReducedDistance reduced_distance(const ShrinkerModel& m, const Point& x, double t,
                                 const Point& y, double s,
                                 const ReducedDistanceOptions& opts = {});

// dense dynamic-programming lattice oracle for sphere-factor separations
double reduced_distance_dp_oracle(const ShrinkerModel& m, double theta_x, double t,
                                  double theta_y, double s, int sigma_steps = 160,
                                  int theta_steps = 220);

// constant-path value; certifies l <= (t-s) F(y,t) / (3 (1-t)^2) at x = y
double constant_path_value(const ShrinkerModel& m, const Point& y, double t, double s);

struct KernelLowerDefect {
    double H;
    double bound;   // e^{-l} / (4 pi (t-s))^{n/2}
    double margin;  // H - bound
    double l;
};
KernelLowerDefect kernel_lower_defect(const ShrinkerModel& m, const Point& x, double t,
                                      const Point& y, double s);

// ---- differential Harnack -----------------------------------------------

struct HarnackSample {
    Point x;
    double t;
    double v;        // tau (2 Lap b - |grad b|^2 + R) + b - n
    bool skipped;    // too close to the base time for stable stencils
};

struct HarnackReport {
    std::vector<HarnackSample> samples;
    double max_v = -1e300;
    int skipped = 0;
    double b_mean_coarse = 0.0;   // int b w dV at tau = 1e-2
    double b_mean_fine = 0.0;     // at tau = 1e-3
    double b_mean_extrapolated = 0.0;
};

HarnackReport harnack_check(const ShrinkerModel& m, const Point& q, double T,
                            int sample_count, double tau_min, double tau_max,
                            std::uint64_t seed);

// int b w dV_t for the kernel based at (q, T)
double b_mean(const ShrinkerModel& m, const Point& q, double T, double t);

}  // namespace shrinkerlab::lgeo
