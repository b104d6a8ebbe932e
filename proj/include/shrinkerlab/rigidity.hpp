#pragma once

#include "shrinkerlab/geometry.hpp"

namespace shrinkerlab::models {

// Eigenvalue threshold test for the curvature operator. Convention: passes
// vacuously when lambda_1 >= 0; when lambda_1 < 0 and R = 2*lambda_1 the
// threshold degenerates to -inf and the test fails unless lambda_2 >= 0.
struct RigidityResult {
    bool passes;
    double epsilon;    // 1/((1+sqrt 2)(c_n - 2))
    double threshold;  // -eps * lambda_1^2 / |R - 2 lambda_1|
    double lambda1;
    double lambda2;
};
RigidityResult rigidity_condition(const CurvatureSpectrum& spectrum, double R);

// Brute-force search for the minimum of
//   P = 2*lambda_1^2 + sum_{i != j} C_ij^2 lambda_i lambda_j
// over random completions lambda_3 <= ... <= lambda_{c_n} with
// sum lambda_i = R/2, lambda_i >= lambda_2, and coefficients |C_ij| <= 2
// with C_1j = C_i1 = 0. The pointwise-optimal coefficient choice
// (|C_ij| = 2 on negative products, 0 otherwise) is always included.
double rigidity_quadratic_oracle(double lambda1, double lambda2, double R, int n,
                                 int trials, std::uint64_t seed);

}  // namespace shrinkerlab::models
