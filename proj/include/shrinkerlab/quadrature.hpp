#pragma once

#include <functional>
#include <vector>

#include "shrinkerlab/common.hpp"

namespace shrinkerlab::quad {

struct Rule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre rule of the given order (Golub-Welsch; cached).
const Rule& gauss_legendre(int order);

// Gauss-Jacobi rule for weight (1-x)^alpha (1+x)^beta on [-1,1].
// Weights integrate the Jacobi weight exactly for polynomials.
Rule gauss_jacobi(int order, double alpha, double beta);

struct Result {
    double value = 0.0;
    double error_estimate = 0.0;  // |I_2P - I_P|
    int panels = 0;
};

// Composite Gauss-Legendre over [a,b] with `panels` equal panels.
double composite(const std::function<double(double)>& f, double a, double b,
                 int panels, int order = 16);

// Panel-doubling quadrature: doubles the panel count until two successive
// refinements agree to rel_tol (relative to |I|) or abs_tol.
// Throws ConvergenceError with the achieved tolerance when the panel
// budget is exhausted.
Result integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10, double abs_tol = 0.0,
                 int initial_panels = 4, int max_panels = 1 << 14, int order = 16);

// Iterated 2D integral over [ax,bx] x [ay,by]; the whole inner integral is
// refined together with the outer one so the error estimate is honest.
Result integrate2d(const std::function<double(double, double)>& f, double ax,
                   double bx, double ay, double by, double rel_tol = 1e-9,
                   double abs_tol = 0.0, int max_panels = 1 << 9, int order = 12);

}  // namespace shrinkerlab::quad
