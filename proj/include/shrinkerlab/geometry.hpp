#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shrinkerlab/common.hpp"
#include "shrinkerlab/quadrature.hpp"

namespace shrinkerlab::models {

enum class Kind { gaussian, sphere, cylinder };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& s);

// Quadrature/grid controls for a model. Zero fields pick defaults.
struct GridSpec {
    double rho_max = 0.0;  // truncation of the flat factor
    int panels = 0;        // baseline panel count per factor
};

// A point of the symmetry-reduced chart: polar angle on the sphere factor
// (if any) and a signed coordinate along a fixed axis of the flat factor.
struct Point {
    double theta = 0.0;
    double y = 0.0;
};

// One catalog geometry. All pointwise quantities are closed-form; the
// entropy constant mu is computed by quadrature at construction and
// cross-checked against the closed form in tests.
class ShrinkerModel {
  public:
    Kind kind;
    int n = 0;              // total dimension
    int k = 0;              // sphere-factor dimension (sphere: k = n; gaussian: 0)
    double sphere_radius = 0.0;  // sqrt(2(k-1)) when k >= 2
    double mu = 0.0;             // log int e^{-f} (4 pi)^{-n/2} dV
    double mu_error_estimate = 0.0;
    GridSpec grid;

    int flat_dim() const { return n - k; }
    bool has_sphere() const { return k >= 2; }
    bool has_flat() const { return flat_dim() >= 1; }
    bool is_flat() const { return kind == Kind::gaussian; }

    // potential f and its radial derivatives on each factor
    double potential(const Point& x) const;
    double potential_min() const;   // f(p), p = (0, 0)
    double grad_f_norm2(const Point& x) const;   // |grad f|^2
    double laplacian_f() const;                  // constant on catalog models
    double scalar_curvature() const;             // constant on catalog models

    // geodesic distance (product metric; exact on catalog models)
    double distance(const Point& a, const Point& b) const;
    double distance_to_base(const Point& x) const { return distance(x, Point{}); }

    // curvature invariants (pointwise constants)
    double rm_norm2() const;   // |Rm|^2, full tensor norm
    double rc_norm2() const;   // |Rc|^2
    double rm_op_norm() const; // largest |eigenvalue| of the curvature operator

    double rho_max() const;
    int base_panels() const;

    std::string name() const;
};

ShrinkerModel make_model(Kind kind, int n, std::optional<int> k = std::nullopt,
                         GridSpec grid = {});

// ---- models module operations ------------------------------------------

// mu by quadrature with relative error estimate <= 1e-8.
struct EntropyConstant {
    double mu;
    double error_estimate;
};
EntropyConstant entropy_constant(const ShrinkerModel& m);

// Closed-form mu, used as the independent oracle in tests.
double entropy_constant_closed_form(const ShrinkerModel& m);

// Geodesic-ball volume about an arbitrary center (defaults to the base
// point p); relative quadrature error <= 1e-6. Throws when r needs more
// flat-factor extent than the grid provides.
double volume_ball(const ShrinkerModel& m, double r, const Point& center = Point{});

// Eigenvalues of the curvature operator on 2-forms, ascending.
struct CurvatureSpectrum {
    std::vector<double> eigenvalues;
    double sum() const;
};
CurvatureSpectrum curvature_spectrum(const ShrinkerModel& m, const Point& x = Point{});

// Residuals of the defining identities, evaluated with finite differences
// of f over the reduced chart (max abs over frame components).
struct GeometryResiduals {
    double shrinker_equation;  // |Rc + Hess f - g/2|
    double normalization;      // |R + |grad f|^2 - f|
    double trace_identity;     // |R + Lap f - n/2|
};
GeometryResiduals geometry_residuals(const ShrinkerModel& m, const Point& x);

// Sampled reduced-chart nodes covering both factors.
std::vector<Point> sample_points(const ShrinkerModel& m, int per_factor);

}  // namespace shrinkerlab::models
