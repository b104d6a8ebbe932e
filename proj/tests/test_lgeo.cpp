#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shrinkerlab/lgeo.hpp"

using namespace shrinkerlab;
using namespace shrinkerlab::models;
using namespace shrinkerlab::lgeo;

TEST_CASE("reduced distance: flat closed form") {
    auto g3 = make_model(Kind::gaussian, 3);
    Point x{0.0, 2.0}, y{0.0, -1.0};
    const double t = 0.5, s = 0.0;
    auto rd = reduced_distance(g3, x, t, y, s);
    CHECK(rd.l == doctest::Approx(sq(3.0) / (4.0 * 0.5)).epsilon(1e-10));
    CHECK(rd.l >= 0.0);
    CHECK(rd.refinement_gap < 1e-6);
}

TEST_CASE("reduced distance: constant-path certificate at coincident points") {
    auto s2 = make_model(Kind::sphere, 2);
    Point y{0.8, 0.0};
    const double t = 0.4, s = -0.1;
    auto rd = reduced_distance(s2, y, t, y, s);
    const double cpv = constant_path_value(s2, y, t, s);
    CHECK(rd.l <= cpv + 1e-10);
    // certified against the scaled-potential envelope
    const double tau_bar = 1.0 - t;
    const double F = tau_bar * s2.potential(y);
    CHECK(rd.l <= (t - s) * F / (3.0 * sq(tau_bar)) + 1e-9);
}

TEST_CASE("reduced distance: dp lattice oracle on the cylinder") {
    auto c42 = make_model(Kind::cylinder, 4, 2);
    const double t = 0.3, s = -0.2;  // t - s = 0.5
    Point x{0.0, 0.0}, y{0.5 * kPi, 0.0};
    // same sigma-discretization on both sides isolates the optimization
    ReducedDistanceOptions fixed;
    fixed.nodes = 30;
    fixed.refine_levels = 0;
    auto rd_fixed = reduced_distance(c42, x, t, y, s, fixed);
    const double oracle =
        reduced_distance_dp_oracle(c42, 0.0, t, 0.5 * kPi, s, 30, 3200);
    CHECK(rd_fixed.l <= oracle + 1e-9);  // lattice paths are a subclass
    CHECK(std::abs(rd_fixed.l - oracle) < 1e-4 * std::max(1.0, oracle));

    // and the refined value stays consistent with the lattice bound
    // (different sigma-resolutions, so only near-agreement is meaningful)
    auto rd = reduced_distance(c42, x, t, y, s);
    CHECK(rd.l == doctest::Approx(oracle).epsilon(2e-3));
}

TEST_CASE("reduced distance: isometry invariance and monotone refinement") {
    auto c42 = make_model(Kind::cylinder, 4, 2);
    const double t = 0.25, s = -0.25;
    auto base = reduced_distance(c42, Point{0.2, 1.0}, t, Point{0.9, -0.5}, s);
    auto shifted = reduced_distance(c42, Point{0.2 + 0.4, 1.0 + 2.0}, t,
                                    Point{0.9 + 0.4, -0.5 + 2.0}, s);
    CHECK(base.l == doctest::Approx(shifted.l).epsilon(1e-9));

    ReducedDistanceOptions coarse;
    coarse.nodes = 24;
    ReducedDistanceOptions fine;
    fine.nodes = 48;
    const double l1 = reduced_distance(c42, Point{0.2, 1.0}, t, Point{0.9, -0.5}, s,
                                       coarse)
                          .l;
    const double l2 =
        reduced_distance(c42, Point{0.2, 1.0}, t, Point{0.9, -0.5}, s, fine).l;
    CHECK(l2 <= l1 + 1e-12);
}

TEST_CASE("kernel lower bound: flat equality, curved strict margins") {
    auto g3 = make_model(Kind::gaussian, 3);
    auto d = kernel_lower_defect(g3, Point{0.0, 1.5}, 0.5, Point{0.0, 0.0}, 0.0);
    CHECK(std::abs(d.margin) <= 1e-6 * d.H);

    auto c42 = make_model(Kind::cylinder, 4, 2);
    auto d1 = kernel_lower_defect(c42, Point{0.4, 0.5}, 0.5, Point{0.4, 0.5}, 0.0);
    CHECK(d1.margin > 0.0);
    auto d2 = kernel_lower_defect(c42, Point{0.0, 0.0}, 0.5, Point{kPi, 0.0}, 0.0);
    CHECK(d2.margin > 0.0);
    CHECK(d2.l > d1.l);
}

TEST_CASE("harnack quantity: flat identity vanishes, cylinder stays nonpositive") {
    auto g4 = make_model(Kind::gaussian, 4);
    auto rep = harnack_check(g4, Point{0.0, 0.0}, 0.5, 100, 0.05, 0.5, 21);
    REQUIRE(rep.skipped == 0);
    for (const auto& smp : rep.samples) CHECK(std::abs(smp.v) < 1e-8);

    auto c42 = make_model(Kind::cylinder, 4, 2);
    auto repc = harnack_check(c42, Point{0.6, 0.0}, 0.5, 50, 0.05, 0.5, 22);
    CHECK(repc.max_v <= 1e-4);
}

TEST_CASE("b-mean approaches n/2 at the base time") {
    auto g4 = make_model(Kind::gaussian, 4);
    CHECK(b_mean(g4, Point{}, 0.5, 0.5 - 1e-3) ==
          doctest::Approx(0.5 * g4.n).epsilon(1e-6));

    auto c42 = make_model(Kind::cylinder, 4, 2);
    auto rep = harnack_check(c42, Point{0.5, 0.0}, 0.5, 1, 0.1, 0.2, 5);
    CHECK(std::abs(rep.b_mean_extrapolated - 0.5 * c42.n) < 1e-3);
    CHECK(std::abs(rep.b_mean_fine - 0.5 * c42.n) <
          std::abs(rep.b_mean_coarse - 0.5 * c42.n) + 1e-12);
}
