#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shrinkerlab/flow.hpp"

using namespace shrinkerlab;
using namespace shrinkerlab::models;
using namespace shrinkerlab::flow;

TEST_CASE("trajectories: closed forms and ODE cross-check") {
    auto g3 = make_model(Kind::gaussian, 3);
    Point x{0.0, 2.0};
    for (double t : {-4.0, -1.0, 0.25, 0.75}) {
        Point p = diffeo_trajectory(g3, x, t);
        CHECK(p.y == doctest::Approx(2.0 / std::sqrt(1.0 - t)).epsilon(1e-13));
        Point q = diffeo_trajectory_ode(g3, x, t);
        CHECK(q.y == doctest::Approx(p.y).epsilon(1e-9));
    }
    auto s2 = make_model(Kind::sphere, 2);
    Point xs{1.1, 0.0};
    CHECK(diffeo_trajectory(s2, xs, 0.9).theta == 1.1);

    auto c42 = make_model(Kind::cylinder, 4, 2);
    Point xc{0.4, 3.0};
    Point pc = diffeo_trajectory(c42, xc, 0.5);
    CHECK(pc.theta == 0.4);
    CHECK(pc.y == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-13));

    CHECK_THROWS_AS((void)diffeo_trajectory(g3, Point{0.0, 30.0}, 0.999),
                    InvalidArgument);
}

TEST_CASE("F_at: identities hold to 1e-10") {
    for (const auto& m : {make_model(Kind::gaussian, 4), make_model(Kind::sphere, 2),
                          make_model(Kind::cylinder, 4, 2)}) {
        CAPTURE(m.name());
        for (double t : {-2.0, 0.0, 0.5, 0.9}) {
            for (const Point& x : sample_points(m, 6)) {
                Point xs{x.theta, x.y * 0.4};  // keep trajectories inside the chart
                auto F = F_at(m, xs, t);
                CHECK(F.res_time() < 1e-10);
                CHECK(F.res_trace(m.n) < 1e-10);
                CHECK(F.res_norm() < 1e-10);
                CHECK(F.res_box(m.n) < 1e-10);
            }
        }
    }
}

TEST_CASE("F_at: gaussian F is constant in t, sphere F is linear") {
    auto g4 = make_model(Kind::gaussian, 4);
    Point x{0.0, 2.0};
    const double F0 = F_at(g4, x, 0.0).F;
    CHECK(F0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(F_at(g4, x, 0.7).F == doctest::Approx(F0).epsilon(1e-12));

    auto s2 = make_model(Kind::sphere, 2);
    auto Fs = F_at(s2, Point{0.3, 0.0}, 0.25);
    CHECK(Fs.F == doctest::Approx(0.75 * 1.0).epsilon(1e-13));  // tau * n/2

    // F(p) <= n tau / 2 at the base point
    for (const auto& m : {g4, s2, make_model(Kind::cylinder, 4, 3)}) {
        auto Fp = F_at(m, Point{}, 0.0);
        CHECK(Fp.F <= 0.5 * m.n + 1e-13);
    }
}

TEST_CASE("flowline potential bound") {
    auto g4 = make_model(Kind::gaussian, 4);
    auto b = flowline_potential_bound(g4, Point{0.0, 2.0}, 0.5);
    CHECK(b.lhs == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(b.rhs == doctest::Approx(2.0).epsilon(1e-13));

    auto s2 = make_model(Kind::sphere, 2);
    auto bs = flowline_potential_bound(s2, Point{1.0, 0.0}, 0.9);
    CHECK(bs.lhs == doctest::Approx(1.0));
    CHECK(bs.rhs == doctest::Approx(10.0));

    auto c42 = make_model(Kind::cylinder, 4, 2);
    auto bc = flowline_potential_bound(c42, Point{0.6, 2.0}, 0.5);
    CHECK(bc.lhs == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(bc.rhs == doctest::Approx(4.0).epsilon(1e-13));
    CHECK(bc.lhs <= bc.rhs + 1e-10);
}

TEST_CASE("cutoff: plateau, support, and finite-difference cross-check") {
    auto g4 = make_model(Kind::gaussian, 4);
    const double r = 4.0;

    // F < r: phi = 1, derivatives vanish, conjugate keeps only the R term
    auto inside = cutoff_eval(g4, r, Point{0.0, 2.0}, 0.0);  // F = 1
    CHECK(inside.phi == 1.0);
    CHECK(inside.grad_norm == 0.0);
    CHECK(inside.box == 0.0);
    CHECK(inside.conj_box == doctest::Approx(0.0));  // R = 0 on the flat model

    auto s2 = make_model(Kind::sphere, 2);
    auto ins = cutoff_eval(s2, 4.0, Point{1.0, 0.0}, 0.0);  // F = 1 < 4
    CHECK(ins.phi == 1.0);
    CHECK(ins.conj_box == doctest::Approx(s2.scalar_curvature()));

    auto outside = cutoff_eval(g4, r, Point{0.0, 7.0}, 0.0);  // F = 12.25 > 2r
    CHECK(outside.phi == 0.0);
    CHECK(outside.box == 0.0);

    // transition band: cross-check grad and box against direct differences
    Point x{0.0, std::sqrt(4.0 * 6.0)};  // F = 6 in (r, 2r)
    auto c = cutoff_eval(g4, r, x, 0.0);
    auto phi_of = [&](double y, double t) {
        auto F = F_at(g4, Point{0.0, y}, t);
        return CutoffProfile::eta(F.F / r);
    };
    const double h = 1e-3;
    const double dphi =
        (-phi_of(x.y + 2 * h, 0) + 8 * phi_of(x.y + h, 0) - 8 * phi_of(x.y - h, 0) +
         phi_of(x.y - 2 * h, 0)) /
        (12 * h);
    CHECK(std::abs(std::abs(dphi) - c.grad_norm) < 1e-6);
    const double lap_fd =
        (-phi_of(x.y + 2 * h, 0) + 16 * phi_of(x.y + h, 0) - 30 * phi_of(x.y, 0) +
         16 * phi_of(x.y - h, 0) - phi_of(x.y - 2 * h, 0)) /
            (12 * h * h) +
        3.0 * dphi / x.y;
    const double dphi_dt = (-phi_of(x.y, 2 * h) + 8 * phi_of(x.y, h) -
                            8 * phi_of(x.y, -h) + phi_of(x.y, -2 * h)) /
                           (12 * h);
    CHECK(std::abs((dphi_dt - lap_fd) - c.box) < 1e-6);
}

TEST_CASE("cutoff: scale-invariant constants stay bounded across r") {
    auto profile = cutoff_profile_constants();
    CHECK(profile.grad_over_sqrt < 10.0);
    CHECK(profile.sup_d2 < 16.0);
    CHECK(profile.sup_d3 < 61.0);

    for (const auto& m : {make_model(Kind::gaussian, 4), make_model(Kind::cylinder, 4, 2)}) {
        CAPTURE(m.name());
        double worst = 0.0;
        for (double r : {1.0, 4.0, 16.0, 64.0}) {
            auto c = cutoff_constants(m, r, {-4.0, -1.0, 0.0, 0.5, 0.9}, 48);
            worst = std::max({worst, c.sup_grad_ratio, c.sup_time_ratio, c.sup_box_ratio});
        }
        CHECK(worst < 500.0);
        CHECK(worst > 0.0);
    }
}

TEST_CASE("special heat and conjugate solutions") {
    for (const auto& m : {make_model(Kind::gaussian, 3), make_model(Kind::sphere, 2),
                          make_model(Kind::cylinder, 4, 2)}) {
        CAPTURE(m.name());
        for (double t : {-1.0, 0.0, 0.5, 0.9}) {
            for (const Point& x : sample_points(m, 5)) {
                Point xs{x.theta, x.y * 0.25};
                CHECK(special_heat_residual(m, xs, t) < 1e-8);
                CHECK(special_conjugate_residual(m, xs, t) < 1e-8);
            }
        }
    }
}

TEST_CASE("time-dependent potential envelope") {
    for (const auto& m : {make_model(Kind::gaussian, 4), make_model(Kind::cylinder, 4, 2)}) {
        for (double t : {-2.0, 0.0, 0.6}) {
            for (const Point& x : sample_points(m, 8)) {
                Point xs{x.theta, x.y * 0.3};
                CHECK(potential_envelope(m, xs, t).holds(1e-10));
            }
        }
    }
}

TEST_CASE("distance at time t: pullback form") {
    auto c42 = make_model(Kind::cylinder, 4, 2);
    Point a{0.0, 0.0}, b{0.5, 2.0};
    // t = 0 reduces to the product distance
    CHECK(distance_t(c42, a, b, 0.0) == doctest::Approx(c42.distance(a, b)));
    // flat-only separation is time invariant on the induced flow
    Point c{0.0, 2.0};
    CHECK(distance_t(c42, a, c, 0.75) == doctest::Approx(2.0).epsilon(1e-12));
    // sphere-only separation scales by sqrt(1-t)
    Point d{0.5, 0.0};
    CHECK(distance_t(c42, a, d, 0.75) ==
          doctest::Approx(std::sqrt(0.25) * c42.distance(a, d)).epsilon(1e-12));
}
