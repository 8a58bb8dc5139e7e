#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pathmeasure/decay.hpp"

using namespace pathmeasure;

namespace {

// The worked 1D boundary data: 10 -> 3 + 2, c = 1, window [0, 10],
// parent at 0, products at 2 and -3.
DecaySpec worked_spec() {
    DecaySpec spec;
    spec.parent_mass = 10.0;
    spec.product_mass_1 = 3.0;
    spec.product_mass_2 = 2.0;
    spec.light_speed = 1.0;
    spec.start_time = 0.0;
    spec.end_time = 10.0;
    spec.parent_position = {0.0};
    spec.product_position_1 = {2.0};
    spec.product_position_2 = {-3.0};
    return spec;
}

double gradient_sup_norm(const DecaySpec& spec, const DecayVertex& v) {
    // Central finite differences of the action at the vertex.
    const double h = 1e-6;
    double worst = 0.0;
    std::vector<double> x = v.position;
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = v.position[k] + h;
        const double plus = decay_action(spec, x, v.time);
        x[k] = v.position[k] - h;
        const double minus = decay_action(spec, x, v.time);
        x[k] = v.position[k];
        worst = std::max(worst, std::abs(plus - minus) / (2.0 * h));
    }
    const double plus = decay_action(spec, v.position, v.time + h);
    const double minus = decay_action(spec, v.position, v.time - h);
    return std::max(worst, std::abs(plus - minus) / (2.0 * h));
}

double conservation_sup_norm(const DecayVertex& v) {
    double worst = 0.0;
    for (std::size_t k = 0; k < v.position.size(); ++k)
        worst = std::max(worst, std::abs(v.parent_momentum[k] - v.product_momentum_1[k] -
                                         v.product_momentum_2[k]));
    return worst;
}

} // namespace

TEST_CASE("action value at the worked stationary point", "[decay]") {
    const DecaySpec spec = worked_spec();
    const double t = 10.0 - std::sqrt(3.0);
    const std::vector<double> x{0.0};
    // Direct evaluation: -100 + 10 sqrt(3).
    CHECK(decay_action(spec, x, t) ==
          Catch::Approx(-100.0 + 10.0 * std::sqrt(3.0)).margin(1e-12));
    CHECK(decay_action(spec, x, t) == Catch::Approx(-82.679491924311228).margin(1e-9));
    CHECK_THROWS_AS(decay_action(spec, x, spec.end_time), std::domain_error);
    CHECK_THROWS_AS(decay_action(spec, x, spec.start_time), std::domain_error);
}

TEST_CASE("symmetric boundary data gives an even action", "[decay]") {
    DecaySpec spec = worked_spec();
    spec.product_mass_1 = spec.product_mass_2 = 2.5;
    spec.product_position_1 = {2.0};
    spec.product_position_2 = {-2.0};
    const double t = 8.5;
    for (double dx : {0.3, 0.9, 1.7}) {
        const std::vector<double> plus{dx}, minus{-dx};
        CHECK(decay_action(spec, plus, t) ==
              Catch::Approx(decay_action(spec, minus, t)).margin(1e-12));
    }
}

TEST_CASE("closed-form vertex of the worked spec", "[decay]") {
    const DecayVertex v = solve_vertex_closed_form(worked_spec());
    CHECK(v.position[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(v.time == Catch::Approx(10.0 - std::sqrt(3.0)).margin(1e-12));
    CHECK(v.parent_momentum[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(v.product_momentum_1[0] == Catch::Approx(2.0 * std::sqrt(3.0)).margin(1e-12));
    CHECK(v.product_momentum_2[0] == Catch::Approx(-2.0 * std::sqrt(3.0)).margin(1e-12));
    CHECK(v.is_minimum);
    // Energy cross-check: released kinetic energy equals the mass defect.
    const double kinetic = 0.5 * v.product_momentum_1[0] * v.product_momentum_1[0] / 3.0 +
                           0.5 * v.product_momentum_2[0] * v.product_momentum_2[0] / 2.0;
    CHECK(kinetic == Catch::Approx(5.0).margin(1e-9));
    CHECK(conservation_sup_norm(v) <= 1e-9);
    CHECK(gradient_sup_norm(worked_spec(), v) <= 1e-7);
    // The second stationary time lies beyond the window and is only reported.
    CHECK(v.diagnostic.find("second stationary time") != std::string::npos);
}

TEST_CASE("numeric minimizer agrees with the closed form", "[decay]") {
    const DecayVertex closed = solve_vertex_closed_form(worked_spec());
    const DecayVertex numeric = solve_vertex_numeric(worked_spec());
    CHECK(numeric.time == Catch::Approx(closed.time).margin(1e-6));
    CHECK(numeric.position[0] == Catch::Approx(closed.position[0]).margin(1e-6));
    CHECK(conservation_sup_norm(numeric) <= 1e-9);
    CHECK(gradient_sup_norm(worked_spec(), numeric) <= 1e-7);
    CHECK(numeric.is_minimum);
}

TEST_CASE("off-center parent falls through to the numeric route", "[decay]") {
    DecaySpec spec = worked_spec();
    spec.parent_position = {1.0};
    const DecayVertex v = solve_vertex_closed_form(spec); // delegates internally
    CHECK(conservation_sup_norm(v) <= 1e-9);
    CHECK(gradient_sup_norm(spec, v) <= 1e-7);
    CHECK(v.time > spec.start_time);
    CHECK(v.time < spec.end_time);
    // The vertex drifts toward the parent rather than staying at the CM.
    CHECK(v.position[0] != Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("symmetric decay yields opposite product momenta", "[decay]") {
    DecaySpec spec = worked_spec();
    spec.product_mass_1 = spec.product_mass_2 = 2.0;
    spec.product_position_1 = {1.5};
    spec.product_position_2 = {-1.5};
    const DecayVertex v = solve_vertex_closed_form(spec);
    CHECK(v.position[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(v.product_momentum_1[0] == Catch::Approx(-v.product_momentum_2[0]).margin(1e-12));
}

TEST_CASE("zero mass defect has no real vertex", "[decay]") {
    DecaySpec spec = worked_spec();
    spec.parent_mass = 5.0; // equals m2 + m3
    CHECK_THROWS_AS(solve_vertex_closed_form(spec), DecaySolveError);
    CHECK_THROWS_AS(solve_vertex_numeric(spec), DecaySolveError);
}

TEST_CASE("a too-short window puts the vertex outside it", "[decay]") {
    DecaySpec spec = worked_spec();
    spec.end_time = 1.0; // sqrt(3) > 1 pushes t below start_time
    CHECK_THROWS_AS(solve_vertex_closed_form(spec), DecaySolveError);
}

TEST_CASE("larger speed constants push the vertex toward the end time", "[decay]") {
    DecaySpec spec = worked_spec();
    double prev = solve_vertex_closed_form(spec).time;
    for (double c : {2.0, 5.0, 20.0}) {
        spec.light_speed = c;
        const double t = solve_vertex_closed_form(spec).time;
        CHECK(t > prev);
        prev = t;
    }
    CHECK(prev > 9.9); // rest energy dominates
}

TEST_CASE("frame covariance under translations", "[decay]") {
    const DecaySpec base = worked_spec();
    const DecayVertex v0 = solve_vertex_closed_form(base);
    DecaySpec moved = base;
    const double shift = 4.25;
    moved.parent_position[0] += shift;
    moved.product_position_1[0] += shift;
    moved.product_position_2[0] += shift;
    const DecayVertex v1 = solve_vertex_closed_form(moved);
    CHECK(v1.position[0] == Catch::Approx(v0.position[0] + shift).margin(1e-10));
    CHECK(v1.time == Catch::Approx(v0.time).margin(1e-10));
    CHECK(v1.product_momentum_1[0] - v1.product_momentum_2[0] ==
          Catch::Approx(v0.product_momentum_1[0] - v0.product_momentum_2[0]).margin(1e-10));
    // Translating both endpoints of each leg leaves the action differences
    // unchanged; the absolute action shifts only through the parent leg.
    const DecayVertex n1 = solve_vertex_numeric(moved);
    CHECK(n1.action - v1.action == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("type-F data decides what type-I data cannot", "[decay]") {
    // Same parent position, start time, and parent momentum (zero); different
    // final positions produce different vertices.
    const DecaySpec a = worked_spec();
    DecaySpec b = worked_spec();
    b.product_position_1 = {1.0};
    b.product_position_2 = {-1.5}; // still centered: 3*1 + 2*(-1.5) = 0
    const DecayVertex va = solve_vertex_closed_form(a);
    const DecayVertex vb = solve_vertex_closed_form(b);
    CHECK(va.parent_momentum[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(vb.parent_momentum[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(std::abs(va.time - vb.time) > 1e-6);
}

TEST_CASE("dimension-agnostic vertices in 2D", "[decay]") {
    DecaySpec spec;
    spec.parent_mass = 10.0;
    spec.product_mass_1 = 3.0;
    spec.product_mass_2 = 2.0;
    spec.light_speed = 1.0;
    spec.start_time = 0.0;
    spec.end_time = 10.0;
    spec.parent_position = {0.0, 0.0};
    spec.product_position_1 = {2.0, 1.0};
    spec.product_position_2 = {-3.0, -1.5}; // CM at the origin
    const DecayVertex closed = solve_vertex_closed_form(spec);
    const DecayVertex numeric = solve_vertex_numeric(spec);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(closed.position[k] == Catch::Approx(0.0).margin(1e-12));
        CHECK(numeric.position[k] == Catch::Approx(0.0).margin(1e-6));
    }
    CHECK(numeric.time == Catch::Approx(closed.time).margin(1e-6));
    CHECK(conservation_sup_norm(closed) <= 1e-9);
}
