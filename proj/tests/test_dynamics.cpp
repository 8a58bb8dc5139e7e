#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "pathmeasure/channels.hpp"
#include "pathmeasure/csv.hpp"
#include "pathmeasure/hamiltonian.hpp"
#include "pathmeasure/integrators.hpp"

using namespace pathmeasure;

namespace {

HamiltonianSpec free_particle(double m = 1.0) {
    HamiltonianSpec spec;
    spec.masses = {m};
    spec.dimension = 1;
    return spec;
}

HamiltonianSpec oscillator(double m = 1.0, double omega = 1.0) {
    HamiltonianSpec spec;
    spec.masses = {m};
    spec.dimension = 1;
    spec.trap_omega = {omega};
    return spec;
}

// Two bodies coupled by a screened-Coulomb pair force, 1D.
HamiltonianSpec screened_pair(double k, double a) {
    HamiltonianSpec spec;
    spec.masses = {1.0, 1.5};
    spec.dimension = 1;
    spec.pairs.push_back({0, 1, ScreenedCoulomb{k, a}});
    return spec;
}

// Closed-form oscillator action between fixed endpoints.
double oscillator_action(double m, double omega, double x1, double x2, double t) {
    return 0.5 * m * omega / std::sin(omega * t) *
           ((x1 * x1 + x2 * x2) * std::cos(omega * t) - 2.0 * x1 * x2);
}

} // namespace

TEST_CASE("free motion integrates exactly", "[dynamics]") {
    const Trajectory traj = integrate(free_particle(), PhasePoint{{0.0}, {2.0}, 0.0}, 3.0);
    CHECK(traj.back().positions[0] == Catch::Approx(6.0).margin(1e-10));
    CHECK(traj.back().momenta[0] == Catch::Approx(2.0).margin(1e-12));
    CHECK(traj.back().time == Catch::Approx(3.0).margin(1e-14));
}

TEST_CASE("harmonic quarter period rotates the phase point", "[dynamics]") {
    const Trajectory traj =
        integrate(oscillator(), PhasePoint{{1.0}, {0.0}, 0.0}, std::numbers::pi / 2.0,
                  StepControl{StepControl::Method::adaptive, 1e-12, 1e-14, 1e-3, 1, 200000000});
    CHECK(traj.back().positions[0] == Catch::Approx(0.0).margin(1e-9));
    CHECK(traj.back().momenta[0] == Catch::Approx(-1.0).margin(1e-9));
}

TEST_CASE("screened-Coulomb two-body run conserves energy", "[dynamics]") {
    const HamiltonianSpec spec = screened_pair(1.0, 2.0);
    PhasePoint start{{-4.0, 4.0}, {1.0, -1.0}, 0.0};
    const Trajectory traj = integrate(
        spec, start, 12.0,
        StepControl{StepControl::Method::adaptive, 1e-12, 1e-14, 1e-3, 1, 200000000});
    const double e0 = total_energy(spec, traj.front());
    const double e1 = total_energy(spec, traj.back());
    CHECK(std::abs(e1 - e0) / std::abs(e0) < 1e-9);
    CHECK(relative_energy_drift(traj) < 1e-9);
}

TEST_CASE("singularity approach names the offending pair and time", "[dynamics]") {
    // Head-on attractive collision course.
    HamiltonianSpec spec;
    spec.masses = {1.0, 1.0};
    spec.dimension = 1;
    spec.pairs.push_back({0, 1, ScreenedCoulomb{-1.0, 5.0}});
    spec.r_min = 1e-3;
    PhasePoint start{{-1.0, 1.0}, {0.5, -0.5}, 0.0};
    try {
        integrate(spec, start, 50.0);
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("pair (0,1)") != std::string::npos);
        CHECK(msg.find("time") != std::string::npos);
    }
}

TEST_CASE("time reversal returns to the start", "[dynamics]") {
    const HamiltonianSpec spec = screened_pair(0.8, 1.5);
    PhasePoint start{{-3.0, 3.0}, {0.9, -0.7}, 0.0};
    const StepControl tight{StepControl::Method::adaptive, 1e-12, 1e-14, 1e-3, 1, 200000000};
    const Trajectory fwd = integrate(spec, start, 8.0, tight);
    PhasePoint turn = fwd.back();
    for (double& p : turn.momenta)
        p = -p;
    turn.time = 0.0;
    const Trajectory bwd = integrate(spec, turn, 8.0, tight);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(bwd.back().positions[i] == Catch::Approx(start.positions[i]).margin(1e-8));
        CHECK(-bwd.back().momenta[i] == Catch::Approx(start.momenta[i]).margin(1e-8));
    }
}

TEST_CASE("symplectic runs keep the energy drift bounded", "[dynamics]") {
    const Trajectory traj = integrate(
        oscillator(), PhasePoint{{1.0}, {0.0}, 0.0}, 1000.0,
        StepControl{StepControl::Method::symplectic, 1e-10, 1e-12, 1e-3, 100, 200000000});
    CHECK(relative_energy_drift(traj) < 1e-6);
}

TEST_CASE("action of the worked free and oscillator paths", "[dynamics]") {
    // Free particle 0 -> 2 over T=1: W = m (dx)^2 / (2T) = 2.
    {
        const Trajectory traj = integrate(free_particle(), PhasePoint{{0.0}, {2.0}, 0.0}, 1.0);
        CHECK(action_along(free_particle(), traj) == Catch::Approx(2.0).margin(1e-9));
    }
    // Zero displacement.
    {
        const Trajectory traj = integrate(free_particle(), PhasePoint{{1.0}, {0.0}, 0.0}, 1.0);
        CHECK(action_along(free_particle(), traj) == Catch::Approx(0.0).margin(1e-12));
    }
    // Oscillator x1=0 -> x2=1 over T=pi/4 with the boundary momentum.
    {
        const double t = std::numbers::pi / 4.0;
        const double p0 = 1.0 / std::sin(t); // m omega (x2 - x1 cos) / sin
        const Trajectory traj = integrate(
            oscillator(), PhasePoint{{0.0}, {p0}, 0.0}, t,
            StepControl{StepControl::Method::adaptive, 1e-12, 1e-14, 1e-3, 1, 200000000});
        const double oracle = oscillator_action(1.0, 1.0, 0.0, 1.0, t);
        CHECK(oracle == Catch::Approx(0.5).margin(1e-12)); // frozen closed form
        CHECK(action_along(oscillator(), traj) == Catch::Approx(oracle).margin(1e-6));
    }
    Trajectory short_traj;
    short_traj.samples.resize(1);
    CHECK_THROWS_AS(action_along(free_particle(), short_traj), std::domain_error);
}

TEST_CASE("momentum limit of a free orbit is the momentum", "[dynamics]") {
    // Big-bang style start at the origin makes m x(T)/T equal p exactly.
    const HamiltonianSpec spec = free_particle(1.3);
    const MomentumLimitReport report =
        momentum_limit(spec, PhasePoint{{0.0}, {0.7}, 0.0}, HorizonSchedule{{100, 1000, 10000}, 1e-4});
    CHECK(report.converged);
    CHECK(report.value[0] == Catch::Approx(0.7).margin(1e-9));
}

TEST_CASE("momentum limit of a bound orbit decays like 1/T", "[dynamics]") {
    const MomentumLimitReport report =
        momentum_limit(oscillator(), PhasePoint{{1.0}, {0.0}, 0.0},
                       HorizonSchedule{{100, 1000, 10000}, 1e-3});
    CHECK(std::abs(report.value[0]) <= 1e-3);
    // Envelope decay: the estimate magnitude bound drops tenfold per decade.
    CHECK(std::abs(report.estimates[0][0]) <= 1.0 / 100.0 * 1.5);
    CHECK(std::abs(report.estimates[1][0]) <= 1.0 / 1000.0 * 1.5);
    CHECK(std::abs(report.estimates[2][0]) <= 1.0 / 10000.0 * 1.5);
    CHECK(report.converged);
}

TEST_CASE("momentum limit of a scattering orbit matches the final momentum", "[dynamics]") {
    HamiltonianSpec spec;
    spec.masses = {1.0};
    spec.dimension = 1;
    spec.external = RadialForm{ScreenedCoulomb{1.0, 2.0}};
    // Launched outward from near the core; x(0) != 0 so the limit carries an
    // O(1/T) start-position bias below the tolerance at the last horizon.
    const PhasePoint start{{1.0}, {1.2}, 0.0};
    const MomentumLimitReport report =
        momentum_limit(spec, start, HorizonSchedule{{100, 1000, 10000}, 1e-3},
                       StepControl{StepControl::Method::symplectic, 1e-10, 1e-12, 1e-4, 1,
                                   200000000});
    CHECK(report.value[0] == Catch::Approx(report.final_momentum[0]).margin(1e-3));
    CHECK(std::abs(report.deltas.back()) < 1e-3);
}

TEST_CASE("non-convergence is reported, not thrown", "[dynamics]") {
    // Short bound-orbit horizons leave the estimates far apart.
    const MomentumLimitReport report = momentum_limit(
        oscillator(), PhasePoint{{1.0}, {0.0}, 0.0}, HorizonSchedule{{10, 20}, 1e-4});
    CHECK_FALSE(report.converged);
    CHECK(report.deltas.size() == 1);
    CHECK(report.estimates.size() == 2);
}

TEST_CASE("lemma check: bounded orbits have vanishing momentum limit", "[dynamics]") {
    // ||x(t)|| bounded (v = 0) across the whole schedule.
    const MomentumLimitReport report =
        momentum_limit(oscillator(2.0, 0.7), PhasePoint{{0.5}, {0.3}, 0.0},
                       HorizonSchedule{{100, 1000, 10000}, 1e-3});
    CHECK(std::abs(report.value[0]) < 1e-3);
}

TEST_CASE("channel classification on the three worked scenarios", "[dynamics]") {
    const StepControl sympl{StepControl::Method::symplectic, 1e-10, 1e-12, 1e-3, 100, 200000000};

    SECTION("two free particles flying apart") {
        HamiltonianSpec spec;
        spec.masses = {1.0, 1.0};
        spec.dimension = 1;
        const Trajectory traj =
            integrate(spec, PhasePoint{{0.0, 0.1}, {1.0, -1.0}, 0.0}, 500.0, sympl);
        const ChannelReport report = classify_channel(spec, traj, {100.0, 1e-2, 10.0});
        REQUIRE(report.partition.has_value());
        CHECK(report.partition->fragments ==
              std::vector<std::vector<std::size_t>>{{0}, {1}});
        CHECK(report.partition->fragment_velocities[0][0] == Catch::Approx(1.0).margin(1e-6));
        CHECK(report.partition->fragment_velocities[1][0] == Catch::Approx(-1.0).margin(1e-6));
    }

    SECTION("bound pair plus a receding free particle") {
        HamiltonianSpec spec;
        spec.masses = {1.0, 1.0, 1.0};
        spec.dimension = 1;
        spec.pairs.push_back({0, 1, HookeSpring{1.0}});
        // Pair oscillates about a drifting center of mass; particle 2 recedes.
        const Trajectory traj = integrate(
            spec, PhasePoint{{-0.5, 0.5, 5.0}, {0.2, 0.2, 1.5}, 0.0}, 800.0, sympl);
        const ChannelReport report = classify_channel(spec, traj, {100.0, 1e-2, 10.0});
        REQUIRE(report.partition.has_value());
        CHECK(report.partition->fragments ==
              std::vector<std::vector<std::size_t>>{{0, 1}, {2}});
        // Lemma: fragment members inherit the fragment drift velocity, so the
        // per-particle momentum limit is m_i V_k.
        CHECK(report.partition->fragment_velocities[0][0] == Catch::Approx(0.2).margin(1e-2));
        CHECK(report.partition->fragment_velocities[1][0] == Catch::Approx(1.5).margin(1e-2));
    }

    SECTION("everything bound in one trap") {
        HamiltonianSpec spec;
        spec.masses = {1.0, 1.0, 1.0};
        spec.dimension = 1;
        spec.trap_omega = {1.0, 1.0, 1.0};
        const Trajectory traj = integrate(
            spec, PhasePoint{{-0.5, 0.2, 0.6}, {0.1, -0.3, 0.2}, 0.0}, 500.0, sympl);
        const ChannelReport report = classify_channel(spec, traj, {100.0, 1e-1, 10.0});
        REQUIRE(report.partition.has_value());
        CHECK(report.partition->fragments ==
              std::vector<std::vector<std::size_t>>{{0, 1, 2}});
        CHECK(std::abs(report.partition->fragment_velocities[0][0]) < 0.05);
    }

    SECTION("equal drift with unbounded separation is inconclusive") {
        HamiltonianSpec spec;
        spec.masses = {1.0, 1.0};
        spec.dimension = 1;
        const Trajectory traj =
            integrate(spec, PhasePoint{{0.0, 100.0}, {0.5, 0.5}, 0.0}, 500.0, sympl);
        const ChannelReport report = classify_channel(spec, traj, {100.0, 1e-2, 10.0});
        CHECK_FALSE(report.partition.has_value());
        CHECK(report.diagnostic.find("inconclusive") != std::string::npos);
    }
}

TEST_CASE("fragment momentum limits match mass times drift velocity", "[dynamics]") {
    HamiltonianSpec spec;
    spec.masses = {1.0, 2.0};
    spec.dimension = 1;
    spec.pairs.push_back({0, 1, HookeSpring{2.0}});
    // One bound fragment drifting at the center-of-mass velocity.
    const PhasePoint start{{-0.3, 0.15}, {0.5, 1.0}, 0.0};
    const double v_cm = (0.5 + 1.0) / 3.0;
    const MomentumLimitReport report = momentum_limit(
        spec, start, HorizonSchedule{{100, 1000, 10000}, 1e-3},
        StepControl{StepControl::Method::symplectic, 1e-10, 1e-12, 1e-3, 1, 200000000});
    CHECK(report.value[0] == Catch::Approx(1.0 * v_cm).margin(2e-3));
    CHECK(report.value[1] == Catch::Approx(2.0 * v_cm).margin(2e-3));
}

TEST_CASE("trajectory CSV export carries the documented columns", "[dynamics]") {
    const Trajectory traj = integrate(free_particle(), PhasePoint{{0.0}, {2.0}, 0.0}, 1.0);
    std::ostringstream out;
    write_trajectory_csv(out, traj);
    const std::string text = out.str();
    CHECK(text.rfind("t,x1,p1,energy\n", 0) == 0);
    CHECK(text.back() == '\n');
}
