#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "pathmeasure/errors.hpp"
#include "pathmeasure/hamiltonian.hpp"
#include "pathmeasure/integrators.hpp"
#include "pathmeasure/shooting.hpp"

namespace pathmeasure {

// One classical path between fixed endpoints, decorated with the quantities
// the semiclassical sum needs: action W, Van Vleck factor |det d2W/dx1 dx2|,
// and the conjugate-point count entering the phase as -maslov*pi/2.
struct Branch {
    Trajectory trajectory;
    double action = 0.0;
    double vanvleck = 0.0;
    int maslov = 0;
};

struct PropagatorValue {
    std::complex<double> amplitude; // hbar = 1 convention
};

inline constexpr double caustic_determinant_floor = 1e-14;

// Van Vleck factor from the endpoint sensitivity: |det dp0/dx2| is the
// reciprocal of |det dx(T)/dp0|.
inline double vanvleck_from_sensitivity(const VariationalTrajectory& vt) {
    const Eigen::MatrixXd& jac = vt.position_sensitivity.back();
    const double det = jac.determinant();
    if (std::abs(det) < caustic_determinant_floor)
        throw CausticError("vanvleck: endpoint sensitivity is singular (caustic)");
    return 1.0 / std::abs(det);
}

// Conjugate points: sign changes of det dx(t)/dp0 along the branch. The
// determinant starts at zero (focal start point), so counting begins once it
// has left zero. A vanishing determinant at the far endpoint is a caustic and
// leaves the index undefined.
inline int maslov_index(const VariationalTrajectory& vt) {
    const std::size_t m = vt.position_sensitivity.size();
    if (m < 2)
        throw std::domain_error("maslov_index: branch too short");
    std::vector<double> dets(m);
    for (std::size_t i = 0; i < m; ++i)
        dets[i] = vt.position_sensitivity[i].determinant();
    double scale = 0.0;
    for (double d : dets)
        scale = std::max(scale, std::abs(d));
    if (std::abs(dets.back()) < caustic_determinant_floor * std::max(scale, 1.0))
        throw CausticError("maslov_index: conjugate point at the endpoint (caustic)");
    int count = 0;
    double prev = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
        const double d = dets[i];
        if (d == 0.0)
            continue;
        if (prev != 0.0 && d * prev < 0.0)
            ++count;
        prev = d;
    }
    return count;
}

// Builds the Branch for a known initial momentum: variational integration for
// the Van Vleck factor and the conjugate-point count, Simpson quadrature for
// the action.
inline Branch make_branch(const HamiltonianSpec& spec, std::span<const double> x1, double t1,
                          std::span<const double> p0, double t2, const StepControl& control = {
                              StepControl::Method::adaptive, 1e-12, 1e-14, 1e-3, 1, 200000000}) {
    PhasePoint start;
    start.positions.assign(x1.begin(), x1.end());
    start.momenta.assign(p0.begin(), p0.end());
    start.time = t1;
    VariationalTrajectory vt = integrate_variational(spec, start, t2, control);
    Branch branch;
    branch.vanvleck = vanvleck_from_sensitivity(vt);
    branch.maslov = maslov_index(vt);
    branch.action = action_along(spec, vt.trajectory);
    branch.trajectory = std::move(vt.trajectory);
    return branch;
}

// All classical branches joining (x1, t1) to (x2, t2), decorated.
inline std::vector<Branch> branches_between(const HamiltonianSpec& spec,
                                            std::span<const double> x1, double t1,
                                            std::span<const double> x2, double t2,
                                            const ShootSettings& settings) {
    std::vector<Trajectory> raw = shoot_boundary(spec, x1, t1, x2, t2, settings);
    std::vector<Branch> branches;
    branches.reserve(raw.size());
    for (const auto& traj : raw)
        branches.push_back(
            make_branch(spec, x1, t1, traj.front().momenta, t2, settings.control));
    return branches;
}

// Mixed second derivative of the action by central differences of re-shot
// initial momenta: columns of dp0/dx2 from endpoint displacements +-h e_j.
inline double vanvleck_factor(const HamiltonianSpec& spec, std::span<const double> x1, double t1,
                              std::span<const double> x2, double t2, std::span<const double> p0,
                              double h = 0.0) {
    const std::size_t n = spec.coord_count();
    if (h <= 0.0) {
        double x2_norm = 0.0;
        for (double c : x2)
            x2_norm = std::max(x2_norm, std::abs(c));
        h = 1e-5 * (1.0 + x2_norm);
    }
    ShootSettings refine;
    refine.position_tol = 1e-12;
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> shifted(x2.begin(), x2.end());
    for (std::size_t j = 0; j < n; ++j) {
        shifted[j] = x2[j] + h;
        Trajectory plus = shoot_refine(spec, x1, t1, shifted, t2, p0, refine);
        shifted[j] = x2[j] - h;
        Trajectory minus = shoot_refine(spec, x1, t1, shifted, t2, p0, refine);
        shifted[j] = x2[j];
        for (std::size_t i = 0; i < n; ++i)
            jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (plus.front().momenta[i] - minus.front().momenta[i]) / (2.0 * h);
    }
    const double det = std::abs(jac.determinant());
    if (det < caustic_determinant_floor)
        throw CausticError("vanvleck_factor: determinant below caustic floor");
    return det;
}

struct DensityValue {
    double value = 0.0;
    bool classically_reachable = true;
};

// Sum of Van Vleck factors over the branch set.
inline DensityValue classical_density(std::span<const Branch> branches) {
    if (branches.empty())
        return {0.0, false};
    double sum = 0.0;
    for (const auto& b : branches)
        sum += b.vanvleck;
    return {sum, true};
}

namespace detail {

inline void check_branches(std::span<const Branch> branches) {
    for (const auto& b : branches) {
        if (!(b.vanvleck > caustic_determinant_floor))
            throw CausticError("branch carries a caustic-flagged Van Vleck factor");
        if (b.maslov < 0)
            throw std::domain_error("branch has a negative conjugate-point count");
    }
}

} // namespace detail

// Stationary-phase propagator over the branch set:
//   (2 pi i)^(-n_c/2) sum_i sqrt(vv_i) exp{ i (W_i - M_i pi/2) }
// with n_c the endpoint coordinate count.
inline PropagatorValue semiclassical_propagator(std::span<const Branch> branches,
                                                int endpoint_coords) {
    if (branches.empty())
        throw std::domain_error("semiclassical_propagator: empty branch list");
    if (endpoint_coords < 1)
        throw std::domain_error("semiclassical_propagator: bad coordinate count");
    detail::check_branches(branches);
    using namespace std::complex_literals;
    std::complex<double> sum = 0.0;
    for (const auto& b : branches) {
        const double phase = b.action - b.maslov * std::numbers::pi / 2.0;
        sum += std::sqrt(b.vanvleck) * std::exp(1i * phase);
    }
    const double k = static_cast<double>(endpoint_coords);
    const std::complex<double> prefactor =
        std::pow(2.0 * std::numbers::pi, -k / 2.0) *
        std::exp(-1i * std::numbers::pi * k / 4.0);
    return {prefactor * sum};
}

// Cross-branch term: sum over ordered pairs i != j, real by conjugate pairing.
inline double interference_term(std::span<const Branch> branches) {
    detail::check_branches(branches);
    double sum = 0.0;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        for (std::size_t j = i + 1; j < branches.size(); ++j) {
            const double amp = std::sqrt(branches[i].vanvleck * branches[j].vanvleck);
            const double phase = (branches[i].action - branches[j].action) -
                                 (branches[i].maslov - branches[j].maslov) * std::numbers::pi / 2.0;
            sum += 2.0 * amp * std::cos(phase);
        }
    }
    return sum;
}

// (2 pi)^(-n_c) (classical + interference); equal to |propagator|^2.
inline double quantum_density(std::span<const Branch> branches, int endpoint_coords) {
    if (endpoint_coords < 1)
        throw std::domain_error("quantum_density: bad coordinate count");
    const double sum = classical_density(branches).value + interference_term(branches);
    if (sum < -1e-12)
        throw ConsistencyError("quantum_density: negative density beyond tolerance");
    const double scale = std::pow(2.0 * std::numbers::pi, -static_cast<double>(endpoint_coords));
    return std::max(sum, 0.0) * scale;
}

// ---------------------------------------------------------------------------
// Two-branch fringe model
// ---------------------------------------------------------------------------

// Free flights from two slit points to a screen, all with the common time of
// flight fixed by the longitudinal momentum. Exactly two branches reach every
// screen point.
struct TwoSlitModel {
    double mass = 1.0;
    double momentum = 1.0;        // longitudinal momentum p
    double screen_distance = 1.0; // L
    double slit_separation = 0.1; // s

    double flight_time() const { return mass * screen_distance / momentum; }
};

struct FringeRow {
    double screen = 0.0;
    double rho_fq = 0.0;
    double rho_fc = 0.0;
    double rho_fi = 0.0;
};

inline double predicted_fringe_spacing(const TwoSlitModel& model) {
    return 2.0 * std::numbers::pi * model.screen_distance /
           (model.momentum * model.slit_separation);
}

// Tabulates the densities across the screen; the classical column is
// fringe-free while the quantum one oscillates.
inline std::vector<FringeRow> fringe_profile(const TwoSlitModel& model,
                                             std::span<const double> screen_points) {
    if (!(model.mass > 0.0) || !(model.momentum > 0.0) || !(model.screen_distance > 0.0) ||
        model.slit_separation < 0.0)
        throw std::domain_error("fringe_profile: bad model parameters");
    HamiltonianSpec spec;
    spec.masses = {model.mass};
    spec.dimension = 2;
    const double t_flight = model.flight_time();
    constexpr int endpoint_coords = 2;

    std::vector<FringeRow> rows;
    rows.reserve(screen_points.size());
    for (double x : screen_points) {
        const double target[2] = {model.screen_distance, x};
        std::vector<Branch> branches;
        for (double sign : {+1.0, -1.0}) {
            const double slit[2] = {0.0, sign * 0.5 * model.slit_separation};
            const double guess[2] = {model.mass * (target[0] - slit[0]) / t_flight,
                                     model.mass * (target[1] - slit[1]) / t_flight};
            ShootSettings refine;
            refine.position_tol = 1e-12;
            Trajectory traj = shoot_refine(spec, slit, 0.0, target, t_flight, guess, refine);
            branches.push_back(
                make_branch(spec, slit, 0.0, traj.front().momenta, t_flight, refine.control));
        }
        if (branches.size() != 2)
            throw ConsistencyError("fringe_profile: expected exactly two branches per point");
        FringeRow row;
        row.screen = x;
        row.rho_fc = classical_density(branches).value;
        row.rho_fi = interference_term(branches);
        row.rho_fq = quantum_density(branches, endpoint_coords);
        rows.push_back(row);
    }
    return rows;
}

} // namespace pathmeasure
