#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pathmeasure/hamiltonian.hpp"
#include "pathmeasure/integrators.hpp"

namespace pathmeasure {

// Increasing horizons at which the momentum-limit estimate m x(T)/T is read
// off, with the Cauchy threshold that declares convergence.
struct HorizonSchedule {
    std::vector<double> horizons{100.0, 1000.0, 10000.0};
    double convergence_tol = 1e-4;
};

struct MomentumLimitReport {
    std::vector<double> horizons;
    std::vector<std::vector<double>> estimates; // one m x(T)/T vector per horizon
    std::vector<double> deltas;                 // sup-norm gap between successive estimates
    bool converged = false;
    std::vector<double> value;                  // estimate at the largest horizon
    std::vector<double> final_momentum;         // gamma_p at the largest horizon
};

// Asymptotic momentum-like label of the orbit: m x(T)/T across the horizon
// schedule. Non-convergence is reported, never thrown.
inline MomentumLimitReport momentum_limit(const HamiltonianSpec& spec, const PhasePoint& start,
                                          const HorizonSchedule& schedule = {},
                                          StepControl control = {StepControl::Method::symplectic,
                                                                 1e-10, 1e-12, 1e-3, 1,
                                                                 200000000}) {
    spec.validate();
    if (schedule.horizons.empty())
        throw std::domain_error("momentum_limit: empty horizon schedule");
    for (std::size_t i = 1; i < schedule.horizons.size(); ++i)
        if (schedule.horizons[i] <= schedule.horizons[i - 1])
            throw std::domain_error("momentum_limit: horizons must increase");

    const std::size_t n = spec.coord_count();
    const int dim = spec.dimension;
    MomentumLimitReport report;
    report.horizons = schedule.horizons;

    PhasePoint state = start;
    for (double horizon : schedule.horizons) {
        const double t_target = start.time + horizon;
        state = integrate_endpoint(spec, state, t_target, control);
        std::vector<double> estimate(n);
        for (std::size_t i = 0; i < n; ++i)
            estimate[i] = spec.masses[i / static_cast<std::size_t>(dim)] * state.positions[i] /
                          horizon;
        report.estimates.push_back(std::move(estimate));
        report.final_momentum = state.momenta;
    }
    for (std::size_t k = 1; k < report.estimates.size(); ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            d = std::max(d, std::abs(report.estimates[k][i] - report.estimates[k - 1][i]));
        report.deltas.push_back(d);
    }
    report.converged = !report.deltas.empty() && report.deltas.back() < schedule.convergence_tol;
    report.value = report.estimates.back();
    return report;
}

// Fragments of an asymptotic breakup: disjoint particle sets with bounded
// internal excursions and pairwise distinct drift velocities.
struct ChannelPartition {
    std::vector<std::vector<std::size_t>> fragments;
    std::vector<std::vector<double>> fragment_velocities;
};

struct ChannelTolerances {
    double window = 100.0;          // trailing time window examined
    double velocity_tol = 1e-2;     // fragment velocities must differ beyond this
    double excursion_bound = 10.0;  // pair separation bound within a fragment
};

struct ChannelReport {
    std::optional<ChannelPartition> partition; // empty when inconclusive
    std::string diagnostic;
};

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    std::size_t find(std::size_t a) {
        while (parent[a] != a)
            a = parent[a] = parent[parent[a]];
        return a;
    }

    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

} // namespace detail

// Partition the particles of a long trajectory into channel fragments by
// trailing-window boundedness, then demand pairwise distinct fragment
// velocities. Equal velocities across unbounded pairs are ambiguous and come
// back as an inconclusive report.
inline ChannelReport classify_channel(const HamiltonianSpec& spec, const Trajectory& traj,
                                      const ChannelTolerances& tol = {}) {
    spec.validate();
    const std::size_t npart = spec.particle_count();
    const int dim = spec.dimension;
    if (traj.samples.size() < 2)
        throw std::domain_error("classify_channel: trajectory too short");
    const double t_end = traj.back().time;
    const double t_begin = traj.front().time;
    if (t_end - t_begin < tol.window)
        throw std::domain_error("classify_channel: trajectory shorter than the trailing window");

    std::size_t first = 0;
    while (first < traj.samples.size() && traj.samples[first].time < t_end - tol.window)
        ++first;
    if (first >= traj.samples.size() - 1)
        throw std::domain_error("classify_channel: too few samples in the trailing window");

    // Max pair separations over the window.
    std::vector<double> max_sep(npart * npart, 0.0);
    for (std::size_t s = first; s < traj.samples.size(); ++s) {
        const auto& x = traj.samples[s].positions;
        for (std::size_t i = 0; i < npart; ++i) {
            for (std::size_t j = i + 1; j < npart; ++j) {
                double d2 = 0.0;
                for (int k = 0; k < dim; ++k) {
                    const double d = x[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)] -
                                     x[j * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)];
                    d2 += d * d;
                }
                max_sep[i * npart + j] = std::max(max_sep[i * npart + j], std::sqrt(d2));
            }
        }
    }

    // Per-particle drift over the window.
    const auto& xa = traj.samples[first];
    const auto& xb = traj.back();
    const double span = xb.time - xa.time;
    std::vector<std::vector<double>> velocity(npart, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < npart; ++i)
        for (int k = 0; k < dim; ++k)
            velocity[i][static_cast<std::size_t>(k)] =
                (xb.positions[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)] -
                 xa.positions[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)]) /
                span;

    detail::UnionFind uf(npart);
    for (std::size_t i = 0; i < npart; ++i)
        for (std::size_t j = i + 1; j < npart; ++j)
            if (max_sep[i * npart + j] <= tol.excursion_bound)
                uf.unite(i, j);

    std::vector<std::vector<std::size_t>> fragments;
    std::vector<std::size_t> root_of(npart);
    for (std::size_t i = 0; i < npart; ++i)
        root_of[i] = uf.find(i);
    for (std::size_t i = 0; i < npart; ++i) {
        if (root_of[i] == i) {
            std::vector<std::size_t> frag;
            for (std::size_t j = 0; j < npart; ++j)
                if (root_of[j] == i)
                    frag.push_back(j);
            fragments.push_back(std::move(frag));
        }
    }

    // Fragment center-of-mass velocities.
    std::vector<std::vector<double>> frag_vel;
    for (const auto& frag : fragments) {
        std::vector<double> v(dim, 0.0);
        double mass = 0.0;
        for (std::size_t i : frag) {
            mass += spec.masses[i];
            for (int k = 0; k < dim; ++k)
                v[static_cast<std::size_t>(k)] += spec.masses[i] * velocity[i][static_cast<std::size_t>(k)];
        }
        for (int k = 0; k < dim; ++k)
            v[static_cast<std::size_t>(k)] /= mass;
        frag_vel.push_back(std::move(v));
    }

    ChannelReport report;
    for (std::size_t a = 0; a < fragments.size(); ++a) {
        for (std::size_t b = a + 1; b < fragments.size(); ++b) {
            double d = 0.0;
            for (int k = 0; k < dim; ++k)
                d = std::max(d, std::abs(frag_vel[a][static_cast<std::size_t>(k)] -
                                         frag_vel[b][static_cast<std::size_t>(k)]));
            if (d <= tol.velocity_tol) {
                std::ostringstream msg;
                msg << "inconclusive: fragments " << a << " and " << b
                    << " drift within velocity tolerance (" << d
                    << ") but their internal excursion exceeds the bound";
                report.diagnostic = msg.str();
                return report;
            }
        }
    }

    report.partition = ChannelPartition{std::move(fragments), std::move(frag_vel)};
    return report;
}

} // namespace pathmeasure
