#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <span>
#include <stdexcept>
#include <vector>

#include "pathmeasure/errors.hpp"
#include "pathmeasure/hamiltonian.hpp"
#include "pathmeasure/integrators.hpp"

namespace pathmeasure {

struct ShootSettings {
    // Per-coordinate initial-momentum search box; the scan grid lives here.
    std::vector<double> momentum_lo;
    std::vector<double> momentum_hi;
    std::size_t grid_points = 33; // scan resolution per axis
    double position_tol = 1e-8;
    std::size_t max_refine_iters = 80;
    StepControl control{StepControl::Method::adaptive, 1e-12, 1e-14, 1e-3, 1, 200000000};

    // Convenience: a box centered on a guess.
    static ShootSettings centered(std::span<const double> p_guess, double half_width,
                                  std::size_t points = 33) {
        ShootSettings s;
        s.grid_points = points;
        for (double p : p_guess) {
            s.momentum_lo.push_back(p - half_width);
            s.momentum_hi.push_back(p + half_width);
        }
        return s;
    }
};

namespace detail {

inline PhasePoint endpoint_for_momentum(const HamiltonianSpec& spec,
                                        std::span<const double> x1, double t1,
                                        std::span<const double> p0, double t2,
                                        const StepControl& control) {
    PhasePoint start;
    start.positions.assign(x1.begin(), x1.end());
    start.momenta.assign(p0.begin(), p0.end());
    start.time = t1;
    return integrate_endpoint(spec, start, t2, control);
}

// Gauss-Newton on the endpoint residual with the exact Jacobian dx(t2)/dp0
// from the variational flow. Returns the converged initial momentum.
inline std::vector<double> newton_refine(const HamiltonianSpec& spec, std::span<const double> x1,
                                         double t1, std::span<const double> x2, double t2,
                                         std::vector<double> p, const ShootSettings& settings) {
    const std::size_t n = spec.coord_count();
    double best_norm = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < settings.max_refine_iters; ++iter) {
        PhasePoint start;
        start.positions.assign(x1.begin(), x1.end());
        start.momenta = p;
        start.time = t1;
        VariationalTrajectory vt = integrate_variational(spec, start, t2, settings.control);
        Eigen::VectorXd residual(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            residual(static_cast<Eigen::Index>(i)) = vt.trajectory.back().positions[i] - x2[i];
        const double rnorm = residual.lpNorm<Eigen::Infinity>();
        if (rnorm <= settings.position_tol)
            return p;
        const Eigen::MatrixXd& jac = vt.position_sensitivity.back();
        Eigen::VectorXd dp = jac.colPivHouseholderQr().solve(-residual);
        if (!dp.allFinite())
            throw ShootingError("shoot: singular endpoint Jacobian during refinement");
        // Damped update: halve until the residual actually shrinks.
        double lambda = 1.0;
        bool accepted = false;
        for (int halvings = 0; halvings < 30; ++halvings) {
            std::vector<double> trial = p;
            for (std::size_t i = 0; i < n; ++i)
                trial[i] += lambda * dp(static_cast<Eigen::Index>(i));
            PhasePoint end = endpoint_for_momentum(spec, x1, t1, trial, t2, settings.control);
            double tnorm = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                tnorm = std::max(tnorm, std::abs(end.positions[i] - x2[i]));
            if (tnorm < rnorm) {
                p = std::move(trial);
                best_norm = tnorm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            std::ostringstream msg;
            msg << "shoot: refinement stalled at residual " << rnorm;
            throw ShootingError(msg.str());
        }
        if (best_norm <= settings.position_tol)
            return p;
    }
    std::ostringstream msg;
    msg << "shoot: no convergence after " << settings.max_refine_iters
        << " iterations (residual " << best_norm << ")";
    throw ShootingError(msg.str());
}

} // namespace detail

// Newton refinement from an explicit initial-momentum guess. Throws
// ShootingError when the guess does not lead to a root.
inline Trajectory shoot_refine(const HamiltonianSpec& spec, std::span<const double> x1, double t1,
                               std::span<const double> x2, double t2,
                               std::span<const double> p0_guess, const ShootSettings& settings) {
    spec.validate();
    if (!(t2 > t1))
        throw std::domain_error("shoot: t2 must exceed t1");
    std::vector<double> p(p0_guess.begin(), p0_guess.end());
    p = detail::newton_refine(spec, x1, t1, x2, t2, std::move(p), settings);
    PhasePoint start;
    start.positions.assign(x1.begin(), x1.end());
    start.momenta = p;
    start.time = t1;
    return integrate(spec, start, t2, settings.control);
}

// Least-action boundary solve: all trajectories from (x1, t1) that hit x2 at
// t2 within tolerance, one per detected branch. An empty list is the valid
// "classically unreachable" outcome.
//
// 1D scans the momentum grid and brackets sign changes of the endpoint
// residual; higher dimensions run damped Gauss-Newton from every grid start.
// Distinct roots are deduplicated at the grid resolution.
inline std::vector<Trajectory> shoot_boundary(const HamiltonianSpec& spec,
                                              std::span<const double> x1, double t1,
                                              std::span<const double> x2, double t2,
                                              const ShootSettings& settings) {
    spec.validate();
    const std::size_t n = spec.coord_count();
    if (x1.size() != n || x2.size() != n)
        throw std::domain_error("shoot: endpoint size mismatch");
    if (!(t2 > t1))
        throw std::domain_error("shoot: t2 must exceed t1");
    if (settings.momentum_lo.size() != n || settings.momentum_hi.size() != n)
        throw std::domain_error("shoot: momentum search box must match coordinate count");
    if (settings.grid_points < 2)
        throw std::domain_error("shoot: grid needs at least two points");

    std::vector<std::vector<double>> roots;
    std::vector<double> resolution(n);
    for (std::size_t i = 0; i < n; ++i)
        resolution[i] = (settings.momentum_hi[i] - settings.momentum_lo[i]) /
                        static_cast<double>(settings.grid_points - 1);

    auto is_duplicate = [&](std::span<const double> p) {
        for (const auto& r : roots) {
            bool close = true;
            for (std::size_t i = 0; i < n; ++i)
                if (std::abs(r[i] - p[i]) > std::max(resolution[i], 1e-12)) {
                    close = false;
                    break;
                }
            if (close)
                return true;
        }
        return false;
    };

    if (n == 1) {
        // Residual scan with bracketing.
        const std::size_t g = settings.grid_points;
        std::vector<double> ps(g), res(g);
        std::vector<bool> ok(g, false);
        for (std::size_t i = 0; i < g; ++i) {
            ps[i] = settings.momentum_lo[0] + static_cast<double>(i) * resolution[0];
            try {
                PhasePoint end = detail::endpoint_for_momentum(spec, x1, t1, std::span(&ps[i], 1),
                                                               t2, settings.control);
                res[i] = end.positions[0] - x2[0];
                ok[i] = true;
            } catch (const IntegrationError&) {
                ok[i] = false; // grid cell hits the singularity guard; skip it
            }
        }
        auto residual_at = [&](double p) {
            PhasePoint end =
                detail::endpoint_for_momentum(spec, x1, t1, std::span(&p, 1), t2, settings.control);
            return end.positions[0] - x2[0];
        };
        for (std::size_t i = 0; i + 1 < g; ++i) {
            if (!ok[i] || !ok[i + 1])
                continue;
            if (res[i] == 0.0) {
                std::vector<double> root{ps[i]};
                if (!is_duplicate(root))
                    roots.push_back(root);
                continue;
            }
            if (res[i] * res[i + 1] > 0.0)
                continue;
            // Bisection, finished by the Newton polish below.
            double lo = ps[i], hi = ps[i + 1];
            double flo = res[i];
            for (std::size_t it = 0; it < settings.max_refine_iters; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fmid = residual_at(mid);
                if (fmid == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if (flo * fmid < 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fmid;
                }
                if (hi - lo < 1e-13 * std::max(1.0, std::abs(mid)))
                    break;
            }
            std::vector<double> root{0.5 * (lo + hi)};
            try {
                root = detail::newton_refine(spec, x1, t1, x2, t2, root, settings);
            } catch (const ShootingError&) {
                // Keep the bisection value if it already meets tolerance.
                const double r = std::abs(residual_at(root[0]));
                if (r > settings.position_tol)
                    throw;
            }
            if (!is_duplicate(root))
                roots.push_back(std::move(root));
        }
    } else {
        // Multi-start Gauss-Newton over the tensor grid (capped).
        std::size_t per_axis = settings.grid_points;
        double count = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            count *= static_cast<double>(per_axis);
        while (count > 4096.0 && per_axis > 2) {
            --per_axis;
            count = 1.0;
            for (std::size_t i = 0; i < n; ++i)
                count *= static_cast<double>(per_axis);
        }
        std::vector<std::size_t> idx(n, 0);
        bool done = false;
        while (!done) {
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double f = (per_axis == 1)
                                     ? 0.5
                                     : static_cast<double>(idx[i]) / static_cast<double>(per_axis - 1);
                p[i] = settings.momentum_lo[i] + f * (settings.momentum_hi[i] - settings.momentum_lo[i]);
            }
            try {
                auto root = detail::newton_refine(spec, x1, t1, x2, t2, std::move(p), settings);
                if (!is_duplicate(root))
                    roots.push_back(std::move(root));
            } catch (const ShootingError&) {
                // This start did not converge; others may.
            } catch (const IntegrationError&) {
            }
            // Advance the tensor index.
            std::size_t k = 0;
            for (; k < n; ++k) {
                if (++idx[k] < per_axis)
                    break;
                idx[k] = 0;
            }
            done = (k == n);
        }
    }

    std::sort(roots.begin(), roots.end());
    std::vector<Trajectory> branches;
    branches.reserve(roots.size());
    for (const auto& p : roots) {
        PhasePoint start;
        start.positions.assign(x1.begin(), x1.end());
        start.momenta = p;
        start.time = t1;
        branches.push_back(integrate(spec, start, t2, settings.control));
    }
    return branches;
}

} // namespace pathmeasure
