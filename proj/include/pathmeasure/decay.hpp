#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathmeasure/errors.hpp"

namespace pathmeasure {

// Boundary data of a single three-leg decay: the parent position at the start
// time and both product positions at the end time, plus masses and the speed
// constant of the rest-energy terms.
struct DecaySpec {
    double parent_mass = 0.0;
    double product_mass_1 = 0.0;
    double product_mass_2 = 0.0;
    double light_speed = 1.0;
    double start_time = 0.0;
    double end_time = 1.0;
    std::vector<double> parent_position;    // at start_time
    std::vector<double> product_position_1; // at end_time
    std::vector<double> product_position_2; // at end_time

    std::size_t dimension() const { return parent_position.size(); }

    double mass_defect() const { return parent_mass - product_mass_1 - product_mass_2; }

    void validate() const {
        if (!(parent_mass > 0.0) || !(product_mass_1 > 0.0) || !(product_mass_2 > 0.0))
            throw std::domain_error("DecaySpec: masses must be positive");
        if (!(light_speed > 0.0))
            throw std::domain_error("DecaySpec: speed constant must be positive");
        if (!(end_time > start_time))
            throw std::domain_error("DecaySpec: end_time must exceed start_time");
        const std::size_t d = parent_position.size();
        if (d < 1 || d > 3 || product_position_1.size() != d || product_position_2.size() != d)
            throw std::domain_error("DecaySpec: positions must share a dimension of 1 to 3");
    }
};

// Solved decay event: vertex, segment momenta, and the action value there.
struct DecayVertex {
    std::vector<double> position;
    double time = 0.0;
    std::vector<double> parent_momentum;
    std::vector<double> product_momentum_1;
    std::vector<double> product_momentum_2;
    double action = 0.0;
    bool is_minimum = true;
    std::string diagnostic;
};

// Action of the three-segment history with the vertex at (x, t): straight
// free legs with rest-energy terms in the low-velocity form.
inline double decay_action(const DecaySpec& spec, std::span<const double> x, double t) {
    spec.validate();
    if (!(t > spec.start_time) || !(t < spec.end_time))
        throw std::domain_error("decay_action: vertex time must lie strictly inside the window");
    if (x.size() != spec.dimension())
        throw std::domain_error("decay_action: vertex dimension mismatch");
    const double c2 = spec.light_speed * spec.light_speed;
    const double dt1 = t - spec.start_time;
    const double dt2 = spec.end_time - t;
    double d1 = 0.0, d2 = 0.0, d3 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double a = x[k] - spec.parent_position[k];
        const double b = spec.product_position_1[k] - x[k];
        const double c = spec.product_position_2[k] - x[k];
        d1 += a * a;
        d2 += b * b;
        d3 += c * c;
    }
    return -spec.parent_mass * c2 * dt1 + 0.5 * spec.parent_mass * d1 / dt1 -
           (spec.product_mass_1 + spec.product_mass_2) * c2 * dt2 +
           0.5 * spec.product_mass_1 * d2 / dt2 + 0.5 * spec.product_mass_2 * d3 / dt2;
}

namespace detail {

// Gradient of the action in (x, t): momentum balance and energy balance.
inline void decay_gradient(const DecaySpec& spec, std::span<const double> x, double t,
                           std::span<double> grad_x, double& grad_t) {
    const double c2 = spec.light_speed * spec.light_speed;
    const double dt1 = t - spec.start_time;
    const double dt2 = spec.end_time - t;
    double d1 = 0.0, d2 = 0.0, d3 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double a = x[k] - spec.parent_position[k];
        const double b = spec.product_position_1[k] - x[k];
        const double c = spec.product_position_2[k] - x[k];
        grad_x[k] = spec.parent_mass * a / dt1 - spec.product_mass_1 * b / dt2 -
                    spec.product_mass_2 * c / dt2;
        d1 += a * a;
        d2 += b * b;
        d3 += c * c;
    }
    grad_t = -spec.parent_mass * c2 - 0.5 * spec.parent_mass * d1 / (dt1 * dt1) +
             (spec.product_mass_1 + spec.product_mass_2) * c2 +
             0.5 * spec.product_mass_1 * d2 / (dt2 * dt2) +
             0.5 * spec.product_mass_2 * d3 / (dt2 * dt2);
}

inline DecayVertex assemble_vertex(const DecaySpec& spec, std::vector<double> x, double t) {
    const std::size_t d = spec.dimension();
    DecayVertex v;
    v.time = t;
    v.parent_momentum.resize(d);
    v.product_momentum_1.resize(d);
    v.product_momentum_2.resize(d);
    const double dt1 = t - spec.start_time;
    const double dt2 = spec.end_time - t;
    for (std::size_t k = 0; k < d; ++k) {
        v.parent_momentum[k] = spec.parent_mass * (x[k] - spec.parent_position[k]) / dt1;
        v.product_momentum_1[k] =
            spec.product_mass_1 * (spec.product_position_1[k] - x[k]) / dt2;
        v.product_momentum_2[k] =
            spec.product_mass_2 * (spec.product_position_2[k] - x[k]) / dt2;
    }
    v.action = decay_action(spec, x, t);
    v.position = std::move(x);
    return v;
}

inline double conservation_residual(const DecaySpec& spec, const DecayVertex& v) {
    double worst = 0.0;
    for (std::size_t k = 0; k < v.position.size(); ++k)
        worst = std::max(worst, std::abs(v.parent_momentum[k] - v.product_momentum_1[k] -
                                         v.product_momentum_2[k]));
    std::vector<double> gx(v.position.size());
    double gt = 0.0;
    decay_gradient(spec, v.position, v.time, gx, gt);
    return std::max(worst, std::abs(gt));
}

// Numerical positive-definiteness of the (d+1)-dim Hessian of the action.
inline bool hessian_positive_definite(const DecaySpec& spec, std::span<const double> x, double t) {
    const std::size_t n = x.size() + 1;
    const double h = 1e-5 * (1.0 + std::abs(t));
    auto grad = [&](const std::vector<double>& q, std::vector<double>& g) {
        std::vector<double> gx(x.size());
        double gt = 0.0;
        decay_gradient(spec, std::span<const double>(q.data(), x.size()), q[x.size()], gx, gt);
        std::copy(gx.begin(), gx.end(), g.begin());
        g[x.size()] = gt;
    };
    std::vector<double> q0(x.begin(), x.end());
    q0.push_back(t);
    Eigen::MatrixXd hess(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> gp(n), gm(n), q(n);
    for (std::size_t j = 0; j < n; ++j) {
        q = q0;
        q[j] += h;
        grad(q, gp);
        q[j] -= 2.0 * h;
        grad(q, gm);
        for (std::size_t i = 0; i < n; ++i)
            hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (gp[i] - gm[i]) / (2.0 * h);
    }
    const Eigen::MatrixXd sym = 0.5 * (hess + hess.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    return eig.eigenvalues().minCoeff() > 0.0;
}

} // namespace detail

struct DecaySolveSettings {
    int simplex_iterations = 600;
    int newton_iterations = 200;
    double residual_tol = 1e-12;
};

inline DecayVertex solve_vertex_numeric(const DecaySpec& spec,
                                        const DecaySolveSettings& settings = {});

// Closed-form vertex for boundary data whose parent position coincides with
// the product center of mass (after translating that point to the origin).
// Other data falls through to the numeric solver.
inline DecayVertex solve_vertex_closed_form(const DecaySpec& spec) {
    spec.validate();
    const std::size_t d = spec.dimension();
    if (!(spec.mass_defect() > 0.0))
        throw DecaySolveError("no real vertex: mass defect is not positive");

    std::vector<double> cm(d);
    const double msum = spec.product_mass_1 + spec.product_mass_2;
    double offset = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        cm[k] = (spec.product_mass_1 * spec.product_position_1[k] +
                 spec.product_mass_2 * spec.product_position_2[k]) /
                msum;
        offset = std::max(offset, std::abs(spec.parent_position[k] - cm[k]));
    }
    double scale = 1.0;
    for (std::size_t k = 0; k < d; ++k)
        scale = std::max({scale, std::abs(spec.product_position_1[k]),
                          std::abs(spec.product_position_2[k])});
    if (offset > 1e-12 * scale)
        return solve_vertex_numeric(spec);

    // Translated frame: x1 = x_CM = 0, vertex sits at the origin.
    double weighted = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double a = spec.product_position_1[k] - cm[k];
        const double b = spec.product_position_2[k] - cm[k];
        weighted += spec.product_mass_1 * a * a + spec.product_mass_2 * b * b;
    }
    const double c2 = spec.light_speed * spec.light_speed;
    const double gap = std::sqrt(weighted / (2.0 * spec.mass_defect() * c2));
    const double t = spec.end_time - gap;
    if (t < spec.start_time)
        throw DecaySolveError("vertex outside window: energy balance places it before the start");
    if (!(t > spec.start_time) || !(t < spec.end_time))
        throw DecaySolveError("no real vertex: degenerate vertex time");

    DecayVertex v = detail::assemble_vertex(spec, std::vector<double>(spec.parent_position), t);
    v.is_minimum = detail::hessian_positive_definite(spec, v.position, v.time);
    {
        std::ostringstream note;
        note << "second stationary time " << spec.end_time + gap << " lies outside the window";
        v.diagnostic = note.str();
    }
    if (detail::conservation_residual(spec, v) > 1e-9)
        throw ConsistencyError("closed-form vertex violates the conservation residuals");
    return v;
}

// Independent numeric route: derivative-free descent of the action over the
// open window, finished by damped Newton on the stationarity residuals.
inline DecayVertex solve_vertex_numeric(const DecaySpec& spec,
                                        const DecaySolveSettings& settings) {
    spec.validate();
    const std::size_t d = spec.dimension();
    if (!(spec.mass_defect() > 0.0))
        throw DecaySolveError("no real vertex: mass defect is not positive");
    const std::size_t n = d + 1;
    const double span = spec.end_time - spec.start_time;
    const double edge = 1e-9 * span;

    auto objective = [&](const Eigen::VectorXd& q) -> double {
        const double t = q(static_cast<Eigen::Index>(d));
        if (!(t > spec.start_time + edge) || !(t < spec.end_time - edge))
            return 1e300;
        std::vector<double> x(d);
        for (std::size_t k = 0; k < d; ++k)
            x[k] = q(static_cast<Eigen::Index>(k));
        return decay_action(spec, x, t);
    };

    // Start from the product center of mass at three window fractions and
    // keep the best Nelder-Mead outcome.
    const double msum = spec.product_mass_1 + spec.product_mass_2;
    Eigen::VectorXd best(static_cast<Eigen::Index>(n));
    double best_value = 1e300;
    for (double fraction : {0.5, 0.75, 0.9}) {
        Eigen::VectorXd q0(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < d; ++k)
            q0(static_cast<Eigen::Index>(k)) = (spec.product_mass_1 * spec.product_position_1[k] +
                                                spec.product_mass_2 * spec.product_position_2[k]) /
                                               msum;
        q0(static_cast<Eigen::Index>(d)) = spec.start_time + fraction * span;

        // Nelder-Mead.
        std::vector<Eigen::VectorXd> simplex(n + 1, q0);
        for (std::size_t j = 0; j < n; ++j)
            simplex[j + 1](static_cast<Eigen::Index>(j)) +=
                (j == d) ? 0.05 * span : 0.1 * (1.0 + q0.head(static_cast<Eigen::Index>(d)).norm());
        std::vector<double> value(n + 1);
        for (std::size_t j = 0; j <= n; ++j)
            value[j] = objective(simplex[j]);
        for (int iter = 0; iter < settings.simplex_iterations; ++iter) {
            std::vector<std::size_t> order(n + 1);
            for (std::size_t j = 0; j <= n; ++j)
                order[j] = j;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
            const std::size_t lo = order[0], hi = order[n], second = order[n - 1];
            if (std::abs(value[hi] - value[lo]) < 1e-13 * (1.0 + std::abs(value[lo])))
                break;
            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
            for (std::size_t j = 0; j <= n; ++j)
                if (j != hi)
                    centroid += simplex[j];
            centroid /= static_cast<double>(n);
            Eigen::VectorXd reflected = centroid + (centroid - simplex[hi]);
            const double fr = objective(reflected);
            if (fr < value[lo]) {
                Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[hi]);
                const double fe = objective(expanded);
                simplex[hi] = (fe < fr) ? expanded : reflected;
                value[hi] = std::min(fe, fr);
            } else if (fr < value[second]) {
                simplex[hi] = reflected;
                value[hi] = fr;
            } else {
                Eigen::VectorXd contracted = centroid + 0.5 * (simplex[hi] - centroid);
                const double fc = objective(contracted);
                if (fc < value[hi]) {
                    simplex[hi] = contracted;
                    value[hi] = fc;
                } else {
                    for (std::size_t j = 0; j <= n; ++j) {
                        if (j == lo)
                            continue;
                        simplex[j] = simplex[lo] + 0.5 * (simplex[j] - simplex[lo]);
                        value[j] = objective(simplex[j]);
                    }
                }
            }
        }
        std::size_t lo = 0;
        for (std::size_t j = 1; j <= n; ++j)
            if (value[j] < value[lo])
                lo = j;
        if (value[lo] < best_value) {
            best_value = value[lo];
            best = simplex[lo];
        }
    }
    if (best_value >= 1e300)
        throw DecaySolveError("numeric vertex solve: no admissible start inside the window");

    // Damped Newton on the stationarity residuals with a finite-difference
    // Jacobian.
    Eigen::VectorXd q = best;
    auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        std::vector<double> x(d), gx(d);
        for (std::size_t k = 0; k < d; ++k)
            x[k] = p(static_cast<Eigen::Index>(k));
        double gt = 0.0;
        detail::decay_gradient(spec, x, p(static_cast<Eigen::Index>(d)), gx, gt);
        for (std::size_t k = 0; k < d; ++k)
            r(static_cast<Eigen::Index>(k)) = gx[k];
        r(static_cast<Eigen::Index>(d)) = gt;
    };
    Eigen::VectorXd r(static_cast<Eigen::Index>(n)), r_trial(static_cast<Eigen::Index>(n));
    residual(q, r);
    for (int iter = 0;
         iter < settings.newton_iterations && r.lpNorm<Eigen::Infinity>() > settings.residual_tol;
         ++iter) {
        Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        const double h = 1e-7 * (1.0 + q.norm());
        Eigen::VectorXd qp = q, rp(static_cast<Eigen::Index>(n)), rm(static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < n; ++j) {
            qp = q;
            qp(static_cast<Eigen::Index>(j)) += h;
            residual(qp, rp);
            qp(static_cast<Eigen::Index>(j)) -= 2.0 * h;
            residual(qp, rm);
            jac.col(static_cast<Eigen::Index>(j)) = (rp - rm) / (2.0 * h);
        }
        Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-r);
        double lambda = 1.0;
        bool accepted = false;
        for (int halvings = 0; halvings < 40; ++halvings) {
            Eigen::VectorXd trial = q + lambda * step;
            const double t = trial(static_cast<Eigen::Index>(d));
            if (t > spec.start_time + edge && t < spec.end_time - edge) {
                residual(trial, r_trial);
                if (r_trial.lpNorm<Eigen::Infinity>() < r.lpNorm<Eigen::Infinity>()) {
                    q = trial;
                    r = r_trial;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted)
            break;
    }
    if (r.lpNorm<Eigen::Infinity>() > 1e-9) {
        std::ostringstream msg;
        msg << "numeric vertex solve: stationarity residual " << r.lpNorm<Eigen::Infinity>()
            << " did not reach tolerance";
        throw DecaySolveError(msg.str());
    }

    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k)
        x[k] = q(static_cast<Eigen::Index>(k));
    DecayVertex v = detail::assemble_vertex(spec, std::move(x), q(static_cast<Eigen::Index>(d)));
    v.is_minimum = detail::hessian_positive_definite(spec, v.position, v.time);
    if (!v.is_minimum)
        v.diagnostic = "stationary point is not a minimum (saddle flagged)";
    return v;
}

} // namespace pathmeasure
