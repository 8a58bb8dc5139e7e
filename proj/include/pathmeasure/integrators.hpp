#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "pathmeasure/errors.hpp"
#include "pathmeasure/hamiltonian.hpp"
#include "pathmeasure/numeric.hpp"

namespace pathmeasure {

struct StepControl {
    enum class Method { adaptive, symplectic };

    Method method = Method::adaptive;
    double rel_tol = 1e-10;        // adaptive
    double abs_tol = 1e-12;        // adaptive
    double dt = 1e-3;              // symplectic fixed step
    std::size_t sample_stride = 1; // symplectic: keep every k-th step
    std::size_t max_steps = 200000000;
};

namespace detail {

// Dormand-Prince 5(4) with a standard PI step controller. rhs(t, y, dydt);
// observe(t, y) fires at t0 and after every accepted step.
template <class Rhs, class Observer>
void dopri5(Rhs&& rhs, std::vector<double>& y, double t0, double t1, double rel_tol,
            double abs_tol, std::size_t max_steps, Observer&& observe) {
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 35.0 / 384.0 - 5179.0 / 57600.0, e3 = 500.0 / 1113.0 - 7571.0 / 16695.0,
                            e4 = 125.0 / 192.0 - 393.0 / 640.0,
                            e5 = -2187.0 / 6784.0 + 92097.0 / 339200.0,
                            e6 = 11.0 / 84.0 - 187.0 / 2100.0, e7 = -1.0 / 40.0;
    static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;

    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);

    double t = t0;
    observe(t, y);
    rhs(t, y, k1);

    // Initial step from the rhs magnitude.
    double ynorm = 0.0, fnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ynorm = std::max(ynorm, std::abs(y[i]));
        fnorm = std::max(fnorm, std::abs(k1[i]));
    }
    double h = (fnorm > 0.0) ? 0.01 * std::max(ynorm, 1.0) / fnorm : (t1 - t0) * 1e-3;
    h = std::min(h, t1 - t0);

    double err_prev = 1.0;
    std::size_t steps = 0;
    bool first_same_as_last = true;
    while (t < t1) {
        if (++steps > max_steps)
            throw IntegrationError("dopri5: step limit exceeded");
        h = std::min(h, t1 - t);
        if (!first_same_as_last)
            rhs(t, y, k1);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * a21 * k1[i];
        rhs(t + c2 * h, ytmp, k2);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * h, ytmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * h, ytmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * h, ytmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] =
                y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(t + h, ytmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(t + h, ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sk = abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double ei =
                h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            err += (ei / sk) * (ei / sk);
        }
        err = std::sqrt(err / static_cast<double>(n));

        if (err <= 1.0) {
            t += h;
            y.swap(ynew);
            k1.swap(k7);
            first_same_as_last = true;
            observe(t, y);
            const double scale =
                0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            h *= std::clamp(scale, 0.2, 5.0);
            err_prev = std::max(err, 1e-10);
        } else {
            first_same_as_last = false;
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            if (!(h > 1e-14 * std::max(1.0, std::abs(t))))
                throw IntegrationError("dopri5: step size underflow");
        }
    }
}

// One velocity-Verlet sweep; fixed step chosen to land exactly on t1.
template <class Observer>
void verlet(const HamiltonianSpec& spec, std::vector<double>& x, std::vector<double>& p, double t0,
            double t1, double dt, std::size_t max_steps, Observer&& observe) {
    const std::size_t n = spec.coord_count();
    const int dim = spec.dimension;
    const double span = t1 - t0;
    const auto steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-12));
    if (steps > max_steps)
        throw IntegrationError("verlet: step limit exceeded");
    const double h = span / static_cast<double>(steps);
    std::vector<double> f(n, 0.0);
    observe(t0, x, p, 0);
    std::fill(f.begin(), f.end(), 0.0);
    accumulate_forces(spec, x, t0, f);
    double t = t0;
    for (std::size_t s = 1; s <= steps; ++s) {
        for (std::size_t i = 0; i < n; ++i)
            p[i] += 0.5 * h * f[i];
        for (std::size_t i = 0; i < n; ++i)
            x[i] += h * p[i] / spec.masses[i / static_cast<std::size_t>(dim)];
        t = t0 + static_cast<double>(s) * h;
        std::fill(f.begin(), f.end(), 0.0);
        accumulate_forces(spec, x, t, f);
        for (std::size_t i = 0; i < n; ++i)
            p[i] += 0.5 * h * f[i];
        observe(t, x, p, s);
    }
}

// rhs for the plain Hamiltonian flow: y = [x, p].
struct HamiltonFlow {
    const HamiltonianSpec* spec;

    void operator()(double t, const std::vector<double>& y, std::vector<double>& dy) const {
        const std::size_t n = spec->coord_count();
        const int dim = spec->dimension;
        for (std::size_t i = 0; i < n; ++i)
            dy[i] = y[n + i] / spec->masses[i / static_cast<std::size_t>(dim)];
        std::fill(dy.begin() + static_cast<std::ptrdiff_t>(n), dy.end(), 0.0);
        pathmeasure::accumulate_forces(*spec, std::span<const double>(y.data(), n), t,
                                       std::span<double>(dy.data() + n, n));
    }
};

} // namespace detail

// Forward integration of Hamilton's equations; the final sample lands on
// t_end exactly (up to roundoff in the time sum).
inline Trajectory integrate(const HamiltonianSpec& spec, const PhasePoint& start, double t_end,
                            const StepControl& control = {}) {
    spec.validate();
    const std::size_t n = spec.coord_count();
    if (start.positions.size() != n || start.momenta.size() != n)
        throw std::domain_error("integrate: phase point size mismatch");
    if (!(t_end > start.time))
        throw std::domain_error("integrate: t_end must exceed the start time");

    Trajectory traj;
    traj.spec = std::make_shared<HamiltonianSpec>(spec);

    if (control.method == StepControl::Method::adaptive) {
        std::vector<double> y(2 * n);
        std::copy(start.positions.begin(), start.positions.end(), y.begin());
        std::copy(start.momenta.begin(), start.momenta.end(), y.begin() + static_cast<std::ptrdiff_t>(n));
        detail::HamiltonFlow flow{&spec};
        detail::dopri5(flow, y, start.time, t_end, control.rel_tol, control.abs_tol,
                       control.max_steps, [&](double t, const std::vector<double>& state) {
                           PhasePoint s;
                           s.positions.assign(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(n));
                           s.momenta.assign(state.begin() + static_cast<std::ptrdiff_t>(n), state.end());
                           s.time = t;
                           traj.samples.push_back(std::move(s));
                       });
    } else {
        std::vector<double> x = start.positions;
        std::vector<double> p = start.momenta;
        const std::size_t stride = std::max<std::size_t>(1, control.sample_stride);
        const auto total = static_cast<std::size_t>(std::ceil((t_end - start.time) / control.dt - 1e-12));
        detail::verlet(spec, x, p, start.time, t_end, control.dt, control.max_steps,
                       [&](double t, const std::vector<double>& xs, const std::vector<double>& ps,
                           std::size_t step) {
                           if (step % stride == 0 || step == total) {
                               PhasePoint s;
                               s.positions = xs;
                               s.momenta = ps;
                               s.time = t;
                               traj.samples.push_back(std::move(s));
                           }
                       });
    }
    return traj;
}

// Same flow, but only the endpoint is materialized.
inline PhasePoint integrate_endpoint(const HamiltonianSpec& spec, const PhasePoint& start,
                                     double t_end, const StepControl& control = {}) {
    const std::size_t n = spec.coord_count();
    if (!(t_end > start.time))
        throw std::domain_error("integrate: t_end must exceed the start time");
    PhasePoint out;
    if (control.method == StepControl::Method::adaptive) {
        std::vector<double> y(2 * n);
        std::copy(start.positions.begin(), start.positions.end(), y.begin());
        std::copy(start.momenta.begin(), start.momenta.end(), y.begin() + static_cast<std::ptrdiff_t>(n));
        detail::HamiltonFlow flow{&spec};
        detail::dopri5(flow, y, start.time, t_end, control.rel_tol, control.abs_tol,
                       control.max_steps, [](double, const std::vector<double>&) {});
        out.positions.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
        out.momenta.assign(y.begin() + static_cast<std::ptrdiff_t>(n), y.end());
    } else {
        std::vector<double> x = start.positions;
        std::vector<double> p = start.momenta;
        detail::verlet(spec, x, p, start.time, t_end, control.dt, control.max_steps,
                       [](double, const std::vector<double>&, const std::vector<double>&,
                          std::size_t) {});
        out.positions = std::move(x);
        out.momenta = std::move(p);
    }
    out.time = t_end;
    return out;
}

// Trajectory plus the endpoint sensitivity dx(t)/dp0 at every sample, from
// the variational (monodromy) equations integrated alongside the flow.
struct VariationalTrajectory {
    Trajectory trajectory;
    std::vector<Eigen::MatrixXd> position_sensitivity;
};

inline VariationalTrajectory integrate_variational(const HamiltonianSpec& spec,
                                                   const PhasePoint& start, double t_end,
                                                   const StepControl& control = {}) {
    spec.validate();
    const std::size_t n = spec.coord_count();
    if (start.positions.size() != n || start.momenta.size() != n)
        throw std::domain_error("integrate_variational: phase point size mismatch");
    if (!(t_end > start.time))
        throw std::domain_error("integrate_variational: t_end must exceed the start time");

    // Layout: [x (n), p (n), Jxp (n*n), Jpp (n*n)] with Jxp(0)=0, Jpp(0)=I.
    const std::size_t total = 2 * n + 2 * n * n;
    std::vector<double> y(total, 0.0);
    std::copy(start.positions.begin(), start.positions.end(), y.begin());
    std::copy(start.momenta.begin(), start.momenta.end(), y.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t i = 0; i < n; ++i)
        y[2 * n + n * n + i * n + i] = 1.0;

    const int dim = spec.dimension;
    Eigen::MatrixXd hess;
    auto rhs = [&](double t, const std::vector<double>& s, std::vector<double>& ds) {
        std::fill(ds.begin(), ds.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            ds[i] = s[n + i] / spec.masses[i / static_cast<std::size_t>(dim)];
        accumulate_forces(spec, std::span<const double>(s.data(), n), t,
                          std::span<double>(ds.data() + n, n));
        potential_hessian(spec, std::span<const double>(s.data(), n), hess);
        const double* jxp = s.data() + 2 * n;
        const double* jpp = jxp + n * n;
        double* djxp = ds.data() + 2 * n;
        double* djpp = djxp + n * n;
        // d(Jxp) = M^-1 Jpp ; d(Jpp) = -Hess(V) Jxp.
        for (std::size_t r = 0; r < n; ++r) {
            const double inv_m = 1.0 / spec.masses[r / static_cast<std::size_t>(dim)];
            for (std::size_t c = 0; c < n; ++c)
                djxp[r * n + c] = inv_m * jpp[r * n + c];
        }
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    acc -= hess(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) *
                           jxp[k * n + c];
                djpp[r * n + c] = acc;
            }
        }
    };

    VariationalTrajectory out;
    out.trajectory.spec = std::make_shared<HamiltonianSpec>(spec);
    detail::dopri5(rhs, y, start.time, t_end, control.rel_tol, control.abs_tol, control.max_steps,
                   [&](double t, const std::vector<double>& state) {
                       PhasePoint s;
                       s.positions.assign(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(n));
                       s.momenta.assign(state.begin() + static_cast<std::ptrdiff_t>(n),
                                        state.begin() + static_cast<std::ptrdiff_t>(2 * n));
                       s.time = t;
                       out.trajectory.samples.push_back(std::move(s));
                       Eigen::MatrixXd j(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
                       for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < n; ++c)
                               j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                                   state[2 * n + r * n + c];
                       out.position_sensitivity.push_back(std::move(j));
                   });
    return out;
}

// Lagrangian integral along the samples (kinetic minus potential), composite
// Simpson on the sample grid.
inline double action_along(const HamiltonianSpec& spec, const Trajectory& traj) {
    if (traj.samples.size() < 2)
        throw std::domain_error("action_along: need at least two samples");
    std::vector<double> t, lagrangian;
    t.reserve(traj.samples.size());
    lagrangian.reserve(traj.samples.size());
    for (const auto& s : traj.samples) {
        t.push_back(s.time);
        lagrangian.push_back(kinetic_energy(spec, s.momenta) - potential_energy(spec, s.positions));
    }
    return simpson_nonuniform(t, lagrangian);
}

} // namespace pathmeasure
