#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <vector>

#include "pathmeasure/errors.hpp"

namespace pathmeasure {

// ---------------------------------------------------------------------------
// Radial interaction forms
// ---------------------------------------------------------------------------

// V(r) = strength * exp(-r / screening_length) / r
struct ScreenedCoulomb {
    double strength = 1.0;
    double screening_length = 1.0;
};

// V(r) = stiffness * r^2 / 2
struct HookeSpring {
    double stiffness = 1.0;
};

// Radial samples on (0, r_max], natural-cubic-spline interpolated, zero
// beyond r_max and linearly extended below the first node (orbits may dip
// under it). The tail must already have decayed at r_max.
class TabulatedRadial {
  public:
    TabulatedRadial(std::vector<double> radius, std::vector<double> value)
        : r_(std::move(radius)), v_(std::move(value)) {
        if (r_.size() != v_.size() || r_.size() < 4)
            throw std::domain_error("TabulatedRadial: need at least 4 matching samples");
        for (std::size_t i = 0; i < r_.size(); ++i) {
            if (r_[i] <= 0.0)
                throw std::domain_error("TabulatedRadial: radii must be positive");
            if (i > 0 && r_[i] <= r_[i - 1])
                throw std::domain_error("TabulatedRadial: radii must be strictly increasing");
        }
        double vmax = 0.0;
        for (double v : v_)
            vmax = std::max(vmax, std::abs(v));
        if (vmax > 0.0 && std::abs(v_.back()) > 1e-3 * vmax)
            throw std::domain_error("TabulatedRadial: samples must decay at r_max");
        build_spline();
        slope_front_ = derivative_on_spline(r_.front());
    }

    double r_min() const { return r_.front(); }
    double r_max() const { return r_.back(); }

    double value(double r) const {
        if (r >= r_.back())
            return 0.0;
        if (r < r_.front())
            return v_.front() + (r - r_.front()) * slope_front_;
        const std::size_t i = locate(r);
        const double h = r_[i + 1] - r_[i];
        const double a = (r_[i + 1] - r) / h;
        const double b = (r - r_[i]) / h;
        return a * v_[i] + b * v_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

    double derivative(double r) const {
        if (r >= r_.back())
            return 0.0;
        if (r < r_.front())
            return slope_front_;
        return derivative_on_spline(r);
    }

    double second_derivative(double r) const {
        if (r >= r_.back() || r < r_.front())
            return 0.0;
        const std::size_t i = locate(r);
        const double h = r_[i + 1] - r_[i];
        const double a = (r_[i + 1] - r) / h;
        const double b = (r - r_[i]) / h;
        return a * m_[i] + b * m_[i + 1];
    }

  private:
    void build_spline() {
        const std::size_t n = r_.size();
        m_.assign(n, 0.0);
        std::vector<double> c(n, 0.0), d(n, 0.0);
        // Natural spline tridiagonal sweep.
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = r_[i] - r_[i - 1];
            const double h1 = r_[i + 1] - r_[i];
            const double rhs =
                6.0 * ((v_[i + 1] - v_[i]) / h1 - (v_[i] - v_[i - 1]) / h0);
            const double diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = d[i] - c[i] * m_[i + 1];
            if (i == 1)
                break;
        }
    }

    double derivative_on_spline(double r) const {
        const std::size_t i = locate(r);
        const double h = r_[i + 1] - r_[i];
        const double a = (r_[i + 1] - r) / h;
        const double b = (r - r_[i]) / h;
        return (v_[i + 1] - v_[i]) / h +
               ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
    }

    std::size_t locate(double r) const {
        auto it = std::upper_bound(r_.begin(), r_.end(), r);
        std::size_t i = static_cast<std::size_t>(it - r_.begin());
        if (i > 0)
            --i;
        if (i + 1 >= r_.size())
            i = r_.size() - 2;
        return i;
    }

    std::vector<double> r_, v_, m_;
    double slope_front_ = 0.0;
};

using RadialForm = std::variant<ScreenedCoulomb, HookeSpring, TabulatedRadial>;

inline double radial_value(const RadialForm& form, double r) {
    return std::visit(
        [r](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ScreenedCoulomb>)
                return f.strength * std::exp(-r / f.screening_length) / r;
            else if constexpr (std::is_same_v<T, HookeSpring>)
                return 0.5 * f.stiffness * r * r;
            else
                return f.value(r);
        },
        form);
}

inline double radial_derivative(const RadialForm& form, double r) {
    return std::visit(
        [r](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ScreenedCoulomb>)
                return -f.strength * std::exp(-r / f.screening_length) *
                       (1.0 / (f.screening_length * r) + 1.0 / (r * r));
            else if constexpr (std::is_same_v<T, HookeSpring>)
                return f.stiffness * r;
            else
                return f.derivative(r);
        },
        form);
}

inline double radial_second_derivative(const RadialForm& form, double r) {
    return std::visit(
        [r](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ScreenedCoulomb>) {
                const double a = f.screening_length;
                return f.strength * std::exp(-r / a) *
                       (1.0 / (a * a * r) + 2.0 / (a * r * r) + 2.0 / (r * r * r));
            } else if constexpr (std::is_same_v<T, HookeSpring>) {
                return f.stiffness;
            } else {
                return f.second_derivative(r);
            }
        },
        form);
}

// Only the screened-Coulomb form diverges at contact; the spring is smooth
// and the tabulated form is bounded by its linear core extension.
inline bool radial_singular_at_origin(const RadialForm& form) {
    return std::holds_alternative<ScreenedCoulomb>(form);
}

// ---------------------------------------------------------------------------
// System specification and phase-space state
// ---------------------------------------------------------------------------

struct PairInteraction {
    std::size_t first = 0;
    std::size_t second = 1;
    RadialForm form;
};

// Masses plus the interaction layout: per-particle isotropic wells, pairwise
// central forms, and an optional external central field (single particle).
struct HamiltonianSpec {
    std::vector<double> masses;
    int dimension = 1;
    std::vector<double> trap_omega;      // empty = no wells
    std::vector<PairInteraction> pairs;
    std::optional<RadialForm> external;
    double r_min = 1e-8;                 // singularity guard for singular forms

    std::size_t particle_count() const { return masses.size(); }
    std::size_t coord_count() const { return masses.size() * static_cast<std::size_t>(dimension); }

    void validate() const {
        if (masses.empty())
            throw std::domain_error("HamiltonianSpec: no particles");
        for (double m : masses)
            if (!(m > 0.0))
                throw std::domain_error("HamiltonianSpec: masses must be positive");
        if (dimension < 1 || dimension > 3)
            throw std::domain_error("HamiltonianSpec: dimension must be 1, 2 or 3");
        if (!trap_omega.empty() && trap_omega.size() != masses.size())
            throw std::domain_error("HamiltonianSpec: trap_omega size mismatch");
        for (const auto& p : pairs) {
            if (p.first >= masses.size() || p.second >= masses.size() || p.first == p.second)
                throw std::domain_error("HamiltonianSpec: bad pair indices");
            if (const auto* sc = std::get_if<ScreenedCoulomb>(&p.form))
                if (!(sc->screening_length > 0.0))
                    throw std::domain_error("HamiltonianSpec: screening length must be positive");
        }
        if (external) {
            if (masses.size() != 1)
                throw std::domain_error(
                    "HamiltonianSpec: external central field requires a one-particle system");
            if (const auto* sc = std::get_if<ScreenedCoulomb>(&*external))
                if (!(sc->screening_length > 0.0))
                    throw std::domain_error("HamiltonianSpec: screening length must be positive");
        }
        if (!(r_min > 0.0))
            throw std::domain_error("HamiltonianSpec: r_min must be positive");
    }
};

struct PhasePoint {
    std::vector<double> positions;
    std::vector<double> momenta;
    double time = 0.0;
};

struct Trajectory {
    std::vector<PhasePoint> samples;
    std::shared_ptr<const HamiltonianSpec> spec;

    const PhasePoint& front() const { return samples.front(); }
    const PhasePoint& back() const { return samples.back(); }
};

// ---------------------------------------------------------------------------
// Energies, forces, Hessian
// ---------------------------------------------------------------------------

namespace detail {

inline double pair_distance(std::span<const double> x, std::size_t i, std::size_t j, int dim,
                            double* delta) {
    double r2 = 0.0;
    for (int k = 0; k < dim; ++k) {
        delta[k] = x[i * dim + k] - x[j * dim + k];
        r2 += delta[k] * delta[k];
    }
    return std::sqrt(r2);
}

[[noreturn]] inline void throw_singularity(std::size_t i, std::size_t j, double r, double t) {
    std::ostringstream msg;
    msg << "integration hit singularity guard: pair (" << i << "," << j << ") separation " << r
        << " below r_min at time " << t;
    throw IntegrationError(msg.str());
}

} // namespace detail

inline double potential_energy(const HamiltonianSpec& spec, std::span<const double> x) {
    const int dim = spec.dimension;
    double v = 0.0;
    if (!spec.trap_omega.empty()) {
        for (std::size_t i = 0; i < spec.masses.size(); ++i) {
            double r2 = 0.0;
            for (int k = 0; k < dim; ++k) {
                const double c = x[i * dim + k];
                r2 += c * c;
            }
            v += 0.5 * spec.masses[i] * spec.trap_omega[i] * spec.trap_omega[i] * r2;
        }
    }
    double delta[3];
    for (const auto& p : spec.pairs) {
        const double r = detail::pair_distance(x, p.first, p.second, dim, delta);
        if (radial_singular_at_origin(p.form) && r < spec.r_min)
            detail::throw_singularity(p.first, p.second, r, 0.0);
        v += radial_value(p.form, r);
    }
    if (spec.external) {
        double r2 = 0.0;
        for (int k = 0; k < dim; ++k)
            r2 += x[k] * x[k];
        const double r = std::sqrt(r2);
        if (radial_singular_at_origin(*spec.external) && r < spec.r_min)
            detail::throw_singularity(0, 0, r, 0.0);
        v += radial_value(*spec.external, r);
    }
    return v;
}

// Accumulates  -dV/dx  into `force` (not cleared first); `t` only labels the
// singularity diagnostic.
inline void accumulate_forces(const HamiltonianSpec& spec, std::span<const double> x, double t,
                              std::span<double> force) {
    const int dim = spec.dimension;
    if (!spec.trap_omega.empty()) {
        for (std::size_t i = 0; i < spec.masses.size(); ++i) {
            const double k = spec.masses[i] * spec.trap_omega[i] * spec.trap_omega[i];
            for (int c = 0; c < dim; ++c)
                force[i * dim + c] -= k * x[i * dim + c];
        }
    }
    double delta[3];
    for (const auto& p : spec.pairs) {
        const double r = detail::pair_distance(x, p.first, p.second, dim, delta);
        if (radial_singular_at_origin(p.form) && r < spec.r_min)
            detail::throw_singularity(p.first, p.second, r, t);
        if (r == 0.0)
            continue; // coincident smooth forms exert no directed force
        // g = V'(r)/r stays finite for the spring at r = 0.
        double g;
        if (const auto* hs = std::get_if<HookeSpring>(&p.form))
            g = hs->stiffness;
        else
            g = radial_derivative(p.form, r) / r;
        for (int c = 0; c < dim; ++c) {
            const double f = -g * delta[c];
            force[p.first * dim + c] += f;
            force[p.second * dim + c] -= f;
        }
    }
    if (spec.external) {
        double r2 = 0.0;
        for (int k = 0; k < dim; ++k)
            r2 += x[k] * x[k];
        const double r = std::sqrt(r2);
        if (radial_singular_at_origin(*spec.external) && r < spec.r_min)
            detail::throw_singularity(0, 0, r, t);
        if (r > 0.0) {
            double g;
            if (const auto* hs = std::get_if<HookeSpring>(&*spec.external))
                g = hs->stiffness;
            else
                g = radial_derivative(*spec.external, r) / r;
            for (int c = 0; c < dim; ++c)
                force[c] -= g * x[c];
        }
    }
}

inline double kinetic_energy(const HamiltonianSpec& spec, std::span<const double> p) {
    const int dim = spec.dimension;
    double t = 0.0;
    for (std::size_t i = 0; i < spec.masses.size(); ++i) {
        double p2 = 0.0;
        for (int k = 0; k < dim; ++k)
            p2 += p[i * dim + k] * p[i * dim + k];
        t += 0.5 * p2 / spec.masses[i];
    }
    return t;
}

inline double total_energy(const HamiltonianSpec& spec, std::span<const double> x,
                           std::span<const double> p) {
    return kinetic_energy(spec, p) + potential_energy(spec, x);
}

inline double total_energy(const HamiltonianSpec& spec, const PhasePoint& s) {
    return total_energy(spec, s.positions, s.momenta);
}

namespace detail {

// Adds the radial-form block  phi'' rhat rhat^T + (phi'/r)(I - rhat rhat^T)
// into the Hessian for the coordinate blocks (i, j).
inline void add_radial_hessian_block(Eigen::MatrixXd& h, const RadialForm& form, const double* delta,
                                     double r, int dim, std::size_t i, std::size_t j, bool pair) {
    const double d1 = radial_derivative(form, r);
    const double d2 = radial_second_derivative(form, r);
    const double g = d1 / r;
    for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) {
            const double nab = delta[a] * delta[b] / (r * r);
            const double block = d2 * nab + g * ((a == b ? 1.0 : 0.0) - nab);
            h(static_cast<Eigen::Index>(i * dim + a), static_cast<Eigen::Index>(i * dim + b)) +=
                block;
            if (pair) {
                h(static_cast<Eigen::Index>(j * dim + a), static_cast<Eigen::Index>(j * dim + b)) +=
                    block;
                h(static_cast<Eigen::Index>(i * dim + a), static_cast<Eigen::Index>(j * dim + b)) -=
                    block;
                h(static_cast<Eigen::Index>(j * dim + a), static_cast<Eigen::Index>(i * dim + b)) -=
                    block;
            }
        }
    }
}

} // namespace detail

// Hessian of the potential at configuration x (used by the variational flow).
inline void potential_hessian(const HamiltonianSpec& spec, std::span<const double> x,
                              Eigen::MatrixXd& h) {
    const int dim = spec.dimension;
    const auto n = static_cast<Eigen::Index>(spec.coord_count());
    h.setZero(n, n);
    if (!spec.trap_omega.empty()) {
        for (std::size_t i = 0; i < spec.masses.size(); ++i) {
            const double k = spec.masses[i] * spec.trap_omega[i] * spec.trap_omega[i];
            for (int c = 0; c < dim; ++c)
                h(static_cast<Eigen::Index>(i * dim + c), static_cast<Eigen::Index>(i * dim + c)) +=
                    k;
        }
    }
    double delta[3];
    for (const auto& p : spec.pairs) {
        const double r = detail::pair_distance(x, p.first, p.second, dim, delta);
        if (const auto* hs = std::get_if<HookeSpring>(&p.form); hs && r == 0.0) {
            // Spring block is k*I at coincidence.
            for (int c = 0; c < dim; ++c) {
                const auto ia = static_cast<Eigen::Index>(p.first * dim + c);
                const auto ja = static_cast<Eigen::Index>(p.second * dim + c);
                h(ia, ia) += hs->stiffness;
                h(ja, ja) += hs->stiffness;
                h(ia, ja) -= hs->stiffness;
                h(ja, ia) -= hs->stiffness;
            }
            continue;
        }
        if (radial_singular_at_origin(p.form) && r < spec.r_min)
            detail::throw_singularity(p.first, p.second, r, 0.0);
        if (r > 0.0)
            detail::add_radial_hessian_block(h, p.form, delta, r, dim, p.first, p.second, true);
    }
    if (spec.external) {
        for (int c = 0; c < dim; ++c)
            delta[c] = x[c];
        double r2 = 0.0;
        for (int c = 0; c < dim; ++c)
            r2 += delta[c] * delta[c];
        const double r = std::sqrt(r2);
        if (radial_singular_at_origin(*spec.external) && r < spec.r_min)
            detail::throw_singularity(0, 0, r, 0.0);
        if (r > 0.0)
            detail::add_radial_hessian_block(h, *spec.external, delta, r, dim, 0, 0, false);
    }
}

// Largest relative excursion of the energy along the trajectory.
inline double relative_energy_drift(const Trajectory& traj) {
    if (traj.samples.size() < 2 || !traj.spec)
        return 0.0;
    const double e0 = total_energy(*traj.spec, traj.front());
    const double scale = std::max(std::abs(e0), 1e-12);
    double worst = 0.0;
    for (const auto& s : traj.samples)
        worst = std::max(worst, std::abs(total_energy(*traj.spec, s) - e0));
    return worst / scale;
}

} // namespace pathmeasure
