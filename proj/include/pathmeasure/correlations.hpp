#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "pathmeasure/numeric.hpp"

namespace pathmeasure {

// ---------------------------------------------------------------------------
// Compactly supported 1D profiles
// ---------------------------------------------------------------------------

struct BoxProfile {
    double center = 0.0;
    double half_width = 0.5;
};

struct TruncatedGaussian {
    double center = 0.0;
    double sigma = 0.25;
    double half_width = 1.0; // support is [center - half_width, center + half_width]
};

using SpatialProfile = std::variant<BoxProfile, TruncatedGaussian>;

inline double profile_lower(const SpatialProfile& p) {
    return std::visit([](const auto& q) { return q.center - q.half_width; }, p);
}

inline double profile_upper(const SpatialProfile& p) {
    return std::visit([](const auto& q) { return q.center + q.half_width; }, p);
}

inline double profile_value(const SpatialProfile& p, double x) {
    if (const auto* box = std::get_if<BoxProfile>(&p)) {
        if (x < box->center - box->half_width || x > box->center + box->half_width)
            return 0.0;
        return 0.5 / box->half_width;
    }
    const auto& g = std::get<TruncatedGaussian>(p);
    if (x < g.center - g.half_width || x > g.center + g.half_width)
        return 0.0;
    const double z = (x - g.center) / g.sigma;
    const double raw = std::exp(-0.5 * z * z) / (g.sigma * std::sqrt(2.0 * std::numbers::pi));
    const double covered = std::erf(g.half_width / (g.sigma * std::sqrt(2.0)));
    return raw / covered;
}

inline void validate_profile(const SpatialProfile& p) {
    const bool ok = std::visit(
        [](const auto& q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, TruncatedGaussian>)
                return q.half_width > 0.0 && q.sigma > 0.0;
            else
                return q.half_width > 0.0;
        },
        p);
    if (!ok)
        throw std::domain_error("profile: widths must be positive");
}

// ---------------------------------------------------------------------------
// Collision model
// ---------------------------------------------------------------------------

enum class CorrelationFamily { post_only, pre_only, pre_post };
enum class CollisionStage { pre, post };

// 1D heavy-light elastic collision in the infinite-mass-ratio limit: the
// heavy particle never moves, the light one reflects off it. Densities are
// defined only outside the collision window (window_start, window_end).
struct CollisionModel {
    double heavy_mass = 10000.0;
    double light_mass = 1.0;
    double speed = 1.0; // light-particle speed v > 0
    SpatialProfile heavy_profile{BoxProfile{}};
    SpatialProfile light_profile{BoxProfile{}};
    double window_start = -10.0; // t_I < 0
    double window_end = 10.0;    // t_F > 0
    double mass_ratio_threshold = 100.0;

    void validate() const {
        if (!(heavy_mass > 0.0) || !(light_mass > 0.0))
            throw std::domain_error("CollisionModel: masses must be positive");
        if (heavy_mass / light_mass < mass_ratio_threshold)
            throw std::domain_error("CollisionModel: mass ratio below the heavy-light threshold");
        if (!(speed > 0.0))
            throw std::domain_error("CollisionModel: speed must be positive");
        if (!(window_start < 0.0) || !(window_end > 0.0))
            throw std::domain_error("CollisionModel: window must straddle zero");
        validate_profile(heavy_profile);
        validate_profile(light_profile);
        // Every collision in each family's ensemble must fall strictly inside
        // the window.
        const double lo1 = profile_lower(heavy_profile), hi1 = profile_upper(heavy_profile);
        const double lo2 = profile_lower(light_profile), hi2 = profile_upper(light_profile);
        const double earliest = std::min({(lo1 - hi2) / speed,   // post_only
                                          (-hi1 - hi2) / speed,  // pre_only
                                          -hi2 / speed});        // pre_post
        const double latest = std::max({(hi1 - lo2) / speed, (-lo1 - lo2) / speed, -lo2 / speed});
        if (!(window_start < earliest) || !(latest < window_end))
            throw std::domain_error(
                "CollisionModel: supports and speed place collisions outside the window");
    }
};

// ---------------------------------------------------------------------------
// Flow map
// ---------------------------------------------------------------------------

struct FlowState {
    double heavy_position = 0.0;
    double light_position = 0.0;
    int momentum_sign = +1; // +1 incoming (p2 = +m2 v), -1 reflected
};

// Light-particle state at time t for the launch configuration: heavy at rest
// at x1, light starting from x2 < x1 at time zero moving right at speed v.
inline FlowState collision_flow(const CollisionModel& model, double x1, double x2, double t) {
    if (x2 > x1)
        throw std::domain_error("collision_flow: light particle must start left of the heavy one");
    const double t_hit = (x1 - x2) / model.speed;
    FlowState s;
    s.heavy_position = x1;
    if (t < t_hit) {
        s.light_position = x2 + model.speed * t;
        s.momentum_sign = +1;
    } else {
        s.light_position = 2.0 * x1 - x2 - model.speed * t;
        s.momentum_sign = -1;
    }
    return s;
}

// Time-u flow applied to an arbitrary state (handles the single reflection in
// either time direction).
inline FlowState propagate_state(const CollisionModel& model, const FlowState& s, double u) {
    FlowState out;
    out.heavy_position = s.heavy_position;
    const double v = model.speed;
    if (s.momentum_sign > 0) {
        const double to_hit = (s.heavy_position - s.light_position) / v;
        if (u <= to_hit) {
            out.light_position = s.light_position + v * u;
            out.momentum_sign = +1;
        } else {
            out.light_position = 2.0 * s.heavy_position - s.light_position - v * u;
            out.momentum_sign = -1;
        }
    } else {
        const double since_hit = (s.heavy_position - s.light_position) / v; // >= 0
        if (u >= -since_hit) {
            out.light_position = s.light_position - v * u;
            out.momentum_sign = -1;
        } else {
            out.light_position = 2.0 * s.heavy_position - s.light_position + v * u;
            out.momentum_sign = +1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// The three collision densities
// ---------------------------------------------------------------------------

namespace detail {

// x2 = alpha * x1 + zeta_sign * zeta + time_sign * v * t, with zeta drawn
// from the light profile. Encodes all six displayed density arguments.
struct DensityLayout {
    double alpha = 0.0;
    double zeta_sign = 1.0;
    double time_sign = 1.0;
};

inline DensityLayout density_layout(CorrelationFamily family, CollisionStage stage) {
    if (stage == CollisionStage::pre) {
        switch (family) {
        case CorrelationFamily::post_only: return {0.0, +1.0, +1.0};
        case CorrelationFamily::pre_only:  return {2.0, +1.0, +1.0};
        case CorrelationFamily::pre_post:  return {1.0, +1.0, +1.0};
        }
    } else {
        switch (family) {
        case CorrelationFamily::post_only: return {2.0, -1.0, -1.0};
        case CorrelationFamily::pre_only:  return {0.0, -1.0, -1.0};
        case CorrelationFamily::pre_post:  return {1.0, -1.0, -1.0};
        }
    }
    throw std::domain_error("density_layout: unknown family");
}

inline void check_stage_time(const CollisionModel& model, double t, CollisionStage stage) {
    if (stage == CollisionStage::pre && !(t < model.window_start))
        throw std::domain_error("collision density: pre branch requires t < window_start");
    if (stage == CollisionStage::post && !(t > model.window_end))
        throw std::domain_error("collision density: post branch requires t > window_end");
}

} // namespace detail

// Spatial part of the phase-space density for the given family, evaluated on
// its pre or post momentum branch (the momentum delta factors stay symbolic).
inline double collision_density(const CollisionModel& model, CorrelationFamily family, double x1,
                                double x2, double t, CollisionStage stage) {
    detail::check_stage_time(model, t, stage);
    const auto layout = detail::density_layout(family, stage);
    // Invert x2 = alpha x1 + zeta_sign * zeta + time_sign * v t for zeta.
    const double zeta =
        (x2 - layout.alpha * x1 - layout.time_sign * model.speed * t) / layout.zeta_sign;
    return profile_value(model.heavy_profile, x1) * profile_value(model.light_profile, zeta);
}

// Deterministic sample points (x1, x2) spread over the density support at
// time t, padded by `margin` of the support widths.
inline std::vector<std::pair<double, double>>
support_sample_points(const CollisionModel& model, CorrelationFamily family, double t,
                      std::size_t count, double margin = 0.05) {
    const CollisionStage stage =
        t < model.window_start ? CollisionStage::pre : CollisionStage::post;
    detail::check_stage_time(model, t, stage);
    const auto layout = detail::density_layout(family, stage);
    const double lo1 = profile_lower(model.heavy_profile);
    const double hi1 = profile_upper(model.heavy_profile);
    const double lo2 = profile_lower(model.light_profile);
    const double hi2 = profile_upper(model.light_profile);
    const double pad1 = margin * (hi1 - lo1);
    const double pad2 = margin * (hi2 - lo2);
    std::vector<std::pair<double, double>> points;
    points.reserve(count);
    for (const auto& [u, w] : low_discrepancy_2d(count)) {
        const double x1 = lo1 - pad1 + (hi1 - lo1 + 2.0 * pad1) * u;
        const double zeta = lo2 - pad2 + (hi2 - lo2 + 2.0 * pad2) * w;
        const double x2 =
            layout.alpha * x1 + layout.zeta_sign * zeta + layout.time_sign * model.speed * t;
        points.emplace_back(x1, x2);
    }
    return points;
}

// Max over the sample points of |eta(s, t) - eta(G_u(s), t + u)|. Both times
// must sit outside the collision window; the flow map carries the state
// across it when the transport straddles.
inline double liouville_residual(const CollisionModel& model, CorrelationFamily family,
                                 std::span<const std::pair<double, double>> points, double t,
                                 double u) {
    const CollisionStage stage_from =
        t < model.window_start ? CollisionStage::pre : CollisionStage::post;
    const double t_to = t + u;
    const CollisionStage stage_to =
        t_to < model.window_start ? CollisionStage::pre : CollisionStage::post;
    detail::check_stage_time(model, t, stage_from);
    detail::check_stage_time(model, t_to, stage_to);

    double worst = 0.0;
    for (const auto& [x1, x2] : points) {
        FlowState s;
        s.heavy_position = x1;
        s.light_position = x2;
        s.momentum_sign = stage_from == CollisionStage::pre ? +1 : -1;
        const FlowState moved = propagate_state(model, s, u);
        const CollisionStage stage_moved = moved.momentum_sign > 0 ? CollisionStage::pre
                                                                   : CollisionStage::post;
        double transported;
        if (stage_moved != stage_to) {
            // The branch tags disagree: the moved state carries zero density
            // on the target branch.
            transported = 0.0;
        } else {
            transported = collision_density(model, family, moved.heavy_position,
                                            moved.light_position, t_to, stage_to);
        }
        const double direct = collision_density(model, family, x1, x2, t, stage_from);
        worst = std::max(worst, std::abs(direct - transported));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Correlation statistics
// ---------------------------------------------------------------------------

namespace detail {

// Tensor Gauss-Legendre over the (x1, zeta) support box; the integrand sees
// the joint density through collision_density at the mapped (x1, x2).
template <class F>
double quadrature_over_support(const CollisionModel& model, CorrelationFamily family,
                               CollisionStage stage, double t, std::size_t order, F&& weighted) {
    const auto layout = density_layout(family, stage);
    const QuadratureRule rule = gauss_legendre(order);
    const double lo1 = profile_lower(model.heavy_profile);
    const double hi1 = profile_upper(model.heavy_profile);
    const double lo2 = profile_lower(model.light_profile);
    const double hi2 = profile_upper(model.light_profile);
    const double mid1 = 0.5 * (lo1 + hi1), half1 = 0.5 * (hi1 - lo1);
    const double mid2 = 0.5 * (lo2 + hi2), half2 = 0.5 * (hi2 - lo2);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double x1 = mid1 + half1 * rule.nodes[i];
        double inner = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            const double zeta = mid2 + half2 * rule.nodes[j];
            const double x2 =
                layout.alpha * x1 + layout.zeta_sign * zeta + layout.time_sign * model.speed * t;
            const double density = collision_density(model, family, x1, x2, t, stage);
            inner += rule.weights[j] * weighted(x1, x2, density);
        }
        sum += rule.weights[i] * inner;
    }
    // |dx2/dzeta| = 1 for every family, so the Jacobian is the box area factor.
    return sum * half1 * half2;
}

} // namespace detail

// Cov(x1, x2) under the family's joint spatial law at time t, by tensor
// Gauss-Legendre (order 64 per axis) over the compact supports.
inline double correlation_statistic(const CollisionModel& model, CorrelationFamily family,
                                    CollisionStage stage, double t, std::size_t order = 64) {
    model.validate();
    const double mass = detail::quadrature_over_support(
        model, family, stage, t, order, [](double, double, double d) { return d; });
    const double ex1 = detail::quadrature_over_support(
        model, family, stage, t, order, [](double x1, double, double d) { return x1 * d; });
    const double ex2 = detail::quadrature_over_support(
        model, family, stage, t, order, [](double, double x2, double d) { return x2 * d; });
    const double ex12 = detail::quadrature_over_support(
        model, family, stage, t, order, [](double x1, double x2, double d) { return x1 * x2 * d; });
    return ex12 / mass - (ex1 / mass) * (ex2 / mass);
}

// Total mass of the joint law (should be 1 at every valid time).
inline double density_normalization(const CollisionModel& model, CorrelationFamily family,
                                    CollisionStage stage, double t, std::size_t order = 64) {
    return detail::quadrature_over_support(model, family, stage, t, order,
                                           [](double, double, double d) { return d; });
}

// Marginal of the joint law in the heavy coordinate at x1.
inline double heavy_marginal(const CollisionModel& model, CorrelationFamily family,
                             CollisionStage stage, double t, double x1, std::size_t order = 64) {
    const auto layout = detail::density_layout(family, stage);
    const QuadratureRule rule = gauss_legendre(order);
    const double lo2 = profile_lower(model.light_profile);
    const double hi2 = profile_upper(model.light_profile);
    const double mid = 0.5 * (lo2 + hi2), half = 0.5 * (hi2 - lo2);
    double sum = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const double zeta = mid + half * rule.nodes[j];
        const double x2 =
            layout.alpha * x1 + layout.zeta_sign * zeta + layout.time_sign * model.speed * t;
        sum += rule.weights[j] * collision_density(model, family, x1, x2, t, stage);
    }
    return sum * half;
}

} // namespace pathmeasure
