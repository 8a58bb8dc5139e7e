#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "pathmeasure/errors.hpp"
#include "pathmeasure/hamiltonian.hpp"
#include "pathmeasure/integrators.hpp"
#include "pathmeasure/numeric.hpp"

namespace pathmeasure {

// Impenetrable sphere; served analytically, never integrated.
struct HardSphere {
    double radius = 1.0;
};

using ScatterPotential = std::variant<HardSphere, ScreenedCoulomb, TabulatedRadial>;

enum class DeflectionFlag { ok, orbiting, no_scatter };

struct DeflectionSample {
    double b = 0.0;
    double theta = 0.0;      // scattering angle in (0, pi]
    double dtheta_db = 0.0;
    int branch_id = 0;
    DeflectionFlag flag = DeflectionFlag::ok;
};

struct ScatterSettings {
    double mass = 1.0;
    double fd_step = 1e-4;            // b displacement for dtheta/db differences
    double far_field_fraction = 1e-9; // |V| <= fraction * E defines the start radius
    double time_limit_factor = 50.0;  // orbiting declared beyond this multiple of the crossing time
    StepControl control{StepControl::Method::adaptive, 1e-11, 1e-13, 1e-3, 1, 200000000};
};

namespace detail {

inline double interaction_radius(const ScatterPotential& pot, double energy,
                                 const ScatterSettings& settings) {
    if (const auto* hs = std::get_if<HardSphere>(&pot))
        return hs->radius;
    if (const auto* tab = std::get_if<TabulatedRadial>(&pot))
        return tab->r_max();
    const auto& sc = std::get<ScreenedCoulomb>(pot);
    double r = sc.screening_length;
    const double cut = settings.far_field_fraction * energy;
    while (std::abs(radial_value(RadialForm{sc}, r)) > cut)
        r *= 1.25;
    return r;
}

inline HamiltonianSpec central_problem(const ScatterPotential& pot, double mass) {
    HamiltonianSpec spec;
    spec.masses = {mass};
    spec.dimension = 2;
    if (const auto* sc = std::get_if<ScreenedCoulomb>(&pot))
        spec.external = RadialForm{*sc};
    else if (const auto* tab = std::get_if<TabulatedRadial>(&pot))
        spec.external = RadialForm{*tab};
    else
        throw std::domain_error("hard sphere cannot be integrated");
    return spec;
}

// Cumulative rotation of the momentum direction along the samples.
inline double unwrap_momentum_angle(double& angle, double prev_px, double prev_py, double px,
                                    double py) {
    const double a0 = std::atan2(prev_py, prev_px);
    const double a1 = std::atan2(py, px);
    double d = a1 - a0;
    while (d > std::numbers::pi)
        d -= 2.0 * std::numbers::pi;
    while (d < -std::numbers::pi)
        d += 2.0 * std::numbers::pi;
    angle += d;
    return angle;
}

// Fold a signed cumulative deflection into the observable angle (0, pi].
inline double fold_deflection(double big_theta) {
    double t = std::fmod(std::abs(big_theta), 2.0 * std::numbers::pi);
    if (t > std::numbers::pi)
        t = 2.0 * std::numbers::pi - t;
    return t;
}

} // namespace detail

// Scattering angle for one impact parameter from trajectory integration of
// the central problem (hard sphere analytic). The derivative field is filled
// by the scan or by deflection_with_slope.
inline DeflectionSample deflection(const ScatterPotential& pot, double energy, double b,
                                   const ScatterSettings& settings = {}) {
    if (!(energy > 0.0))
        throw std::domain_error("deflection: energy must be positive");
    if (b < 0.0)
        throw std::domain_error("deflection: impact parameter must be nonnegative");

    DeflectionSample out;
    out.b = b;

    if (const auto* hs = std::get_if<HardSphere>(&pot)) {
        if (b >= hs->radius) {
            out.flag = DeflectionFlag::no_scatter;
            return out;
        }
        out.theta = 2.0 * std::acos(b / hs->radius);
        out.dtheta_db = -2.0 / std::sqrt(hs->radius * hs->radius - b * b);
        return out;
    }

    const HamiltonianSpec spec = detail::central_problem(pot, settings.mass);
    const double start_r = detail::interaction_radius(pot, energy, settings);
    if (b >= start_r) {
        out.flag = DeflectionFlag::no_scatter;
        return out;
    }
    const double speed = std::sqrt(2.0 * energy / settings.mass);
    const double crossing_time = 2.0 * start_r / speed;
    const double t_limit = settings.time_limit_factor * crossing_time;

    PhasePoint state;
    state.positions = {-std::sqrt(start_r * start_r - b * b), b};
    state.momenta = {settings.mass * speed, 0.0};
    state.time = 0.0;

    double big_theta = 0.0;
    double prev_px = state.momenta[0], prev_py = state.momenta[1];
    const double chunk = crossing_time / 8.0;
    try {
        while (true) {
            Trajectory piece = integrate(spec, state, state.time + chunk, settings.control);
            for (std::size_t i = 1; i < piece.samples.size(); ++i) {
                const auto& s = piece.samples[i];
                detail::unwrap_momentum_angle(big_theta, prev_px, prev_py, s.momenta[0],
                                              s.momenta[1]);
                prev_px = s.momenta[0];
                prev_py = s.momenta[1];
            }
            state = piece.back();
            const double r = std::hypot(state.positions[0], state.positions[1]);
            const double radial_flux =
                state.positions[0] * state.momenta[0] + state.positions[1] * state.momenta[1];
            if (r >= start_r && radial_flux > 0.0)
                break;
            if (state.time > t_limit) {
                out.flag = DeflectionFlag::orbiting;
                return out;
            }
        }
    } catch (const IntegrationError&) {
        // Plunged through the singularity guard: classically captured.
        out.flag = DeflectionFlag::orbiting;
        return out;
    }

    if (b == 0.0) {
        // Momentum passes through zero head-on; symmetry decides the angle.
        out.theta = state.momenta[0] < 0.0 ? std::numbers::pi : 0.0;
        if (out.theta == 0.0)
            out.flag = DeflectionFlag::no_scatter;
        return out;
    }
    out.theta = detail::fold_deflection(big_theta);
    if (out.theta <= 0.0)
        out.flag = DeflectionFlag::no_scatter;
    return out;
}

// Same evaluation plus dtheta/db by central differences.
inline DeflectionSample deflection_with_slope(const ScatterPotential& pot, double energy, double b,
                                              const ScatterSettings& settings = {}) {
    DeflectionSample out = deflection(pot, energy, b, settings);
    if (out.flag != DeflectionFlag::ok)
        return out;
    const double h = settings.fd_step * (1.0 + b);
    const double b_lo = std::max(b - h, 0.0);
    const DeflectionSample plus = deflection(pot, energy, b + h, settings);
    const DeflectionSample minus = deflection(pot, energy, b_lo, settings);
    if (plus.flag == DeflectionFlag::ok && minus.flag == DeflectionFlag::ok)
        out.dtheta_db = (plus.theta - minus.theta) / (b + h - b_lo);
    return out;
}

// ---------------------------------------------------------------------------
// Scan, monotone segmentation, branch inversion
// ---------------------------------------------------------------------------

struct GuardBands {
    double rainbow_slope = 1e-3;                        // |dtheta/db| below this is rainbow
    double glory_min = 1.0 * std::numbers::pi / 180.0;  // theta below 1 degree
    double glory_max = 179.0 * std::numbers::pi / 180.0;
};

struct BranchInversion {
    double b = 0.0;
    double dtheta_db = 0.0;
    int branch_id = 0;
};

enum class AngleFlag { ok, rainbow, glory, forward_divergent, no_branch };

struct InversionResult {
    std::vector<BranchInversion> branches;
    AngleFlag flag = AngleFlag::ok;
};

// Deflection function sampled on a b grid with monotone segments labeled;
// branch inversion refines on the segments with fresh evaluations.
class DeflectionScan {
  public:
    DeflectionScan(ScatterPotential pot, double energy, double b_max, std::size_t points,
                   ScatterSettings settings = {})
        : pot_(std::move(pot)), energy_(energy), settings_(settings) {
        if (points < 8)
            throw std::domain_error("DeflectionScan: need at least 8 scan points");
        if (!(b_max > 0.0))
            throw std::domain_error("DeflectionScan: b_max must be positive");
        samples_.reserve(points);
        for (std::size_t i = 0; i < points; ++i) {
            const double b = b_max * static_cast<double>(i) / static_cast<double>(points - 1);
            DeflectionSample s = deflection(pot_, energy_, b, settings_);
            samples_.push_back(s);
        }
        // Grid-difference slopes where the evaluation gave none (analytic
        // forms fill their own), then monotone segmentation over ok samples.
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            if (samples_[i].flag != DeflectionFlag::ok || samples_[i].dtheta_db != 0.0)
                continue;
            const std::size_t lo = (i == 0) ? i : i - 1;
            const std::size_t hi = (i + 1 == samples_.size()) ? i : i + 1;
            if (lo != hi && samples_[lo].flag == DeflectionFlag::ok &&
                samples_[hi].flag == DeflectionFlag::ok)
                samples_[i].dtheta_db = (samples_[hi].theta - samples_[lo].theta) /
                                        (samples_[hi].b - samples_[lo].b);
        }
        segment();
        for (std::size_t j = 0; j < segments_.size(); ++j)
            for (std::size_t i = segments_[j].first; i <= segments_[j].second; ++i)
                samples_[i].branch_id = static_cast<int>(j);
    }

    const std::vector<DeflectionSample>& samples() const { return samples_; }
    double energy() const { return energy_; }
    const ScatterPotential& potential() const { return pot_; }
    const ScatterSettings& settings() const { return settings_; }
    std::size_t segment_count() const { return segments_.size(); }

    DeflectionSample evaluate(double b) const { return deflection(pot_, energy_, b, settings_); }

    // All (b_i, |db/dtheta|_i) branches attaining theta, one per monotone
    // segment whose range covers it.
    InversionResult invert(double theta, const GuardBands& guard = {}) const {
        InversionResult result;
        if (!(theta > 0.0) || theta > std::numbers::pi)
            throw std::domain_error("invert: theta outside (0, pi]");
        int id = 0;
        for (const auto& seg : segments_) {
            const double lo = std::min(samples_[seg.first].theta, samples_[seg.second].theta);
            const double hi = std::max(samples_[seg.first].theta, samples_[seg.second].theta);
            if (theta < lo || theta > hi) {
                ++id;
                continue;
            }
            const double b = refine_on_segment(seg, theta);
            const double slope = slope_at(b);
            if (std::abs(slope) < guard.rainbow_slope)
                result.flag = AngleFlag::rainbow;
            result.branches.push_back({b, slope, id});
            ++id;
        }
        if (result.branches.empty() && result.flag == AngleFlag::ok) {
            // Between the sampled maximum and the true extremum the scan has
            // no bracket; angles there sit in the rainbow guard band.
            if (near_rainbow_apex(theta)) {
                result.flag = AngleFlag::rainbow;
                return result;
            }
            // Attained only beyond the scan (long-range tail) or not at all.
            const DeflectionSample& tail = *last_ok();
            result.flag = theta < tail.theta ? AngleFlag::forward_divergent : AngleFlag::no_branch;
        }
        return result;
    }

  private:
    struct Segment {
        std::size_t first, second; // inclusive sample index range
    };

    const DeflectionSample* last_ok() const {
        for (auto it = samples_.rbegin(); it != samples_.rend(); ++it)
            if (it->flag == DeflectionFlag::ok)
                return &*it;
        throw std::domain_error("DeflectionScan: no valid samples");
    }

    // Does theta fall between a segment-boundary sample and the parabolic
    // apex estimate of the extremum there?
    bool near_rainbow_apex(double theta) const {
        for (std::size_t j = 0; j + 1 < segments_.size(); ++j) {
            const std::size_t i = segments_[j].second;
            if (segments_[j + 1].first != i || i == 0 || i + 1 >= samples_.size())
                continue;
            const DeflectionSample& a = samples_[i - 1];
            const DeflectionSample& m = samples_[i];
            const DeflectionSample& z = samples_[i + 1];
            if (a.flag != DeflectionFlag::ok || m.flag != DeflectionFlag::ok ||
                z.flag != DeflectionFlag::ok)
                continue;
            const double curvature = z.theta - 2.0 * m.theta + a.theta;
            if (curvature == 0.0)
                continue;
            const double shift = 0.5 * (a.theta - z.theta) / curvature;
            const double apex = m.theta - 0.25 * (a.theta - z.theta) * shift;
            const double lo = std::min(apex, m.theta), hi = std::max(apex, m.theta);
            if (theta >= lo && theta <= hi)
                return true;
        }
        return false;
    }

    void segment() {
        // Split the ok samples into maximal runs of one slope sign.
        std::vector<std::size_t> ok;
        for (std::size_t i = 0; i < samples_.size(); ++i)
            if (samples_[i].flag == DeflectionFlag::ok)
                ok.push_back(i);
        if (ok.size() < 2)
            return;
        std::size_t start = 0;
        int sign = 0;
        for (std::size_t k = 1; k < ok.size(); ++k) {
            const double d = samples_[ok[k]].theta - samples_[ok[k - 1]].theta;
            const int s = (d > 0.0) ? 1 : (d < 0.0 ? -1 : 0);
            if (sign == 0)
                sign = s;
            if (s != 0 && sign != 0 && s != sign) {
                segments_.push_back({ok[start], ok[k - 1]});
                start = k - 1;
                sign = s;
            }
        }
        segments_.push_back({ok[start], ok.back()});
    }

    double refine_on_segment(const Segment& seg, double theta) const {
        // Locate the bracketing grid cell, then false-position with fresh
        // deflection evaluations.
        std::size_t lo = seg.first, hi = seg.second;
        for (std::size_t i = seg.first; i < seg.second; ++i) {
            if (samples_[i].flag != DeflectionFlag::ok || samples_[i + 1].flag != DeflectionFlag::ok)
                continue;
            const double f0 = samples_[i].theta - theta;
            const double f1 = samples_[i + 1].theta - theta;
            if (f0 == 0.0)
                return samples_[i].b;
            if (f0 * f1 <= 0.0) {
                lo = i;
                hi = i + 1;
                break;
            }
        }
        double a = samples_[lo].b, c = samples_[hi].b;
        double fa = samples_[lo].theta - theta;
        double fc = samples_[hi].theta - theta;
        if (fa * fc > 0.0) {
            // Range boundary attained at the segment edge.
            return std::abs(fa) < std::abs(fc) ? a : c;
        }
        double b_mid = a;
        for (int iter = 0; iter < 80; ++iter) {
            b_mid = (std::abs(fc - fa) > 0.0) ? (a * fc - c * fa) / (fc - fa) : 0.5 * (a + c);
            if (!(b_mid > a) || !(b_mid < c))
                b_mid = 0.5 * (a + c);
            const double fm = evaluate(b_mid).theta - theta;
            if (fm == 0.0 || c - a < 1e-12 * (1.0 + b_mid))
                break;
            if (fa * fm < 0.0) {
                c = b_mid;
                fc = fm;
            } else {
                a = b_mid;
                fa = fm;
            }
        }
        return b_mid;
    }

    double slope_at(double b) const {
        const DeflectionSample here = evaluate(b);
        if (here.flag == DeflectionFlag::ok && here.dtheta_db != 0.0)
            return here.dtheta_db; // analytic forms carry their own slope
        const double h = settings_.fd_step * (1.0 + b);
        const double b_lo = std::max(b - h, 0.0);
        const DeflectionSample plus = evaluate(b + h);
        const DeflectionSample minus = evaluate(b_lo);
        if (plus.flag != DeflectionFlag::ok || minus.flag != DeflectionFlag::ok)
            return 0.0;
        return (plus.theta - minus.theta) / (b + h - b_lo);
    }

    ScatterPotential pot_;
    double energy_;
    ScatterSettings settings_;
    std::vector<DeflectionSample> samples_;
    std::vector<Segment> segments_;
};

// ---------------------------------------------------------------------------
// Cross-sections
// ---------------------------------------------------------------------------

// Incidence-density transfer onto the solid angle:
//   rho_F(theta, phi) = sum_i rho_I(b_i, phi) (b_i/sin theta) |db/dtheta|_i
inline std::optional<double>
transfer_density(const std::function<double(double, double)>& rho_incidence,
                 const InversionResult& inversion, double theta, double phi = 0.0,
                 const GuardBands& guard = {}) {
    if (theta < guard.glory_min || theta > guard.glory_max)
        return std::nullopt;
    if (inversion.flag != AngleFlag::ok || inversion.branches.empty())
        return std::nullopt;
    const double s = std::sin(theta);
    double sum = 0.0;
    for (const auto& br : inversion.branches) {
        if (std::abs(br.dtheta_db) < guard.rainbow_slope)
            return std::nullopt;
        sum += rho_incidence(br.b, phi) * (br.b / s) / std::abs(br.dtheta_db);
    }
    return sum;
}

// The uniform-incidence special case (shares the transfer code path exactly).
inline std::optional<double> classical_cross_section(const InversionResult& inversion, double theta,
                                                     const GuardBands& guard = {}) {
    return transfer_density([](double, double) { return 1.0; }, inversion, theta, 0.0, guard);
}

struct CrossSectionPoint {
    double theta = 0.0;
    double sigma = 0.0; // meaningless unless flag == ok
    int n_branches = 0;
    AngleFlag flag = AngleFlag::ok;
};

using CrossSectionTable = std::vector<CrossSectionPoint>;

inline CrossSectionTable cross_section_table(const DeflectionScan& scan,
                                             std::span<const double> thetas,
                                             const GuardBands& guard = {}) {
    CrossSectionTable table;
    table.reserve(thetas.size());
    for (double theta : thetas) {
        CrossSectionPoint point;
        point.theta = theta;
        InversionResult inv = scan.invert(theta, guard);
        point.n_branches = static_cast<int>(inv.branches.size());
        if (theta < guard.glory_min || theta > guard.glory_max) {
            point.flag = AngleFlag::glory;
        } else if (inv.flag != AngleFlag::ok) {
            point.flag = inv.flag;
        } else if (auto sigma = classical_cross_section(inv, theta, guard)) {
            point.sigma = *sigma;
        } else {
            point.flag = AngleFlag::rainbow;
        }
        table.push_back(point);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Measure-based cross-section
// ---------------------------------------------------------------------------

struct MeasureCrossSection {
    CrossSectionTable table;
    std::vector<double> normalizer_sequence; // one ratio per annulus
    double normalizer = 0.0;
    bool converged = false;
};

// Cross-section from a path-set measure given as a final-angle density, with
// the incidence normalizer estimated on an exhausting sequence of b-annuli:
// each annulus [0, b_n] maps to the angular set [theta(b_n), theta_top]. The
// deflection map must be single-branch for the annuli to nest in angle.
inline MeasureCrossSection cross_section_from_measure(
    const DeflectionScan& scan, const std::function<double(double)>& rho_final,
    std::span<const double> annulus_radii, std::span<const double> thetas,
    const GuardBands& guard = {}, double cauchy_tol = 1e-6) {
    if (scan.segment_count() != 1)
        throw std::domain_error(
            "cross_section_from_measure: multi-branch deflection maps are not supported");
    if (annulus_radii.size() < 2)
        throw std::domain_error("cross_section_from_measure: need at least two annuli");
    for (std::size_t i = 1; i < annulus_radii.size(); ++i)
        if (annulus_radii[i] <= annulus_radii[i - 1])
            throw std::domain_error("cross_section_from_measure: annuli must nest");

    // Largest angle at the smallest scanned impact parameter.
    const DeflectionSample* top = nullptr;
    for (const auto& s : scan.samples())
        if (s.flag == DeflectionFlag::ok) {
            top = &s;
            break;
        }
    if (!top)
        throw std::domain_error("cross_section_from_measure: no valid scan samples");
    const QuadratureRule rule = gauss_legendre(64);

    MeasureCrossSection out;
    for (double b_n : annulus_radii) {
        const double theta_n = scan.evaluate(b_n).theta;
        const double measure =
            2.0 * std::numbers::pi *
            integrate_gl(rule, theta_n, top->theta,
                         [&](double t) { return rho_final(t) * std::sin(t); });
        const double incident_area = std::numbers::pi * b_n * b_n;
        out.normalizer_sequence.push_back(measure / incident_area);
    }
    out.normalizer = out.normalizer_sequence.back();
    const std::size_t m = out.normalizer_sequence.size();
    out.converged =
        std::abs(out.normalizer_sequence[m - 1] - out.normalizer_sequence[m - 2]) <=
        cauchy_tol * std::max(1.0, std::abs(out.normalizer));

    for (double theta : thetas) {
        CrossSectionPoint point;
        point.theta = theta;
        InversionResult inv = scan.invert(theta, guard);
        point.n_branches = static_cast<int>(inv.branches.size());
        if (theta < guard.glory_min || theta > guard.glory_max)
            point.flag = AngleFlag::glory;
        else if (inv.flag != AngleFlag::ok)
            point.flag = inv.flag;
        else
            point.sigma = rho_final(theta) / out.normalizer;
        out.table.push_back(point);
    }
    return out;
}

// Pulls a final-angle density back onto the incidence plane through the
// single-branch deflection map: rho_I(b) = rho_F(theta(b)) sin(theta) |dtheta/db| / b.
inline std::vector<std::pair<double, double>>
pullback_incidence(const DeflectionScan& scan, const std::function<double(double)>& rho_final) {
    if (scan.segment_count() != 1)
        throw std::domain_error("pullback_incidence: deflection map is not single-branch");
    std::vector<std::pair<double, double>> out;
    for (const auto& s : scan.samples()) {
        if (s.flag != DeflectionFlag::ok || s.b <= 0.0 || s.dtheta_db == 0.0)
            continue;
        const double rho =
            rho_final(s.theta) * std::sin(s.theta) * std::abs(s.dtheta_db) / s.b;
        out.emplace_back(s.b, rho);
    }
    return out;
}

} // namespace pathmeasure
