// Batch front-end: parses a JSON experiment config, runs the named
// experiment, writes CSV/JSON artifacts plus a run manifest.
//
// Exit codes: 0 success, 2 config validation, 3 numerical failure, 4 I/O.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pathmeasure/pathmeasure.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pathmeasure;

namespace {

// ---------------------------------------------------------------------------
// Infrastructure
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel g_log_level = LogLevel::error;

void init_log_level() {
    const char* env = std::getenv("PATHMEASURE_LOG");
    if (!env)
        return;
    const std::string v(env);
    if (v == "error")
        g_log_level = LogLevel::error;
    else if (v == "info")
        g_log_level = LogLevel::info;
    else if (v == "debug")
        g_log_level = LogLevel::debug;
}

void log_info(const std::string& msg) {
    if (g_log_level >= LogLevel::info)
        std::cerr << "[info] " << msg << "\n";
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string hash_string(const std::string& bytes) {
    std::ostringstream out;
    out << "fnv1a64:" << std::hex << fnv1a64(bytes);
    return out.str();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    out << bytes;
    out.flush();
    if (!out.good())
        throw IoError("write failed: " + path.string());
}

const json& require_field(const json& obj, const std::string& key, const std::string& context) {
    if (!obj.is_object() || !obj.contains(key))
        throw ConfigError("missing required field '" + key + "' in " + context);
    return obj.at(key);
}

double require_number(const json& obj, const std::string& key, const std::string& context) {
    const json& v = require_field(obj, key, context);
    if (!v.is_number())
        throw ConfigError("field '" + key + "' in " + context + " must be a number");
    return v.get<double>();
}

std::vector<double> require_number_array(const json& obj, const std::string& key,
                                         const std::string& context) {
    const json& v = require_field(obj, key, context);
    if (!v.is_array())
        throw ConfigError("field '" + key + "' in " + context + " must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number())
            throw ConfigError("field '" + key + "' in " + context + " must hold numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::string require_string(const json& obj, const std::string& key, const std::string& context) {
    const json& v = require_field(obj, key, context);
    if (!v.is_string())
        throw ConfigError("field '" + key + "' in " + context + " must be a string");
    return v.get<std::string>();
}

// Deterministic slot-ordered parallel map.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(n));
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                body(i);
        });
    }
    for (auto& t : pool)
        t.join();
}

struct RunContext {
    json parameters;
    fs::path output_dir;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    json summary;
    std::vector<fs::path> artifacts;

    void emit(const std::string& name, const std::string& bytes) {
        const fs::path path = output_dir / name;
        write_file(path, bytes);
        artifacts.push_back(path);
    }
};

// ---------------------------------------------------------------------------
// Config -> domain objects
// ---------------------------------------------------------------------------

RadialForm parse_radial_form(const json& obj, const std::string& context) {
    const std::string type = require_string(obj, "type", context);
    if (type == "screened_coulomb") {
        ScreenedCoulomb sc;
        sc.strength = require_number(obj, "strength", context);
        sc.screening_length = require_number(obj, "screening_length", context);
        return sc;
    }
    if (type == "spring") {
        HookeSpring hs;
        hs.stiffness = require_number(obj, "stiffness", context);
        return hs;
    }
    if (type == "tabulated") {
        return TabulatedRadial(require_number_array(obj, "r", context),
                               require_number_array(obj, "v", context));
    }
    throw ConfigError("unknown radial form '" + type + "' in " + context);
}

HamiltonianSpec parse_hamiltonian(const json& obj, const std::string& context) {
    HamiltonianSpec spec;
    spec.masses = require_number_array(obj, "masses", context);
    spec.dimension = static_cast<int>(require_number(obj, "dimension", context));
    const json& pot = require_field(obj, "potential", context);
    const std::string type = require_string(pot, "type", context + ".potential");
    if (type == "free") {
        // nothing to add
    } else if (type == "harmonic") {
        spec.trap_omega = require_number_array(pot, "omega", context + ".potential");
    } else if (type == "pairwise") {
        const json& pairs = require_field(pot, "pairs", context + ".potential");
        if (!pairs.is_array() || pairs.empty())
            throw ConfigError("field 'pairs' in " + context + ".potential must be a nonempty array");
        for (const auto& p : pairs) {
            PairInteraction pi;
            pi.first = static_cast<std::size_t>(require_number(p, "i", context + ".potential.pairs"));
            pi.second = static_cast<std::size_t>(require_number(p, "j", context + ".potential.pairs"));
            pi.form = parse_radial_form(require_field(p, "form", context + ".potential.pairs"),
                                        context + ".potential.pairs.form");
            spec.pairs.push_back(std::move(pi));
        }
    } else if (type == "central") {
        spec.external = parse_radial_form(require_field(pot, "form", context + ".potential"),
                                          context + ".potential.form");
    } else {
        throw ConfigError("unknown potential type '" + type + "' in " + context);
    }
    if (obj.contains("r_min"))
        spec.r_min = require_number(obj, "r_min", context);
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid hamiltonian in ") + context + ": " + e.what());
    }
    return spec;
}

StepControl parse_control(const json& params, const std::string& context) {
    StepControl control;
    if (!params.contains("control"))
        return control;
    const json& obj = params.at("control");
    if (obj.contains("method")) {
        const std::string m = require_string(obj, "method", context);
        if (m == "adaptive")
            control.method = StepControl::Method::adaptive;
        else if (m == "symplectic")
            control.method = StepControl::Method::symplectic;
        else
            throw ConfigError("unknown integrator method '" + m + "' in " + context);
    }
    if (obj.contains("rel_tol"))
        control.rel_tol = require_number(obj, "rel_tol", context);
    if (obj.contains("abs_tol"))
        control.abs_tol = require_number(obj, "abs_tol", context);
    if (obj.contains("dt"))
        control.dt = require_number(obj, "dt", context);
    if (obj.contains("sample_stride"))
        control.sample_stride = static_cast<std::size_t>(require_number(obj, "sample_stride", context));
    return control;
}

SpatialProfile parse_profile(const json& obj, const std::string& context) {
    const std::string type = require_string(obj, "type", context);
    if (type == "box") {
        BoxProfile b;
        b.center = require_number(obj, "center", context);
        b.half_width = require_number(obj, "half_width", context);
        return b;
    }
    if (type == "truncated_gaussian") {
        TruncatedGaussian g;
        g.center = require_number(obj, "center", context);
        g.sigma = require_number(obj, "sigma", context);
        g.half_width = require_number(obj, "half_width", context);
        return g;
    }
    throw ConfigError("unknown profile type '" + type + "' in " + context);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

void run_bernoulli(RunContext& ctx) {
    const json& params = ctx.parameters;
    const std::string mode =
        params.contains("mode") ? require_string(params, "mode", "parameters") : "sample";
    if (params.contains("rng")) {
        const std::string rng = require_string(params, "rng", "parameters");
        if (rng != "mt19937_64")
            throw ConfigError("unknown rng '" + rng + "' in parameters (expected mt19937_64)");
    }
    if (mode == "sample") {
        DigitMeasure measure{require_number(params, "alpha", "parameters")};
        const auto sequences =
            static_cast<std::size_t>(require_number(params, "sequences", "parameters"));
        const auto length = static_cast<std::size_t>(require_number(params, "length", "parameters"));
        if (sequences == 0 || length == 0)
            throw ConfigError("fields 'sequences' and 'length' in parameters must be positive");
        measure.validate();

        std::vector<double> freq(sequences);
        parallel_for(sequences, ctx.threads, [&](std::size_t k) {
            const BitSequence seq = sample_sequence(measure, length, ctx.seed + k);
            freq[k] = orbit_zero_frequency(seq, length);
        });
        std::ostringstream csv;
        csv << "sequence_index,zero_frequency\n";
        double mean = 0.0, lo = 1.0, hi = 0.0;
        for (std::size_t k = 0; k < sequences; ++k) {
            csv << k << ',' << format_number(freq[k]) << '\n';
            mean += freq[k];
            lo = std::min(lo, freq[k]);
            hi = std::max(hi, freq[k]);
        }
        mean /= static_cast<double>(sequences);
        ctx.emit("frequencies.csv", csv.str());
        ctx.summary = {{"mode", "sample"},
                       {"alpha", measure.alpha},
                       {"sequences", sequences},
                       {"length", length},
                       {"mean_zero_frequency", mean},
                       {"min_zero_frequency", lo},
                       {"max_zero_frequency", hi}};
    } else if (mode == "rational") {
        const auto numerator =
            static_cast<std::uint64_t>(require_number(params, "numerator", "parameters"));
        const auto denominator =
            static_cast<std::uint64_t>(require_number(params, "denominator", "parameters"));
        const auto digits = static_cast<std::size_t>(require_number(params, "digits", "parameters"));
        const BitSequence seq = expand_rational(numerator, denominator, digits);
        std::ostringstream csv;
        csv << "prefix_length,zero_frequency\n";
        for (std::size_t n = 1; n <= digits; n = (n < 16 ? n + 1 : n * 2)) {
            csv << n << ',' << format_number(orbit_zero_frequency(seq, n)) << '\n';
            if (n < 16 && n + 1 > digits)
                break;
        }
        csv << digits << ',' << format_number(orbit_zero_frequency(seq, digits)) << '\n';
        ctx.emit("orbit_frequency.csv", csv.str());
        ctx.summary = {{"mode", "rational"},
                       {"numerator", numerator},
                       {"denominator", denominator},
                       {"digits", digits},
                       {"frequency_full", orbit_zero_frequency(seq, digits)},
                       {"frequency_half", orbit_zero_frequency(seq, digits / 2)}};
    } else {
        throw ConfigError("unknown bernoulli mode '" + mode + "' in parameters");
    }
}

void run_propagate(RunContext& ctx) {
    const json& params = ctx.parameters;
    const HamiltonianSpec spec =
        parse_hamiltonian(require_field(params, "hamiltonian", "parameters"), "parameters.hamiltonian");
    const json& start_obj = require_field(params, "start", "parameters");
    PhasePoint start;
    start.positions = require_number_array(start_obj, "positions", "parameters.start");
    start.momenta = require_number_array(start_obj, "momenta", "parameters.start");
    if (start_obj.contains("time"))
        start.time = require_number(start_obj, "time", "parameters.start");
    const double t_end = require_number(params, "t_end", "parameters");
    const StepControl control = parse_control(params, "parameters.control");

    const Trajectory traj = integrate(spec, start, t_end, control);
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    ctx.emit("trajectory.csv", csv.str());
    ctx.summary = {{"samples", traj.samples.size()},
                   {"energy_drift", relative_energy_drift(traj)},
                   {"t_end", t_end}};
}

void run_semiclassical(RunContext& ctx) {
    const json& params = ctx.parameters;
    const HamiltonianSpec spec =
        parse_hamiltonian(require_field(params, "hamiltonian", "parameters"), "parameters.hamiltonian");
    const std::vector<double> x1 = require_number_array(params, "start_position", "parameters");
    const double t1 = params.contains("start_time") ? require_number(params, "start_time", "parameters") : 0.0;
    const double t2 = require_number(params, "end_time", "parameters");
    const json& ends = require_field(params, "end_positions", "parameters");
    if (!ends.is_array() || ends.empty())
        throw ConfigError("field 'end_positions' in parameters must be a nonempty array");

    const json& shoot_obj = require_field(params, "shoot", "parameters");
    ShootSettings settings;
    settings.momentum_lo = require_number_array(shoot_obj, "momentum_lo", "parameters.shoot");
    settings.momentum_hi = require_number_array(shoot_obj, "momentum_hi", "parameters.shoot");
    if (shoot_obj.contains("grid_points"))
        settings.grid_points =
            static_cast<std::size_t>(require_number(shoot_obj, "grid_points", "parameters.shoot"));
    if (shoot_obj.contains("position_tol"))
        settings.position_tol = require_number(shoot_obj, "position_tol", "parameters.shoot");

    const int coords = static_cast<int>(spec.coord_count());
    std::ostringstream branch_csv, density_csv;
    branch_csv << "endpoint_index,branch_id";
    for (int k = 1; k <= coords; ++k)
        branch_csv << ",x" << k;
    for (int k = 1; k <= coords; ++k)
        branch_csv << ",p0_" << k;
    branch_csv << ",action,vanvleck,maslov\n";
    density_csv << "endpoint_index";
    for (int k = 1; k <= coords; ++k)
        density_csv << ",x" << k;
    density_csv << ",n_branches,rho_FC,rho_FI,rho_FQ\n";

    std::size_t total_branches = 0;
    std::size_t endpoint_index = 0;
    for (const auto& end : ends) {
        if (!end.is_array())
            throw ConfigError("entries of 'end_positions' in parameters must be arrays");
        std::vector<double> x2;
        for (const auto& e : end) {
            if (!e.is_number())
                throw ConfigError("entries of 'end_positions' in parameters must hold numbers");
            x2.push_back(e.get<double>());
        }
        const std::vector<Branch> branches = branches_between(spec, x1, t1, x2, t2, settings);
        total_branches += branches.size();
        int id = 0;
        for (const auto& b : branches) {
            branch_csv << endpoint_index << ',' << id++;
            for (double c : x2)
                branch_csv << ',' << format_number(c);
            for (double p : b.trajectory.front().momenta)
                branch_csv << ',' << format_number(p);
            branch_csv << ',' << format_number(b.action) << ',' << format_number(b.vanvleck) << ','
                       << b.maslov << '\n';
        }
        density_csv << endpoint_index;
        for (double c : x2)
            density_csv << ',' << format_number(c);
        const DensityValue fc = classical_density(branches);
        const double fi = interference_term(branches);
        const double fq = branches.empty() ? 0.0 : quantum_density(branches, coords);
        density_csv << ',' << branches.size() << ',' << format_number(fc.value) << ','
                    << format_number(fi) << ',' << format_number(fq) << '\n';
        ++endpoint_index;
    }
    ctx.emit("branches.csv", branch_csv.str());
    ctx.emit("densities.csv", density_csv.str());
    ctx.summary = {{"endpoints", endpoint_index}, {"total_branches", total_branches}};
}

// Positions of local maxima of the sampled profile, parabolic-refined.
std::vector<double> profile_maxima(const std::vector<FringeRow>& rows) {
    std::vector<double> maxima;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
        if (rows[i].rho_fq > rows[i - 1].rho_fq && rows[i].rho_fq > rows[i + 1].rho_fq) {
            const double y0 = rows[i - 1].rho_fq, y1 = rows[i].rho_fq, y2 = rows[i + 1].rho_fq;
            const double denom = y0 - 2.0 * y1 + y2;
            const double shift = denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
            const double h = rows[i + 1].screen - rows[i].screen;
            maxima.push_back(rows[i].screen + shift * h);
        }
    }
    return maxima;
}

void run_fringes(RunContext& ctx) {
    const json& params = ctx.parameters;
    TwoSlitModel model;
    model.mass = require_number(params, "mass", "parameters");
    model.momentum = require_number(params, "momentum", "parameters");
    model.screen_distance = require_number(params, "screen_distance", "parameters");
    model.slit_separation = require_number(params, "slit_separation", "parameters");
    const double lo = require_number(params, "screen_min", "parameters");
    const double hi = require_number(params, "screen_max", "parameters");
    const auto points = static_cast<std::size_t>(require_number(params, "screen_points", "parameters"));
    if (points < 2 || !(hi > lo))
        throw ConfigError("screen grid in parameters must have at least 2 increasing points");

    std::vector<double> screen(points);
    for (std::size_t i = 0; i < points; ++i)
        screen[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);

    std::vector<FringeRow> rows(points);
    parallel_for(points, ctx.threads, [&](std::size_t i) {
        rows[i] = fringe_profile(model, std::span<const double>(&screen[i], 1)).front();
    });

    std::ostringstream csv;
    write_fringe_csv(csv, rows);
    ctx.emit("fringes.csv", csv.str());

    const std::vector<double> maxima = profile_maxima(rows);
    double measured = 0.0;
    if (maxima.size() >= 2)
        measured = (maxima.back() - maxima.front()) / static_cast<double>(maxima.size() - 1);
    double fc_lo = rows.front().rho_fc, fc_hi = rows.front().rho_fc;
    for (const auto& r : rows) {
        fc_lo = std::min(fc_lo, r.rho_fc);
        fc_hi = std::max(fc_hi, r.rho_fc);
    }
    ctx.summary = {{"predicted_spacing", predicted_fringe_spacing(model)},
                   {"measured_spacing", measured},
                   {"maxima", maxima.size()},
                   {"rho_fc_relative_spread", (fc_hi - fc_lo) / fc_hi}};
}

void run_scatter(RunContext& ctx) {
    const json& params = ctx.parameters;
    const json& pot_obj = require_field(params, "potential", "parameters");
    const std::string type = require_string(pot_obj, "type", "parameters.potential");
    ScatterPotential pot = HardSphere{1.0};
    if (type == "hard_sphere")
        pot = HardSphere{require_number(pot_obj, "radius", "parameters.potential")};
    else if (type == "screened_coulomb")
        pot = ScreenedCoulomb{require_number(pot_obj, "strength", "parameters.potential"),
                              require_number(pot_obj, "screening_length", "parameters.potential")};
    else if (type == "tabulated")
        pot = TabulatedRadial(require_number_array(pot_obj, "r", "parameters.potential"),
                              require_number_array(pot_obj, "v", "parameters.potential"));
    else
        throw ConfigError("unknown potential type '" + type + "' in parameters.potential");

    const double energy = require_number(params, "energy", "parameters");
    const double b_max = require_number(params, "b_max", "parameters");
    const auto scan_points =
        static_cast<std::size_t>(params.contains("scan_points")
                                     ? require_number(params, "scan_points", "parameters")
                                     : 2000.0);
    ScatterSettings settings;
    if (params.contains("mass"))
        settings.mass = require_number(params, "mass", "parameters");

    log_info("scanning deflection function");
    const DeflectionScan scan(pot, energy, b_max, scan_points, settings);
    std::ostringstream dcsv;
    write_deflection_csv(dcsv, scan.samples());
    ctx.emit("deflection.csv", dcsv.str());

    std::vector<double> angles;
    if (params.contains("angles_deg")) {
        for (double deg : require_number_array(params, "angles_deg", "parameters"))
            angles.push_back(deg * std::numbers::pi / 180.0);
    } else {
        for (int deg = 5; deg <= 175; deg += 5)
            angles.push_back(deg * std::numbers::pi / 180.0);
    }
    const CrossSectionTable table = cross_section_table(scan, angles);
    std::ostringstream xcsv;
    write_cross_section_csv(xcsv, table);
    ctx.emit("cross_section.csv", xcsv.str());
    ctx.summary = {{"energy", energy},
                   {"b_max", b_max},
                   {"scan_points", scan_points},
                   {"monotone_segments", scan.segment_count()}};
}

void run_decay(RunContext& ctx) {
    const json& params = ctx.parameters;
    const std::vector<double> masses = require_number_array(params, "masses", "parameters");
    if (masses.size() != 3)
        throw ConfigError("field 'masses' in parameters must hold [parent, product1, product2]");
    DecaySpec spec;
    spec.parent_mass = masses[0];
    spec.product_mass_1 = masses[1];
    spec.product_mass_2 = masses[2];
    spec.light_speed = require_number(params, "light_speed", "parameters");
    spec.start_time = require_number(params, "start_time", "parameters");
    spec.end_time = require_number(params, "end_time", "parameters");
    spec.parent_position = require_number_array(params, "parent_position", "parameters");
    spec.product_position_1 = require_number_array(params, "product_position_1", "parameters");
    spec.product_position_2 = require_number_array(params, "product_position_2", "parameters");
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid decay spec in parameters: ") + e.what());
    }
    const std::string solver =
        params.contains("solver") ? require_string(params, "solver", "parameters") : "both";
    if (solver != "closed_form" && solver != "numeric" && solver != "both")
        throw ConfigError("field 'solver' in parameters must be closed_form, numeric or both");

    std::optional<DecayVertex> closed, numeric;
    if (solver != "numeric")
        closed = solve_vertex_closed_form(spec);
    if (solver != "closed_form")
        numeric = solve_vertex_numeric(spec);
    const DecayVertex& v = closed ? *closed : *numeric;

    json out = {{"position", v.position},
                {"time", v.time},
                {"parent_momentum", v.parent_momentum},
                {"product_momentum_1", v.product_momentum_1},
                {"product_momentum_2", v.product_momentum_2},
                {"action", v.action},
                {"is_minimum", v.is_minimum},
                {"solver", closed ? "closed_form" : "numeric"}};
    if (closed && numeric) {
        double gap = std::abs(closed->time - numeric->time);
        for (std::size_t k = 0; k < closed->position.size(); ++k)
            gap = std::max(gap, std::abs(closed->position[k] - numeric->position[k]));
        out["numeric_agreement"] = gap;
    }
    ctx.emit("vertex.json", out.dump(2) + "\n");
    ctx.summary = {{"time", v.time}, {"action", v.action}, {"is_minimum", v.is_minimum}};
}

void run_correlate(RunContext& ctx) {
    const json& params = ctx.parameters;
    CollisionModel model;
    model.heavy_mass = require_number(params, "heavy_mass", "parameters");
    model.light_mass = require_number(params, "light_mass", "parameters");
    model.speed = require_number(params, "speed", "parameters");
    model.heavy_profile =
        parse_profile(require_field(params, "heavy_profile", "parameters"), "parameters.heavy_profile");
    model.light_profile =
        parse_profile(require_field(params, "light_profile", "parameters"), "parameters.light_profile");
    model.window_start = require_number(params, "window_start", "parameters");
    model.window_end = require_number(params, "window_end", "parameters");
    try {
        model.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid collision model in parameters: ") + e.what());
    }
    const double t_pre = require_number(params, "eval_time_pre", "parameters");
    const double t_post = require_number(params, "eval_time_post", "parameters");
    if (!(t_pre < model.window_start) || !(t_post > model.window_end))
        throw ConfigError("eval times in parameters must lie outside the collision window");
    const auto samples =
        static_cast<std::size_t>(params.contains("liouville_samples")
                                     ? require_number(params, "liouville_samples", "parameters")
                                     : 10000.0);

    const std::vector<std::pair<CorrelationFamily, std::string>> families = {
        {CorrelationFamily::post_only, "post_only"},
        {CorrelationFamily::pre_only, "pre_only"},
        {CorrelationFamily::pre_post, "pre_post"}};

    std::ostringstream cov_csv, liouville_csv;
    cov_csv << "family,stage,covariance\n";
    liouville_csv << "family,transport,max_residual\n";
    double worst = 0.0;
    for (const auto& [family, name] : families) {
        const double cov_pre =
            correlation_statistic(model, family, CollisionStage::pre, t_pre);
        const double cov_post =
            correlation_statistic(model, family, CollisionStage::post, t_post);
        cov_csv << name << ",pre," << format_number(cov_pre) << '\n';
        cov_csv << name << ",post," << format_number(cov_post) << '\n';

        const auto pts_pre = support_sample_points(model, family, t_pre, samples);
        const auto pts_post = support_sample_points(model, family, t_post, samples);
        const double pre_pre =
            liouville_residual(model, family, pts_pre, t_pre, 0.25 * (model.window_start - t_pre));
        const double post_post =
            liouville_residual(model, family, pts_post, t_post, 2.0 * (t_post - model.window_end));
        const double pre_post = liouville_residual(model, family, pts_pre, t_pre, t_post - t_pre);
        liouville_csv << name << ",pre_to_pre," << format_number(pre_pre) << '\n';
        liouville_csv << name << ",post_to_post," << format_number(post_post) << '\n';
        liouville_csv << name << ",pre_to_post," << format_number(pre_post) << '\n';
        worst = std::max({worst, pre_pre, post_post, pre_post});
    }
    ctx.emit("covariance.csv", cov_csv.str());
    ctx.emit("liouville.csv", liouville_csv.str());
    ctx.summary = {{"worst_liouville_residual", worst}, {"liouville_samples", samples}};
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

const std::vector<std::string> kExperiments = {"bernoulli", "propagate", "semiclassical",
                                               "fringes",   "scatter",   "decay",
                                               "correlate"};

int run(const std::string& config_path, const std::string& output_override,
        std::optional<std::uint64_t> seed_override, unsigned threads,
        const std::string& subcommand) {
    const auto t_start = std::chrono::steady_clock::now();

    // Validation phase: exit 2 on any failure here.
    std::string config_bytes;
    json config;
    std::string experiment;
    RunContext ctx;
    try {
        config_bytes = read_file(config_path);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    try {
        try {
            config = json::parse(config_bytes);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        experiment = require_string(config, "experiment", "config");
        if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end())
            throw ConfigError("unknown experiment '" + experiment + "' in config");
        if (!subcommand.empty() && subcommand != experiment)
            throw ConfigError("subcommand '" + subcommand + "' disagrees with config experiment '" +
                              experiment + "'");
        ctx.parameters = require_field(config, "parameters", "config");
        std::string out_dir = output_override;
        if (out_dir.empty())
            out_dir = require_string(config, "output_dir", "config");
        ctx.output_dir = out_dir;
        ctx.seed = seed_override
                       ? *seed_override
                       : (config.contains("seed")
                              ? static_cast<std::uint64_t>(require_number(config, "seed", "config"))
                              : 0);
        ctx.threads = threads;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        fs::create_directories(ctx.output_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: cannot create output directory: " << e.what() << "\n";
        return 4;
    }

    log_info("running experiment " + experiment);
    try {
        if (experiment == "bernoulli")
            run_bernoulli(ctx);
        else if (experiment == "propagate")
            run_propagate(ctx);
        else if (experiment == "semiclassical")
            run_semiclassical(ctx);
        else if (experiment == "fringes")
            run_fringes(ctx);
        else if (experiment == "scatter")
            run_scatter(ctx);
        else if (experiment == "decay")
            run_decay(ctx);
        else if (experiment == "correlate")
            run_correlate(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    json manifest = {{"experiment", experiment},
                     {"config_hash", hash_string(config_bytes)},
                     {"library_version", library_version},
                     {"seed", ctx.seed},
                     {"threads", ctx.threads},
                     {"wall_time_seconds", wall},
                     {"summary", ctx.summary}};
    json artifact_list = json::array();
    try {
        for (const auto& path : ctx.artifacts)
            artifact_list.push_back(
                {{"path", path.filename().string()}, {"hash", hash_string(read_file(path))}});
        manifest["artifacts"] = artifact_list;
        write_file(ctx.output_dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    }
    log_info("done in " + std::to_string(wall) + " s");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    init_log_level();
    CLI::App app{"pathmeasure batch experiments"};
    std::string config_path;
    std::string output_override;
    std::string subcommand;
    unsigned threads = 1;
    std::optional<std::uint64_t> seed_override;
    std::uint64_t seed_value = 0;

    app.add_option("experiment", subcommand, "experiment name (must match the config)")
        ->check(CLI::IsMember(kExperiments));
    app.add_option("--config", config_path, "path to the JSON run config")->required();
    app.add_option("--output", output_override, "output directory (overrides config)");
    app.add_option("--threads", threads, "worker threads (default 1, deterministic)");
    auto* seed_opt = app.add_option("--seed", seed_value, "seed override");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // flag misuse is a validation failure
    }
    if (seed_opt->count() > 0)
        seed_override = seed_value;

    return run(config_path, output_override, seed_override, threads, subcommand);
}
