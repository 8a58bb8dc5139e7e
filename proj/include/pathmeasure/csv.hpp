#pragma once

#include <cstdio>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pathmeasure/hamiltonian.hpp"
#include "pathmeasure/scattering.hpp"
#include "pathmeasure/semiclassical.hpp"

namespace pathmeasure {

// 17 significant digits, '.' decimal separator: repeated runs must produce
// byte-identical artifacts.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* angle_flag_name(AngleFlag flag) {
    switch (flag) {
    case AngleFlag::ok: return "ok";
    case AngleFlag::rainbow: return "rainbow";
    case AngleFlag::glory: return "glory";
    case AngleFlag::forward_divergent: return "forward_divergent";
    case AngleFlag::no_branch: return "no_branch";
    }
    return "unknown";
}

inline const char* deflection_flag_name(DeflectionFlag flag) {
    switch (flag) {
    case DeflectionFlag::ok: return "ok";
    case DeflectionFlag::orbiting: return "orbiting";
    case DeflectionFlag::no_scatter: return "no_scatter";
    }
    return "unknown";
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const std::size_t n = traj.spec ? traj.spec->coord_count() : 0;
    out << "t";
    for (std::size_t i = 1; i <= n; ++i)
        out << ",x" << i;
    for (std::size_t i = 1; i <= n; ++i)
        out << ",p" << i;
    out << ",energy\n";
    for (const auto& s : traj.samples) {
        out << format_number(s.time);
        for (double x : s.positions)
            out << ',' << format_number(x);
        for (double p : s.momenta)
            out << ',' << format_number(p);
        out << ',' << format_number(total_energy(*traj.spec, s)) << '\n';
    }
}

inline void write_deflection_csv(std::ostream& out, std::span<const DeflectionSample> samples) {
    out << "b,theta,dtheta_db,branch_id,flag\n";
    for (const auto& s : samples)
        out << format_number(s.b) << ',' << format_number(s.theta) << ','
            << format_number(s.dtheta_db) << ',' << s.branch_id << ','
            << deflection_flag_name(s.flag) << '\n';
}

// Flagged angles carry no number; the sigma field reads "nan" there.
inline void write_cross_section_csv(std::ostream& out, const CrossSectionTable& table) {
    out << "theta_deg,sigma,n_branches,flag\n";
    for (const auto& p : table)
        out << format_number(p.theta * 180.0 / std::numbers::pi) << ','
            << (p.flag == AngleFlag::ok ? format_number(p.sigma) : "nan") << ',' << p.n_branches
            << ',' << angle_flag_name(p.flag) << '\n';
}

inline void write_fringe_csv(std::ostream& out, std::span<const FringeRow> rows) {
    out << "screen_coordinate,rho_FQ,rho_FC,rho_FI\n";
    for (const auto& r : rows)
        out << format_number(r.screen) << ',' << format_number(r.rho_fq) << ','
            << format_number(r.rho_fc) << ',' << format_number(r.rho_fi) << '\n';
}

} // namespace pathmeasure
