#pragma once

// CSV / JSON output with temp-then-rename writes, and custom-csv input.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "inls/classify.hpp"
#include "inls/errors.hpp"
#include "inls/evolve.hpp"
#include "inls/grid.hpp"
#include "inls/groundstate.hpp"

namespace inls {

// 17 significant digits, enough to round-trip a double.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

/// Writes to `path.tmp` and renames over `path`, so readers never see a
/// half-written file.
inline void write_atomic(const std::filesystem::path& path, const std::string& body) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out << body;
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw Error("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::string trajectory_csv(const TrajectoryRecord& tr) {
    std::ostringstream os;
    os << "t,mass,energy,grad_norm,local_mass,Z,dZdt_rhs,sup_norm\n";
    for (const auto& s : tr.snapshots) {
        const double lm = s.local_mass.empty() ? 0.0 : s.local_mass.front();
        os << fmt17(s.t) << ',' << fmt17(s.mass) << ',' << fmt17(s.energy) << ',' << fmt17(s.grad_norm) << ','
           << fmt17(lm) << ',' << fmt17(s.Z) << ',' << fmt17(s.dZdt_rhs) << ',' << fmt17(s.sup_norm) << '\n';
    }
    return os.str();
}

inline std::string profile_csv(const RadialField& u) {
    std::ostringstream os;
    os << "r,re,im\n";
    const auto& g = u.grid();
    for (std::size_t i = 0; i < g.n; ++i)
        os << fmt17(g.nodes[i]) << ',' << fmt17(u[i].real()) << ',' << fmt17(u[i].imag()) << '\n';
    return os.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "c,below_me,below_grad,verdict,peak_grad_ratio,final_local_mass\n";
    for (const auto& r : rows)
        os << fmt17(r.c) << ',' << (r.threshold.below_me ? "true" : "false") << ','
           << (r.threshold.below_grad ? "true" : "false") << ',' << to_string(r.verdict) << ','
           << fmt17(r.peak_grad_ratio) << ',' << fmt17(r.final_local_mass) << '\n';
    return os.str();
}

inline nlohmann::json ground_state_json(const GroundState& gs, const ModelParams& m) {
    const auto [poh1, poh2] = pohozaev_residuals(gs, m);
    return {{"N", m.N},
            {"b", m.b},
            {"p", m.p},
            {"s_c", m.s_c},
            {"shoot_value", gs.shoot_value},
            {"Q0", gs.Q[0].real()},
            {"mass", gs.mass},
            {"energy", gs.energy},
            {"grad_norm", gs.grad_norm},
            {"potential", gs.potential},
            {"me_threshold", gs.me_threshold},
            {"grad_threshold", gs.grad_threshold},
            {"residual", gs.residual},
            {"shooting_deviation", gs.shooting_deviation},
            {"newton_iterations", gs.newton_iterations},
            {"pohozaev_energy_balance", poh1},
            {"pohozaev_scaling_balance", poh2}};
}

/// Reads "r,re,im" rows (header optional) and checks the radii against g.
inline RadialField read_profile_csv(const std::string& path, const GridPtr& g) {
    std::ifstream in(path);
    if (!in) throw ValidationError("init.path not readable: " + path);
    std::vector<cplx> v;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.rfind("r,", 0) == 0) continue;
        double r = 0.0, re = 0.0, im = 0.0;
        char c1 = 0, c2 = 0;
        std::istringstream ls(line);
        if (!(ls >> r >> c1 >> re) || c1 != ',') throw ParseError(path + ": bad row at line " + std::to_string(lineno), lineno);
        if (ls >> c2 && c2 == ',') ls >> im;
        if (v.size() >= g->n) throw ValidationError(path + ": more rows than grid cells");
        if (std::abs(r - g->nodes[v.size()]) > 1e-9 * g->r_max)
            throw ValidationError(path + ": radius at line " + std::to_string(lineno) + " does not match the grid");
        v.emplace_back(re, im);
    }
    if (v.size() != g->n) throw ValidationError(path + ": expected " + std::to_string(g->n) + " rows");
    return RadialField(g, std::move(v));
}

} // namespace inls
