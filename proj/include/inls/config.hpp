#pragma once

// Run configuration: JSON in, validated RunConfig out.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "inls/errors.hpp"
#include "inls/evolve.hpp"
#include "inls/exponents.hpp"

namespace inls {

enum class InitFamily { GroundStateScaled, Gaussian, CustomCsv };

inline const char* to_string(InitFamily f) {
    switch (f) {
    case InitFamily::GroundStateScaled: return "groundstate-scaled";
    case InitFamily::Gaussian: return "gaussian";
    case InitFamily::CustomCsv: return "custom-csv";
    }
    return "unknown";
}

struct RunConfig {
    struct Model {
        double N = 3.0, b = 1.0, p = 2.0;
    } model;
    struct Grid {
        std::size_t n = 8192;
        double r_max = 40.0;
        bool sponge_on = false;
    } grid;
    struct Evolve {
        double dt = 1e-3;
        double t_final = 10.0;
        int snapshot_stride = 10;
        double blowup_gradient_factor = 25.0;
        std::int64_t max_substeps = 0; // 0: unlimited
    } evolve;
    struct Criteria {
        double R_crit = 10.0;
        double epsilon_sq_fraction = 0.01;
    } criteria;
    struct Init {
        InitFamily family = InitFamily::GroundStateScaled;
        double scale = 0.5;
        double width = 1.0;
        std::string path; // custom-csv only
    } init;
    struct Output {
        std::string directory = "out";
        std::string prefix = "inls";
    } output;
    struct Sweep {
        std::vector<double> scales{0.3, 0.5, 0.7, 0.9, 1.2, 2.0, 3.0};
    } sweep;
    struct Decay {
        double t_min = 2.0, t_max = 20.0;
        int samples = 10;
    } decay;

    ModelParams params() const { return ModelParams::make(model.N, model.b, model.p); }

    EvolutionConfig evolution() const {
        EvolutionConfig c;
        c.dt = evolve.dt;
        c.t_final = evolve.t_final;
        c.snapshot_stride = evolve.snapshot_stride;
        c.blowup_gradient_factor = evolve.blowup_gradient_factor;
        c.max_substeps = evolve.max_substeps;
        c.sponge_on = grid.sponge_on;
        c.local_radii = {criteria.R_crit};
        c.ball_radii = {criteria.R_crit};
        c.virial_R = criteria.R_crit;
        return c;
    }
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline void reject_unknown(const nlohmann::json& obj, const std::string& where, std::set<std::string> allowed) {
    if (!obj.is_object()) throw ValidationError(where + " must be an object");
    for (const auto& [k, v] : obj.items()) {
        (void)v;
        if (!allowed.count(k)) throw ValidationError("unknown key " + (where.empty() ? k : where + "." + k));
    }
}

template <class T>
void read(const nlohmann::json& obj, const std::string& section, const char* key, T& out, bool required = false) {
    const std::string name = section + "." + key;
    if (!obj.contains(key)) {
        if (required) throw ValidationError(name + " required");
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(name + " has the wrong type");
    }
}

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

} // namespace detail

/// Checks every field against the preconditions of the module it feeds.
inline void validate(const RunConfig& c) {
    const auto& m = c.model;
    if (!(m.N > 2.0)) throw ValidationError("model.N must exceed 2");
    if (!(m.b >= 0.0 && m.b < std::min(0.5 * m.N, 2.0)))
        throw ValidationError("model.b outside [0, " + detail::fmt(std::min(0.5 * m.N, 2.0)) + ")");
    const double lo = 1.0 + (4.0 - 2.0 * m.b) / m.N, hi = 1.0 + (4.0 - 2.0 * m.b) / (m.N - 2.0);
    if (!(m.p > lo && m.p < hi))
        throw ValidationError("p outside intercritical range (" + detail::fmt(lo) + ", " + detail::fmt(hi) + ")");
    if (c.grid.n < 16) throw ValidationError("grid.n must be at least 16");
    if (!(c.grid.r_max > 0.0)) throw ValidationError("grid.r_max must be positive");
    if (!(c.evolve.dt > 0.0)) throw ValidationError("evolve.dt must be positive");
    if (!(c.evolve.t_final > 0.0)) throw ValidationError("evolve.t_final must be positive");
    if (c.evolve.snapshot_stride < 1) throw ValidationError("evolve.snapshot_stride must be at least 1");
    if (!(c.evolve.blowup_gradient_factor > 1.0)) throw ValidationError("evolve.blowup_gradient_factor must exceed 1");
    if (c.evolve.max_substeps < 0) throw ValidationError("evolve.max_substeps must be non-negative");
    if (!(c.criteria.R_crit > 0.0 && c.criteria.R_crit < c.grid.r_max))
        throw ValidationError("criteria.R_crit must lie in (0, grid.r_max)");
    if (!(c.criteria.epsilon_sq_fraction > 0.0 && c.criteria.epsilon_sq_fraction < 1.0))
        throw ValidationError("criteria.epsilon_sq_fraction must lie in (0, 1)");
    if (!(c.init.scale >= 0.0)) throw ValidationError("init.scale must be non-negative");
    if (!(c.init.width > 0.0)) throw ValidationError("init.width must be positive");
    if (c.init.family == InitFamily::CustomCsv && c.init.path.empty())
        throw ValidationError("init.path required for custom-csv");
    if (c.output.prefix.empty() || c.output.prefix.find('/') != std::string::npos)
        throw ValidationError("output.prefix must be a plain file name");
    if (c.sweep.scales.empty()) throw ValidationError("sweep.scales must not be empty");
    for (double s : c.sweep.scales)
        if (!(s >= 0.0)) throw ValidationError("sweep.scales must be non-negative");
    if (!(c.decay.t_min > 0.0 && c.decay.t_max > c.decay.t_min) || c.decay.samples < 2)
        throw ValidationError("decay needs 0 < t_min < t_max and samples >= 2");
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        const int line = detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError("config: malformed JSON at line " + std::to_string(line), line);
    }
    detail::reject_unknown(j, "", {"model", "grid", "evolve", "criteria", "init", "output", "sweep", "decay"});
    RunConfig c;
    auto section = [&](const char* name, std::set<std::string> keys) -> const nlohmann::json* {
        if (!j.contains(name)) return nullptr;
        detail::reject_unknown(j.at(name), name, std::move(keys));
        return &j.at(name);
    };
    if (const auto* s = section("model", {"N", "b", "p"})) {
        detail::read(*s, "model", "N", c.model.N, true);
        detail::read(*s, "model", "b", c.model.b, true);
        detail::read(*s, "model", "p", c.model.p, true);
    } else {
        throw ValidationError("model required");
    }
    if (const auto* s = section("grid", {"n", "r_max", "sponge_on"})) {
        detail::read(*s, "grid", "n", c.grid.n);
        detail::read(*s, "grid", "r_max", c.grid.r_max);
        detail::read(*s, "grid", "sponge_on", c.grid.sponge_on);
    }
    if (const auto* s = section("evolve", {"dt", "t_final", "snapshot_stride", "blowup_gradient_factor", "max_substeps"})) {
        detail::read(*s, "evolve", "dt", c.evolve.dt, true);
        detail::read(*s, "evolve", "t_final", c.evolve.t_final, true);
        detail::read(*s, "evolve", "snapshot_stride", c.evolve.snapshot_stride);
        detail::read(*s, "evolve", "blowup_gradient_factor", c.evolve.blowup_gradient_factor);
        detail::read(*s, "evolve", "max_substeps", c.evolve.max_substeps);
    } else {
        throw ValidationError("evolve.dt required");
    }
    if (const auto* s = section("criteria", {"R_crit", "epsilon_sq_fraction"})) {
        detail::read(*s, "criteria", "R_crit", c.criteria.R_crit);
        detail::read(*s, "criteria", "epsilon_sq_fraction", c.criteria.epsilon_sq_fraction);
    }
    if (const auto* s = section("init", {"family", "scale", "width", "path"})) {
        std::string fam = to_string(c.init.family);
        detail::read(*s, "init", "family", fam);
        if (fam == "groundstate-scaled") c.init.family = InitFamily::GroundStateScaled;
        else if (fam == "gaussian") c.init.family = InitFamily::Gaussian;
        else if (fam == "custom-csv") c.init.family = InitFamily::CustomCsv;
        else throw ValidationError("init.family must be groundstate-scaled, gaussian or custom-csv");
        detail::read(*s, "init", "scale", c.init.scale);
        detail::read(*s, "init", "width", c.init.width);
        detail::read(*s, "init", "path", c.init.path);
    }
    if (const auto* s = section("output", {"directory", "prefix"})) {
        detail::read(*s, "output", "directory", c.output.directory);
        detail::read(*s, "output", "prefix", c.output.prefix);
    }
    if (const auto* s = section("sweep", {"scales"})) detail::read(*s, "sweep", "scales", c.sweep.scales);
    if (const auto* s = section("decay", {"t_min", "t_max", "samples"})) {
        detail::read(*s, "decay", "t_min", c.decay.t_min);
        detail::read(*s, "decay", "t_max", c.decay.t_max);
        detail::read(*s, "decay", "samples", c.decay.samples);
    }
    validate(c);
    return c;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config file not readable: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Echo for JSON summaries, including the derived critical index.
inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["model"] = {{"N", c.model.N}, {"b", c.model.b}, {"p", c.model.p},
                  {"s_c", critical_index(c.model.N, c.model.b, c.model.p)}};
    j["grid"] = {{"n", c.grid.n}, {"r_max", c.grid.r_max}, {"sponge_on", c.grid.sponge_on}};
    j["evolve"] = {{"dt", c.evolve.dt},
                   {"t_final", c.evolve.t_final},
                   {"snapshot_stride", c.evolve.snapshot_stride},
                   {"blowup_gradient_factor", c.evolve.blowup_gradient_factor},
                   {"max_substeps", c.evolve.max_substeps}};
    j["criteria"] = {{"R_crit", c.criteria.R_crit}, {"epsilon_sq_fraction", c.criteria.epsilon_sq_fraction}};
    j["init"] = {{"family", to_string(c.init.family)}, {"scale", c.init.scale}, {"width", c.init.width}};
    if (!c.init.path.empty()) j["init"]["path"] = c.init.path;
    j["output"] = {{"directory", c.output.directory}, {"prefix", c.output.prefix}};
    j["sweep"] = {{"scales", c.sweep.scales}};
    j["decay"] = {{"t_min", c.decay.t_min}, {"t_max", c.decay.t_max}, {"samples", c.decay.samples}};
    return j;
}

} // namespace inls
