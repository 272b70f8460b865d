#pragma once

// Subcommand dispatch for the inls_lab tool. Implemented in src/cli.cpp.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "inls/config.hpp"
#include "inls/grid.hpp"
#include "inls/groundstate.hpp"

namespace inls {

enum ExitStatus : int { kExitOk = 0, kExitComputation = 1, kExitConfig = 2 };

struct DispatchOptions {
    std::filesystem::path out_dir; // empty: config output.directory
    unsigned threads = 1;
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"ground", "evolve", "sweep", "check", "decay"};
    return s;
}

/// Runs one subcommand and returns the process exit status. Files written
/// before a failure are removed.
int dispatch(const std::string& subcommand, const RunConfig& cfg, const DispatchOptions& opt, std::ostream& log);

/// Initial data from cfg.init; `gs` is required for groundstate-scaled.
RadialField initial_field(const RunConfig& cfg, const GridPtr& grid, const GroundState* gs);

/// Plain-text table of the nonlinear exponents, their pairs and the
/// scattering constants.
std::string exponent_table(const ModelParams& m);

/// Least-squares slope of log sup|e^{itΔ}u₀| against log t.
struct DecayFit {
    std::vector<double> times;
    std::vector<double> sup_norms;
    double slope = 0.0;
    double expected = 0.0; // -N/2
    double relative_error = 0.0;
};

DecayFit dispersive_decay_fit(const RadialField& u0, double t_min, double t_max, int samples, double max_dt);

} // namespace inls
