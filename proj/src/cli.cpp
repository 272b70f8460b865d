#include "inls/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "inls/classify.hpp"
#include "inls/diagnostics.hpp"
#include "inls/evolve.hpp"
#include "inls/exponents.hpp"
#include "inls/functionals.hpp"
#include "inls/io.hpp"

namespace inls {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Tracks files written by one command so a failure can take them back.
class OutputSet {
public:
    OutputSet(fs::path dir, std::string prefix) : dir_(std::move(dir)), prefix_(std::move(prefix)) {}

    void write(const std::string& suffix, const std::string& body) {
        fs::create_directories(dir_);
        const fs::path p = dir_ / (prefix_ + suffix);
        write_atomic(p, body);
        written_.push_back(p);
    }

    void rollback() {
        std::error_code ec;
        for (const auto& p : written_) fs::remove(p, ec);
        written_.clear();
    }

    const std::vector<fs::path>& files() const { return written_; }

private:
    fs::path dir_;
    std::string prefix_;
    std::vector<fs::path> written_;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json check_entry(double value, double tol, bool pass) { return {{"value", value}, {"tolerance", tol}, {"pass", pass}}; }

GroundState ground_for(const RunConfig& cfg, const GridPtr& g) { return solve_ground_state(cfg.params(), g, 1e-8); }

int cmd_ground(const RunConfig& cfg, OutputSet& out, std::ostream& log) {
    const ModelParams m = cfg.params();
    const GridPtr g = build_grid(cfg.grid.n, cfg.grid.r_max, m.N);
    const GroundState gs = ground_for(cfg, g);
    json j;
    j["config"] = to_json(cfg);
    j["ground_state"] = ground_state_json(gs, m);
    out.write("_ground.json", dump(j));
    out.write("_ground.csv", profile_csv(gs.Q));
    log << "Q(0) = " << fmt17(gs.Q[0].real()) << "  M = " << fmt17(gs.mass) << "  E = " << fmt17(gs.energy) << '\n';
    return kExitOk;
}

int cmd_evolve(const RunConfig& cfg, OutputSet& out, std::ostream& log) {
    const ModelParams m = cfg.params();
    const GridPtr g = build_grid(cfg.grid.n, cfg.grid.r_max, m.N);
    std::optional<GroundState> gs;
    if (cfg.init.family == InitFamily::GroundStateScaled) gs = ground_for(cfg, g);
    const RadialField u0 = initial_field(cfg, g, gs ? &*gs : nullptr);
    const TrajectoryRecord tr = run(u0, m, cfg.evolution());

    const auto& s0 = tr.snapshots.front();
    double mass_drift = 0.0, energy_drift = 0.0;
    for (const auto& s : tr.snapshots) {
        if (s0.mass > 0.0) mass_drift = std::max(mass_drift, std::abs(s.mass - s0.mass) / s0.mass);
        if (s0.energy != 0.0) energy_drift = std::max(energy_drift, std::abs(s.energy - s0.energy) / std::abs(s0.energy));
    }
    json j;
    j["config"] = to_json(cfg);
    j["termination"] = to_string(tr.termination);
    j["t_end"] = tr.snapshots.back().t;
    j["snapshots"] = tr.snapshots.size();
    j["peak_grad_ratio"] = tr.peak_grad_ratio;
    j["substeps"] = tr.substeps;
    j["mass_drift"] = mass_drift;
    j["energy_drift"] = energy_drift;
    if (!tr.note.empty()) j["note"] = tr.note;
    if (gs) {
        const auto th = threshold_position(u0, *gs, m);
        j["threshold"] = {{"me_ratio", th.me_ratio},
                          {"grad_ratio", th.grad_ratio},
                          {"below_me", th.below_me},
                          {"below_grad", th.below_grad}};
    }
    out.write("_trajectory.csv", trajectory_csv(tr));
    out.write("_summary.json", dump(j));
    log << "termination: " << to_string(tr.termination) << "  t = " << tr.snapshots.back().t << '\n';
    return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, OutputSet& out, std::ostream& log, unsigned threads) {
    const ModelParams m = cfg.params();
    const GridPtr g = build_grid(cfg.grid.n, cfg.grid.r_max, m.N);
    const GroundState gs = ground_for(cfg, g);
    ScatteringCriteria crit;
    crit.R_crit = cfg.criteria.R_crit;
    crit.epsilon_sq_fraction = cfg.criteria.epsilon_sq_fraction;
    const auto rows = threshold_sweep(gs, cfg.sweep.scales, m, cfg.evolution(), crit, threads);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        json row = {{"c", r.c},
                    {"me_ratio", r.threshold.me_ratio},
                    {"grad_ratio", r.threshold.grad_ratio},
                    {"below", r.threshold.below},
                    {"verdict", to_string(r.verdict)},
                    {"termination", r.termination},
                    {"peak_grad_ratio", r.peak_grad_ratio},
                    {"final_local_mass", r.final_local_mass},
                    {"local_mass_tail", r.local_mass_tail},
                    {"cauchy_diffs", r.cauchy_diffs}};
        if (!r.error.empty()) row["error"] = r.error;
        out.write("_sweep_row" + std::to_string(k) + ".json", dump(row));
        log << "c = " << r.c << "  " << to_string(r.verdict) << (r.error.empty() ? "" : "  (" + r.error + ")") << '\n';
    }
    out.write("_sweep.csv", sweep_csv(rows));
    if (!sweep_consistent(rows)) {
        log << "a below-threshold row was labelled BlowUp\n";
        return kExitComputation;
    }
    return kExitOk;
}

json identity_suite(const RunConfig& cfg, std::ostream& log) {
    const ModelParams m = cfg.params();
    const GridPtr g = build_grid(cfg.grid.n, cfg.grid.r_max, m.N);
    json checks;

    const NonlinearExponents ne = nonlinear_exponents(m);
    double defect = 0.0;
    for (const auto& pr : ne.pairs) defect = std::max(defect, pr.defect);
    checks["exponent_pairs_defect"] = check_entry(defect, 1e-12, defect < 1e-12);

    const GroundState gs = ground_for(cfg, g);
    const double res = gs.residual / std::sqrt(gs.mass);
    checks["ground_state_residual"] = check_entry(res, 1e-8, res < 1e-8);
    const auto [p1, p2] = pohozaev_residuals(gs, m);
    const double poh = std::max(std::abs(p1), std::abs(p2));
    // The cusp of r^{-b} at the origin limits the identities to O(dr²).
    const double poh_tol = std::max(1e-6, 2e3 * g->dr * g->dr);
    checks["pohozaev"] = check_entry(poh, poh_tol, poh < poh_tol);
    checks["ground_state_energy_positive"] = check_entry(gs.energy, 0.0, gs.energy > 0.0);

    const RadialField u = initial_field(cfg, g, &gs);
    InequalityOptions iopt;
    iopt.cutoff_R = cfg.criteria.R_crit;
    const InequalityReport ir = inequality_suite(u, m, gs, iopt);
    checks["strauss_ratio"] = check_entry(ir.strauss_ratio, kInfinity, std::isfinite(ir.strauss_ratio));
    checks["radial_gn_ratio"] = check_entry(ir.gn_ratio, kInfinity, std::isfinite(ir.gn_ratio));
    const double comm = ir.commutator_scale > 0.0 ? ir.commutator_defect / ir.commutator_scale : ir.commutator_defect;
    checks["commutator_defect"] = check_entry(comm, 1e-6, comm < 1e-6);
    checks["coercivity_delta"] = check_entry(ir.coercivity_delta, 0.0, ir.coercivity_holds);

    const VirialWeight wide = build_virial_weight(0.8 * g->r_max, *g);
    const double G = gradient_sq(u);
    const double P = potential_integral(u, cell_potential(*g, m.b), m.p);
    const double bracket = 8.0 * (G + ((m.N - m.b) / (m.p + 1.0) - 0.5 * m.N) * P);
    const double red = std::abs(virial_rhs(u, wide, m) - bracket) / std::max(std::abs(bracket), 8.0 * G);
    checks["quadratic_virial_reduction"] = check_entry(red, 1e-10, red < 1e-10);

    EvolutionConfig ec = cfg.evolution();
    ec.t_final = std::min(1.0, cfg.evolve.t_final);
    ec.keep_fields = true;
    const TrajectoryRecord tr = run(u, m, ec);
    if (tr.termination != Termination::Horizon) log << "check: short run ended by " << to_string(tr.termination) << '\n';
    double md = 0.0, ed = 0.0, hold = 0.0;
    const double M0 = tr.snapshots.front().mass, E0 = tr.snapshots.front().energy;
    for (const auto& s : tr.snapshots) {
        if (M0 > 0.0) md = std::max(md, std::abs(s.mass - M0) / M0);
        if (E0 != 0.0) ed = std::max(ed, std::abs(s.energy - E0) / std::abs(E0));
    }
    for (const auto& f : tr.fields) hold = std::max(hold, holder_constant(f, m.p, cfg.criteria.R_crit));
    hold /= holder_bound(*g, m.p);
    checks["mass_drift"] = check_entry(md, 1e-10, md < 1e-10);
    checks["energy_drift"] = check_entry(ed, 1e-5, ed < 1e-5);
    checks["holder_ratio"] = check_entry(hold, 1.0, hold <= 1.0);
    const MassFluxReport mf = mass_flux_check(tr, build_cutoff(cfg.criteria.R_crit, 2.0, *g));
    checks["mass_flux_defect"] = check_entry(mf.max_defect, 1e-3, mf.max_defect < 1e-3);
    const VirialReport vr = virial_identity_check(tr, build_virial_weight(cfg.criteria.R_crit, *g));
    checks["virial_identity_defect"] = check_entry(vr.max_defect, 1e-3, vr.max_defect < 1e-3);
    return checks;
}

int cmd_check(const RunConfig& cfg, OutputSet& out, std::ostream& log) {
    const json checks = identity_suite(cfg, log);
    bool all = true;
    for (const auto& [name, c] : checks.items()) {
        all = all && c.at("pass").get<bool>();
        log << (c.at("pass").get<bool>() ? "PASS " : "FAIL ") << name << "  " << c.at("value").dump() << '\n';
    }
    json j;
    j["config"] = to_json(cfg);
    j["checks"] = checks;
    j["all_pass"] = all;
    out.write("_check.json", dump(j));
    return all ? kExitOk : kExitComputation;
}

int cmd_decay(const RunConfig& cfg, OutputSet& out, std::ostream& log) {
    const ModelParams m = cfg.params();
    const GridPtr g = build_grid(cfg.grid.n, cfg.grid.r_max, m.N);
    const double w = cfg.init.width;
    const RadialField u0 = RadialField::from_function(g, [w](double r) { return cplx(std::exp(-0.5 * r * r / (w * w))); });
    const DecayFit fit = dispersive_decay_fit(u0, cfg.decay.t_min, cfg.decay.t_max, cfg.decay.samples, cfg.evolve.dt);
    json j;
    j["config"] = to_json(cfg);
    j["times"] = fit.times;
    j["sup_norms"] = fit.sup_norms;
    j["slope"] = fit.slope;
    j["expected_slope"] = fit.expected;
    j["relative_error"] = fit.relative_error;
    j["pass"] = fit.relative_error < 0.1;
    out.write("_decay.json", dump(j));
    log << "slope " << fit.slope << " (expected " << fit.expected << ")\n";
    return kExitOk;
}

} // namespace

std::string exponent_table(const ModelParams& m) {
    const NonlinearExponents ne = nonlinear_exponents(m);
    const ScatteringConstants sc = scattering_constants(m);
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "N = %g  b = %g  p = %g  s_c = %.12g  theta = %g  delta = %g\n", m.N, m.b, m.p,
                  m.s_c, m.theta, m.delta);
    os << line;
    const std::pair<const char*, double> scalars[] = {{"q_hat", ne.q_hat}, {"r_hat", ne.r_hat}, {"a_tilde", ne.a_tilde},
                                                      {"a_hat", ne.a_hat}, {"q_bar", ne.q_bar}, {"r_bar", ne.r_bar},
                                                      {"a_bar", ne.a_bar}, {"alpha", sc.alpha}, {"gamma", sc.gamma}};
    for (const auto& [name, v] : scalars) {
        std::snprintf(line, sizeof line, "  %-8s %22.15e\n", name, v);
        os << line;
    }
    os << "  pair              q                      r                      s          defect\n";
    const char* names[] = {"(q_hat,r_hat)", "(a_hat,r_hat)", "(a_tilde,r_hat)", "(q_bar,r_bar)", "(a_bar,r_bar)"};
    for (std::size_t k = 0; k < ne.pairs.size(); ++k) {
        const auto& e = ne.pairs[k];
        std::snprintf(line, sizeof line, "  %-16s %22.15e %22.15e %+9.6f %10.3e\n", names[k], e.q, e.r, e.s, e.defect);
        os << line;
    }
    return os.str();
}

RadialField initial_field(const RunConfig& cfg, const GridPtr& grid, const GroundState* gs) {
    const double c = cfg.init.scale, w = cfg.init.width;
    switch (cfg.init.family) {
    case InitFamily::GroundStateScaled: {
        if (!gs) throw DomainError("initial_field: ground state required");
        std::vector<cplx> v = gs->Q.values();
        for (auto& z : v) z *= c;
        return RadialField(gs->Q.grid_ptr(), std::move(v));
    }
    case InitFamily::Gaussian:
        return RadialField::from_function(grid, [c, w](double r) { return cplx(c * std::exp(-0.5 * r * r / (w * w))); });
    case InitFamily::CustomCsv: {
        RadialField f = read_profile_csv(cfg.init.path, grid);
        for (auto& z : f.values()) z *= c;
        return f;
    }
    }
    throw DomainError("initial_field: unknown family");
}

DecayFit dispersive_decay_fit(const RadialField& u0, double t_min, double t_max, int samples, double max_dt) {
    if (!(t_min > 0.0 && t_max > t_min) || samples < 2) throw DomainError("decay: bad sampling window");
    DecayFit fit;
    fit.expected = -0.5 * u0.grid().N;
    LinearPropagator lp(u0.grid_ptr(), max_dt);
    std::vector<cplx> v = u0.values();
    double t = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double tk = t_min * std::pow(t_max / t_min, static_cast<double>(k) / (samples - 1));
        lp.propagate(v, tk - t);
        t = tk;
        double sup = 0.0;
        for (const auto& z : v) sup = std::max(sup, std::abs(z));
        fit.times.push_back(tk);
        fit.sup_norms.push_back(sup);
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(samples);
    for (int k = 0; k < samples; ++k) {
        const double x = std::log(fit.times[k]), y = std::log(fit.sup_norms[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.relative_error = std::abs(fit.slope - fit.expected) / std::abs(fit.expected);
    return fit;
}

int dispatch(const std::string& subcommand, const RunConfig& cfg, const DispatchOptions& opt, std::ostream& log) {
    if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end()) {
        log << "unknown subcommand: " << subcommand << '\n';
        return kExitConfig;
    }
    OutputSet out(opt.out_dir.empty() ? fs::path(cfg.output.directory) : opt.out_dir, cfg.output.prefix);
    try {
        validate(cfg);
        if (subcommand == "ground") return cmd_ground(cfg, out, log);
        if (subcommand == "evolve") return cmd_evolve(cfg, out, log);
        if (subcommand == "sweep") return cmd_sweep(cfg, out, log, std::max(1u, opt.threads));
        if (subcommand == "check") return cmd_check(cfg, out, log);
        return cmd_decay(cfg, out, log);
    } catch (const ValidationError& e) {
        out.rollback();
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        out.rollback();
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        out.rollback();
        log << "error: " << e.what() << '\n';
        return kExitComputation;
    }
}

} // namespace inls
