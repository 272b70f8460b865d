// Acceptance runner: criteria 1-10, one PASS/FAIL line each.
// Exit status is 0 only when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "inls/classify.hpp"
#include "inls/cli.hpp"
#include "inls/config.hpp"
#include "inls/diagnostics.hpp"
#include "support/renormalization_oracle.hpp"

using namespace inls;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ModelParams kModel = ModelParams::make(3, 1, 2);

RadialField scaled(const GroundState& gs, double c) {
    std::vector<cplx> v = gs.Q.values();
    for (auto& z : v) z *= c;
    return RadialField(gs.Q.grid_ptr(), std::move(v));
}

// Sweep setting shared by criteria 6, 8 and 9. T = r_max/4.
constexpr std::size_t kSweepN = 65536;
constexpr double kSweepRmax = 160.0;
constexpr double kSweepT = 40.0;
constexpr double kSweepDt = 8e-3;
constexpr std::int64_t kSweepBudget = 12000;

EvolutionConfig sweep_config() {
    EvolutionConfig cfg;
    cfg.dt = kSweepDt;
    cfg.t_final = kSweepT;
    cfg.snapshot_stride = 25;
    cfg.sponge_on = true;
    cfg.max_substeps = kSweepBudget;
    return cfg;
}

const GroundState& sweep_ground_state() {
    static const GroundState gs = solve_ground_state(kModel, build_grid(kSweepN, kSweepRmax, 3), 1e-8);
    return gs;
}

// The c = 0.5 row of the sweep, rerun with extra ball radii for the
// evacuation scan. Ball radii are read-only diagnostics, so the field
// history is the sweep row's.
const TrajectoryRecord& half_q_run() {
    static const TrajectoryRecord tr = [] {
        EvolutionConfig cfg = sweep_config();
        const auto R = evacuation_radii({5, 10, 20, 40}, kModel);
        cfg.ball_radii.insert(cfg.ball_radii.end(), R.begin(), R.end());
        return run(scaled(sweep_ground_state(), 0.5), kModel, cfg);
    }();
    return tr;
}

// ---------------------------------------------------------------------------

double p_lower(double N, double b) { return 1.0 + (4.0 - 2.0 * b) / N; }
double p_upper(double N, double b) { return 1.0 + (4.0 - 2.0 * b) / (N - 2.0); }

// |2/q - (N/2 - N/r - s)|, written out apart from the library.
double scaling_defect(double q, double r, double s, double N) {
    return std::abs(2.0 / q - (0.5 * N - N / r - s));
}

Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20260611);
    std::uniform_real_distribution<double> uN(2.2, 6.0), u01(0.02, 0.98);
    double worst = 0.0;
    int distant_missing = 0;
    for (int k = 0; k < 200; ++k) {
        const double N = uN(rng);
        const double b = u01(rng) * std::min(N / 2.0, 2.0) * 0.95;
        const double p = p_lower(N, b) + u01(rng) * (p_upper(N, b) - p_lower(N, b));
        const ModelParams m = ModelParams::make(N, b, p);
        const auto ne = nonlinear_exponents(m);
        for (const auto& e : ne.pairs) worst = std::max(worst, scaling_defect(e.q, e.r, e.s, N));
        // Distant-past pair from a Ḣ^{s_c} pair with q between 2/(1-s_c) and
        // 1/(δ s_c). δ only has to be small enough for the triple, so it is
        // shrunk from the default until some q on a geometric ladder meets
        // the precondition.
        bool found = false;
        for (double delta = m.delta; delta > 1e-4 && !found; delta /= 5.0) {
            const ModelParams md = ModelParams::make(N, b, p, delta);
            const double lo = 2.0 / (1.0 - md.s_c), hi = 1.0 / (delta * md.s_c);
            for (int j = 1; j < 16 && hi > lo && !found; ++j) {
                const double q = lo * std::pow(hi / lo, j / 16.0);
                const double r = N / (0.5 * N - md.s_c - 2.0 / q);
                try {
                    const auto e = distant_past_pair(q, r, md);
                    worst = std::max(worst, scaling_defect(e.q, e.r, 0.0, N));
                    found = true;
                } catch (const DomainError&) {
                }
            }
        }
        if (!found) ++distant_missing;
    }
    // intercritical_check against s_c computed here.
    std::uniform_real_distribution<double> uN2(2.1, 7.0), ub(0.0, 1.0), up(1.01, 8.0);
    int disagree = 0;
    for (int k = 0; k < 200; ++k) {
        const double N = uN2(rng), b = ub(rng) * std::min(N / 2.0, 2.0) * 0.999, p = up(rng);
        const double sc = 0.5 * N - (2.0 - b) / (p - 1.0);
        if (intercritical_check(ModelParams::make(N, b, p)) != (sc > 0.0 && sc < 1.0)) ++disagree;
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-12 && distant_missing == 0 && disagree == 0 && secs < 1.0,
            fmt("max defect %.2e, distant-past pair unavailable for %d triples, check disagreements %d, %.3f s",
                worst, distant_missing, disagree, secs)};
}

// ---------------------------------------------------------------------------

Outcome criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    struct Row {
        double N, b, p;
    };
    const Row rows[] = {{3, 0, 3}, {3, 1, 2}, {4, 1, 2.2}, {2.5, 0.5, 3}};
    bool ok = true;
    std::string detail;
    for (const auto& row : rows) {
        detail += fmt("(%g,%g,%g): ", row.N, row.b, row.p);
        try {
            const ModelParams m = ModelParams::make(row.N, row.b, row.p);
            const GroundState gs = solve_ground_state(m, build_grid(65536, 16, row.N), 1e-8);
            const double res = gs.residual / std::sqrt(gs.mass);
            const auto [p1, p2] = pohozaev_residuals(gs, m);
            const auto orc = oracle::petviashvili(gs.Q.grid(), row.b, row.p);
            double diff = 0.0;
            for (std::size_t i = 0; i < gs.Q.size(); ++i) diff = std::max(diff, std::abs(gs.Q[i].real() - orc.Q[i]));
            const bool pass = res < 1e-8 && std::abs(p1) < 1e-6 && std::abs(p2) < 1e-6 && gs.energy > 0.0 && diff < 1e-4;
            ok = ok && pass;
            detail += fmt("res %.1e poh %.1e/%.1e E %.3f oracle %.1e%s; ", res, std::abs(p1), std::abs(p2), gs.energy,
                          diff, pass ? "" : " FAIL");
        } catch (const std::exception& e) {
            ok = false;
            detail += std::string("rejected: ") + e.what() + "; ";
        }
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 30.0, detail + fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------

Outcome criterion3() {
    const auto t0 = std::chrono::steady_clock::now();
    const GroundState gs = solve_ground_state(kModel, build_grid(8192, 40, 3), 1e-8);
    auto drifts = [&](double dt) {
        EvolutionConfig cfg;
        cfg.dt = dt;
        cfg.t_final = 10.0;
        cfg.snapshot_stride = static_cast<int>(std::lround(0.1 / dt));
        const auto tr = run(scaled(gs, 0.5), kModel, cfg);
        const double M0 = tr.snapshots.front().mass, E0 = tr.snapshots.front().energy;
        double md = 0.0, ed = 0.0;
        for (const auto& s : tr.snapshots) {
            md = std::max(md, std::abs(s.mass - M0) / M0);
            ed = std::max(ed, std::abs(s.energy - E0) / std::abs(E0));
        }
        if (tr.termination != Termination::Horizon) md = ed = kInfinity;
        return std::pair{md, ed};
    };
    const auto [md, ed] = drifts(1e-3);
    const auto [md2, ed2] = drifts(2e-3);
    const double ratio = ed2 / ed;
    const double secs = seconds_since(t0);
    return {md < 1e-10 && ed < 1e-5 && std::abs(ratio - 4.0) <= 1.0 && secs < 120.0,
            fmt("mass drift %.2e, energy drift %.2e (dt=1e-3) and %.2e (dt=2e-3), ratio %.2f, %.1f s", md, ed, ed2,
                ratio, secs)};
}

// ---------------------------------------------------------------------------

Outcome criterion4() {
    const auto t0 = std::chrono::steady_clock::now();
    const GroundState gs = solve_ground_state(kModel, build_grid(16384, 32, 3), 1e-8);
    const VirialWeight w = build_virial_weight(10.0, gs.Q.grid());
    auto defect = [&](double dt) {
        EvolutionConfig cfg;
        cfg.dt = dt;
        cfg.t_final = 0.35;
        cfg.snapshot_stride = 1;
        return virial_identity_check(run(scaled(gs, 0.5), kModel, cfg), w).max_defect;
    };
    const double d1 = defect(1e-3), d2 = defect(5e-4);
    const double ratio = d1 / d2;

    // Standing wave on a finer grid: the rhs at Q is an O(dr²) balance.
    const GroundState fine = solve_ground_state(kModel, build_grid(65536, 16, 3), 1e-8);
    EvolutionConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 0.05;
    cfg.snapshot_stride = 1;
    const auto sw = virial_identity_check(run(fine.Q, kModel, cfg), build_virial_weight(10.0, fine.Q.grid()));
    const double K = fine.grad_norm * fine.grad_norm;
    const double z = sw.max_abs_Z / K, rhs = sw.max_abs_rhs / K;
    const double secs = seconds_since(t0);
    return {d2 < 1e-3 && std::abs(ratio - 4.0) <= 1.0 && z < 1e-6 && rhs < 1e-6 && secs < 120.0,
            fmt("defect %.2e (dt=1e-3) %.2e (dt=5e-4), ratio %.2f; standing wave |Z|/K %.1e |rhs|/K %.1e; %.1f s", d1,
                d2, ratio, z, rhs, secs)};
}

// ---------------------------------------------------------------------------

Outcome criterion5() {
    const auto t0 = std::chrono::steady_clock::now();
    const GroundState gs = solve_ground_state(kModel, build_grid(8192, 80, 3), 1e-8);
    EvolutionConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 20.0;
    cfg.snapshot_stride = 20;
    cfg.keep_fields = true;
    cfg.sponge_on = true;
    cfg.virial_R = 0.0;
    const auto tr = run(scaled(gs, 0.5), kModel, cfg);
    double comm = 0.0, worst_flux = 0.0, lo = kInfinity, hi = 0.0;
    std::string scaled_list;
    for (double R : {10.0, 20.0, 40.0}) {
        const MassFluxReport mf = mass_flux_check(tr, build_cutoff(R, 2.0, gs.Q.grid()));
        worst_flux = std::max(worst_flux, mf.max_defect);
        lo = std::min(lo, mf.scaled_bound);
        hi = std::max(hi, mf.scaled_bound);
        scaled_list += fmt(" %.3e", mf.scaled_bound);

        // The commutator defect goes like (dr/R)^2, so each R gets its own
        // grid reaching 2R, with fields evolved until they cross the shell.
        const GroundState gr = solve_ground_state(kModel, build_grid(8192, 2 * R, 3), 1e-8);
        EvolutionConfig c2;
        c2.dt = 5e-3;
        c2.t_final = R / 2;
        c2.snapshot_stride = static_cast<int>(R / 2 / c2.dt / 8);
        c2.keep_fields = true;
        c2.sponge_on = true;
        c2.virial_R = 0.0;
        const auto tr2 = run(scaled(gr, 0.5), kModel, c2);
        const CutoffProfile cut = build_cutoff(R, 2.0, gr.Q.grid());
        for (const RadialField& f : tr2.fields) {
            double scale = 0.0;
            const double d = commutator_defect(f, cut, &scale);
            if (scale > 0.0) comm = std::max(comm, d / scale);
        }
    }
    const double secs = seconds_since(t0);
    return {comm < 1e-6 && worst_flux < 1e-3 && hi <= 1.5 * lo,
            fmt("commutator %.2e, mass-flux defect %.2e, R*max flux over R=10,20,40:%s (spread %.2f), %.1f s", comm,
                worst_flux, scaled_list.c_str(), hi / lo, secs)};
}

// ---------------------------------------------------------------------------

Outcome criterion6() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& tr = half_q_run();
    if (tr.termination != Termination::Horizon)
        return {false, std::string("c=0.5 run ended by ") + to_string(tr.termination)};
    const double Ts[] = {10, 20, 40};
    double avg[3], bound[3], logsum = 0.0;
    for (int k = 0; k < 3; ++k) {
        const auto r = morawetz_average(tr, 10.0, Ts[k], kModel);
        avg[k] = r.average;
        bound[k] = r.bound;
        logsum += std::log(avg[k] / bound[k]);
    }
    const double C = std::exp(logsum / 3.0);
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) worst = std::max(worst, avg[k] / (C * bound[k]));
    const bool halved = avg[2] <= 0.5 * avg[0];
    return {halved && worst < 10.0,
            fmt("averages %.3e %.3e %.3e (T=10,20,40), fitted C %.3e, max avg/(C bound) %.2f, %.1f s", avg[0], avg[1],
                avg[2], C, worst, seconds_since(t0))};
}

// ---------------------------------------------------------------------------

Outcome criterion7() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (double N : {3.0, 2.5}) {
        const GridPtr g = build_grid(8192, 120, N);
        const RadialField u0 = RadialField::from_function(g, [](double r) { return cplx(std::exp(-0.5 * r * r)); });
        const DecayFit fit = dispersive_decay_fit(u0, 2.0, 20.0, 12, 0.02);
        ok = ok && fit.relative_error < 0.1;
        detail += fmt("N=%g slope %.4f (expected %.2f); ", N, fit.slope, fit.expected);
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 60.0, detail + fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------

Outcome criterion8() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> scales{0.3, 0.5, 0.7, 0.9, 1.2, 2, 3};
    const auto rows = threshold_sweep(sweep_ground_state(), scales, kModel, sweep_config());
    const double secs = seconds_since(t0);
    bool ok = sweep_consistent(rows);
    std::string detail;
    for (const auto& r : rows) {
        if (r.c < 1.0 && r.verdict != VerdictLabel::ScatteringConsistent) ok = false;
        if (r.c == 3.0 && r.verdict != VerdictLabel::BlowUp) ok = false;
        detail += fmt("c=%g %s (%s", r.c, to_string(r.verdict), r.termination.c_str());
        if (!r.error.empty()) detail += ", " + r.error;
        detail += fmt(", tail %.3f); ", r.local_mass_tail);
    }
    return {ok && secs < 600.0, detail + fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------

Outcome criterion9() {
    const auto& tr = half_q_run();
    const auto e = energy_evacuation_scan(tr, kModel, {5, 10, 20, 40});
    std::string detail;
    for (const auto& x : e) detail += fmt("T=%g R=%.3f %.4e; ", x.T, x.R, x.ball_integral);
    return {evacuation_tail_decreasing(e), detail};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string csv_body(const std::string& csv) { return csv.substr(std::min(csv.size(), csv.find('\n') + 1)); }

Outcome criterion10() {
    const fs::path dir = fs::temp_directory_path() / "inls_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string config = R"({
  "model": {"N": 3, "b": 1, "p": 2},
  "grid": {"n": 2048, "r_max": 40},
  "evolve": {"dt": 0.005, "t_final": 2, "snapshot_stride": 10},
  "init": {"family": "groundstate-scaled", "scale": 0.8}
})";
    std::ofstream(dir / "cfg.json") << config;
    const char* lab = std::getenv("INLS_LAB");
    for (const char* sub : {"a", "b"}) {
        const fs::path out = dir / sub;
        int rc = 0;
        if (lab) {
            const std::string cmd = std::string(lab) + " evolve --config " + (dir / "cfg.json").string() + " --out " +
                                    out.string() + " >/dev/null 2>&1";
            const int st = std::system(cmd.c_str());
            rc = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
        } else {
            std::ostringstream log;
            DispatchOptions opt;
            opt.out_dir = out;
            rc = dispatch("evolve", parse_config_text(config), opt, log);
        }
        if (rc != 0) return {false, fmt("evolve exited with %d", rc)};
    }
    const std::string a = csv_body(slurp(dir / "a" / "inls_trajectory.csv"));
    const std::string b = csv_body(slurp(dir / "b" / "inls_trajectory.csv"));
    const bool same = !a.empty() && a == b;
    return {same, fmt("%zu body bytes, %s, via %s", a.size(), same ? "identical" : "different",
                      lab ? "inls_lab" : "in-process dispatch")};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                         criterion6, criterion7, criterion8, criterion9, criterion10};
    // Optional arguments select criteria by number.
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) continue;
        Outcome o;
        try {
            o = criteria[k]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2d %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
