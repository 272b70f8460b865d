#pragma once

// Scattering / blow-up verdicts for finished trajectories, the cQ threshold
// sweep and the energy-evacuation scan.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "inls/diagnostics.hpp"
#include "inls/errors.hpp"
#include "inls/evolve.hpp"
#include "inls/exponents.hpp"
#include "inls/functionals.hpp"
#include "inls/grid.hpp"
#include "inls/groundstate.hpp"

namespace inls {

enum class VerdictLabel { ScatteringConsistent, BlowUp, Undetermined };

inline const char* to_string(VerdictLabel v) {
    switch (v) {
    case VerdictLabel::ScatteringConsistent: return "ScatteringConsistent";
    case VerdictLabel::BlowUp: return "BlowUp";
    case VerdictLabel::Undetermined: return "Undetermined";
    }
    return "unknown";
}

struct ScatteringCriteria {
    double R_crit = 10.0;
    double epsilon_sq_fraction = 0.01; // ε² = fraction · M[u₀]
    std::vector<double> sample_times;  // empty: T/4, T/2, 3T/4, T
};

// Successive Cauchy differences must shrink by at least this relative amount
// to count as decreasing; below it they are roundoff-equal.
inline constexpr double kCauchyMargin = 1e-6;

struct Verdict {
    VerdictLabel label = VerdictLabel::Undetermined;
    double local_mass_tail = 0.0; // min over snapshots of local_mass(R_crit) / M[u₀]
    std::vector<double> cauchy_diffs;
    double growth_factor = 0.0; // peak ‖∇u(t)‖ / ‖∇u₀‖
    std::optional<RadialField> u_plus;
    std::string reason;
};

struct ScatteringEstimate {
    RadialField u_plus;
    std::vector<double> cauchy_diffs;
    std::vector<double> times;
};

inline double h1_norm(const RadialGrid& g, const std::vector<cplx>& u) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) m += std::norm(u[i]) * g.weights[i];
    return std::sqrt(m + gradient_sq(g, u));
}

inline std::vector<double> default_sample_times(double T) { return {0.25 * T, 0.5 * T, 0.75 * T, T}; }

/// u₊ ≈ e^{-it_K Δ}u(t_K) and the H¹ Cauchy differences of the pulled-back
/// states. Since the discrete free flow is unitary in H¹, ‖v_{k+1} - v_k‖
/// is evaluated as ‖u(t_{k+1}) - e^{i(t_{k+1}-t_k)Δ}u(t_k)‖; with the sponge
/// on, the comparison flow carries the same damping as the run.
inline ScatteringEstimate scattering_state_estimate(const TrajectoryRecord& tr, const std::vector<double>& sample_times) {
    if (sample_times.size() < 3) throw DomainError("scattering_state_estimate: needs at least 3 sample times");
    const double dt = tr.cfg.dt;
    std::vector<const RadialField*> f;
    ScatteringEstimate est;
    for (double t : sample_times) {
        double at = 0.0;
        const RadialField* p = tr.field_near(t, &at);
        if (!p || std::abs(at - t) > 0.5 * dt * tr.cfg.snapshot_stride + 1e-9)
            throw DomainError("scattering_state_estimate: no stored field near t = " + std::to_string(t));
        if (!est.times.empty() && at <= est.times.back())
            throw DomainError("scattering_state_estimate: sample times must increase");
        f.push_back(p);
        est.times.push_back(at);
    }
    const GridPtr grid = f.front()->grid_ptr();
    const RadialGrid& g = *grid;
    LinearPropagator lp(grid, dt);
    const std::vector<double> damp = tr.cfg.sponge_on
                                         ? sponge_factors(g, tr.cfg.sponge_fraction, tr.cfg.sponge_strength, dt)
                                         : std::vector<double>{};
    for (std::size_t k = 0; k + 1 < f.size(); ++k) {
        std::vector<cplx> v = f[k]->values();
        const auto steps = static_cast<long long>(std::llround((est.times[k + 1] - est.times[k]) / dt));
        if (damp.empty()) {
            lp.propagate(v, static_cast<double>(steps) * dt);
        } else {
            for (long long s = 0; s < steps; ++s) {
                lp.propagate(v, dt);
                for (std::size_t i = 0; i < g.n; ++i) v[i] *= damp[i];
            }
        }
        for (std::size_t i = 0; i < g.n; ++i) v[i] = (*f[k + 1])[i] - v[i];
        est.cauchy_diffs.push_back(h1_norm(g, v));
    }
    std::vector<cplx> up = f.back()->values();
    lp.propagate(up, -est.times.back());
    est.u_plus = RadialField(grid, std::move(up));
    return est;
}

inline bool strictly_decreasing_tail(const std::vector<double>& d, std::size_t count = 3) {
    if (d.size() < count || count < 2) return false;
    for (std::size_t k = d.size() - count + 1; k < d.size(); ++k)
        if (!(d[k] < d[k - 1] * (1.0 - kCauchyMargin))) return false;
    return true;
}

namespace detail {

inline std::vector<double> local_mass_series(const TrajectoryRecord& tr, double R) {
    std::vector<double> out;
    for (std::size_t j = 0; j < tr.cfg.local_radii.size(); ++j) {
        if (tr.cfg.local_radii[j] != R) continue;
        for (const auto& s : tr.snapshots) out.push_back(s.local_mass[j]);
        return out;
    }
    if (tr.fields.size() != tr.snapshots.size())
        throw DomainError("classify: R_crit is not a recorded local-mass radius");
    for (const auto& f : tr.fields) out.push_back(local_mass(f, R));
    return out;
}

} // namespace detail

inline Verdict classify_trajectory(const TrajectoryRecord& tr, const ScatteringCriteria& crit = {}) {
    Verdict v;
    v.growth_factor = tr.peak_grad_ratio;
    if (tr.snapshots.empty()) {
        v.reason = "empty trajectory";
        return v;
    }
    if (tr.termination == Termination::BlowupStop) {
        v.label = VerdictLabel::BlowUp;
        v.reason = "gradient exceeded the blow-up factor";
        return v;
    }
    const double M0 = tr.snapshots.front().mass;
    const auto lm = detail::local_mass_series(tr, crit.R_crit);
    v.local_mass_tail = M0 > 0.0 ? *std::min_element(lm.begin(), lm.end()) / M0 : 0.0;
    if (tr.termination != Termination::Horizon) {
        v.reason = std::string("run ended by ") + to_string(tr.termination);
        return v;
    }
    bool bounded = std::isfinite(tr.peak_grad_ratio) && tr.peak_grad_ratio <= tr.cfg.blowup_gradient_factor;
    for (const auto& s : tr.snapshots) bounded = bounded && std::isfinite(s.grad_norm);
    if (!bounded) {
        v.reason = "H1 norm not bounded over the run";
        return v;
    }
    const std::vector<double> samples =
        crit.sample_times.empty() ? default_sample_times(tr.snapshots.back().t) : crit.sample_times;
    ScatteringEstimate est = scattering_state_estimate(tr, samples);
    v.cauchy_diffs = est.cauchy_diffs;
    const bool small = M0 == 0.0 || v.local_mass_tail <= crit.epsilon_sq_fraction;
    const bool cauchy = strictly_decreasing_tail(v.cauchy_diffs) || M0 == 0.0;
    if (small && cauchy) {
        v.label = VerdictLabel::ScatteringConsistent;
        v.u_plus = std::move(est.u_plus);
        v.reason = "local mass small and Cauchy differences decreasing";
    } else if (!small) {
        v.reason = "local mass never fell below the threshold";
    } else {
        v.reason = "Cauchy differences not decreasing";
    }
    return v;
}

struct SweepRow {
    double c = 0.0;
    ThresholdReport threshold;
    VerdictLabel verdict = VerdictLabel::Undetermined;
    double peak_grad_ratio = 0.0;
    double final_local_mass = 0.0; // local_mass(u(T), R_crit)
    double local_mass_tail = 0.0;
    std::vector<double> cauchy_diffs;
    std::string termination;
    std::string error;
};

/// Runs cQ for every c on the ground state's grid. Rows are independent and
/// are returned in the order of `scales` whatever the thread count.
inline std::vector<SweepRow> threshold_sweep(const GroundState& gs, const std::vector<double>& scales,
                                             const ModelParams& m, const EvolutionConfig& cfg,
                                             const ScatteringCriteria& crit = {}, unsigned threads = 1) {
    EvolutionConfig run_cfg = cfg;
    run_cfg.validate();
    if (std::find(run_cfg.local_radii.begin(), run_cfg.local_radii.end(), crit.R_crit) == run_cfg.local_radii.end())
        run_cfg.local_radii.push_back(crit.R_crit);
    const auto samples = crit.sample_times.empty() ? default_sample_times(run_cfg.t_final) : crit.sample_times;
    run_cfg.field_times.insert(run_cfg.field_times.end(), samples.begin(), samples.end());
    ScatteringCriteria row_crit = crit;
    row_crit.sample_times = samples;

    std::vector<SweepRow> rows(scales.size());
    auto run_row = [&](std::size_t k) {
        SweepRow& row = rows[k];
        row.c = scales[k];
        try {
            std::vector<cplx> v = gs.Q.values();
            for (auto& z : v) z *= row.c;
            const RadialField u0(gs.Q.grid_ptr(), std::move(v));
            row.threshold = threshold_position(u0, gs, m);
            const TrajectoryRecord tr = Evolution(m, run_cfg, gs.Q.grid_ptr()).run(u0);
            row.termination = to_string(tr.termination);
            row.peak_grad_ratio = tr.peak_grad_ratio;
            row.final_local_mass = local_mass(tr.final_field, crit.R_crit);
            const Verdict vd = classify_trajectory(tr, row_crit);
            row.verdict = vd.label;
            row.local_mass_tail = vd.local_mass_tail;
            row.cauchy_diffs = vd.cauchy_diffs;
        } catch (const std::exception& e) {
            row.verdict = VerdictLabel::Undetermined;
            row.error = e.what();
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(scales.size())));
    if (workers == 1) {
        for (std::size_t k = 0; k < scales.size(); ++k) run_row(k);
        return rows;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < scales.size(); k = next++) run_row(k);
        });
    for (auto& t : pool) t.join();
    return rows;
}

/// True when no strictly-below-threshold row is labelled BlowUp.
inline bool sweep_consistent(const std::vector<SweepRow>& rows) {
    return std::none_of(rows.begin(), rows.end(), [](const SweepRow& r) {
        return r.threshold.below && r.verdict == VerdictLabel::BlowUp;
    });
}

struct EvacuationEntry {
    double T = 0.0;
    double R = 0.0;
    double ball_integral = 0.0;
    bool valid = true;
};

inline double evacuation_exponent(const ModelParams& m) { return m.N / (3.0 * m.N - 2.0 + m.b); }

inline std::vector<double> evacuation_radii(const std::vector<double>& T, const ModelParams& m) {
    std::vector<double> R;
    for (double t : T) R.push_back(std::pow(t, evacuation_exponent(m)));
    return R;
}

/// For each T_n, R_n = T_n^{N/(3N-2+b)} and the minimum of ∫_{r<=R_n}|u|^{p+1}
/// over the snapshots in [T_{n-1}, T_n] (T_0 = 0). Uses the recorded ball
/// integrals when R_n is one of the run's ball radii, stored fields otherwise.
inline std::vector<EvacuationEntry> energy_evacuation_scan(const TrajectoryRecord& tr, const ModelParams& m,
                                                           const std::vector<double>& T_list) {
    std::vector<EvacuationEntry> out;
    if (tr.snapshots.empty()) return out;
    const double r_max = tr.final_field.grid().r_max;
    const double t_end = tr.snapshots.back().t;
    double lo = 0.0;
    for (double T : T_list) {
        if (!(T > lo)) throw DomainError("energy_evacuation_scan: times must be positive and increasing");
        if (T > t_end * (1.0 + 1e-12)) throw DomainError("energy_evacuation_scan: trajectory does not reach T");
        EvacuationEntry e;
        e.T = T;
        e.R = std::pow(T, evacuation_exponent(m));
        e.valid = e.R <= r_max;
        std::ptrdiff_t col = -1;
        for (std::size_t j = 0; j < tr.cfg.ball_radii.size(); ++j)
            if (std::abs(tr.cfg.ball_radii[j] - e.R) <= 1e-12 * e.R) col = static_cast<std::ptrdiff_t>(j);
        double best = kInfinity;
        for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
            const double t = tr.snapshots[k].t;
            if (t < lo - 1e-12 || t > T + 1e-12) continue;
            double val = 0.0;
            if (col >= 0) {
                val = tr.snapshots[k].ball_lp1[static_cast<std::size_t>(col)];
            } else {
                const auto it = std::find(tr.field_snapshot.begin(), tr.field_snapshot.end(), k);
                if (it == tr.field_snapshot.end()) continue;
                val = ball_lp1(tr.fields[static_cast<std::size_t>(it - tr.field_snapshot.begin())], m.p, e.R);
            }
            best = std::min(best, val);
        }
        if (!std::isfinite(best)) throw DomainError("energy_evacuation_scan: no data for R_n on the interval");
        e.ball_integral = best;
        out.push_back(e);
        lo = T;
    }
    return out;
}

/// Non-increasing over the last three valid entries.
inline bool evacuation_tail_decreasing(const std::vector<EvacuationEntry>& e) {
    std::vector<double> v;
    for (const auto& x : e)
        if (x.valid) v.push_back(x.ball_integral);
    if (v.size() < 3) return false;
    return v[v.size() - 1] <= v[v.size() - 2] && v[v.size() - 2] <= v[v.size() - 3];
}

} // namespace inls
