#pragma once

// Time integration of i u_t + Δu + r^{-b}|u|^{p-1}u = 0 on the radial grid.
//
// The nonlinear step is the implicit midpoint rule written as a Crank-Nicolson
// step whose potential W|ū|^{p-1} is frozen at the midpoint ū = (uⁿ + uⁿ⁺¹)/2
// and updated by fixed-point iteration. Every iterate is a Cayley transform
// of a Hermitian operator, so mass is conserved to solver roundoff whether or
// not the iteration has fully converged.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "inls/errors.hpp"
#include "inls/exponents.hpp"
#include "inls/functionals.hpp"
#include "inls/grid.hpp"
#include "inls/tridiagonal.hpp"

namespace inls {

struct EvolutionConfig {
    double dt = 1e-3;
    double t_final = 10.0;
    int snapshot_stride = 10;
    double blowup_gradient_factor = 25.0;
    bool sponge_on = false;
    double sponge_fraction = 0.1;
    double sponge_strength = 2.0;
    bool nonlinear = true;

    // The first startup_time of the run uses dt/startup_substeps: cQ with
    // c != 1 has a mismatched cusp at the origin when b > 0, and full steps
    // there leave an O(dt²) energy offset that dominates the whole run.
    double startup_time = 0.1;
    int startup_substeps = 8;

    double fixed_point_tol = 1e-12;
    int fixed_point_max = 30;
    double dt_min = 1e-10;
    // Cap on the total number of implicit sub-steps (0: none). A run that
    // exhausts it ends as step-underflow, like one that hits dt_min.
    std::int64_t max_substeps = 0;

    std::vector<double> local_radii{10.0};
    std::vector<double> ball_radii{10.0};
    double virial_R = 10.0; // <= 0 disables Z and its rhs
    bool keep_fields = false;
    std::vector<double> field_times; // fields stored at the snapshots nearest these

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("evolve: dt must be positive");
        if (!(t_final > 0.0) || !std::isfinite(t_final)) throw DomainError("evolve: t_final must be positive");
        if (snapshot_stride < 1) throw DomainError("evolve: snapshot_stride must be >= 1");
        if (!(blowup_gradient_factor > 1.0)) throw DomainError("evolve: blowup_gradient_factor must exceed 1");
        if (!(sponge_fraction > 0.0 && sponge_fraction < 1.0)) throw DomainError("evolve: sponge_fraction in (0,1)");
        if (!(sponge_strength >= 0.0)) throw DomainError("evolve: sponge_strength must be >= 0");
        if (startup_substeps < 1 || !(startup_time >= 0.0)) throw DomainError("evolve: bad start-up settings");
        if (!(fixed_point_tol > 0.0) || fixed_point_max < 1) throw DomainError("evolve: bad fixed-point settings");
        if (max_substeps < 0) throw DomainError("evolve: max_substeps must be >= 0");
    }
};

enum class Termination { Horizon, BlowupStop, StepUnderflow };

inline const char* to_string(Termination t) {
    switch (t) {
    case Termination::Horizon: return "horizon";
    case Termination::BlowupStop: return "blowup-stop";
    case Termination::StepUnderflow: return "step-underflow";
    }
    return "unknown";
}

struct Snapshot {
    double t = 0.0;
    double mass = 0.0;
    double energy = 0.0;
    double grad_norm = 0.0;
    std::vector<double> local_mass; // one per cfg.local_radii
    double Z = 0.0;
    double dZdt_rhs = 0.0;
    double sup_norm = 0.0;
    std::vector<double> ball_lp1; // one per cfg.ball_radii
};

struct TrajectoryRecord {
    ModelParams params;
    EvolutionConfig cfg;
    std::vector<Snapshot> snapshots;
    std::vector<RadialField> fields; // parallel to field_snapshot
    std::vector<std::size_t> field_snapshot;
    RadialField initial;
    RadialField final_field;
    Termination termination = Termination::Horizon;
    std::int64_t substeps = 0; // implicit solves spent
    double initial_grad = 0.0;
    double peak_grad_ratio = 0.0;
    std::string note;

    std::vector<double> times() const {
        std::vector<double> t;
        t.reserve(snapshots.size());
        for (const auto& s : snapshots) t.push_back(s.t);
        return t;
    }

    /// Stored field at the snapshot whose time is closest to t, if any.
    const RadialField* field_near(double t, double* at = nullptr) const {
        const RadialField* best = nullptr;
        double gap = kInfinity;
        for (std::size_t k = 0; k < fields.size(); ++k) {
            const double tk = snapshots[field_snapshot[k]].t;
            if (std::abs(tk - t) < gap) {
                gap = std::abs(tk - t);
                best = &fields[k];
                if (at) *at = tk;
            }
        }
        return best;
    }
};

namespace detail {

// |z|^{e} from |z|², with the common exponents avoiding pow.
inline double abs_pow_from_norm(double norm2, double e) {
    if (e == 1.0) return std::sqrt(norm2);
    if (e == 2.0) return norm2;
    if (e == 0.0) return 1.0;
    if (norm2 == 0.0) return 0.0;
    return std::pow(norm2, 0.5 * e);
}

} // namespace detail

class Stepper {
public:
    Stepper(GridPtr grid, const ModelParams& m, bool nonlinear = true)
        : grid_(std::move(grid)), m_(m), nonlinear_(nonlinear) {
        if (!grid_) throw DomainError("Stepper: null grid");
        if (grid_->N != m.N) throw DomainError("Stepper: grid dimension differs from model");
        W_ = cell_potential(*grid_, m.b);
        K_ = laplacian_bands(*grid_);
        const std::size_t n = grid_->n;
        Ku_.resize(n);
        next_.resize(n);
        cp_.resize(n);
        pot_.resize(n);
    }

    const RadialGrid& grid() const { return *grid_; }
    const std::vector<double>& potential() const { return W_; }
    const ModelParams& params() const { return m_; }
    int last_iterations() const { return last_iterations_; }

    /// One implicit-midpoint step. Returns false (u untouched) if the
    /// fixed-point iteration fails to converge.
    bool try_step(std::vector<cplx>& u, double dt, const std::vector<cplx>* guess = nullptr) {
        const RadialGrid& g = *grid_;
        const std::size_t n = g.n;
        apply_stiffness(g, u, Ku_);
        if (!nonlinear_) {
            std::fill(pot_.begin(), pot_.end(), 0.0);
            solve_cn(u, dt);
            u.swap(next_);
            last_iterations_ = 1;
            return true;
        }
        std::vector<cplx>& iterate = iterate_;
        iterate = guess ? *guess : u;
        double scale = 0.0;
        for (const auto& z : u) scale = std::max(scale, std::abs(z));
        if (scale == 0.0) {
            last_iterations_ = 0;
            return true;
        }
        const double e = m_.p - 1.0;
        double prev_change2 = kInfinity;
        for (int it = 1; it <= fixed_point_max; ++it) {
            for (std::size_t i = 0; i < n; ++i)
                pot_[i] = W_[i] * detail::abs_pow_from_norm(std::norm(0.5 * (u[i] + iterate[i])), e);
            if (!solve_cn(u, dt)) return false;
            double change2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) change2 = std::max(change2, std::norm(next_[i] - iterate[i]));
            iterate.swap(next_);
            if (!std::isfinite(change2)) return false;
            if (std::sqrt(change2) <= fixed_point_tol * scale) {
                u.swap(iterate);
                last_iterations_ = it;
                return true;
            }
            // A growing correction after the first few sweeps means the
            // contraction has failed; give up rather than spend the budget.
            if (it > 3 && change2 > prev_change2) return false;
            prev_change2 = change2;
        }
        return false;
    }

    /// Step of size dt, bisected recursively while the fixed point fails.
    /// The split depth that last worked is reused and relaxed by one level
    /// per clean step. Throws SolveFailure once a piece would be shorter than
    /// dt_min.
    void step(std::vector<cplx>& u, double dt, double dt_min = 1e-10,
              const std::vector<cplx>* guess = nullptr) {
        tripped_ = false;
        elapsed_ = 0.0;
        const int start = depth_hint_;
        if (start == 0) {
            if (!split(u, dt, dt_min, 0, guess)) depth_hint_ = std::max(depth_hint_ - 1, 0);
            return;
        }
        const auto pieces = std::int64_t{1} << start;
        const double h = dt / static_cast<double>(pieces);
        bool failed = false;
        for (std::int64_t k = 0; k < pieces && !tripped_; ++k) failed = split(u, h, dt_min, start, nullptr) || failed;
        if (!failed) depth_hint_ = start - 1;
    }

    int depth_hint() const { return depth_hint_; }
    void reset_depth() { depth_hint_ = 0; }
    /// Implicit solves attempted so far, failed ones included.
    std::int64_t substeps() const { return substeps_; }

    double fixed_point_tol = 1e-12;
    int fixed_point_max = 30;
    /// When positive, a split step stops as soon as a piece leaves ‖∇u‖
    /// above this value; tripped() and elapsed() then say where it stopped.
    double grad_watch = 0.0;
    bool tripped() const { return tripped_; }
    double elapsed() const { return elapsed_; }

private:
    // Returns true when some piece had to be split below `depth`.
    bool split(std::vector<cplx>& u, double dt, double dt_min, int depth, const std::vector<cplx>* guess) {
        if (tripped_) return false;
        ++substeps_;
        if (try_step(u, dt, guess)) {
            elapsed_ += dt;
            if (depth > 0 && grad_watch > 0.0 && gradient_sq(*grid_, u) > grad_watch * grad_watch) tripped_ = true;
            return false;
        }
        if (0.5 * dt < dt_min) throw SolveFailure("step: fixed point failed at the minimum step");
        depth_hint_ = std::max(depth_hint_, depth + 1);
        split(u, 0.5 * dt, dt_min, depth + 1, nullptr);
        split(u, 0.5 * dt, dt_min, depth + 1, nullptr);
        return true;
    }

    // Solves (V - i dt/2 (K + V pot)) x = (V + i dt/2 (K + V pot)) u into next_.
    bool solve_cn(const std::vector<cplx>& u, double dt) {
        const RadialGrid& g = *grid_;
        const std::size_t n = g.n;
        const cplx h(0.0, 0.5 * dt);
        // Forward sweep of the Thomas algorithm fused with assembly.
        cplx prev_cp(0.0), prev_dp(0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double V = g.weights[i];
            const cplx Hu = Ku_[i] + V * pot_[i] * u[i];
            const cplx rhs = V * u[i] + h * Hu;
            const cplx diag = V - h * (K_.diag[i] + V * pot_[i]);
            const cplx lo = -h * K_.lower[i];
            const cplx up = -h * K_.upper[i];
            const cplx piv = diag - lo * prev_cp;
            const double pn = std::norm(piv);
            if (!(pn > 0.0) || !std::isfinite(pn)) return false;
            const cplx inv = std::conj(piv) / pn;
            prev_cp = up * inv;
            prev_dp = (rhs - lo * prev_dp) * inv;
            cp_[i] = prev_cp;
            next_[i] = prev_dp;
        }
        for (std::size_t i = n - 1; i-- > 0;) next_[i] -= cp_[i] * next_[i + 1];
        return true;
    }

    GridPtr grid_;
    ModelParams m_;
    bool nonlinear_;
    std::vector<double> W_;
    LaplacianBands K_;
    std::vector<cplx> Ku_, next_, cp_, iterate_;
    std::vector<double> pot_;
    int last_iterations_ = 0;
    int depth_hint_ = 0;
    std::int64_t substeps_ = 0;
    bool tripped_ = false;
    double elapsed_ = 0.0;
};

/// Single step of the flow as a free function.
inline RadialField step(const RadialField& u, const ModelParams& m, double dt) {
    if (!(dt > 0.0)) throw DomainError("step: dt must be positive");
    Stepper s(u.grid_ptr(), m, true);
    std::vector<cplx> v = u.values();
    s.step(v, dt);
    return RadialField(u.grid_ptr(), std::move(v));
}

/// Free Schrödinger flow by Crank-Nicolson with a cached factorisation.
class LinearPropagator {
public:
    LinearPropagator(GridPtr grid, double max_dt) : grid_(std::move(grid)), max_dt_(max_dt) {
        if (!grid_) throw DomainError("LinearPropagator: null grid");
        if (!(max_dt > 0.0)) throw DomainError("LinearPropagator: max_dt must be positive");
        K_ = laplacian_bands(*grid_);
    }

    double max_dt() const { return max_dt_; }

    /// e^{itΔ}u with ceil(|t|/max_dt) equal steps.
    void propagate(std::vector<cplx>& u, double t) {
        if (t == 0.0) return;
        const double steps_d = std::ceil(std::abs(t) / max_dt_ - 1e-9);
        const std::size_t steps = static_cast<std::size_t>(std::max(1.0, steps_d));
        const double h = t / static_cast<double>(steps);
        prepare(h);
        std::vector<cplx> Ku;
        for (std::size_t k = 0; k < steps; ++k) {
            apply_stiffness(*grid_, u, Ku);
            const cplx c(0.0, 0.5 * h);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = grid_->weights[i] * u[i] + c * Ku[i];
            factor_.solve(u);
        }
    }

    RadialField propagate(const RadialField& u0, double t) {
        std::vector<cplx> v = u0.values();
        propagate(v, t);
        return RadialField(u0.grid_ptr(), std::move(v));
    }

private:
    void prepare(double h) {
        if (h == cached_h_) return;
        const std::size_t n = grid_->n;
        const cplx c(0.0, 0.5 * h);
        std::vector<cplx> lo(n), d(n), up(n);
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = -c * K_.lower[i];
            up[i] = -c * K_.upper[i];
            d[i] = grid_->weights[i] - c * K_.diag[i];
        }
        factor_.factor(lo, d, up);
        cached_h_ = h;
    }

    GridPtr grid_;
    double max_dt_;
    LaplacianBands K_;
    ThomasFactor<cplx> factor_;
    double cached_h_ = 0.0;
};

inline RadialField linear_propagate(const RadialField& u0, double t, double max_dt = 1e-3) {
    LinearPropagator lp(u0.grid_ptr(), max_dt);
    return lp.propagate(u0, t);
}

/// exp(-σ(r) dt) with σ = strength·s² on the outer shell, s the depth into it.
inline std::vector<double> sponge_factors(const RadialGrid& g, double fraction, double strength, double dt) {
    std::vector<double> f(g.n, 1.0);
    const double start = g.r_max * (1.0 - fraction);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double r = g.nodes[i];
        if (r <= start) continue;
        const double s = (r - start) / (g.r_max - start);
        f[i] = std::exp(-strength * s * s * dt);
    }
    return f;
}

class Evolution {
public:
    Evolution(const ModelParams& m, const EvolutionConfig& cfg, GridPtr grid)
        : m_(m), cfg_(cfg), grid_(std::move(grid)), stepper_(grid_, m, cfg.nonlinear) {
        cfg_.validate();
        stepper_.fixed_point_tol = cfg_.fixed_point_tol;
        stepper_.fixed_point_max = cfg_.fixed_point_max;
        if (cfg_.virial_R > 0.0) weight_ = build_virial_weight(cfg_.virial_R, *grid_);
    }

    const std::optional<VirialWeight>& weight() const { return weight_; }

    Snapshot measure(const RadialField& u, double t) const {
        Snapshot s;
        s.t = t;
        const auto c = conserved_quantities(u, m_, stepper_.potential());
        s.mass = c.mass;
        s.energy = c.energy;
        s.grad_norm = std::sqrt(gradient_sq(u));
        for (double R : cfg_.local_radii) s.local_mass.push_back(local_mass(u, R));
        for (double R : cfg_.ball_radii) s.ball_lp1.push_back(ball_lp1(u, m_.p, R));
        if (weight_) {
            s.Z = virial_Z(u, *weight_);
            s.dZdt_rhs = virial_rhs(u, *weight_, m_, stepper_.potential());
        }
        s.sup_norm = sup_norm_from(u, 0.0);
        return s;
    }

    TrajectoryRecord run(const RadialField& u0) {
        if (u0.grid_ptr().get() != grid_.get()) require_same_grid(u0, RadialField(grid_), "run");
        TrajectoryRecord rec;
        rec.params = m_;
        rec.cfg = cfg_;
        rec.initial = u0;
        const double dt = cfg_.dt;
        const auto total = static_cast<std::int64_t>(std::llround(cfg_.t_final / dt));
        if (total < 1) throw DomainError("run: t_final shorter than one step");
        const std::vector<double> damp =
            cfg_.sponge_on ? sponge_factors(*grid_, cfg_.sponge_fraction, cfg_.sponge_strength, dt)
                           : std::vector<double>{};

        std::vector<cplx> u = u0.values(), prev;
        rec.initial_grad = std::sqrt(gradient_sq(*grid_, u));
        const double grad_limit = cfg_.blowup_gradient_factor * rec.initial_grad;
        auto keep_field_at = [&](std::int64_t k) {
            if (cfg_.keep_fields) return true;
            const double t = static_cast<double>(k) * dt;
            const double half = 0.5 * dt * cfg_.snapshot_stride;
            return std::any_of(cfg_.field_times.begin(), cfg_.field_times.end(),
                               [&](double ft) { return std::abs(ft - t) <= half + 1e-12; });
        };
        auto record = [&](std::int64_t k, double t_at = -1.0) {
            RadialField f(grid_, u);
            rec.snapshots.push_back(measure(f, t_at >= 0.0 ? t_at : static_cast<double>(k) * dt));
            if (keep_field_at(k)) {
                rec.fields.push_back(f);
                rec.field_snapshot.push_back(rec.snapshots.size() - 1);
            }
        };
        record(0);
        rec.peak_grad_ratio = 1.0;
        const std::int64_t startup_steps =
            cfg_.nonlinear ? static_cast<std::int64_t>(std::llround(cfg_.startup_time / dt)) : 0;
        std::vector<cplx> guess, backup;
        const std::int64_t substeps0 = stepper_.substeps();
        stepper_.grad_watch = rec.initial_grad > 0.0 ? grad_limit : 0.0;
        std::int64_t k = 1;
        try {
            for (; k <= total; ++k) {
                backup = u;
                double reached = 0.0; // time covered inside this step
                if (k <= startup_steps && cfg_.startup_substeps > 1) {
                    const double h = dt / cfg_.startup_substeps;
                    for (int j = 0; j < cfg_.startup_substeps; ++j) {
                        stepper_.step(u, h, cfg_.dt_min);
                        if (stepper_.tripped()) {
                            reached += stepper_.elapsed();
                            break;
                        }
                        reached += h;
                    }
                    prev.clear();
                } else {
                    const std::vector<cplx>* gp = nullptr;
                    if (!prev.empty()) {
                        guess.resize(u.size());
                        for (std::size_t i = 0; i < u.size(); ++i) guess[i] = 2.0 * u[i] - prev[i];
                        gp = &guess;
                    }
                    stepper_.step(u, dt, cfg_.dt_min, gp);
                    reached = stepper_.elapsed();
                    prev = backup;
                }
                if (stepper_.tripped()) {
                    // The gradient crossed the limit inside a split step.
                    rec.peak_grad_ratio = std::max(rec.peak_grad_ratio, std::sqrt(gradient_sq(*grid_, u)) / rec.initial_grad);
                    record(k, static_cast<double>(k - 1) * dt + reached);
                    rec.termination = Termination::BlowupStop;
                    break;
                }
                if (cfg_.max_substeps > 0 && stepper_.substeps() - substeps0 > cfg_.max_substeps)
                    throw SolveFailure("run: sub-step budget exhausted");
                if (!damp.empty())
                    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= damp[i];
                const double grad = std::sqrt(gradient_sq(*grid_, u));
                if (!std::isfinite(grad)) throw SolveFailure("run: non-finite field");
                if (rec.initial_grad > 0.0) rec.peak_grad_ratio = std::max(rec.peak_grad_ratio, grad / rec.initial_grad);
                if (rec.initial_grad > 0.0 && grad > grad_limit) {
                    record(k);
                    rec.termination = Termination::BlowupStop;
                    break;
                }
                if (k % cfg_.snapshot_stride == 0 || k == total) record(k);
            }
        } catch (const SolveFailure& e) {
            // Roll back to the last completed step so the final field and the
            // closing snapshot refer to the same time.
            rec.termination = Termination::StepUnderflow;
            rec.note = e.what();
            u = backup;
            if (k > 1 && rec.snapshots.back().t < static_cast<double>(k - 1) * dt) record(k - 1);
        }
        rec.substeps = stepper_.substeps() - substeps0;
        rec.final_field = RadialField(grid_, u);
        return rec;
    }

private:
    ModelParams m_;
    EvolutionConfig cfg_;
    GridPtr grid_;
    Stepper stepper_;
    std::optional<VirialWeight> weight_;
};

inline TrajectoryRecord run(const RadialField& u0, const ModelParams& m, const EvolutionConfig& cfg) {
    Evolution ev(m, cfg, u0.grid_ptr());
    return ev.run(u0);
}

} // namespace inls
