#pragma once

// Trajectory-level checks and the functional inequalities: threshold
// position, mass flux through a cut-off, the virial identity, Morawetz time
// averages, and the radial Strauss / Gagliardo-Nirenberg / commutator /
// coercivity suite.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "inls/errors.hpp"
#include "inls/evolve.hpp"
#include "inls/exponents.hpp"
#include "inls/functionals.hpp"
#include "inls/grid.hpp"
#include "inls/groundstate.hpp"

namespace inls {

struct ThresholdReport {
    double me_value = 0.0;   // M^{(1-s_c)/s_c} E
    double grad_value = 0.0; // ‖u‖^{(1-s_c)/s_c} ‖∇u‖
    double me_ratio = 0.0;   // relative to the ground state
    double grad_ratio = 0.0;
    bool below_me = false;
    bool below_grad = false;
    bool below = false;
};

inline constexpr double kThresholdSlack = 1e-12;

inline ThresholdReport threshold_position(const RadialField& u, const GroundState& gs, const ModelParams& m) {
    require_intercritical(m, "threshold_position");
    const auto c = conserved_quantities(u, m);
    const double e = m.mass_exponent();
    ThresholdReport r;
    r.me_value = std::pow(c.mass, e) * c.energy;
    r.grad_value = std::pow(std::sqrt(c.mass), e) * std::sqrt(gradient_sq(u));
    r.me_ratio = r.me_value / gs.me_threshold;
    r.grad_ratio = r.grad_value / gs.grad_threshold;
    r.below_me = r.me_ratio < 1.0 - kThresholdSlack;
    r.below_grad = r.grad_ratio < 1.0 - kThresholdSlack;
    r.below = r.below_me && r.below_grad;
    return r;
}

namespace detail {

// Indices k of snapshots whose fields are stored and whose neighbours
// k-1, k+1 are stored too, at equal spacing.
inline std::vector<std::size_t> centred_field_triples(const TrajectoryRecord& tr) {
    std::vector<std::size_t> out;
    for (std::size_t j = 1; j + 1 < tr.field_snapshot.size(); ++j) {
        const std::size_t a = tr.field_snapshot[j - 1], k = tr.field_snapshot[j], c = tr.field_snapshot[j + 1];
        if (a + 1 != k || k + 1 != c) continue;
        const double h1 = tr.snapshots[k].t - tr.snapshots[a].t, h2 = tr.snapshots[c].t - tr.snapshots[k].t;
        if (std::abs(h1 - h2) > 1e-9 * std::max(h1, h2)) continue;
        out.push_back(j);
    }
    return out;
}

} // namespace detail

struct MassFluxReport {
    double max_defect = 0.0;   // max |FD - flux| / (M0/R)
    double max_flux = 0.0;     // max |2 Im ∫ η' ū ∂_r u|
    double scaled_bound = 0.0; // R * max_flux
    std::size_t samples = 0;
};

/// Centred difference of ∫η|u|² against the flux 2 Im∫η' ū ∂_r u.
inline MassFluxReport mass_flux_check(const TrajectoryRecord& tr, const CutoffProfile& cut) {
    MassFluxReport rep;
    const auto triples = detail::centred_field_triples(tr);
    if (triples.empty()) throw DomainError("mass_flux_check: needs stored fields at consecutive snapshots");
    const double M0 = tr.snapshots.front().mass;
    if (!(M0 > 0.0)) return rep;
    for (std::size_t j : triples) {
        const double h = tr.snapshots[tr.field_snapshot[j + 1]].t - tr.snapshots[tr.field_snapshot[j]].t;
        const double fd = (weighted_mass(tr.fields[j + 1], cut) - weighted_mass(tr.fields[j - 1], cut)) / (2.0 * h);
        const double flux = mass_flux(tr.fields[j], cut);
        rep.max_defect = std::max(rep.max_defect, std::abs(fd - flux) / (M0 / cut.R));
        rep.max_flux = std::max(rep.max_flux, std::abs(flux));
        ++rep.samples;
    }
    rep.scaled_bound = cut.R * rep.max_flux;
    return rep;
}

struct VirialReport {
    double max_defect = 0.0; // relative, see virial_identity_check
    double max_abs_Z = 0.0;
    double max_abs_rhs = 0.0;
    std::size_t samples = 0;
};

/// Centred difference of Z against the virial right-hand side, each defect
/// divided by max(|rhs|, ‖∇u‖²). Uses stored fields when every snapshot has
/// one, otherwise the Z/rhs recorded during the run (which requires the
/// run's virial radius to equal w.R).
inline VirialReport virial_identity_check(const TrajectoryRecord& tr, const VirialWeight& w) {
    VirialReport rep;
    const std::size_t n = tr.snapshots.size();
    std::vector<double> Z(n), rhs(n), g2(n), t(n);
    const bool from_fields = tr.fields.size() == n;
    if (!from_fields && tr.cfg.virial_R != w.R)
        throw DomainError("virial_identity_check: trajectory recorded with a different virial radius and no fields");
    const std::vector<double> W =
        from_fields ? cell_potential(tr.fields.front().grid(), tr.params.b) : std::vector<double>{};
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = tr.snapshots[k].t;
        g2[k] = tr.snapshots[k].grad_norm * tr.snapshots[k].grad_norm;
        if (from_fields) {
            Z[k] = virial_Z(tr.fields[k], w);
            rhs[k] = virial_rhs(tr.fields[k], w, tr.params, W);
        } else {
            Z[k] = tr.snapshots[k].Z;
            rhs[k] = tr.snapshots[k].dZdt_rhs;
        }
        rep.max_abs_Z = std::max(rep.max_abs_Z, std::abs(Z[k]));
        rep.max_abs_rhs = std::max(rep.max_abs_rhs, std::abs(rhs[k]));
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
        if (std::abs(h1 - h2) > 1e-9 * std::max(h1, h2)) continue;
        const double fd = (Z[k + 1] - Z[k - 1]) / (t[k + 1] - t[k - 1]);
        const double scale = std::max(std::abs(rhs[k]), g2[k]);
        if (scale == 0.0) continue;
        rep.max_defect = std::max(rep.max_defect, std::abs(fd - rhs[k]) / scale);
        ++rep.samples;
    }
    return rep;
}

struct MorawetzReport {
    double average = 0.0; // (1/T)∫₀ᵀ∫_{r<=R}|u|^{p+1}
    double bound = 0.0;   // R^{b+1}/T + R^{-(2-b)(N-1)/N}
};

inline double morawetz_bound(double R, double T, const ModelParams& m) {
    return std::pow(R, m.b + 1.0) / T + std::pow(R, -(2.0 - m.b) * (m.N - 1.0) / m.N);
}

/// Trapezoid rule over the snapshots in [0, T]. R must be one of the run's
/// ball radii unless fields were stored at every snapshot.
inline MorawetzReport morawetz_average(const TrajectoryRecord& tr, double R, double T, const ModelParams& m) {
    if (!(T > 0.0)) throw DomainError("morawetz_average: T must be positive");
    if (tr.snapshots.empty() || tr.snapshots.back().t < T * (1.0 - 1e-12))
        throw DomainError("morawetz_average: trajectory does not cover [0, T]");
    std::ptrdiff_t col = -1;
    for (std::size_t j = 0; j < tr.cfg.ball_radii.size(); ++j)
        if (tr.cfg.ball_radii[j] == R) col = static_cast<std::ptrdiff_t>(j);
    const bool from_fields = col < 0;
    if (from_fields && tr.fields.size() != tr.snapshots.size())
        throw DomainError("morawetz_average: R is not a recorded ball radius");
    auto value = [&](std::size_t k) {
        return from_fields ? ball_lp1(tr.fields[k], m.p, R) : tr.snapshots[k].ball_lp1[static_cast<std::size_t>(col)];
    };
    double acc = 0.0;
    for (std::size_t k = 1; k < tr.snapshots.size(); ++k) {
        const double t0 = tr.snapshots[k - 1].t, t1 = tr.snapshots[k].t;
        if (t0 >= T) break;
        acc += 0.5 * (t1 - t0) * (value(k - 1) + value(k));
    }
    return {acc / T, morawetz_bound(R, T, m)};
}

struct InequalityReport {
    double strauss_ratio = 0.0; // sup_R R^{(N-1)/2} ‖u‖_{L∞(r>=R)} / ‖u‖_{H¹}
    double gn_ratio = 0.0;      // sup_R R^{(N-1)(p-1)/2} ∫_{r>=R}|u|^{p+1} / ‖u‖_{H¹}^{p+1}
    double commutator_defect = 0.0;
    double commutator_scale = 0.0; // ∫φ²|∇u|², for relative statements
    double cutoff_constant = 0.0;  // R²‖φΔφ‖_∞
    double grad_ratio = 0.0;
    double coercivity_value = 0.0; // ∫|∇u|² + ((N-b)/(p+1) - N/2) ∫ r^{-b}|u|^{p+1}
    double coercivity_delta = 0.0; // measured δ' = value / ∫ r^{-b}|u|^{p+1}
    bool coercivity_hypothesis = false;
    bool coercivity_holds = false;
};

struct InequalityOptions {
    std::vector<double> radii{1.0, 2.0, 4.0, 8.0};
    double cutoff_R = 10.0;
    double cutoff_A = 2.0;
    double delta = 0.05; // hypothesis: gradient ratio < 1 - delta
};

/// |∫|∇(φu)|² - ∫φ²|∇u|² + ∫φΔφ|u|²|, with φ sampled at cell centres for
/// the product, at faces for φ², and Δφ analytic.
inline double commutator_defect(const RadialField& u, const CutoffProfile& c, double* scale = nullptr) {
    const auto& g = u.grid();
    double i1 = 0.0, i2 = 0.0, i3 = 0.0;
    for (std::size_t f = 0; f < g.n; ++f) {
        const cplx cur = c.phi[f] * u[f];
        const cplx next = f + 1 < g.n ? c.phi[f + 1] * u[f + 1] : cplx(0.0);
        const cplx du = (f + 1 < g.n ? u[f + 1] : cplx(0.0)) - u[f];
        i1 += g.coupling[f] * std::norm(next - cur);
        i2 += g.coupling[f] * c.phi_face[f] * c.phi_face[f] * std::norm(du);
        i3 += g.weights[f] * c.phi[f] * c.lap_phi[f] * std::norm(u[f]);
    }
    if (scale) *scale = i2;
    return std::abs(i1 - i2 + i3);
}

inline InequalityReport inequality_suite(const RadialField& u, const ModelParams& m, const GroundState& gs,
                                         const InequalityOptions& opt = {}) {
    const auto& g = u.grid();
    InequalityReport r;
    const double mass = mass_of(u), g2 = gradient_sq(u);
    const double h1 = std::sqrt(mass + g2);
    if (h1 > 0.0) {
        for (double R : opt.radii) {
            r.strauss_ratio = std::max(r.strauss_ratio, std::pow(R, 0.5 * (m.N - 1.0)) * sup_norm_from(u, R) / h1);
            double tail = 0.0;
            for (std::size_t i = g.first_cell_from(R); i < g.n; ++i)
                tail += std::pow(std::abs(u[i]), m.p + 1.0) * g.weights[i];
            r.gn_ratio = std::max(r.gn_ratio,
                                  std::pow(R, 0.5 * (m.N - 1.0) * (m.p - 1.0)) * tail / std::pow(h1, m.p + 1.0));
        }
    }
    const CutoffProfile cut = build_cutoff(opt.cutoff_R, opt.cutoff_A, g);
    r.commutator_defect = commutator_defect(u, cut, &r.commutator_scale);
    r.cutoff_constant = cut.phi_lap_phi_const;

    const double P = potential_integral(u, cell_potential(g, m.b), m.p);
    r.coercivity_value = g2 + ((m.N - m.b) / (m.p + 1.0) - 0.5 * m.N) * P;
    r.coercivity_delta = P > 0.0 ? r.coercivity_value / P : std::numeric_limits<double>::infinity();
    r.grad_ratio = threshold_position(u, gs, m).grad_ratio;
    r.coercivity_hypothesis = r.grad_ratio < 1.0 - opt.delta;
    r.coercivity_holds = !r.coercivity_hypothesis || r.coercivity_value > 0.0;
    return r;
}

/// C in ∫_{r<=R}|u|² <= C R^{N(p-1)/(p+1)} (∫_{r<=R}|u|^{p+1})^{2/(p+1)}, as
/// realised by the field; Hölder gives C <= (ω_N/N)^{(p-1)/(p+1)} with R the
/// outer face of the last included cell.
inline double holder_constant(const RadialField& u, double p, double R) {
    const auto& g = u.grid();
    const std::size_t m = g.cells_within(R);
    if (m == 0) return 0.0;
    const double Reff = g.faces[m - 1];
    const double lm = local_mass(u, R), lp = ball_lp1(u, p, R);
    if (lp == 0.0) return 0.0;
    return lm / (std::pow(Reff, g.N * (p - 1.0) / (p + 1.0)) * std::pow(lp, 2.0 / (p + 1.0)));
}

inline double holder_bound(const RadialGrid& g, double p) {
    return std::pow(g.omega_N / g.N, (p - 1.0) / (p + 1.0));
}

} // namespace inls
