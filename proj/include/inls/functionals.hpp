#pragma once

// Scalar functionals of a single field: conservation laws, local mass, the
// smooth cut-offs and the virial weight with its radial derivatives, and the
// virial quantity Z with the right-hand side of its evolution law.
//
// Derivative-carrying integrands live on cell faces, where the one-sided
// difference (u_{f+1} - u_f)/dr is centred. Face measure is omega_N r_f^{N-1}.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "inls/errors.hpp"
#include "inls/exponents.hpp"
#include "inls/grid.hpp"

namespace inls {

struct ConservedQuantities {
    double mass = 0.0;
    double energy = 0.0;
};

inline ConservedQuantities conserved_quantities(const RadialField& u, const ModelParams& m,
                                                const std::vector<double>& W) {
    ConservedQuantities c;
    c.mass = mass_of(u);
    c.energy = 0.5 * gradient_sq(u) - potential_integral(u, W, m.p) / (m.p + 1.0);
    return c;
}

inline ConservedQuantities conserved_quantities(const RadialField& u, const ModelParams& m) {
    return conserved_quantities(u, m, cell_potential(u.grid(), m.b));
}

/// ∫_{r<=R} |u|².
inline double local_mass(const RadialField& u, double R) {
    if (R < 0.0) throw DomainError("local_mass: R must be nonnegative");
    const auto& g = u.grid();
    const std::size_t m = g.cells_within(R);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += std::norm(u[i]) * g.weights[i];
    return s;
}

/// ∫_{r<=R} |u|^{p+1} (no weight).
inline double ball_lp1(const RadialField& u, double p, double R) {
    const auto& g = u.grid();
    const std::size_t m = g.cells_within(R);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += std::pow(std::abs(u[i]), p + 1.0) * g.weights[i];
    return s;
}

/// Smooth step on [0,1]: 35x⁴ - 84x⁵ + 70x⁶ - 20x⁷, flat to third order at
/// both ends. Returns value and first two derivatives.
inline std::array<double, 3> smooth_step(double x) {
    if (x <= 0.0) return {0.0, 0.0, 0.0};
    if (x >= 1.0) return {1.0, 0.0, 0.0};
    const double x2 = x * x, x3 = x2 * x, x4 = x2 * x2;
    const double s = x4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)));
    const double ds = 140.0 * x3 * (1.0 - x) * (1.0 - x) * (1.0 - x);
    const double d2s = 420.0 * x2 * (1.0 - x) * (1.0 - x) * (1.0 - 2.0 * x);
    return {s, ds, d2s};
}

/// 1 on r <= R/2, 0 on r >= R/2 + R/A, monotone in between.
struct CutoffProfile {
    double R = 0.0;
    double A = 2.0;
    double N = 3.0;
    std::vector<double> phi;     // cells
    std::vector<double> lap_phi; // cells
    std::vector<double> phi_face;
    std::vector<double> dphi_face;
    double phi_lap_phi_const = 0.0; // R² ‖φ Δφ‖_∞

    struct Sample {
        double phi, dphi, d2phi, lap;
    };

    Sample eval(double r) const {
        const double w = R / A;
        const auto s = smooth_step((r - 0.5 * R) / w);
        const double phi_v = 1.0 - s[0], d1 = -s[1] / w, d2 = -s[2] / (w * w);
        return {phi_v, d1, d2, d2 + (N - 1.0) * d1 / r};
    }
};

inline CutoffProfile build_cutoff(double R, double A, const RadialGrid& g) {
    if (!(R > 0.0) || !(A > 0.0)) throw DomainError("build_cutoff: R and A must be positive");
    if (R / A < 4.0 * g.dr) throw DomainError("build_cutoff: transition shell narrower than four cells");
    CutoffProfile c;
    c.R = R;
    c.A = A;
    c.N = g.N;
    c.phi.resize(g.n);
    c.lap_phi.resize(g.n);
    c.phi_face.resize(g.n);
    c.dphi_face.resize(g.n);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        const auto s = c.eval(g.nodes[i]);
        c.phi[i] = s.phi;
        c.lap_phi[i] = s.lap;
        worst = std::max(worst, std::abs(s.phi * s.lap));
        const auto f = c.eval(g.faces[i]);
        c.phi_face[i] = f.phi;
        c.dphi_face[i] = f.dphi;
    }
    c.phi_lap_phi_const = worst * R * R;
    return c;
}

/// ∫ φ |u|².
inline double weighted_mass(const RadialField& u, const CutoffProfile& c) {
    const auto& g = u.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) s += c.phi[i] * std::norm(u[i]) * g.weights[i];
    return s;
}

/// 2 Im ∫ φ'(r) ū ∂_r u, the time derivative of ∫ φ|u|² along the flow.
inline double mass_flux(const RadialField& u, const CutoffProfile& c) {
    const auto& g = u.grid();
    double s = 0.0;
    for (std::size_t f = 0; f < g.n; ++f) {
        if (c.dphi_face[f] == 0.0) continue;
        const cplx next = f + 1 < g.n ? u[f + 1] : cplx(0.0);
        s += g.coupling[f] * g.dr * c.dphi_face[f] * std::imag(std::conj(u[f]) * next);
    }
    return 2.0 * s;
}

/// a(r) = r² near the origin, 2Rr - R² + O(ρR) beyond R, joined by a C⁵
/// transition on [R/2 - ρ, R] where a'' = 2 g(x) with
///   g(x) = 1 - S(x) + 315 x⁴ (1-x)⁴,   ∫₀¹ g = 1,
/// so that a'(R) = 2R exactly and a', a'' >= 0.
struct VirialWeight {
    double R = 0.0;
    double rho = 0.0;
    double N = 3.0;
    std::vector<double> a, da, d2a, lap_a, bilap_a; // cells
    std::vector<double> da_face, d2a_face;
    double a_at_R = 0.0;

    struct Sample {
        double a, d1, d2, d3, d4;
    };

    double inner() const { return 0.5 * R - rho; }
    double width() const { return R - inner(); }

    // g = 1 + 280x⁴ - 1176x⁵ + 1820x⁶ - 1240x⁷ + 315x⁸
    static constexpr std::array<double, 9> g_coef{1.0, 0.0, 0.0, 0.0, 280.0, -1176.0, 1820.0, -1240.0, 315.0};

    static double poly(const std::array<double, 9>& c, double x, int deriv) {
        double s = 0.0;
        for (int k = 8; k >= deriv; --k) {
            double ck = c[static_cast<std::size_t>(k)];
            for (int j = 0; j < deriv; ++j) ck *= static_cast<double>(k - j);
            s = s * x + ck;
        }
        return s;
    }

    // ∫₀ˣ g and ∫₀ˣ∫₀ʸ g.
    static double g_int1(double x) {
        double s = 0.0;
        for (int k = 8; k >= 0; --k) s = s * x + g_coef[static_cast<std::size_t>(k)] / (k + 1.0);
        return s * x;
    }
    static double g_int2(double x) {
        double s = 0.0;
        for (int k = 8; k >= 0; --k) s = s * x + g_coef[static_cast<std::size_t>(k)] / ((k + 1.0) * (k + 2.0));
        return s * x * x;
    }

    Sample eval(double r) const {
        const double r0 = inner(), L = width();
        if (r <= r0) return {r * r, 2.0 * r, 2.0, 0.0, 0.0};
        if (r < R) {
            const double x = (r - r0) / L;
            return {r0 * r0 + 2.0 * r0 * (r - r0) + 2.0 * L * L * g_int2(x),
                    2.0 * r0 + 2.0 * L * g_int1(x),
                    2.0 * poly(g_coef, x, 0),
                    2.0 * poly(g_coef, x, 1) / L,
                    2.0 * poly(g_coef, x, 2) / (L * L)};
        }
        return {a_at_R + 2.0 * R * (r - R), 2.0 * R, 0.0, 0.0, 0.0};
    }

    /// Δa = a'' + (N-1)a'/r.
    double laplacian(double r) const {
        const auto s = eval(r);
        return s.d2 + (N - 1.0) * s.d1 / r;
    }

    /// ΔΔa = a'''' + 2(N-1)a'''/r + (N-1)(N-3)(a''/r² - a'/r³).
    double bilaplacian(double r) const {
        const auto s = eval(r);
        return s.d4 + 2.0 * (N - 1.0) * s.d3 / r + (N - 1.0) * (N - 3.0) * (s.d2 / (r * r) - s.d1 / (r * r * r));
    }

    /// (a(R) - R²) / (ρR): the constant in a(R) = R²(1 + O(ρ/R)).
    double a_defect_constant() const { return (a_at_R - R * R) / (rho * R); }
};

inline VirialWeight build_virial_weight(double R, const RadialGrid& g, double rho = -1.0) {
    if (rho < 0.0) rho = R / 20.0;
    if (!(R / 2.0 > 5.0 * g.dr)) throw DomainError("build_virial_weight: R too small for the grid");
    if (!(rho > 0.0) || !(rho < R / 4.0)) throw DomainError("build_virial_weight: need 0 < rho < R/4");
    VirialWeight w;
    w.R = R;
    w.rho = rho;
    w.N = g.N;
    const double r0 = w.inner(), L = w.width();
    w.a_at_R = r0 * r0 + 2.0 * r0 * L + 2.0 * L * L * VirialWeight::g_int2(1.0);
    w.a.resize(g.n);
    w.da.resize(g.n);
    w.d2a.resize(g.n);
    w.lap_a.resize(g.n);
    w.bilap_a.resize(g.n);
    w.da_face.resize(g.n);
    w.d2a_face.resize(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double r = g.nodes[i];
        const auto s = w.eval(r);
        w.a[i] = s.a;
        w.da[i] = s.d1;
        w.d2a[i] = s.d2;
        w.lap_a[i] = w.laplacian(r);
        w.bilap_a[i] = w.bilaplacian(r);
        const auto f = w.eval(g.faces[i]);
        w.da_face[i] = f.d1;
        w.d2a_face[i] = f.d2;
    }
    return w;
}

/// Z = 2 Im ∫ ū ∂_r u a'(r).
inline double virial_Z(const RadialField& u, const VirialWeight& w) {
    const auto& g = u.grid();
    if (w.da_face.size() != g.n) throw DomainError("virial_Z: weight built on another grid");
    double s = 0.0;
    for (std::size_t f = 0; f < g.n; ++f) {
        const cplx next = f + 1 < g.n ? u[f + 1] : cplx(0.0);
        s += g.coupling[f] * g.dr * w.da_face[f] * std::imag(std::conj(u[f]) * next);
    }
    return 2.0 * s;
}

/// Right-hand side of dZ/dt:
///   (4/(p+1) - 2) ∫ r^{-b}|u|^{p+1} Δa - 4b/(p+1) ∫ r^{-b}|u|^{p+1} a'/r
///   - ∫ |u|² ΔΔa + 4 ∫ a'' |∂_r u|².
inline double virial_rhs(const RadialField& u, const VirialWeight& w, const ModelParams& m,
                         const std::vector<double>& W) {
    const auto& g = u.grid();
    if (w.lap_a.size() != g.n) throw DomainError("virial_rhs: weight built on another grid");
    const double c1 = 4.0 / (m.p + 1.0) - 2.0, c2 = 4.0 * m.b / (m.p + 1.0);
    double nl = 0.0, lin = 0.0, hess = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        const double a2 = std::norm(u[i]);
        const double pot = W[i] * std::pow(a2, 0.5 * (m.p + 1.0)) * g.weights[i];
        nl += pot * (c1 * w.lap_a[i] - c2 * w.da[i] / g.nodes[i]);
        lin -= a2 * w.bilap_a[i] * g.weights[i];
        const cplx next = i + 1 < g.n ? u[i + 1] : cplx(0.0);
        hess += g.coupling[i] * w.d2a_face[i] * std::norm(next - u[i]);
    }
    return nl + lin + 4.0 * hess;
}

inline double virial_rhs(const RadialField& u, const VirialWeight& w, const ModelParams& m) {
    return virial_rhs(u, w, m, cell_potential(u.grid(), m.b));
}

} // namespace inls
