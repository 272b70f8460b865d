#pragma once

// Ground state of ΔQ - Q + r^{-b} Q^p = 0.
//
// The amplitude Q(0) is found by shooting on the radial ODE. The bisection
// bracket is (turns upward, crosses zero); the profile is taken from the
// bracket where both sides still agree, continued by the e^{-r} r^{-(N-1)/2}
// tail, and then polished by Newton on the discrete equation so that the
// returned profile is an exact solution of the scheme the evolution uses.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include "inls/errors.hpp"
#include "inls/exponents.hpp"
#include "inls/grid.hpp"
#include "inls/tridiagonal.hpp"

namespace inls {

struct GroundState {
    ModelParams params;
    RadialField Q;
    double mass = 0.0;
    double energy = 0.0;
    double grad_norm = 0.0;
    double potential = 0.0; // ∫ r^{-b} Q^{p+1}
    double me_threshold = 0.0;
    double grad_threshold = 0.0;
    double shoot_value = 0.0;
    double residual = 0.0;
    double shooting_deviation = 0.0; // max |Q_shot - Q| / Q(0)
    int newton_iterations = 0;
};

struct ShootingOptions {
    double amp_lo = 1e-3;
    double amp_hi = 1e3;
    double bisect_rtol = 1e-12;
    double agree_rtol = 1e-7; // bracket profiles must agree this well to be used
    int newton_max = 40;
    double max_shooting_deviation = 0.05;
};

namespace detail {

enum class ShotOutcome { TurnsUp, CrossesZero, Undecided };

struct Shot {
    ShotOutcome outcome = ShotOutcome::Undecided;
    std::vector<double> phi; // samples at grid nodes up to the decision point
};

// Two-term expansion about the origin, at the first grid node.
inline std::pair<double, double> series_start(double A, double r, double N, double b, double p) {
    const double Ap = std::pow(A, p - 1.0);
    const double phi = A * (1.0 - Ap * std::pow(r, 2.0 - b) / ((2.0 - b) * (N - b)) + r * r / (2.0 * N));
    const double dphi = A * (-Ap * std::pow(r, 1.0 - b) / (N - b) + r / N);
    return {phi, dphi};
}

inline Shot shoot(double A, const RadialGrid& g, double b, double p) {
    const double N = g.N;
    auto rhs = [&](double r, double y, double z) {
        const double nl = std::pow(r, -b) * std::pow(std::abs(y), p - 1.0) * y;
        return y - nl - (N - 1.0) * z / r;
    };
    Shot s;
    s.phi.reserve(g.n);
    auto [y, z] = series_start(A, g.nodes[0], N, b, p);
    s.phi.push_back(y);
    const double h = g.dr;
    for (std::size_t i = 0; i + 1 < g.n; ++i) {
        const double r = g.nodes[i];
        const double k1y = z, k1z = rhs(r, y, z);
        const double k2y = z + 0.5 * h * k1z, k2z = rhs(r + 0.5 * h, y + 0.5 * h * k1y, z + 0.5 * h * k1z);
        const double k3y = z + 0.5 * h * k2z, k3z = rhs(r + 0.5 * h, y + 0.5 * h * k2y, z + 0.5 * h * k2z);
        const double k4y = z + h * k3z, k4z = rhs(r + h, y + h * k3y, z + h * k3z);
        y += h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0;
        z += h * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0;
        if (!std::isfinite(y) || !std::isfinite(z)) {
            s.outcome = z > 0.0 ? ShotOutcome::TurnsUp : ShotOutcome::CrossesZero;
            return s;
        }
        if (y <= 0.0) {
            s.outcome = ShotOutcome::CrossesZero;
            return s;
        }
        s.phi.push_back(y);
        if (z > 0.0) {
            s.outcome = ShotOutcome::TurnsUp;
            return s;
        }
    }
    return s;
}

inline double discrete_residual(const RadialGrid& g, const std::vector<double>& W, double p,
                                const std::vector<double>& phi) {
    std::vector<double> Kphi;
    apply_stiffness(g, phi, Kphi);
    double s = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        const double res = -Kphi[i] / g.weights[i] + phi[i] - W[i] * std::pow(std::abs(phi[i]), p - 1.0) * phi[i];
        s += res * res * g.weights[i];
    }
    return std::sqrt(s);
}

inline int newton_polish(const RadialGrid& g, const std::vector<double>& W, double p,
                         std::vector<double>& phi, int max_iter) {
    const LaplacianBands K = laplacian_bands(g);
    std::vector<double> Kphi, lower(g.n), diag(g.n), upper(g.n), F(g.n);
    for (int it = 1; it <= max_iter; ++it) {
        apply_stiffness(g, phi, Kphi);
        for (std::size_t i = 0; i < g.n; ++i) {
            const double a = std::abs(phi[i]);
            const double wp = W[i] * std::pow(a, p - 1.0);
            F[i] = -Kphi[i] + g.weights[i] * (phi[i] - wp * phi[i]);
            diag[i] = -K.diag[i] + g.weights[i] * (1.0 - p * wp);
            lower[i] = -K.lower[i];
            upper[i] = -K.upper[i];
        }
        const std::vector<double> step = solve_tridiagonal_pivoting(lower, diag, upper, F);
        double change = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < g.n; ++i) {
            phi[i] -= step[i];
            change = std::max(change, std::abs(step[i]));
            scale = std::max(scale, std::abs(phi[i]));
        }
        if (!std::isfinite(change)) throw ResolutionTooCoarse("ground state: Newton polish diverged");
        if (change <= 1e-14 * scale) return it;
    }
    return max_iter;
}

} // namespace detail

inline void fill_ground_state_functionals(GroundState& gs) {
    const auto& g = gs.Q.grid();
    const ModelParams& m = gs.params;
    gs.mass = mass_of(gs.Q);
    const double G = gradient_sq(gs.Q);
    gs.grad_norm = std::sqrt(G);
    gs.potential = potential_integral(gs.Q, cell_potential(g, m.b), m.p);
    gs.energy = 0.5 * G - gs.potential / (m.p + 1.0);
    const double e = m.mass_exponent();
    gs.me_threshold = std::pow(gs.mass, e) * gs.energy;
    gs.grad_threshold = std::pow(std::sqrt(gs.mass), e) * gs.grad_norm;
}

inline GroundState solve_ground_state(const ModelParams& m, const GridPtr& grid, double tol = 1e-8,
                                      const ShootingOptions& opt = {}) {
    require_intercritical(m, "solve_ground_state");
    if (!(tol > 0.0)) throw DomainError("solve_ground_state: tol must be positive");
    if (!grid || grid->N != m.N) throw DomainError("solve_ground_state: grid dimension differs from model");
    const RadialGrid& g = *grid;
    using detail::ShotOutcome;

    // Bracket: the smallest amplitude that crosses zero, just above one that
    // turns upward.
    const int scan = 48;
    const double ratio = std::pow(opt.amp_hi / opt.amp_lo, 1.0 / scan);
    double lo = -1.0, hi = -1.0;
    double A = opt.amp_lo;
    ShotOutcome prev = detail::shoot(A, g, m.b, m.p).outcome;
    for (int k = 1; k <= scan; ++k) {
        const double next = opt.amp_lo * std::pow(ratio, k);
        const ShotOutcome cur = detail::shoot(next, g, m.b, m.p).outcome;
        if (prev == ShotOutcome::TurnsUp && cur == ShotOutcome::CrossesZero) {
            lo = A;
            hi = next;
            break;
        }
        A = next;
        prev = cur;
    }
    if (lo < 0.0) {
        std::ostringstream os;
        os << "solve_ground_state: no shooting bracket in [" << opt.amp_lo << ", " << opt.amp_hi << "]";
        throw NoConvergence(os.str());
    }
    while (hi - lo > opt.bisect_rtol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const ShotOutcome o = detail::shoot(mid, g, m.b, m.p).outcome;
        if (o == ShotOutcome::TurnsUp) lo = mid;
        else if (o == ShotOutcome::CrossesZero) hi = mid;
        else {
            lo = hi = mid;
            break;
        }
    }

    const detail::Shot s_lo = detail::shoot(lo, g, m.b, m.p);
    const detail::Shot s_hi = detail::shoot(hi, g, m.b, m.p);
    const std::size_t common = std::min(s_lo.phi.size(), s_hi.phi.size());
    std::size_t match = 0;
    for (std::size_t i = 0; i < common; ++i) {
        const double a = s_lo.phi[i], c = s_hi.phi[i];
        if (std::abs(a - c) > opt.agree_rtol * std::abs(a)) break;
        if (i > 0 && a >= s_lo.phi[i - 1]) break;
        match = i;
    }
    if (match < 2) throw ResolutionTooCoarse("solve_ground_state: bracket profiles disagree at the origin");

    std::vector<double> phi(g.n);
    const double rm = g.nodes[match], phim = 0.5 * (s_lo.phi[match] + s_hi.phi[match]);
    for (std::size_t i = 0; i < g.n; ++i) {
        if (i <= match) {
            phi[i] = 0.5 * (s_lo.phi[i] + s_hi.phi[i]);
        } else {
            const double r = g.nodes[i];
            phi[i] = phim * std::pow(rm / r, 0.5 * (m.N - 1.0)) * std::exp(-(r - rm));
        }
    }
    const std::vector<double> shot = phi;

    const std::vector<double> W = cell_potential(g, m.b);
    GroundState gs;
    gs.params = m;
    gs.shoot_value = 0.5 * (lo + hi);
    gs.newton_iterations = detail::newton_polish(g, W, m.p, phi, opt.newton_max);

    double dev = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        if (!(phi[i] > 0.0))
            throw ResolutionTooCoarse("solve_ground_state: polished profile is not positive; refine the grid");
        dev = std::max(dev, std::abs(phi[i] - shot[i]));
    }
    gs.shooting_deviation = dev / gs.shoot_value;
    if (gs.shooting_deviation > opt.max_shooting_deviation)
        throw ResolutionTooCoarse("solve_ground_state: discrete solution drifted away from the shot profile");

    gs.residual = detail::discrete_residual(g, W, m.p, phi);
    std::vector<cplx> values(phi.begin(), phi.end());
    gs.Q = RadialField(grid, std::move(values));
    fill_ground_state_functionals(gs);
    if (gs.residual > tol * std::sqrt(gs.mass)) {
        std::ostringstream os;
        os << "solve_ground_state: residual " << gs.residual << " exceeds " << tol << "*|Q|";
        throw ResolutionTooCoarse(os.str());
    }
    return gs;
}

/// Normalised residuals of the two integral identities
///   (i)  ∫|∇Q|² + ∫Q² - ∫r^{-b}Q^{p+1} = 0
///   (ii) (N-2)/2 ∫|∇Q|² + N/2 ∫Q² - (N-b)/(p+1) ∫r^{-b}Q^{p+1} = 0,
/// each divided by the sum of the magnitudes of its terms.
inline std::pair<double, double> pohozaev_residuals(const GroundState& gs, const ModelParams& m) {
    const double G = gradient_sq(gs.Q), M = mass_of(gs.Q);
    const double P = potential_integral(gs.Q, cell_potential(gs.Q.grid(), m.b), m.p);
    const double r1 = (G + M - P) / (G + M + P);
    const double a = 0.5 * (m.N - 2.0) * G, c = 0.5 * m.N * M, d = (m.N - m.b) / (m.p + 1.0) * P;
    const double r2 = (a + c - d) / (a + c + d);
    return {r1, r2};
}

/// (M[Q]^{(1-s_c)/s_c} E[Q], ‖Q‖^{(1-s_c)/s_c} ‖∇Q‖).
inline std::pair<double, double> threshold_constants(const GroundState& gs, const ModelParams& m) {
    require_intercritical(m, "threshold_constants");
    const double e = m.mass_exponent();
    return {std::pow(gs.mass, e) * gs.energy, std::pow(std::sqrt(gs.mass), e) * gs.grad_norm};
}

} // namespace inls
