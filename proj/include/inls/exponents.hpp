#pragma once

// Exponent arithmetic for the radial INLS  i u_t + Δu + |x|^{-b}|u|^{p-1}u = 0:
// critical index, intercritical range, admissible pairs and the auxiliary
// exponent families used by the scattering argument. Nothing here touches
// PDE data.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "inls/errors.hpp"

namespace inls {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// N/2 - (2-b)/(p-1).
inline double critical_index(double N, double b, double p) {
    if (!(N > 2.0)) throw DomainError("critical_index: N must exceed 2");
    if (!(p > 1.0)) throw DomainError("critical_index: p must exceed 1");
    return N / 2.0 - (2.0 - b) / (p - 1.0);
}

/// Upper end of the b-range covered by the Strichartz-based local theory.
inline double b_star(double N) {
    if (!(N > 0.0)) throw DomainError("b_star: N must be positive");
    return N <= 3.0 ? N / 3.0 : 2.0;
}

inline double default_theta(double b) { return b == 0.0 ? 0.0 : 1e-3; }
inline constexpr double kDefaultDelta = 0.05;

struct ModelParams {
    double N = 3.0;
    double b = 0.0;
    double p = 3.0;
    double s_c = 0.0;
    double p_star = 6.0;
    double theta = 0.0;
    double delta = kDefaultDelta;
    bool intercritical = false;

    /// Validates N > 2, 0 <= b < min(N/2, 2), p > 1 and fills the derived
    /// exponents. A triple outside the intercritical range is still a valid
    /// ModelParams; callers that need it check `intercritical`.
    static ModelParams make(double N, double b, double p,
                            double delta = kDefaultDelta,
                            double theta = std::numeric_limits<double>::quiet_NaN()) {
        if (!(N > 2.0)) throw DomainError("model: N must exceed 2");
        if (!(b >= 0.0) || !(b < std::min(N / 2.0, 2.0)))
            throw DomainError("model: b must satisfy 0 <= b < min(N/2, 2)");
        if (!(p > 1.0)) throw DomainError("model: p must exceed 1");
        ModelParams m;
        m.N = N;
        m.b = b;
        m.p = p;
        m.s_c = critical_index(N, b, p);
        m.p_star = 2.0 * N / (N - 2.0);
        m.theta = std::isnan(theta) ? default_theta(b) : theta;
        m.delta = delta;
        if (!(m.delta > 0.0 && m.delta < 1.0))
            throw DomainError("model: delta must lie in (0, 1)");
        if (!(m.theta >= 0.0 && m.theta < p - 1.0))
            throw DomainError("model: theta must lie in [0, p-1)");
        if (b == 0.0 && m.theta != 0.0)
            throw DomainError("model: theta must vanish when b = 0");
        m.intercritical = m.s_c > 0.0 && m.s_c < 1.0;
        return m;
    }

    double lower_p() const { return 1.0 + (4.0 - 2.0 * b) / N; }
    double upper_p() const { return 1.0 + (4.0 - 2.0 * b) / (N - 2.0); }

    /// (1 - s_c)/s_c, the exponent on the mass in the threshold quantities.
    double mass_exponent() const { return (1.0 - s_c) / s_c; }
};

/// Intercritical range written directly in terms of p.
inline bool intercritical_check(const ModelParams& m) {
    return m.lower_p() < m.p && m.p < m.upper_p();
}

inline void require_intercritical(const ModelParams& m, const char* who) {
    if (!intercritical_check(m)) {
        std::ostringstream os;
        os << who << ": (N,b,p) = (" << m.N << "," << m.b << "," << m.p
           << ") is outside the intercritical range " << m.lower_p() << " < p < "
           << m.upper_p() << " (s_c = " << m.s_c << ")";
        throw DomainError(os.str());
    }
}

struct ExponentPair {
    double q = 2.0;
    double r = 2.0;
    double s = 0.0;
    double defect = 0.0; // 2/q - (N/2 - N/r - s)
};

/// 2/q - N/2 + N/r + s, with 1/inf = 0.
inline double admissibility_defect(double q, double r, double s, double N) {
    if (!(q >= 2.0) || !(r >= 2.0))
        throw DomainError("admissibility_defect: q and r must lie in [2, inf]");
    if (q == 2.0 && r == kInfinity && N == 2.0)
        throw DomainError("admissibility_defect: (q,r,N) = (2,inf,2) is excluded");
    return 2.0 / q - N / 2.0 + N / r + s;
}

inline ExponentPair make_pair(double q, double r, double s, double N) {
    return ExponentPair{q, r, s, admissibility_defect(q, r, s, N)};
}

namespace detail {

// Same relation without the range check: the Ḣ^{-s_c} time exponent ã of
// the nonlinear estimates can drop below 2 (ã = 3/2 for N=3, b=1, p=2).
inline ExponentPair unchecked_pair(double q, double r, double s, double N) {
    return ExponentPair{q, r, s, 2.0 / q - N / 2.0 + N / r + s};
}

} // namespace detail

/// Membership in A_0 (closed range 2 <= r <= p*) or A_{±s}, where the open
/// endpoints (2N/(N-2|s|))^+ and (p*)^- are tightened by the aperture delta.
inline bool in_admissible_set(const ExponentPair& e, const ModelParams& m,
                              double tol = 1e-12) {
    if (std::abs(e.defect) > tol) return false;
    if (e.s == 0.0) return e.r >= 2.0 && e.r <= m.p_star;
    const double s = std::abs(e.s);
    const double lo = 2.0 * m.N / (m.N - 2.0 * s) + m.delta;
    const double hi = m.p_star - m.delta;
    return e.r >= lo && e.r <= hi;
}

/// The seven auxiliary exponents of the nonlinear estimates, and the five
/// pairs assembled from them.
struct NonlinearExponents {
    double q_hat, r_hat, a_tilde, a_hat, q_bar, r_bar, a_bar;
    std::array<ExponentPair, 5> pairs; // (q̂,r̂)₀ (â,r̂)_{s_c} (ã,r̂)_{-s_c} (q̄,r̄)₀ (ā,r̄)_{s_c}
};

namespace detail {
inline double checked_ratio(double num, double den, const char* name) {
    if (std::abs(den) < 1e-14) {
        throw DomainError(std::string("nonlinear_exponents: vanishing denominator in ") + name);
    }
    return num / den;
}
} // namespace detail

inline NonlinearExponents nonlinear_exponents(const ModelParams& m) {
    require_intercritical(m, "nonlinear_exponents");
    const double N = m.N, b = m.b, p = m.p, th = m.theta;
    const double pm1 = p - 1.0;
    NonlinearExponents g{};
    // q̂ and r̂ carry (p+1-θ) in the numerator, matching â and ã; with (p+1)
    // the hat pairs are admissible only at θ = 0.
    g.q_hat = detail::checked_ratio(4.0 * pm1 * (p + 1.0 - th),
                                    pm1 * (N * pm1 + 2.0 * b) - th * (N * pm1 - 4.0 + 2.0 * b),
                                    "q_hat");
    g.r_hat = detail::checked_ratio(N * pm1 * (p + 1.0 - th),
                                    pm1 * (N - b) - th * (2.0 - b), "r_hat");
    g.a_tilde = detail::checked_ratio(2.0 * pm1 * (p + 1.0 - th),
                                      pm1 * (N * (p - th) - 2.0 + 2.0 * b) - (4.0 - 2.0 * b) * (1.0 - th),
                                      "a_tilde");
    g.a_hat = detail::checked_ratio(2.0 * pm1 * (p + 1.0 - th),
                                    4.0 - 2.0 * b - (N - 2.0) * pm1, "a_hat");
    g.q_bar = detail::checked_ratio(4.0 * pm1 * (p - th),
                                    pm1 * (N * pm1 + 2.0 * b - 2.0) - th * (N * pm1 - 4.0 + 2.0 * b),
                                    "q_bar");
    g.r_bar = detail::checked_ratio(2.0 * N * pm1 * (p - th),
                                    pm1 * (N + 2.0 - 2.0 * b) - th * (4.0 - 2.0 * b), "r_bar");
    g.a_bar = detail::checked_ratio(4.0 * pm1 * (p - th),
                                    4.0 - 2.0 * b - (N - 2.0) * pm1, "a_bar");

    g.pairs = {make_pair(g.q_hat, g.r_hat, 0.0, N),
               make_pair(g.a_hat, g.r_hat, m.s_c, N),
               detail::unchecked_pair(g.a_tilde, g.r_hat, -m.s_c, N),
               make_pair(g.q_bar, g.r_bar, 0.0, N),
               make_pair(g.a_bar, g.r_bar, m.s_c, N)};
    for (const auto& e : g.pairs) {
        if (std::abs(e.defect) > 1e-12)
            throw DomainError("nonlinear_exponents: admissibility postcondition violated");
    }
    return g;
}

struct ScatteringConstants {
    double alpha;
    double gamma;
};

inline ScatteringConstants scattering_constants(const ModelParams& m) {
    require_intercritical(m, "scattering_constants");
    const double ps = m.p_star, d = m.delta;
    const double denom = (ps - d) * (ps - 2.0);
    const double alpha = d * (2.0 + d) / denom;
    const double gamma = std::min(d * (m.p - m.theta) / denom, alpha * (m.N - 2.0) / 4.0);
    return {alpha, gamma};
}

/// L²-admissible pair (c,d) interpolating an Ḣ^{s_c} pair (q,r) against
/// L^{1/δ}_t L^{2N/(N-2-4δ)}_x.
inline ExponentPair distant_past_pair(double q, double r, const ModelParams& m) {
    require_intercritical(m, "distant_past_pair");
    const double sc = m.s_c;
    if (!(q > 2.0 / (1.0 - sc)))
        throw DomainError("distant_past_pair: q must exceed 2/(1-s_c)");
    if (std::abs(admissibility_defect(q, r, sc, m.N)) > 1e-10)
        throw DomainError("distant_past_pair: (q,r) is not Ḣ^{s_c}-admissible");
    const double inv_c = (1.0 / q - m.delta * sc) / (1.0 - sc);
    const double inv_d = (1.0 / r - sc * (m.N - 2.0 - 4.0 * m.delta) / (2.0 * m.N)) / (1.0 - sc);
    if (!(inv_c > 0.0 && inv_c < 0.5) || !(inv_d > 0.0 && inv_d <= 0.5))
        throw DomainError("distant_past_pair: delta too large for this (q,r)");
    ExponentPair e = make_pair(1.0 / inv_c, 1.0 / inv_d, 0.0, m.N);
    if (std::abs(e.defect) > 1e-12)
        throw DomainError("distant_past_pair: admissibility postcondition violated");
    return e;
}

} // namespace inls
