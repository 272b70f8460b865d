#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "inls/errors.hpp"

namespace inls {

namespace detail {
inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& z) { return std::abs(z.real()) + std::abs(z.imag()); }
} // namespace detail

// Thomas algorithm, no pivoting. Safe for the Crank-Nicolson matrices
// V - i(dt/2)H: the real part is positive definite, so every leading minor is
// nonzero. lower[i] couples row i to i-1 (lower[0] unused), upper[i] couples
// row i to i+1 (upper[n-1] unused).
template <typename T>
class ThomasFactor {
public:
    ThomasFactor() = default;

    ThomasFactor(const std::vector<T>& lower, const std::vector<T>& diag,
                 const std::vector<T>& upper) {
        factor(lower, diag, upper);
    }

    void factor(const std::vector<T>& lower, const std::vector<T>& diag,
                const std::vector<T>& upper) {
        const std::size_t n = diag.size();
        if (lower.size() != n || upper.size() != n) throw SolveFailure("tridiagonal: size mismatch");
        lower_ = lower;
        inv_pivot_.resize(n);
        cprime_.resize(n);
        T piv = diag[0];
        for (std::size_t i = 0;; ++i) {
            if (!(detail::magnitude(piv) > 0.0) || !std::isfinite(detail::magnitude(piv)))
                throw SolveFailure("tridiagonal: zero pivot");
            inv_pivot_[i] = T(1) / piv;
            if (i + 1 == n) break;
            cprime_[i] = upper[i] * inv_pivot_[i];
            piv = diag[i + 1] - lower[i + 1] * cprime_[i];
        }
    }

    std::size_t size() const { return inv_pivot_.size(); }

    // Solves in place.
    template <typename V>
    void solve(std::vector<V>& x) const {
        const std::size_t n = size();
        if (x.size() != n) throw SolveFailure("tridiagonal: rhs size mismatch");
        x[0] *= inv_pivot_[0];
        for (std::size_t i = 1; i < n; ++i) x[i] = (x[i] - lower_[i] * x[i - 1]) * inv_pivot_[i];
        for (std::size_t i = n - 1; i-- > 0;) x[i] -= cprime_[i] * x[i + 1];
    }

private:
    std::vector<T> lower_, inv_pivot_, cprime_;
};

// Gaussian elimination with partial pivoting on a tridiagonal system (the
// LAPACK gtsv scheme). Used for indefinite Jacobians.
template <typename T>
std::vector<T> solve_tridiagonal_pivoting(std::vector<T> lower, std::vector<T> diag,
                                          std::vector<T> upper, std::vector<T> rhs) {
    const std::size_t n = diag.size();
    if (n == 0) return rhs;
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw SolveFailure("tridiagonal: size mismatch");
    // dl[i] is the entry (i+1, i), du[i] is (i, i+1), du2 fills in (i, i+2).
    std::vector<T> dl(n > 1 ? n - 1 : 0), du(n > 1 ? n - 1 : 0), du2(n > 2 ? n - 2 : 0, T(0));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        dl[i] = lower[i + 1];
        du[i] = upper[i];
    }
    std::vector<T>& d = diag;
    std::vector<T>& b = rhs;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (detail::magnitude(d[i]) >= detail::magnitude(dl[i])) {
            if (detail::magnitude(d[i]) == 0.0) throw SolveFailure("tridiagonal: singular matrix");
            const T f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            if (i + 2 < n) du2[i] = T(0);
        } else {
            const T f = d[i] / dl[i];
            d[i] = dl[i];
            const T tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            std::swap(b[i], b[i + 1]);
            b[i + 1] -= f * b[i];
        }
    }
    if (detail::magnitude(d[n - 1]) == 0.0) throw SolveFailure("tridiagonal: singular matrix");
    b[n - 1] /= d[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    if (n > 2)
        for (std::size_t k = n - 2; k-- > 0;) b[k] = (b[k] - du[k] * b[k + 1] - du2[k] * b[k + 2]) / d[k];
    return b;
}

} // namespace inls
