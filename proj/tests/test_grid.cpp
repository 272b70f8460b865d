#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "inls/exponents.hpp"
#include "inls/grid.hpp"

using namespace inls;

namespace {

constexpr double kPi = std::numbers::pi;
const double kPi32 = std::pow(kPi, 1.5);

RadialField gaussian(const GridPtr& g) {
    return RadialField::from_function(g, [](double r) { return std::exp(-0.5 * r * r); });
}

double gaussian_mass_error(std::size_t n) {
    auto g = build_grid(n, 12.0, 3.0);
    return std::abs(mass_of(gaussian(g)) - kPi32);
}

// Max interior error of the discrete Laplacian of e^{-r²/2} against (r²-3)e^{-r²/2}.
double laplacian_error(std::size_t n) {
    auto g = build_grid(n, 12.0, 3.0);
    const RadialField L = radial_laplacian(gaussian(g));
    double e = 0.0;
    for (std::size_t i = 0; i < g->n; ++i) {
        const double r = g->nodes[i];
        if (r < 0.5 || r > 8.0) continue;
        e = std::max(e, std::abs(L[i].real() - (r * r - 3.0) * std::exp(-0.5 * r * r)));
    }
    return e;
}

} // namespace

TEST(BuildGrid, SurfaceMeasure) {
    EXPECT_NEAR(build_grid(4096, 40, 3)->omega_N, 4.0 * kPi, 1e-13);
    EXPECT_NEAR(build_grid(64, 10, 4)->omega_N, 2.0 * kPi * kPi, 1e-13);
    EXPECT_NEAR(build_grid(4096, 40, 2.5)->omega_N, 2.0 * std::pow(kPi, 1.25) / std::tgamma(1.25), 1e-13);
}

TEST(BuildGrid, Rejects) {
    EXPECT_THROW(build_grid(8, 10, 3), DomainError);
    EXPECT_THROW(build_grid(64, 0, 3), DomainError);
    EXPECT_THROW(build_grid(64, -1, 3), DomainError);
    EXPECT_THROW(build_grid(64, 10, 2), DomainError);
}

TEST(BuildGrid, NodesAndWeights) {
    auto g = build_grid(100, 10, 2.7);
    for (std::size_t i = 0; i < g->n; ++i) {
        EXPECT_GT(g->nodes[i], 0.0);
        if (i) EXPECT_GT(g->nodes[i], g->nodes[i - 1]);
        EXPECT_NEAR(g->nodes[i], (i + 0.5) * g->dr, 1e-14);
        EXPECT_GT(g->weights[i], 0.0);
    }
    double total = 0.0;
    for (double w : g->weights) total += w;
    EXPECT_NEAR(total, g->ball_volume(10.0), 1e-10 * total);
}

TEST(Integrate, ZeroAndIndicator) {
    auto g = build_grid(4000, 4, 3);
    EXPECT_EQ(integrate(*g, std::vector<double>(g->n, 0.0)), 0.0);
    std::vector<double> ind(g->n);
    for (std::size_t i = 0; i < g->n; ++i) ind[i] = g->nodes[i] <= 1.0 ? 1.0 : 0.0;
    EXPECT_NEAR(integrate(*g, ind), 4.0 * kPi / 3.0, 4.0 * kPi * g->dr);
    std::vector<double> bad(3, 1.0);
    EXPECT_THROW(integrate(*g, bad), DomainError);
}

TEST(Integrate, GaussianMass) {
    EXPECT_NEAR(mass_of(gaussian(build_grid(16384, 12, 3))), kPi32, 1e-6);
}

TEST(Integrate, SecondOrder) {
    const double ratio = gaussian_mass_error(1024) / gaussian_mass_error(2048);
    EXPECT_NEAR(ratio, 4.0, 0.8);
}

TEST(Integrate, LinearAndPositive) {
    auto g = build_grid(256, 8, 3.3);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> f(g->n), h(g->n), s(g->n);
    for (std::size_t i = 0; i < g->n; ++i) {
        f[i] = u(rng);
        h[i] = u(rng);
        s[i] = 2.0 * f[i] - 3.0 * h[i];
    }
    EXPECT_GT(integrate(*g, f), 0.0);
    EXPECT_NEAR(integrate(*g, s), 2.0 * integrate(*g, f) - 3.0 * integrate(*g, h), 1e-9);
}

TEST(Laplacian, ConstantIsHarmonicAwayFromBoundary) {
    auto g = build_grid(256, 10, 3);
    const RadialField L = radial_laplacian(RadialField::from_function(g, [](double) { return 1.0; }));
    for (std::size_t i = 0; i + 1 < g->n; ++i) EXPECT_NEAR(std::abs(L[i]), 0.0, 1e-9);
}

TEST(Laplacian, GaussianSecondOrder) {
    const double e1 = laplacian_error(1024), e2 = laplacian_error(2048);
    EXPECT_LT(e2, 1e-4);
    EXPECT_NEAR(e1 / e2, 4.0, 0.8);
}

TEST(Laplacian, SelfAdjoint) {
    auto g = build_grid(512, 20, 3.5);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    std::vector<cplx> a(g->n), b(g->n);
    for (std::size_t i = 0; i + 20 < g->n; ++i) {
        a[i] = {nd(rng), nd(rng)};
        b[i] = {nd(rng), nd(rng)};
    }
    const RadialField u(g, a), v(g, b);
    const cplx lhs = inner_product(radial_laplacian(u), v), rhs = inner_product(u, radial_laplacian(v));
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::sqrt(mass_of(u) * mass_of(v)));
}

TEST(Norms, ZeroField) {
    auto g = build_grid(64, 8, 3);
    const auto r = norms(RadialField(g), ModelParams::make(3, 0, 3));
    EXPECT_EQ(r.l2, 0.0);
    EXPECT_EQ(r.grad, 0.0);
    EXPECT_EQ(r.h1, 0.0);
    EXPECT_EQ(r.lp1, 0.0);
    EXPECT_EQ(r.potential, 0.0);
    EXPECT_EQ(r.sup_outside, 0.0);
}

TEST(Norms, GaussianClosedForms) {
    auto g = build_grid(16384, 12, 3);
    const auto r = norms(gaussian(g), ModelParams::make(3, 0, 3));
    EXPECT_NEAR(r.grad * r.grad, 1.5 * kPi32, 2e-5);
    EXPECT_NEAR(std::pow(r.lp1, 4.0), kPi32 / (2.0 * std::sqrt(2.0)), 1e-6);
    EXPECT_NEAR(r.potential, kPi32 / (2.0 * std::sqrt(2.0)), 1e-6);
    EXPECT_NEAR(r.h1, std::sqrt(2.5 * kPi32), 1e-5);
}

TEST(Norms, WeightedIntegralFiniteForSingularPotential) {
    for (double b : {0.5, 1.0, 1.4}) {
        auto g = build_grid(4096, 10, 3);
        const auto r = norms(gaussian(g), ModelParams::make(3, b, 2.2));
        EXPECT_TRUE(std::isfinite(r.potential));
        EXPECT_GT(r.potential, 0.0);
    }
}

TEST(Norms, SupOutside) {
    auto g = build_grid(1000, 10, 3);
    const auto r = norms(gaussian(g), ModelParams::make(3, 0, 3), 2.0);
    EXPECT_NEAR(r.sup_outside, std::exp(-2.0), 2e-2);
}

TEST(CellPotential, AverageOfSingularWeight) {
    auto g = build_grid(64, 4, 3);
    const auto W = cell_potential(*g, 1.0);
    // Exact shell average of 1/r in 3D over [0, dr]: (3/2)/dr.
    EXPECT_NEAR(W[0], 1.5 / g->dr, 1e-10);
    for (std::size_t i = 1; i < g->n; ++i) EXPECT_LT(W[i], W[i - 1]);
}
