#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "twopatch/grid.hpp"

using namespace twopatch;

TEST(Grid, Nodes1D) {
    const Grid g = build_grid(1, 5.0, 5);
    const std::vector<double> expect{-5.0, -2.5, 0.0, 2.5, 5.0};
    for (int k = 0; k < 5; ++k) EXPECT_EQ(g.coord(k), expect[k]);
    EXPECT_EQ(build_grid(1, 1.0, 3).h(), 1.0);
}

TEST(Grid, Nodes2D) {
    const Grid g = build_grid(2, 5.0, 65);
    EXPECT_EQ(g.size(), 4225u);
    EXPECT_EQ(g.h(), 0.15625);
    for (int k = 0; k < g.m(); ++k) EXPECT_NEAR(g.coord(k), -5.0 + k * g.h(), 1e-14);
    EXPECT_EQ(g.coord(0), -5.0);
    EXPECT_EQ(g.coord(64), 5.0);
}

TEST(Grid, ReflectionClosed) {
    const Grid g = build_grid(2, 3.0, 31);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto x = g.node(k);
        const auto y = g.node(g.reflect_index(k));
        EXPECT_EQ(y[0], -x[0]);
        EXPECT_EQ(y[1], x[1]);
        EXPECT_EQ(g.reflect_index(g.reflect_index(k)), k);
    }
}

TEST(Grid, Errors) {
    EXPECT_THROW(build_grid(1, 1.0, 4), ValidationError);
    EXPECT_THROW(build_grid(1, 1.0, 1), ValidationError);
    EXPECT_THROW(build_grid(3, 1.0, 5), ValidationError);
    EXPECT_THROW(build_grid(2, 0.0, 5), ValidationError);
    EXPECT_THROW(build_grid(2, -1.0, 5), ValidationError);
}

TEST(Laplacian, ConstantVanishesInside) {
    for (int n : {1, 2}) {
        const Grid g(n, 2.0, 9);
        const Field f(g.size(), 3.7);
        const Field lap = laplacian(g, f);
        for (std::size_t k = 0; k < g.size(); ++k)
            if (!g.is_boundary(k)) {
                EXPECT_NEAR(lap[k], 0.0, 1e-12);
            }
    }
}

TEST(Laplacian, ExactOnQuadratic) {
    for (int n : {1, 2}) {
        const Grid g(n, 2.0, 17);
        const Field f = sample(g, [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) s += v * v;
            return s;
        });
        const Field lap = laplacian(g, f);
        for (std::size_t k = 0; k < g.size(); ++k)
            if (!g.is_boundary(k)) {
                EXPECT_NEAR(lap[k], 2.0 * n, 1e-10);
            }
    }
}

TEST(Laplacian, StencilArithmetic) {
    const Grid g(1, 1.0, 3);
    const Field f{0.0, 1.0, 0.0};
    const Field lap = laplacian(g, f);
    EXPECT_EQ(lap[1], -2.0);
    // zero ghosts at the boundary
    EXPECT_EQ(lap[0], 1.0);
    EXPECT_EQ(lap[2], 1.0);
}

TEST(Laplacian, SizeMismatch) {
    const Grid g(1, 1.0, 5);
    const Field f(4, 1.0);
    EXPECT_THROW(laplacian(g, f), ValidationError);
}

TEST(Laplacian, CommutesWithReflectionExactly) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n : {1, 2}) {
        const Grid g(n, 2.5, 21);
        Field f(g.size());
        for (double& v : f) v = u(rng);
        const Field a = laplacian(g, reflect_field(g, f));
        const Field b = reflect_field(g, laplacian(g, f));
        for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(a[k], b[k]);
    }
}

TEST(Integrate, Constants) {
    const Grid g1(1, 3.0, 11), g2(2, 3.0, 11);
    EXPECT_NEAR(integrate(g1, Field(g1.size(), 1.0)), 6.0, 1e-13);
    EXPECT_NEAR(integrate(g2, Field(g2.size(), 1.0)), 36.0, 1e-12);
    EXPECT_EQ(integrate(g2, Field(g2.size(), 0.0)), 0.0);
}

TEST(Integrate, GaussianOracle) {
    const Grid g(1, 8.0, 129);
    const Field f = sample(g, [](std::span<const double> x) { return std::exp(-x[0] * x[0] / 2.0); });
    EXPECT_NEAR(integrate(g, f), std::sqrt(2.0 * std::numbers::pi), 1e-6);
}

TEST(Integrate, ReflectionInvariantExactly) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n : {1, 2}) {
        const Grid g(n, 1.5, 15);
        Field f(g.size());
        for (double& v : f) v = u(rng);
        EXPECT_EQ(integrate(g, reflect_field(g, f)), integrate(g, f));
    }
}

TEST(Integrate, SecondOrderConvergence) {
    // Gaussian of variance mu centred off the grid nodes
    const double mu = 0.05;
    const double exact = 2.0 * std::numbers::pi * mu;
    auto err = [&](int m) {
        const Grid g(2, 2.0, m);
        const Field f = sample(g, [&](std::span<const double> x) {
            const double a = x[0] - 0.013, b = x[1] + 0.021;
            return std::exp(-(a * a + b * b) / (2.0 * mu));
        });
        return std::abs(integrate(g, f) - exact);
    };
    // coarse grids, so the error is not yet at roundoff level
    const double e1 = err(9), e2 = err(17), e3 = err(33);
    EXPECT_LT(e2, e1);
    EXPECT_GE(std::log2(e1 / e2), 2.0);
    EXPECT_LT(e3, e2);
}

TEST(ReflectField, Examples) {
    const Grid g(1, 1.0, 3);
    const Field f{1.0, 2.0, 3.0};
    EXPECT_EQ(reflect_field(g, f), (Field{3.0, 2.0, 1.0}));
    EXPECT_EQ(reflect_field(g, reflect_field(g, f)), f);
    const Field even{4.0, 2.0, 4.0};
    EXPECT_EQ(reflect_field(g, even), even);
}

TEST(Field2, Layout) {
    const Field a{1.0, 2.0}, b{3.0, 4.0};
    Field2 s(a, b);
    EXPECT_EQ(s.nodes(), 2u);
    EXPECT_EQ(s.data(), (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
    EXPECT_EQ(s.u2()[1], 4.0);
    EXPECT_THROW(Field2(a, Field{1.0}), ValidationError);
}
