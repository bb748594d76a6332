#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "graphwave/spectral/eigensolver.hpp"
#include "graphwave/spectral/free_operator.hpp"

using namespace graphwave;

namespace {

GraphFunction fill(const YJunction& g, auto&& f) {
    const auto grid = build_grid(g);
    GraphFunction u = GraphFunction::zeros(g);
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < grid.x[j].size(); ++k) u.edge[j][k] = f(j, grid.x[j][k]);
    return u;
}

struct Bump {
    double amp, centre, width;
};

GraphFunction random_bumps(const YJunction& g, std::mt19937& rng) {
    std::uniform_real_distribution<double> amp(-1, 1), ctr(1.5, 6.0), wid(0.4, 1.2);
    std::array<Bump, 3> b;
    for (auto& x : b) x = {amp(rng), ctr(rng), wid(rng)};
    return fill(g, [&](int j, double x) {
        const double s = (std::abs(x) - b[j].centre) / b[j].width;
        return b[j].amp * std::exp(-s * s);
    });
}

}  // namespace

TEST(AnalyticFreeEigenpair, UnitSpeeds) {
    YJunction g({1, 1, 1}, -3, 40, 4001);
    auto e = analytic_free_eigenpair(g);
    ASSERT_TRUE(e);
    EXPECT_DOUBLE_EQ(e->mu, -1.0);
    EXPECT_DOUBLE_EQ(e->psi.edge[0].back(), -1.0);
    EXPECT_NEAR(e->psi.edge[0][3000], -std::exp(-10.0), 1e-15);
    EXPECT_NEAR(e->psi.edge[1][100], std::exp(-1.0), 1e-15);
    EXPECT_EQ(e->psi.edge[1], e->psi.edge[2]);
}

TEST(AnalyticFreeEigenpair, MixedSpeedsAndPositiveLambda) {
    YJunction g({1, 2, 3}, -6, 120, 12001);
    EXPECT_DOUBLE_EQ(analytic_free_eigenpair(g)->mu, -1.0);
    EXPECT_FALSE(analytic_free_eigenpair(YJunction({1, 1, 1}, 2, 40, 401)));
    EXPECT_THROW(analytic_free_eigenpair(YJunction({1, 1, 1}, 0, 40, 401)), UndefinedForZeroLambda);
}

TEST(AnalyticFreeEigenpair, WarnsOnShortTruncation) {
    std::string seen;
    auto saved = warning_handler();
    warning_handler() = [&](const std::string& m) { seen = m; };
    analytic_free_eigenpair(YJunction({1, 1, 1}, -3, 10, 101));
    warning_handler() = saved;
    EXPECT_NE(seen.find("truncation length"), std::string::npos);
}

TEST(AnalyticFreeEigenpair, SatisfiesVertexConditions) {
    // one-sided traces: error ~ |lambda| h^2 |psi'''| / 3
    YJunction g({1, 2, 3}, -7, 80, 32001);
    auto e = analytic_free_eigenpair(g);
    auto r = vertex_residual(e->psi, VertexCondition::for_junction(g), g);
    for (double v : r) EXPECT_LE(std::abs(v), 2e-5);
}

TEST(FreeOperatorSpectrum, MatchesAnalyticValue) {
    {
        // the free continuum starts at 0, so count strictly negative values only
        auto rep = eigen_solve(free_operator(YJunction({1, 1, 1}, -3, 40, 4001)), -1e-3);
        ASSERT_EQ(rep.eigenvalues.size(), 1u);
        EXPECT_NEAR(rep.eigenvalues[0], -1.0, 1e-3);
    }
    {
        auto rep = eigen_solve(free_operator(YJunction({1, 2, 3}, -6, 120, 12001)), -1e-3);
        ASSERT_EQ(rep.eigenvalues.size(), 1u);
        EXPECT_NEAR(rep.eigenvalues[0], -1.0, 1e-3);
    }
    {
        auto rep = eigen_solve(free_operator(YJunction({1, 1, 1}, 2, 40, 4001)), 0.0);
        EXPECT_TRUE(rep.eigenvalues.empty() || rep.eigenvalues[0] >= -1e-6);
    }
}

TEST(FreeResolvent, ZeroInput) {
    YJunction g({1, 1, 1}, 1, 20, 2001);
    auto r = free_resolvent_apply(GraphFunction::zeros(g), 1.0, g);
    EXPECT_EQ(r.phi.max_abs(), 0.0);
    EXPECT_EQ(r.flux, 0.0);
}

TEST(FreeResolvent, InvertsAppliedOperator) {
    // w compactly supported away from the vertex lies in every vertex domain.
    YJunction g({1, 1, 1}, 1, 20, 4001);
    const double eta = 1.0;
    auto w = fill(g, [](int j, double x) {
        const double s = std::abs(x) - 4.0 - j;
        return std::abs(s) < 2 ? std::pow(std::cos(M_PI * s / 4), 6) : 0.0;
    });
    auto u = fill(g, [](int j, double x) {
        const double s = std::abs(x) - 4.0 - j;
        if (std::abs(s) >= 2) return 0.0;
        const double a = M_PI / 4, c = std::cos(a * s), sn = std::sin(a * s);
        const double w2 = 30 * a * a * std::pow(c, 4) * sn * sn - 6 * a * a * std::pow(c, 6);
        return -w2 + std::pow(c, 6);
    });
    auto r = free_resolvent_apply(u, eta, g);
    double err = 0;
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 4001; ++k) err = std::max(err, std::abs(r.phi.edge[j][k] - w.edge[j][k]));
    EXPECT_LE(err, 1e-6);
}

TEST(FreeResolvent, IdentityOnRandomBumps) {
    std::mt19937 rng(2024);
    const std::pair<double, double> cases[] = {{1.0, 1.0}, {-3.0, 2.0}};
    for (auto [lambda, eta] : cases) {
        YJunction g({1, 1, 1}, lambda, 30, 6001);
        for (int trial = 0; trial < 10; ++trial) {
            auto u = random_bumps(g, rng);
            auto r = free_resolvent_apply(u, eta, g);
            EXPECT_LE(resolvent_identity_error(r.phi, u, eta, g), 1e-6) << lambda << " " << trial;
            auto vr = free_resolvent_vertex_residual(r, g);
            EXPECT_LE(std::abs(vr[2]), 1e-8 * (1 + std::abs(r.flux)));
            // the nodal traces agree with the exact ones to quadrature accuracy
            for (int j = 0; j < 3; ++j) EXPECT_NEAR(vertex_value(r.phi, j), r.vertex_value[j], 1e-8);
        }
    }
}

TEST(FreeResolvent, GridVertexResidualIsSecondOrder) {
    std::mt19937 rng(5);
    YJunction g1({1, 1, 1}, 1, 20, 2001), g2({1, 1, 1}, 1, 20, 4001);
    std::uniform_real_distribution<double> d(1.5, 3.0);
    const double m = d(rng);
    auto bump = [&](int, double x) { return std::exp(-std::pow(std::abs(x) - m, 2)); };
    double e[2];
    int i = 0;
    for (const auto* g : {&g1, &g2}) {
        auto r = free_resolvent_apply(fill(*g, bump), 1.0, *g);
        auto v = vertex_residual(r.phi, VertexCondition::for_junction(*g), *g);
        e[i++] = std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
    }
    EXPECT_LE(e[1], 1e-4);
    EXPECT_GE(e[0] / e[1], 3.5);
}

TEST(FreeResolvent, SingularAtEigenvalue) {
    YJunction g({1, 1, 1}, -3, 20, 401);
    GraphFunction u(401, 1.0);
    EXPECT_THROW(free_resolvent_apply(u, 1.0, g), SingularSystem);
    EXPECT_NO_THROW(free_resolvent_apply(u, 1.1, g));
    EXPECT_THROW(free_resolvent_apply(u, 0.0, g), InvalidArgument);
}

TEST(FreeResolvent, KirchhoffLimit) {
    YJunction g({1, 2, 3}, 0, 30, 6001);
    std::mt19937 rng(9);
    auto u = random_bumps(g, rng);
    auto r = free_resolvent_apply(u, 1.5, g);
    const auto& c = g.speeds();
    EXPECT_NEAR(c[1] * r.vertex_value[1] + c[2] * r.vertex_value[2] - c[0] * r.vertex_value[0], 0.0, 1e-12);
    EXPECT_LE(resolvent_identity_error(r.phi, u, 1.5, g), 1e-6);
}
