#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "graphwave/metric_graph.hpp"
#include "graphwave/profiles.hpp"

using namespace graphwave;

namespace {

GraphFunction fill(const YJunction& g, auto&& f) {
    const auto grid = build_grid(g);
    GraphFunction u = GraphFunction::zeros(g);
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < grid.x[j].size(); ++k) u.edge[j][k] = f(j, grid.x[j][k]);
    return u;
}

}  // namespace

TEST(YJunction, RejectsInvalidParameters) {
    EXPECT_THROW(YJunction({1, 0, 1}, -1, 10, 100), InvalidArgument);
    EXPECT_THROW(YJunction({1, 1, 1}, -1, -1, 100), InvalidArgument);
    EXPECT_THROW(YJunction({1, 1, 1}, -1, 10, 15), InvalidArgument);
    EXPECT_NO_THROW(YJunction({1, 1, 1}, -1, 10, 16));
}

TEST(BuildGrid, SmallGridCoordinates) {
    // N >= 16 is enforced, so check the small example on the first nodes of L = 7.5, N = 16.
    YJunction g({1, 1, 1}, -1, 7.5, 16);
    auto d = build_grid(g);
    EXPECT_DOUBLE_EQ(d.h, 0.5);
    EXPECT_DOUBLE_EQ(d.x[0].front(), -7.5);
    EXPECT_DOUBLE_EQ(d.x[0][13], -1.0);
    EXPECT_DOUBLE_EQ(d.x[0][14], -0.5);
    EXPECT_DOUBLE_EQ(d.x[0][15], 0.0);
    EXPECT_DOUBLE_EQ(d.x[1][0], 0.0);
    EXPECT_DOUBLE_EQ(d.x[1][1], 0.5);
    EXPECT_DOUBLE_EQ(d.x[2][2], 1.0);
    EXPECT_EQ(g.vertex_index(0), 15u);
    EXPECT_EQ(g.vertex_index(1), 0u);
}

TEST(BuildGrid, SpacingAndNesting) {
    YJunction fine({1, 1, 1}, -1, 40, 4001), coarse({1, 1, 1}, -1, 40, 2001);
    EXPECT_NEAR(fine.h(), 0.01, 1e-15);
    auto f = build_grid(fine), c = build_grid(coarse);
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < c.x[j].size(); ++k) EXPECT_NEAR(c.x[j][k], f.x[j][2 * k], 1e-12);
}

TEST(InnerProduct, ConstantsAndDisjointSupport) {
    YJunction g({1, 1, 1}, -1, 1.0, 101);
    GraphFunction one(101, 1.0);
    EXPECT_NEAR(graph_inner_product(one, one, g), 3.0, 1e-14);

    auto u = fill(g, [](int j, double) { return j == 1 ? 1.0 : 0.0; });
    auto v = fill(g, [](int j, double) { return j == 2 ? 1.0 : 0.0; });
    EXPECT_EQ(graph_inner_product(u, v, g), 0.0);
}

TEST(InnerProduct, SymmetricExactly) {
    YJunction g({1, 2, 3}, -7, 5.0, 501);
    std::mt19937 rng(7);
    std::normal_distribution<double> n;
    GraphFunction u = GraphFunction::zeros(g), v = GraphFunction::zeros(g);
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 501; ++k) {
            u.edge[j][k] = n(rng);
            v.edge[j][k] = n(rng);
        }
    EXPECT_EQ(graph_inner_product(u, v, g), graph_inner_product(v, u, g));
}

TEST(InnerProduct, KinkDerivativeTripleAgainstClosedForm) {
    const double L = 10.0;
    YJunction g({1, 1, 1}, critical_lambda(Family::Kink), L, 2001);
    auto p = solve_kink_shifts(g.lambda(), g.speeds());
    auto d = eval_derivative(p, g);
    // each edge: int (2 sech x)^2 over [0, L] = 4 tanh L
    EXPECT_NEAR(graph_inner_product(d, d, g), 12.0 * std::tanh(L), 1e-6);
}

TEST(InnerProduct, MismatchedGridThrows) {
    YJunction g({1, 1, 1}, -1, 1.0, 101);
    GraphFunction u(100, 1.0), v(101, 1.0);
    EXPECT_THROW(graph_inner_product(u, v, g), InvalidArgument);
}

TEST(NormLambda, ZeroFunctionAndZeroLambda) {
    YJunction g({1, 1, 1}, -2, 5, 101);
    EXPECT_EQ(graph_norm_lambda(GraphFunction::zeros(g), g), 0.0);
    YJunction g0({1, 1, 1}, 0, 5, 101);
    EXPECT_THROW(graph_norm_lambda(GraphFunction::zeros(g0), g0), UndefinedForZeroLambda);
}

TEST(NormLambda, JumpFreeFunctionDropsVertexTerm) {
    YJunction g({1, 1, 1}, -3, 6, 601);
    // u_j = e^{-x^2} on every edge: c2u2 + c3u3 - c1u1 = 1 != 0, so use u1 = 2 e^{-x^2}.
    auto u = fill(g, [](int j, double x) { return (j == 0 ? 2.0 : 1.0) * std::exp(-x * x); });
    EXPECT_NEAR(vertex_jump(u, g.speeds()), 0.0, 1e-15);
    const double beta0 = 1.0;
    const double expected = graph_h1_norm2(u, g) - graph_norm2(u, g) + (beta0 + 1.0) * graph_norm2(u, g);
    EXPECT_NEAR(graph_norm_lambda(u, g), expected, 1e-12);
}

TEST(NormLambda, FreeEigenfunctionAgainstExponentialIntegrals) {
    const double L = 20.0, lambda = -3.0;
    YJunction g({1, 1, 1}, lambda, L, 40001);
    auto u = fill(g, [](int j, double x) { return j == 0 ? -std::exp(x) : std::exp(-x); });
    // |u'|^2 = |u|^2 = 3(1 - e^{-2L})/2, beta0 = 1, jump = 3
    const double e = std::exp(-2 * L);
    const double exact = 1.5 * (1 - e) + 2.0 * 1.5 * (1 - e) + 9.0 / lambda;
    EXPECT_NEAR(graph_norm_lambda(u, g) / exact, 1.0, 1e-6);
}

TEST(NormLambda, EquivalentToH1OnRandomSet) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> amp(-1, 1), ctr(0.0, 4.0), wid(0.3, 2.0);
    for (double lambda : {-5.0, -2.0, 1.5, 4.0}) {
        YJunction g({1, 2, 1.5}, lambda, 12, 1201);
        double kappa = 1e300;
        for (int trial = 0; trial < 40; ++trial) {
            std::array<double, 3> a, m, w;
            for (int j = 0; j < 3; ++j) {
                a[j] = amp(rng);
                m[j] = ctr(rng);
                w[j] = wid(rng);
            }
            auto u = fill(g, [&](int j, double x) { return a[j] * std::exp(-std::pow((std::abs(x) - m[j]) / w[j], 2)); });
            const double nl = graph_norm_lambda(u, g);
            if (lambda > 0) EXPECT_GE(nl, 0.0);
            kappa = std::min(kappa, nl / graph_h1_norm2(u, g));
        }
        EXPECT_GT(kappa, 0.0) << "lambda = " << lambda;
        RecordProperty("kappa_lambda_" + std::to_string(lambda), std::to_string(kappa));
    }
}

TEST(VertexResidual, ConstantFunction) {
    YJunction g({1, 1, 1}, -2.5, 5, 101);
    GraphFunction u(101, 0.7);
    auto r = vertex_residual(u, VertexCondition::delta_prime(-2.5), g);
    EXPECT_NEAR(r[0], 0.0, 1e-12);
    EXPECT_NEAR(r[1], 0.0, 1e-12);
    EXPECT_NEAR(r[2], 0.7, 1e-12);
    auto rk = vertex_residual(u, VertexCondition::kirchhoff_limit(), g);
    EXPECT_NEAR(rk[2], 0.7, 1e-12);
}

TEST(VertexResidual, SecondOrderForProfiles) {
    for (auto fam : {Family::Kink, Family::KinkAntiKink}) {
        const double lambda = fam == Family::Kink ? -4.0 : 1.0;
        auto p = solve_profile(fam, lambda, {1, 1, 1});
        std::vector<double> err, hs;
        for (std::size_t N : {4001u, 8001u, 16001u, 32001u}) {
            YJunction g({1, 1, 1}, lambda, 20, N);
            auto r = vertex_residual(eval_profile(p, g), VertexCondition::for_junction(g), g);
            err.push_back(std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])}));
            hs.push_back(g.h());
        }
        // least-squares slope of log err against log h
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < err.size(); ++i) {
            const double x = std::log(hs[i]), y = std::log(err[i]);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        const double n = static_cast<double>(err.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        EXPECT_GE(slope, 1.8) << to_string(fam) << " " << err[0] << " " << err[1] << " " << err[2] << " " << err[3];
        EXPECT_LE(slope, 2.2) << to_string(fam);
        EXPECT_LE(err.back(), 1e-3);
    }
}

TEST(VertexResidual, AntiKinkAtCriticalLambda) {
    YJunction g({1, 1, 1}, -M_PI / 2, 40, 4001);
    auto p = solve_antikink_shift(g.lambda());
    auto r = vertex_residual(eval_profile(p, g), VertexCondition::for_junction(g), g);
    for (double v : r) EXPECT_LE(std::abs(v), 1e-3);
}

TEST(Serialisation, GridJsonAndCsvRoundTrip) {
    YJunction g({1, 2, 3}, -7, 3, 31);
    auto d = build_grid(g);
    auto back = grid_from_json(nlohmann::json::parse(to_json(d).dump()));
    for (int j = 0; j < 3; ++j) EXPECT_EQ(back.x[j], d.x[j]);

    auto u = fill(g, [](int j, double x) { return std::sin(x + j); });
    std::stringstream ss;
    write_csv(ss, u, g);
    auto v = read_csv(ss);
    for (int j = 0; j < 3; ++j) EXPECT_EQ(v.edge[j], u.edge[j]);
}
