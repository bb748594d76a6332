#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "graphwave/spectral/eigensolver.hpp"
#include "graphwave/spectral/operator.hpp"

using namespace graphwave;
using std::numbers::pi;

namespace {

// Dense reference: nodal P1 assembly on all 3(N-1) non-Dirichlet nodes with the
// vertex nodes kept separate per edge, restricted by an explicit dense basis.
struct DenseRef {
    Eigen::MatrixXd A, M;
};

DenseRef dense_reference(const GraphFunction& V, const YJunction& g, bool kirchhoff, SubspaceKind kind) {
    const int N = static_cast<int>(g.points_per_edge());
    const int n = N - 1;  // distances 0..N-2 per edge
    const double h = g.h();
    const auto& c = g.speeds();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * n, 3 * n), M = A;
    auto idx = [&](int j, int d) { return j * n + d; };
    auto val = [&](int j, int d) { return V.edge[j][j == 0 ? N - 1 - d : d]; };
    for (int j = 0; j < 3; ++j)
        for (int d = 0; d + 1 < N; ++d) {
            const double va = val(j, d), vb = val(j, d + 1);
            const double Ke[2][2] = {{c[j] * c[j] / h + h / 12 * (3 * va + vb), -c[j] * c[j] / h + h / 12 * (va + vb)},
                                     {-c[j] * c[j] / h + h / 12 * (va + vb), c[j] * c[j] / h + h / 12 * (va + 3 * vb)}};
            const double Me[2][2] = {{h / 3, h / 6}, {h / 6, h / 3}};
            const int ids[2] = {d, d + 1};
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    if (ids[a] >= n || ids[b] >= n) continue;
                    A(idx(j, ids[a]), idx(j, ids[b])) += Ke[a][b];
                    M(idx(j, ids[a]), idx(j, ids[b])) += Me[a][b];
                }
        }
    Eigen::VectorXd jump = Eigen::VectorXd::Zero(3 * n);
    jump(idx(0, 0)) = -c[0];
    jump(idx(1, 0)) = c[1];
    jump(idx(2, 0)) = c[2];
    if (!kirchhoff) A += jump * jump.transpose() / g.lambda();

    // Subspace basis (columns), then the jump constraint if required.
    Eigen::MatrixXd B;
    if (kind == SubspaceKind::Full) {
        B = Eigen::MatrixXd::Identity(3 * n, 3 * n);
    } else {
        const double s1 = kind == SubspaceKind::C1 ? 0.0 : -1.0;
        B = Eigen::MatrixXd::Zero(3 * n, kind == SubspaceKind::C1 ? 2 * n : n);
        for (int d = 0; d < n; ++d) {
            if (kind == SubspaceKind::C1) {
                B(idx(0, d), d) = 1;
                B(idx(1, d), n + d) = B(idx(2, d), n + d) = 1;
            } else {
                B(idx(0, d), d) = s1;
                B(idx(1, d), d) = B(idx(2, d), d) = 1;
            }
        }
    }
    if (kirchhoff) {
        Eigen::MatrixXd row = jump.transpose() * B;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(row);
        B = B * lu.kernel();
    }
    return {B.transpose() * A * B, B.transpose() * M * B};
}

std::vector<double> dense_eigenvalues_below(const DenseRef& r, double threshold) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(r.A, r.M);
    std::vector<double> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) < threshold) out.push_back(es.eigenvalues()(i));
    return out;
}

SpectrumReport solve(Family f, double lambda, SubspaceKind kind = SubspaceKind::Full, double L = 40,
                     std::size_t N = 4001, double threshold = 0.9) {
    YJunction g({1, 1, 1}, lambda, L, N);
    auto op = linearized_operator(solve_profile(f, lambda, g.speeds()), g);
    if (kind != SubspaceKind::Full) op = subspace_project(op, kind);
    return eigen_solve(op, threshold);
}

}  // namespace

TEST(Assembly, ExactlySymmetric) {
    YJunction g({1, 2, 3}, -7, 20, 801);
    EXPECT_EQ(matrix_symmetry_defect(free_operator(g)), 0.0);
    auto p = solve_kink_shifts(-7, g.speeds());
    EXPECT_EQ(matrix_symmetry_defect(linearized_operator(p, g)), 0.0);
    YJunction gk({1, 1, 1}, 0, 20, 801);
    auto op = linearized_operator(solve_antikink_shift(0), gk);
    EXPECT_EQ(matrix_symmetry_defect(op), 0.0);
    EXPECT_EQ(matrix_symmetry_defect(subspace_project(op, SubspaceKind::C1)), 0.0);
}

TEST(Assembly, RejectsZeroLambdaDeltaPrime) {
    YJunction g({1, 1, 1}, 0, 10, 101);
    EXPECT_THROW(VertexCondition::delta_prime(0), UndefinedForZeroLambda);
    EXPECT_TRUE(VertexCondition::for_junction(g).is_kirchhoff());
    EXPECT_THROW(subspace_project(free_operator(YJunction({1, 2, 3}, -7, 10, 101)), SubspaceKind::C1),
                 InvalidArgument);
    EXPECT_THROW(subspace_project(free_operator(YJunction({1, 2, 2}, -7, 10, 101)), SubspaceKind::C2),
                 InvalidArgument);
}

TEST(Eigensolver, AgreesWithDenseReference) {
    struct Case {
        Family f;
        double lambda;
        SubspaceKind kind;
    };
    const Case cases[] = {{Family::Kink, -4.0, SubspaceKind::Full},          {Family::Kink, -1.5 * pi, SubspaceKind::Full},
                          {Family::Kink, -6.0, SubspaceKind::C2},            {Family::KinkAntiKink, -2.0, SubspaceKind::C1},
                          {Family::KinkAntiKink, 0.0, SubspaceKind::Full},   {Family::KinkAntiKink, 0.0, SubspaceKind::C1},
                          {Family::KinkAntiKink, -0.5 * pi, SubspaceKind::Full}, {Family::KinkAntiKink, 3.0, SubspaceKind::Full}};
    for (const auto& cs : cases) {
        YJunction g({1, 1, 1}, cs.lambda, 12, 241);
        auto p = solve_profile(cs.f, cs.lambda, g.speeds());
        auto op = linearized_operator(p, g);
        if (cs.kind != SubspaceKind::Full) op = subspace_project(op, cs.kind);
        auto rep = eigen_solve(op, 0.9);
        auto ref = dense_eigenvalues_below(dense_reference(linearized_potential(p, g), g, cs.lambda == 0.0, cs.kind), 0.9);
        ASSERT_EQ(rep.eigenvalues.size(), ref.size()) << to_string(cs.f) << " " << cs.lambda;
        for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(rep.eigenvalues[i], ref[i], 1e-9 * std::max(1.0, std::abs(ref[i])));
        for (double r : rep.residuals) EXPECT_LE(r, 1e-8);
    }
}

TEST(Eigensolver, DeterministicAndSorted) {
    auto a = solve(Family::KinkAntiKink, -2.0, SubspaceKind::C1, 20, 2001);
    auto b = solve(Family::KinkAntiKink, -2.0, SubspaceKind::C1, 20, 2001);
    EXPECT_EQ(a.eigenvalues, b.eigenvalues);
    EXPECT_TRUE(std::is_sorted(a.eigenvalues.begin(), a.eigenvalues.end()));
    EXPECT_EQ(nlohmann::json(to_json(a)).dump(), nlohmann::json(to_json(b)).dump());
}

TEST(KinkSpectrum, TailWindowMorseOne) {
    for (double lambda : {-3.2, -4.0, -4.5}) {
        auto rep = solve(Family::Kink, lambda);
        EXPECT_EQ(rep.morse_index, 1) << lambda;
        EXPECT_EQ(rep.kernel_dim, 0) << lambda;
    }
}

TEST(KinkSpectrum, CriticalKernelIsTwoDimensional) {
    EigenSolveOptions o;
    o.threshold = 0.5;
    o.zero_tol = 1e-4;
    YJunction g({1, 1, 1}, -1.5 * pi, 40, 4001);
    auto rep = eigen_solve(linearized_operator(solve_kink_shifts(g.lambda(), g.speeds()), g), o);
    EXPECT_EQ(rep.kernel_dim, 2);
    EXPECT_EQ(rep.morse_index, 1);
}

TEST(KinkSpectrum, C2Projection) {
    for (double lambda : {-1.5 * pi, -5.0, -6.0, -8.0}) {
        auto rep = solve(Family::Kink, lambda, SubspaceKind::C2);
        EXPECT_EQ(rep.morse_index, 1) << lambda;
        EXPECT_EQ(rep.kernel_dim, 0) << lambda;
    }
}

TEST(AntiKinkSpectrum, NegativeLambdaWindow) {
    auto crit = solve(Family::KinkAntiKink, -0.5 * pi);
    EXPECT_EQ(crit.morse_index, 1);
    EXPECT_EQ(crit.kernel_dim, 2);
    for (double lambda : {-1.2, -1.0, -0.3}) {
        auto rep = solve(Family::KinkAntiKink, lambda);
        EXPECT_EQ(rep.morse_index, 1) << lambda;
        EXPECT_EQ(rep.kernel_dim, 0) << lambda;
    }
}

TEST(AntiKinkSpectrum, C1ProjectionBelowCritical) {
    for (double lambda : {-1.8, -2.0, -2.5}) {
        auto rep = solve(Family::KinkAntiKink, lambda, SubspaceKind::C1);
        EXPECT_EQ(rep.morse_index, 2) << lambda;
        EXPECT_EQ(rep.kernel_dim, 0) << lambda;
    }
}

// For lambda >= 0 the form splits as int (phi')^2 (w')^2 + P + J^2/lambda with P >= 0,
// so there is no negative direction at all.
TEST(AntiKinkSpectrum, NonnegativeLambdaHasNoNegativeEigenvalue) {
    for (double lambda : {0.0, 1.0, 5.0}) {
        auto rep = solve(Family::KinkAntiKink, lambda);
        EXPECT_EQ(rep.morse_index, 0) << lambda;
        EXPECT_EQ(rep.kernel_dim, 0) << lambda;
        EXPECT_TRUE(rep.eigenvalues.empty() || rep.eigenvalues[0] > 0.01) << lambda;
    }
}

TEST(Spectrum, RayleighQuotientConsistency) {
    for (auto [f, lambda] : {std::pair{Family::Kink, -4.0}, std::pair{Family::KinkAntiKink, -1.0}}) {
        YJunction g({1, 1, 1}, lambda, 40, 4001);
        auto op = linearized_operator(solve_profile(f, lambda, g.speeds()), g);
        auto rep = eigen_solve(op, 0.9);
        for (Eigen::Index i = 0; i < rep.eigenvectors.cols(); ++i) {
            const auto psi = eigenfunction(rep, op, i);
            const double rq = quadratic_form(psi, op) / mass_form(psi, op);
            EXPECT_LE(std::abs(rq - rep.eigenvalues[static_cast<std::size_t>(i)]), 1e-8);
        }
    }
}

TEST(Spectrum, StableUnderDoublingTruncation) {
    for (auto [f, lambda] : {std::pair{Family::Kink, -4.0}, std::pair{Family::Kink, -5.0},
                             std::pair{Family::KinkAntiKink, -1.0}, std::pair{Family::KinkAntiKink, 1.0}}) {
        auto a = solve(f, lambda, SubspaceKind::Full, 20, 2001);
        auto b = solve(f, lambda, SubspaceKind::Full, 40, 4001);
        // the continuum below 1 only thickens with L; discrete eigenvalues persist
        std::vector<double> ea, eb;
        for (double m : a.eigenvalues) if (m < 0.5) ea.push_back(m);
        for (double m : b.eigenvalues) if (m < 0.5) eb.push_back(m);
        ASSERT_EQ(ea.size(), eb.size()) << to_string(f) << " " << lambda;
        for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_LE(std::abs(ea[i] - eb[i]), 1e-4);
    }
}

TEST(Spectrum, LowestEigenvalueSecondOrder) {
    for (auto [f, lambda] : {std::pair{Family::Kink, -4.0}, std::pair{Family::KinkAntiKink, -1.0}}) {
        double mu[3];
        int i = 0;
        for (std::size_t N : {501u, 1001u, 2001u}) mu[i++] = solve(f, lambda, SubspaceKind::Full, 20, N).eigenvalues[0];
        const double order = std::log2((mu[0] - mu[1]) / (mu[1] - mu[2]));
        EXPECT_GE(order, 1.8) << to_string(f);
        EXPECT_LE(order, 2.2) << to_string(f);
    }
}

TEST(QuadraticForm, MatchesMassAndFreeEigenpair) {
    YJunction g({1, 1, 1}, -3, 40, 4001);
    auto op = free_operator(g);
    auto rep = eigen_solve(op, -1e-3);
    ASSERT_EQ(rep.eigenvalues.size(), 1u);
    const auto psi = eigenfunction(rep, op, 0);
    EXPECT_NEAR(mass_form(psi, op), 1.0, 1e-12);
    EXPECT_NEAR(rep.eigenvalues[0], -1.0, 1e-3);
}
