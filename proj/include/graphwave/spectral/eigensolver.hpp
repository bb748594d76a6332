#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

#include "graphwave/error.hpp"
#include "graphwave/spectral/operator.hpp"

namespace graphwave {

struct SpectrumReport {
    double threshold = 0.0;
    double zero_tol = 0.0;
    std::vector<double> eigenvalues;  // ascending, all below threshold
    std::vector<double> residuals;    // |A psi - mu M psi| / |M psi|
    Eigen::MatrixXd eigenvectors;     // columns, M-orthonormal, in operator coordinates
    int morse_index = 0;              // eigenvalues below -zero_tol, whatever the threshold
    int kernel_dim = 0;
};

struct EigenSolveOptions {
    double threshold = 0.9;
    double zero_tol = -1.0;  // negative: grid-scaled default
    double residual_tol = 1e-8;
    double cluster_rel_gap = 1e-6;
    unsigned seed = 20240611u;
};

// 1e-4 at h = 0.01, growing like h^2 on coarser grids.
inline double default_zero_tol(const YJunction& g) {
    const double r = g.h() / 0.01;
    return 1e-4 * std::max(1.0, r * r);
}

// Number of generalised eigenvalues of (A, M) strictly below sigma, by
// Sylvester inertia of A - sigma M. Each channel is factored from its far
// end toward the vertex and leaves a rank-one update on the vertex block.
inline int count_below(const LinearizedOperator& op, double sigma) {
    const Eigen::Index n = op.interior();
    const Eigen::Index nv = op.vertex_dim();
    Eigen::MatrixXd S = op.vertex_A() - sigma * op.vertex_M();
    const double tiny = std::numeric_limits<double>::min() * 1e10;
    int neg = 0;
    for (const auto& c : op.channel_blocks()) {
        double p = c.a_diag[n - 1] - sigma * c.m_diag[n - 1];
        for (Eigen::Index d = n - 2; d >= 0; --d) {
            if (p == 0.0) p = -tiny;
            if (p < 0) ++neg;
            const double e = c.a_off[d] - sigma * c.m_off[d];
            p = c.a_diag[d] - sigma * c.m_diag[d] - e * e / p;
        }
        if (p == 0.0) p = -tiny;
        if (p < 0) ++neg;
        if (nv > 0) {
            const Eigen::VectorXd t = c.a_couple - sigma * c.m_couple;
            S.noalias() -= (t * t.transpose()) / p;
        }
    }
    if (nv > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
        for (Eigen::Index i = 0; i < nv; ++i)
            if (es.eigenvalues()(i) < 0) ++neg;
    }
    return neg;
}

namespace detail {

inline void bisect_eigenvalues(const LinearizedOperator& op, double a, int ca, double b, int cb,
                               std::vector<double>& out) {
    if (cb <= ca) return;
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    if (b - a <= 4 * std::numeric_limits<double>::epsilon() * scale * 16) {
        for (int i = ca; i < cb; ++i) out.push_back(0.5 * (a + b));
        return;
    }
    const double m = 0.5 * (a + b);
    const int cm = count_below(op, m);
    bisect_eigenvalues(op, a, ca, m, cm, out);
    bisect_eigenvalues(op, m, cm, b, cb, out);
}

inline double m_norm(const Eigen::SparseMatrix<double>& M, const Eigen::VectorXd& x) {
    return std::sqrt(std::max(0.0, x.dot(M * x)));
}

// Modified Gram-Schmidt in the M inner product; returns false on breakdown.
inline bool m_orthonormalise(const Eigen::SparseMatrix<double>& M, Eigen::MatrixXd& X) {
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index i = 0; i < k; ++i) {
                const double r = X.col(i).dot(M * X.col(k));
                X.col(k) -= r * X.col(i);
            }
        const double nrm = m_norm(M, X.col(k));
        if (!(nrm > 0.0) || !std::isfinite(nrm)) return false;
        X.col(k) /= nrm;
    }
    return true;
}

}  // namespace detail

// All eigenvalues below the threshold (bisection on the inertia count),
// eigenvectors by shifted block inverse iteration per cluster.
inline SpectrumReport eigen_solve(const LinearizedOperator& op, const EigenSolveOptions& opt = {}) {
    SpectrumReport rep;
    rep.threshold = opt.threshold;
    rep.zero_tol = opt.zero_tol >= 0 ? opt.zero_tol : default_zero_tol(op.junction());

    const int total = count_below(op, opt.threshold);
    if (total > 0) {
        double lo = std::min(-1.0, opt.threshold - 1.0);
        int clo = count_below(op, lo);
        for (int guard = 0; clo > 0; ++guard) {
            if (guard > 200) throw SolverNonConvergence("eigen_solve: could not bracket the lowest eigenvalue");
            lo *= 2;
            clo = count_below(op, lo);
        }
        detail::bisect_eigenvalues(op, lo, 0, opt.threshold, total, rep.eigenvalues);
    }
    std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end());

    const auto& A = op.A();
    const auto& M = op.M();
    const Eigen::Index n = op.dim();
    const Eigen::Index m = static_cast<Eigen::Index>(rep.eigenvalues.size());
    rep.eigenvectors.resize(n, m);
    rep.residuals.assign(static_cast<std::size_t>(m), 0.0);
    std::mt19937 rng(opt.seed);
    std::normal_distribution<double> normal;

    Eigen::Index first = 0;
    while (first < m) {
        Eigen::Index last = first + 1;
        while (last < m) {
            const double a = rep.eigenvalues[last - 1], b = rep.eigenvalues[last];
            if (b - a > opt.cluster_rel_gap * std::max(1.0, std::abs(b))) break;
            ++last;
        }
        const Eigen::Index k = last - first;
        const double mu0 = rep.eigenvalues[first];
        const double sigma = mu0 - 1e-10 * std::max(1.0, std::abs(mu0));

        Eigen::SparseMatrix<double> K = A - sigma * M;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(K);
        lu.factorize(K);
        if (lu.info() != Eigen::Success)
            throw SolverNonConvergence("eigen_solve: factorisation failed for the cluster at mu = " +
                                       std::to_string(mu0));

        Eigen::MatrixXd X(n, k);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < k; ++j) X(i, j) = normal(rng);
        Eigen::VectorXd mu(k);
        Eigen::VectorXd res(k);
        bool converged = false;
        for (int it = 0; it < 30 && !converged; ++it) {
            Eigen::MatrixXd MX = M * X;
            X = lu.solve(MX);
            if (!detail::m_orthonormalise(M, X))
                throw SolverNonConvergence("eigen_solve: inverse iteration broke down at mu = " +
                                           std::to_string(mu0));
            // Rayleigh-Ritz on the block.
            const Eigen::MatrixXd AX = A * X;
            const Eigen::MatrixXd Ar = X.transpose() * AX;
            const Eigen::MatrixXd Mr = X.transpose() * (M * X);
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> rr(0.5 * (Ar + Ar.transpose()),
                                                                         0.5 * (Mr + Mr.transpose()));
            X = X * rr.eigenvectors();
            mu = rr.eigenvalues();
            converged = true;
            for (Eigen::Index j = 0; j < k; ++j) {
                const Eigen::VectorXd Mx = M * X.col(j);
                res(j) = (A * X.col(j) - mu(j) * Mx).norm() / Mx.norm();
                if (!(res(j) <= opt.residual_tol)) converged = false;
            }
        }
        if (!converged)
            throw SolverNonConvergence("eigen_solve: cluster of " + std::to_string(k) + " eigenvalue(s) near mu = " +
                                       std::to_string(mu0) + " reached residual " +
                                       std::to_string(res.maxCoeff()));
        for (Eigen::Index j = 0; j < k; ++j) {
            Eigen::VectorXd v = X.col(j);
            // Deterministic sign: largest-magnitude entry positive.
            Eigen::Index im;
            v.cwiseAbs().maxCoeff(&im);
            if (v(im) < 0) v = -v;
            rep.eigenvectors.col(first + j) = v;
            rep.eigenvalues[static_cast<std::size_t>(first + j)] = mu(j);
            rep.residuals[static_cast<std::size_t>(first + j)] = res(j);
        }
        first = last;
    }

    // inertia counts, so a window below zero still reports the true index
    rep.morse_index = count_below(op, -rep.zero_tol);
    rep.kernel_dim = count_below(op, std::nextafter(rep.zero_tol, 1.0)) - rep.morse_index;
    return rep;
}

inline SpectrumReport eigen_solve(const LinearizedOperator& op, double threshold) {
    EigenSolveOptions o;
    o.threshold = threshold;
    return eigen_solve(op, o);
}

inline GraphFunction eigenfunction(const SpectrumReport& rep, const LinearizedOperator& op, Eigen::Index i) {
    return op.expand(rep.eigenvectors.col(i));
}

inline nlohmann::json to_json(const SpectrumReport& r) {
    return {{"threshold", r.threshold},       {"zero_tol", r.zero_tol},   {"eigenvalues", r.eigenvalues},
            {"residuals", r.residuals},       {"morse_index", r.morse_index}, {"kernel_dim", r.kernel_dim}};
}

}  // namespace graphwave
