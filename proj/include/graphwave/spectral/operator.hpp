#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "graphwave/error.hpp"
#include "graphwave/metric_graph.hpp"
#include "graphwave/profiles.hpp"

namespace graphwave {

enum class SubspaceKind { Full, C1, C2 };

inline const char* to_string(SubspaceKind k) {
    switch (k) {
        case SubspaceKind::C1: return "C1";
        case SubspaceKind::C2: return "C2";
        default: return "Full";
    }
}

// One symmetric tridiagonal block in distance-from-vertex coordinates
// d = 1..N-2 (the vertex d = 0 and the Dirichlet node d = N-1 are excluded).
// Node d = 1 couples to the vertex unknowns through a_couple / m_couple.
struct TridiagChannel {
    std::vector<double> a_diag, a_off, m_diag, m_off;
    Eigen::VectorXd a_couple, m_couple;
};

// Galerkin (P1) discretisation of
//   Q(u) = sum_j int c_j^2 u_j'^2 + V_j u_j^2  +  jump(u)^2 / lambda
// with homogeneous Dirichlet data at the far ends. The derivative conditions
// at the vertex are natural for this form, so the vertex values are plain
// unknowns. In the Kirchhoff limit the jump is removed as a constraint instead.
//
// Unknowns are ordered channel by channel (d = 1..N-2), then the reduced
// vertex coordinates z, with vertex traces u(0) = Z z.
class LinearizedOperator {
public:
    const YJunction& junction() const noexcept { return g_; }
    const VertexCondition& condition() const noexcept { return cond_; }
    SubspaceKind subspace() const noexcept { return kind_; }
    const GraphFunction& potential() const noexcept { return potential_; }

    Eigen::Index channels() const noexcept { return W_.rows(); }
    Eigen::Index interior() const noexcept { return static_cast<Eigen::Index>(g_.points_per_edge()) - 2; }
    Eigen::Index vertex_dim() const noexcept { return Z_.cols(); }
    Eigen::Index dim() const noexcept { return channels() * interior() + vertex_dim(); }

    const std::vector<TridiagChannel>& channel_blocks() const noexcept { return ch_; }
    const Eigen::MatrixXd& vertex_A() const noexcept { return Avv_; }
    const Eigen::MatrixXd& vertex_M() const noexcept { return Mvv_; }
    const Eigen::SparseMatrix<double>& A() const noexcept { return A_; }
    const Eigen::SparseMatrix<double>& M() const noexcept { return M_; }
    // Rows: channel combinations of the three edges. Columns of Z: vertex basis.
    const Eigen::MatrixXd& W() const noexcept { return W_; }
    const Eigen::MatrixXd& Z() const noexcept { return Z_; }

    // Orthogonal projection of nodal values onto the discrete space.
    Eigen::VectorXd restrict(const GraphFunction& u) const {
        detail::check_shape(u, g_, "LinearizedOperator::restrict");
        const Eigen::Index n = interior();
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim());
        for (Eigen::Index i = 0; i < channels(); ++i)
            for (int j = 0; j < 3; ++j) {
                const double w = W_(i, j);
                if (w == 0.0) continue;
                for (Eigen::Index d = 1; d <= n; ++d) x(i * n + d - 1) += w * u.edge[j][node(j, d)];
            }
        Eigen::Vector3d uv(vertex_value(u, 0), vertex_value(u, 1), vertex_value(u, 2));
        x.tail(vertex_dim()) = Z_.transpose() * uv;
        return x;
    }

    GraphFunction expand(const Eigen::VectorXd& x) const {
        if (x.size() != dim()) throw InvalidArgument("LinearizedOperator::expand: wrong vector length");
        const Eigen::Index n = interior();
        GraphFunction u = GraphFunction::zeros(g_);
        for (Eigen::Index i = 0; i < channels(); ++i)
            for (int j = 0; j < 3; ++j) {
                const double w = W_(i, j);
                if (w == 0.0) continue;
                for (Eigen::Index d = 1; d <= n; ++d) u.edge[j][node(j, d)] += w * x(i * n + d - 1);
            }
        const Eigen::Vector3d uv = Z_ * x.tail(vertex_dim());
        for (int j = 0; j < 3; ++j) u.edge[j][node(j, 0)] = uv(j);
        return u;
    }

    // Nodal index on edge j of the node at distance d from the vertex.
    std::size_t node(int j, Eigen::Index d) const noexcept {
        return j == 0 ? g_.points_per_edge() - 1 - static_cast<std::size_t>(d) : static_cast<std::size_t>(d);
    }

    friend LinearizedOperator assemble_operator(const GraphFunction&, const YJunction&, const VertexCondition&);
    friend LinearizedOperator subspace_project(const LinearizedOperator&, SubspaceKind);

private:
    // Per-edge element sums over d = 0..N-1.
    struct EdgeAssembly {
        std::vector<double> a_diag, a_off, m_diag, m_off;
    };

    LinearizedOperator(YJunction g, VertexCondition cond, GraphFunction potential)
        : g_(std::move(g)), cond_(cond), potential_(std::move(potential)) {}

    void assemble_raw() {
        const std::size_t N = g_.points_per_edge();
        const double h = g_.h();
        for (int j = 0; j < 3; ++j) {
            auto& e = raw_[j];
            e.a_diag.assign(N, 0.0);
            e.m_diag.assign(N, 0.0);
            e.a_off.assign(N - 1, 0.0);
            e.m_off.assign(N - 1, 0.0);
            const double k = g_.speed(j) * g_.speed(j) / h;
            for (std::size_t d = 0; d + 1 < N; ++d) {
                const double va = potential_.edge[j][node(j, d)];
                const double vb = potential_.edge[j][node(j, d + 1)];
                e.a_diag[d] += k + h / 12 * (3 * va + vb);
                e.a_diag[d + 1] += k + h / 12 * (va + 3 * vb);
                e.a_off[d] += -k + h / 12 * (va + vb);
                e.m_diag[d] += h / 3;
                e.m_diag[d + 1] += h / 3;
                e.m_off[d] += h / 6;
            }
        }
        const auto& c = g_.speeds();
        jump_ = Eigen::Vector3d(-c[0], c[1], c[2]);
    }

    // Orthonormal basis of the admissible vertex traces in the full space.
    Eigen::MatrixXd vertex_space() const {
        if (!cond_.is_kirchhoff()) return Eigen::Matrix3d::Identity();
        const Eigen::Vector3d q = jump_.normalized();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Eigen::Matrix3d::Identity() - q * q.transpose());
        return es.eigenvectors().rightCols(2);
    }

    void build(const Eigen::MatrixXd& W) {
        W_ = W;
        // Vertex basis: range(V) intersected with range(W^T).
        const Eigen::MatrixXd V = vertex_space();
        const Eigen::MatrixXd PVc = Eigen::Matrix3d::Identity() - V * V.transpose();
        const Eigen::MatrixXd G = W_ * PVc * W_.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < G.rows(); ++i)
            if (std::abs(es.eigenvalues()(i)) < 1e-12) keep.push_back(i);
        Z_.resize(3, static_cast<Eigen::Index>(keep.size()));
        for (std::size_t l = 0; l < keep.size(); ++l) {
            Eigen::Vector3d z = W_.transpose() * es.eigenvectors().col(keep[l]);
            // Fix the sign so that the largest entry is positive.
            Eigen::Index im;
            z.cwiseAbs().maxCoeff(&im);
            if (z(im) < 0) z = -z;
            Z_.col(static_cast<Eigen::Index>(l)) = z;
        }

        const Eigen::Index n = interior();
        const Eigen::Index nv = Z_.cols();
        ch_.assign(static_cast<std::size_t>(W_.rows()), {});
        for (Eigen::Index i = 0; i < W_.rows(); ++i) {
            auto& c = ch_[static_cast<std::size_t>(i)];
            c.a_diag.assign(n, 0.0);
            c.m_diag.assign(n, 0.0);
            c.a_off.assign(n - 1, 0.0);
            c.m_off.assign(n - 1, 0.0);
            c.a_couple = Eigen::VectorXd::Zero(nv);
            c.m_couple = Eigen::VectorXd::Zero(nv);
            for (int j = 0; j < 3; ++j) {
                const double w = W_(i, j);
                if (w == 0.0) continue;
                const auto& e = raw_[j];
                for (Eigen::Index d = 1; d <= n; ++d) {
                    c.a_diag[d - 1] += w * w * e.a_diag[d];
                    c.m_diag[d - 1] += w * w * e.m_diag[d];
                    if (d < n) {
                        c.a_off[d - 1] += w * w * e.a_off[d];
                        c.m_off[d - 1] += w * w * e.m_off[d];
                    }
                }
                c.a_couple += w * e.a_off[0] * Z_.row(j).transpose();
                c.m_couple += w * e.m_off[0] * Z_.row(j).transpose();
            }
        }
        Eigen::Matrix3d Av = Eigen::Matrix3d::Zero(), Mv = Eigen::Matrix3d::Zero();
        for (int j = 0; j < 3; ++j) {
            Av(j, j) = raw_[j].a_diag[0];
            Mv(j, j) = raw_[j].m_diag[0];
        }
        if (!cond_.is_kirchhoff()) Av += (1.0 / cond_.lambda()) * jump_ * jump_.transpose();
        Avv_ = Z_.transpose() * Av * Z_;
        Mvv_ = Z_.transpose() * Mv * Z_;
        Avv_ = 0.5 * (Avv_ + Avv_.transpose()).eval();
        Mvv_ = 0.5 * (Mvv_ + Mvv_.transpose()).eval();
        build_sparse();
    }

    void build_sparse() {
        const Eigen::Index n = interior();
        const Eigen::Index nv = vertex_dim();
        const Eigen::Index off_v = channels() * n;
        std::vector<Eigen::Triplet<double>> ta, tm;
        ta.reserve(static_cast<std::size_t>(3 * dim() + 2 * nv * channels() + nv * nv));
        tm.reserve(ta.capacity());
        auto put = [](std::vector<Eigen::Triplet<double>>& t, Eigen::Index r, Eigen::Index c, double v) {
            if (v == 0.0) return;
            t.emplace_back(r, c, v);
            if (r != c) t.emplace_back(c, r, v);
        };
        for (Eigen::Index i = 0; i < channels(); ++i) {
            const auto& c = ch_[static_cast<std::size_t>(i)];
            const Eigen::Index o = i * n;
            for (Eigen::Index d = 0; d < n; ++d) {
                put(ta, o + d, o + d, c.a_diag[d]);
                put(tm, o + d, o + d, c.m_diag[d]);
                if (d + 1 < n) {
                    put(ta, o + d, o + d + 1, c.a_off[d]);
                    put(tm, o + d, o + d + 1, c.m_off[d]);
                }
            }
            for (Eigen::Index l = 0; l < nv; ++l) {
                put(ta, o, off_v + l, c.a_couple(l));
                put(tm, o, off_v + l, c.m_couple(l));
            }
        }
        for (Eigen::Index r = 0; r < nv; ++r)
            for (Eigen::Index s = r; s < nv; ++s) {
                put(ta, off_v + r, off_v + s, Avv_(r, s));
                put(tm, off_v + r, off_v + s, Mvv_(r, s));
            }
        A_.resize(dim(), dim());
        M_.resize(dim(), dim());
        A_.setFromTriplets(ta.begin(), ta.end());
        M_.setFromTriplets(tm.begin(), tm.end());
        A_.makeCompressed();
        M_.makeCompressed();
    }

    YJunction g_;
    VertexCondition cond_;
    GraphFunction potential_;
    SubspaceKind kind_ = SubspaceKind::Full;
    std::array<EdgeAssembly, 3> raw_;
    Eigen::Vector3d jump_;
    Eigen::MatrixXd W_, Z_;
    std::vector<TridiagChannel> ch_;
    Eigen::MatrixXd Avv_, Mvv_;
    Eigen::SparseMatrix<double> A_, M_;
};

inline LinearizedOperator assemble_operator(const GraphFunction& potential, const YJunction& g,
                                            const VertexCondition& cond) {
    detail::check_shape(potential, g, "assemble_operator");
    if (!cond.is_kirchhoff() && cond.lambda() == 0.0) throw UndefinedForZeroLambda();
    LinearizedOperator op(g, cond, potential);
    op.assemble_raw();
    op.build(Eigen::Matrix3d::Identity());
    return op;
}

// cos(phi_j) sampled on the grid.
inline GraphFunction linearized_potential(const StationaryProfile& p, const YJunction& g) {
    auto u = eval_profile(p, g);
    for (auto& e : u.edge)
        for (double& v : e) v = std::cos(v);
    return u;
}

// Linearisation of the stationary equation about a profile, at the profile's own lambda.
inline LinearizedOperator linearized_operator(const StationaryProfile& p, const YJunction& g) {
    const YJunction gl = g.with_lambda(p.lambda);
    return assemble_operator(linearized_potential(p, gl), gl, VertexCondition::for_junction(gl));
}

// -c_j^2 d^2/dx^2 with the same vertex conditions, no potential.
inline LinearizedOperator free_operator(const YJunction& g) {
    return assemble_operator(GraphFunction::zeros(g), g, VertexCondition::for_junction(g));
}

inline LinearizedOperator subspace_project(const LinearizedOperator& op, SubspaceKind kind) {
    const auto& c = op.junction().speeds();
    auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); };
    Eigen::MatrixXd W;
    switch (kind) {
        case SubspaceKind::Full:
            W = Eigen::Matrix3d::Identity();
            break;
        case SubspaceKind::C1:
            if (!same(c[1], c[2])) throw InvalidArgument("subspace C1 needs c2 == c3");
            W.setZero(2, 3);
            W(0, 0) = 1.0;
            W(1, 1) = W(1, 2) = std::sqrt(0.5);
            break;
        case SubspaceKind::C2:
            if (!same(c[0], c[1]) || !same(c[1], c[2])) throw InvalidArgument("subspace C2 needs c1 == c2 == c3");
            W.setZero(1, 3);
            W(0, 0) = -1.0 / std::sqrt(3.0);
            W(0, 1) = W(0, 2) = 1.0 / std::sqrt(3.0);
            break;
    }
    LinearizedOperator out = op;
    out.kind_ = kind;
    out.build(W);
    return out;
}

// max |A - A^T|
inline double matrix_symmetry_defect(const LinearizedOperator& op) {
    Eigen::SparseMatrix<double> At = op.A().transpose();
    Eigen::SparseMatrix<double> D = op.A() - At;
    double m = 0.0;
    for (Eigen::Index k = 0; k < D.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

// v^T A v for the projection of v onto the operator's discrete space.
inline double quadratic_form(const GraphFunction& v, const LinearizedOperator& op) {
    const Eigen::VectorXd x = op.restrict(v);
    return x.dot(op.A() * x);
}

// v^T M v, the consistent-mass L2 norm squared.
inline double mass_form(const GraphFunction& v, const LinearizedOperator& op) {
    const Eigen::VectorXd x = op.restrict(v);
    return x.dot(op.M() * x);
}

}  // namespace graphwave
