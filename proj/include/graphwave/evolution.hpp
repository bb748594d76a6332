#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "graphwave/error.hpp"
#include "graphwave/metric_graph.hpp"
#include "graphwave/profiles.hpp"

namespace graphwave {

struct EvolutionState {
    GraphFunction u;  // phase
    GraphFunction v;  // du/dt
    double t = 0.0;
};

struct EnergyBreakdown {
    double kinetic = 0, gradient = 0, potential = 0, vertex = 0, total = 0;
};

// Vertex values from the three trace conditions, written with the one-sided
// stencils u'(0) = +-(3 u0 - 4 u1 + u2) / (2h). The map from the two nearest
// interior nodes of every edge to the vertex values is linear and fixed per grid.
class VertexSolver {
public:
    VertexSolver(const YJunction& g, const VertexCondition& cond) : h_(g.h()) {
        const auto& c = g.speeds();
        const double k = 1.5 / h_;
        const double lam = cond.is_kirchhoff() ? 0.0 : cond.lambda();
        Eigen::Matrix3d A;
        A << c[0] * k, c[1] * k, 0.0,  //
            0.0, -c[1] * k, c[2] * k,   //
            -c[0] - lam * c[0] * k, c[1], c[2];
        Eigen::Matrix3d B;
        B << c[0], c[1], 0.0,  //
            0.0, -c[1], c[2],  //
            -lam * c[0], 0.0, 0.0;
        Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
        const double scale = A.cwiseAbs().maxCoeff();
        if (!lu.isInvertible() || std::abs(A.determinant()) <= 1e-12 * scale * scale * scale)
            throw SingularSystem("vertex trace system is singular for lambda = " + std::to_string(lam) +
                                 ", h = " + std::to_string(h_));
        T_ = lu.solve(B);
    }

    // s_j = (4 u_j(h) - u_j(2h)) / (2h), distances from the vertex.
    std::array<double, 3> traces(const GraphFunction& f) const {
        std::array<double, 3> s{};
        for (int j = 0; j < 3; ++j) {
            const auto& e = f.edge[j];
            const std::size_t n = e.size();
            const double a = j == 0 ? e[n - 2] : e[1];
            const double b = j == 0 ? e[n - 3] : e[2];
            s[j] = (4 * a - b) / (2 * h_);
        }
        return s;
    }

    void enforce(GraphFunction& f) const {
        const auto s = traces(f);
        const Eigen::Vector3d U = T_ * Eigen::Vector3d(s[0], s[1], s[2]);
        f.edge[0].back() = U(0);
        f.edge[1].front() = U(1);
        f.edge[2].front() = U(2);
    }

    // dU / ds
    const Eigen::Matrix3d& map() const noexcept { return T_; }

private:
    double h_;
    Eigen::Matrix3d T_;
};

inline double cfl_limit(const YJunction& g) { return 0.5 * g.h() / speed_max(g.speeds()); }

// Stormer-Verlet integrator. Far-end nodes never move; vertex nodes of u and v
// follow the interior through VertexSolver, which keeps the scheme reversible.
class Stepper {
public:
    Stepper(YJunction g, VertexCondition cond, double dt) : g_(std::move(g)), cond_(cond), dt_(dt), vs_(g_, cond_) {
        if (!(dt > 0.0) || dt > cfl_limit(g_) * (1 + 1e-12))
            throw InvalidArgument("time step " + std::to_string(dt) + " violates the CFL bound dt <= 0.5 h / max c = " +
                                  std::to_string(cfl_limit(g_)));
        acc_ = GraphFunction::zeros(g_);
    }

    const YJunction& junction() const noexcept { return g_; }
    const VertexCondition& condition() const noexcept { return cond_; }
    const VertexSolver& vertex_solver() const noexcept { return vs_; }
    double dt() const noexcept { return dt_; }

    void advance(EvolutionState& s) {
        accelerate(s.u);
        kick(s.v, 0.5 * dt_);
        for (int j = 0; j < 3; ++j) {
            auto& u = s.u.edge[j];
            const auto& v = s.v.edge[j];
            for (std::size_t k = 1; k + 1 < u.size(); ++k) u[k] += dt_ * v[k];
        }
        vs_.enforce(s.u);
        accelerate(s.u);
        kick(s.v, 0.5 * dt_);
        s.t += dt_;
    }

private:
    void accelerate(const GraphFunction& u) {
        const double ih2 = 1.0 / (g_.h() * g_.h());
        for (int j = 0; j < 3; ++j) {
            const auto& e = u.edge[j];
            auto& a = acc_.edge[j];
            const double c2 = g_.speed(j) * g_.speed(j) * ih2;
            for (std::size_t k = 1; k + 1 < e.size(); ++k)
                a[k] = c2 * (e[k + 1] - 2 * e[k] + e[k - 1]) - std::sin(e[k]);
        }
    }
    void kick(GraphFunction& v, double tau) {
        for (int j = 0; j < 3; ++j) {
            auto& e = v.edge[j];
            const auto& a = acc_.edge[j];
            for (std::size_t k = 1; k + 1 < e.size(); ++k) e[k] += tau * a[k];
        }
        vs_.enforce(v);
    }

    YJunction g_;
    VertexCondition cond_;
    double dt_;
    VertexSolver vs_;
    GraphFunction acc_;
};

inline EvolutionState step(const EvolutionState& state, double dt, const YJunction& g, const VertexCondition& cond) {
    Stepper s(g, cond, dt);
    EvolutionState out = state;
    s.advance(out);
    return out;
}

// Sum over edges of int v^2/2 + c^2 u_x^2/2 + (1 - cos u), plus jump^2 / (2 lambda).
// Gradients are taken cell-wise, the rest by the trapezoid rule.
inline EnergyBreakdown energy(const EvolutionState& s, const YJunction& g, const VertexCondition& cond) {
    if (!cond.is_kirchhoff() && cond.lambda() == 0.0) throw UndefinedForZeroLambda();
    const double h = g.h();
    EnergyBreakdown e;
    for (int j = 0; j < 3; ++j) {
        const auto& u = s.u.edge[j];
        const auto& v = s.v.edge[j];
        const double c2 = g.speed(j) * g.speed(j);
        std::vector<double> kin(u.size()), pot(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) {
            kin[k] = 0.5 * v[k] * v[k];
            pot[k] = 1.0 - std::cos(u[k]);
        }
        e.kinetic += detail::trapezoid(kin, h);
        e.potential += detail::trapezoid(pot, h);
        for (std::size_t k = 0; k + 1 < u.size(); ++k) {
            const double d = (u[k + 1] - u[k]) / h;
            e.gradient += 0.5 * c2 * d * d * h;
        }
    }
    if (!cond.is_kirchhoff()) {
        const double J = vertex_jump(s.u, g.speeds());
        e.vertex = J * J / (2.0 * cond.lambda());
    }
    e.total = e.kinetic + e.gradient + e.potential + e.vertex;
    return e;
}

// Fixed point of the scheme near the closed-form profile: Newton on
// -c^2 D2 u + sin u = 0 over the interior nodes, vertex nodes eliminated.
// tol <= 0 picks the rounding floor 64 eps max(c)^2/h^2 max|u|.
inline GraphFunction discrete_equilibrium(const StationaryProfile& p, const YJunction& g, double tol = 0,
                                          int max_iter = 30) {
    const YJunction gl = g.with_lambda(p.lambda);
    const auto cond = VertexCondition::for_junction(gl);
    const VertexSolver vs(gl, cond);
    GraphFunction u = eval_profile(p, gl);
    for (int j = 0; j < 3; ++j) {
        auto& e = u.edge[j];
        (j == 0 ? e.front() : e.back()) = asymptotic_value(p, j);
    }
    vs.enforce(u);

    const std::size_t N = g.points_per_edge();
    const Eigen::Index n = static_cast<Eigen::Index>(N) - 2;  // interior nodes per edge, distances 1..N-2
    const double h = g.h(), ih2 = 1.0 / (h * h);
    auto node = [&](int j, Eigen::Index d) { return j == 0 ? N - 1 - static_cast<std::size_t>(d) : static_cast<std::size_t>(d); };
    auto col = [&](int j, Eigen::Index d) { return j * n + d - 1; };
    const Eigen::Matrix3d& T = vs.map();
    if (tol <= 0)
        tol = 64 * std::numeric_limits<double>::epsilon() * std::pow(speed_max(g.speeds()), 2) * ih2 *
              std::max(1.0, u.max_abs());

    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd F(3 * n);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(3 * n * 3 + 36));
        double res = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double c2 = g.speed(j) * g.speed(j) * ih2;
            const auto& e = u.edge[j];
            for (Eigen::Index d = 1; d <= n; ++d) {
                const double um = e[node(j, d - 1)], u0 = e[node(j, d)], up = e[node(j, d + 1)];
                F(col(j, d)) = -c2 * (um - 2 * u0 + up) + std::sin(u0);
                res = std::max(res, std::abs(F(col(j, d))));
                trip.emplace_back(col(j, d), col(j, d), 2 * c2 + std::cos(u0));
                if (d > 1) trip.emplace_back(col(j, d), col(j, d - 1), -c2);
                if (d < n) trip.emplace_back(col(j, d), col(j, d + 1), -c2);
                if (d == 1)  // dU_j / dx through the vertex map
                    for (int i = 0; i < 3; ++i) {
                        trip.emplace_back(col(j, 1), col(i, 1), -c2 * T(j, i) * 4.0 / (2 * h));
                        trip.emplace_back(col(j, 1), col(i, 2), -c2 * T(j, i) * -1.0 / (2 * h));
                    }
            }
        }
        if (res <= tol) return u;
        Eigen::SparseMatrix<double> J(3 * n, 3 * n);
        J.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(J);
        if (lu.info() != Eigen::Success) throw SingularSystem("discrete_equilibrium: singular Newton matrix");
        const Eigen::VectorXd dx = lu.solve(F);
        for (int j = 0; j < 3; ++j)
            for (Eigen::Index d = 1; d <= n; ++d) u.edge[j][node(j, d)] -= dx(col(j, d));
        vs.enforce(u);
    }
    throw SolverNonConvergence("discrete_equilibrium: Newton did not reach residual " + std::to_string(tol));
}

inline EvolutionState equilibrium_state(const StationaryProfile& p, const YJunction& g) {
    auto u = discrete_equilibrium(p, g);
    return {u, GraphFunction::zeros(g), 0.0};
}

// Phi + eps psi with velocity eps sqrt(-mu) psi, psi scaled to unit L2 norm and
// signed so that its largest entry is positive. eps is the L2 size of the kick.
inline EvolutionState seed_perturbation(const StationaryProfile& p, const GraphFunction& mode, double mu, double eps,
                                        const YJunction& g) {
    if (!(mu < 0.0)) throw InvalidArgument("seed_perturbation: mu must be negative, got " + std::to_string(mu));
    detail::check_shape(mode, g, "seed_perturbation");
    EvolutionState s = equilibrium_state(p, g);
    if (eps == 0.0) return s;
    GraphFunction psi = mode;
    for (int j = 0; j < 3; ++j) (j == 0 ? psi.edge[j].front() : psi.edge[j].back()) = 0.0;
    double big = 0.0;
    for (const auto& e : psi.edge)
        for (double x : e)
            if (std::abs(x) > std::abs(big)) big = x;
    const double scale = (big < 0 ? -1.0 : 1.0) / std::sqrt(graph_norm2(psi, g));
    const double sigma = std::sqrt(-mu);
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < psi.edge[j].size(); ++k) {
            s.u.edge[j][k] += eps * scale * psi.edge[j][k];
            s.v.edge[j][k] = eps * sigma * scale * psi.edge[j][k];
        }
    const VertexSolver vs(g.with_lambda(p.lambda), VertexCondition::for_junction(g.with_lambda(p.lambda)));
    vs.enforce(s.u);
    vs.enforce(s.v);
    return s;
}

struct TrajectorySample {
    double t = 0, deviation = 0, energy_total = 0, energy_vertex = 0;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    GraphFunction base;             // reference state for the deviation
    double base_sup = 0;            // max |base|
    double eps = 0;                 // initial deviation size
    double max_vertex_residual = 0; // over every step
    double boundary_flux = 0;       // int |c^2 u_x u_t| dt at |x| = 0.9 L, all edges
};

struct EvolveOptions {
    double dt = 0;             // 0: 0.4 h / max c
    double t_end = 20;
    std::size_t stride = 25;   // steps between samples
    double stop_deviation = 0; // stop once the deviation exceeds this (0: never)
    std::function<void(const EvolutionState&)> on_sample;
};

inline double deviation_norm(const GraphFunction& u, const GraphFunction& base, const YJunction& g) {
    GraphFunction d = u - base;
    return std::sqrt(graph_norm2(d, g));
}

inline Trajectory evolve(EvolutionState s, const GraphFunction& base, const YJunction& g, const VertexCondition& cond,
                         const EvolveOptions& opt = {}) {
    const double dt = opt.dt > 0 ? opt.dt : 0.4 * g.h() / speed_max(g.speeds());
    Stepper st(g, cond, dt);
    Trajectory tr;
    tr.base = base;
    tr.base_sup = base.max_abs();
    tr.eps = deviation_norm(s.u, base, g);

    const std::size_t N = g.points_per_edge();
    const std::size_t probe = static_cast<std::size_t>(std::lround(0.9 * static_cast<double>(N - 1)));
    auto flux = [&](const EvolutionState& x) {
        double f = 0;
        for (int j = 0; j < 3; ++j) {
            const std::size_t k = j == 0 ? N - 1 - probe : probe;
            const auto& u = x.u.edge[j];
            const double ux = (u[k + 1] - u[k - 1]) / (2 * g.h());
            f += std::abs(g.speed(j) * g.speed(j) * ux * x.v.edge[j][k]);
        }
        return f;
    };
    auto record = [&] {
        const auto e = energy(s, g, cond);
        tr.samples.push_back({s.t, deviation_norm(s.u, base, g), e.total, e.vertex});
        if (opt.on_sample) opt.on_sample(s);
    };
    record();
    const auto steps = static_cast<std::size_t>(std::ceil(opt.t_end / dt - 1e-9));
    double f_prev = flux(s);
    for (std::size_t n = 1; n <= steps; ++n) {
        st.advance(s);
        const double f = flux(s);
        tr.boundary_flux += 0.5 * dt * (f + f_prev);
        f_prev = f;
        const auto r = vertex_residual(s.u, cond, g);
        tr.max_vertex_residual = std::max({tr.max_vertex_residual, std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
        if (n % opt.stride == 0 || n == steps) {
            record();
            if (opt.stop_deviation > 0 && tr.samples.back().deviation > opt.stop_deviation) break;
        }
    }
    return tr;
}

struct GrowthFit {
    double sigma = 0, intercept = 0, r2 = 0;
    double t_begin = 0, t_end = 0;
    double lower = 0, upper = 0;  // deviation window
    std::size_t samples = 0;
};

// [3 eps, 0.03 max|base|]. An unseeded trajectory (eps = 0) has no window.
// [3 eps, 0.03 max|base|].
inline GrowthFit growing_mode_fit(const Trajectory& tr, double lower_factor = 3.0, double upper_factor = 0.03) {
    GrowthFit fit;
    fit.lower = lower_factor * tr.eps;
    fit.upper = upper_factor * tr.base_sup;
    std::vector<double> ts, ys;
    bool started = false;
    for (const auto& s : tr.samples) {
        if (!started && s.deviation >= fit.lower) started = true;
        if (!started) continue;
        if (s.deviation > fit.upper) break;
        ts.push_back(s.t);
        ys.push_back(std::log(s.deviation));
    }
    if (!(tr.eps > 0) || !(fit.lower < fit.upper) || ts.size() < 5)
        throw EmptyFitWindow("growing_mode_fit: " + std::to_string(ts.size()) + " samples with deviation in [" +
                             std::to_string(fit.lower) + ", " + std::to_string(fit.upper) + "]");
    const double n = static_cast<double>(ts.size());
    double mt = 0, my = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        mt += ts[i];
        my += ys[i];
    }
    mt /= n;
    my /= n;
    double stt = 0, sty = 0, syy = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        stt += (ts[i] - mt) * (ts[i] - mt);
        sty += (ts[i] - mt) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    fit.sigma = sty / stt;
    fit.intercept = my - fit.sigma * mt;
    fit.r2 = syy > 0 ? sty * sty / (stt * syy) : 1.0;
    fit.t_begin = ts.front();
    fit.t_end = ts.back();
    fit.samples = ts.size();
    return fit;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    os << "t,deviation_norm,energy_total,energy_vertex\n";
    os.precision(17);
    for (const auto& s : tr.samples) os << s.t << ',' << s.deviation << ',' << s.energy_total << ',' << s.energy_vertex << '\n';
}

}  // namespace graphwave
