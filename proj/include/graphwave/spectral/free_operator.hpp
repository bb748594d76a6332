#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "graphwave/error.hpp"
#include "graphwave/metric_graph.hpp"

namespace graphwave {

// Receives non-fatal diagnostics. Defaults to std::clog.
inline std::function<void(const std::string&)>& warning_handler() {
    static std::function<void(const std::string&)> h = [](const std::string& m) {
        std::clog << "graphwave: warning: " << m << '\n';
    };
    return h;
}
inline void warn(const std::string& m) {
    if (warning_handler()) warning_handler()(m);
}

struct FreeEigenpair {
    double mu;
    GraphFunction psi;
};

// The free operator -c_j^2 d^2/dx^2 with the delta' condition has, for lambda < 0,
// the single eigenvalue -(sum c)^2/lambda^2 with eigenfunction
// (-e^{-a x/c1}, e^{a x/c2}, e^{a x/c3}), a = sum(c)/lambda. None for lambda > 0.
inline std::optional<FreeEigenpair> analytic_free_eigenpair(const YJunction& g) {
    const double lambda = g.lambda();
    if (lambda == 0.0) throw UndefinedForZeroLambda();
    if (lambda > 0.0) return std::nullopt;
    const auto& c = g.speeds();
    const double alpha = speed_sum(c) / lambda;
    if (g.truncation_length() * std::abs(alpha) / speed_max(c) < 20.0)
        warn("truncation length " + std::to_string(g.truncation_length()) +
             " is short for the free eigenfunction decay rate " + std::to_string(std::abs(alpha) / speed_max(c)));
    FreeEigenpair out{-alpha * alpha, GraphFunction::zeros(g)};
    const auto grid = build_grid(g);
    for (std::size_t k = 0; k < grid.x[0].size(); ++k) {
        out.psi.edge[0][k] = -std::exp(-alpha * grid.x[0][k] / c[0]);
        out.psi.edge[1][k] = std::exp(alpha * grid.x[1][k] / c[1]);
        out.psi.edge[2][k] = std::exp(alpha * grid.x[2][k] / c[2]);
    }
    return out;
}

struct FreeResolvent {
    GraphFunction phi;
    std::array<double, 3> vertex_value;  // exact traces phi_j(0)
    double flux = 0.0;                   // c_j phi_j'(0), common to all edges
};

namespace detail {

// I(s_k) = int_0^L u(t) e^{-kappa |s_k - t|} dt on a uniform grid s_k = k h,
// with cubic interpolation of u and 4-point Gauss-Legendre per interval.
inline std::vector<double> exp_convolution(const std::vector<double>& u, double h, double kappa) {
    static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
    static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
    const std::size_t n = u.size();
    std::vector<double> fwd(n, 0.0), bwd(n, 0.0);
    const double decay = std::exp(-kappa * h);
    // Per-interval moments int u(t) e^{-kappa (s_{k+1}-t)} and int u(t) e^{-kappa (t - s_k)}.
    std::vector<double> right(n - 1), left(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        std::size_t s0 = k == 0 ? 0 : k - 1;
        if (s0 + 3 >= n) s0 = n - 4;
        double r = 0.0, l = 0.0;
        for (int q = 0; q < 4; ++q) {
            const double tau = 0.5 * (gx[q] + 1.0);  // position in [0,1] within the interval
            const double t = static_cast<double>(k) + tau;  // in units of h
            double val = 0.0;
            for (int a = 0; a < 4; ++a) {
                double w = 1.0;
                for (int b = 0; b < 4; ++b)
                    if (b != a) w *= (t - static_cast<double>(s0 + b)) / static_cast<double>(a - b);
                val += w * u[s0 + a];
            }
            r += 0.5 * gw[q] * val * std::exp(-kappa * h * (1.0 - tau));
            l += 0.5 * gw[q] * val * std::exp(-kappa * h * tau);
        }
        right[k] = r * h;
        left[k] = l * h;
    }
    for (std::size_t k = 1; k < n; ++k) fwd[k] = decay * fwd[k - 1] + right[k - 1];
    for (std::size_t k = n - 1; k-- > 0;) bwd[k] = decay * bwd[k + 1] + left[k];
    std::vector<double> I(n);
    for (std::size_t k = 0; k < n; ++k) I[k] = fwd[k] + bwd[k];
    return I;
}

}  // namespace detail

// (H + eta^2)^{-1} u for H = -c_j^2 d^2/dx^2 with the vertex condition of the
// junction (Kirchhoff limit at lambda = 0). Closed form on each truncated edge:
//   phi_j(s) = d_j e^{-kappa_j s} + (1/(2 c_j eta)) int u_j(t) e^{-kappa_j |s-t|} dt,
// s the distance to the vertex, kappa_j = eta/c_j, d_j fixed by the vertex condition.
// The far-end boundary of the truncation is ignored (e^{-kappa L} terms).
inline FreeResolvent free_resolvent_apply(const GraphFunction& u, double eta, const YJunction& g) {
    detail::check_shape(u, g, "free_resolvent_apply");
    if (!(eta > 0.0)) throw InvalidArgument("free_resolvent_apply: eta must be positive");
    const auto& c = g.speeds();
    const double lambda = g.lambda();
    const std::size_t N = g.points_per_edge();
    const double h = g.h();

    std::array<std::vector<double>, 3> P;
    std::array<double, 3> gv{};
    for (int j = 0; j < 3; ++j) {
        std::vector<double> us(N);
        for (std::size_t d = 0; d < N; ++d) us[d] = u.edge[j][j == 0 ? N - 1 - d : d];
        P[j] = detail::exp_convolution(us, h, eta / c[j]);
        const double pref = 1.0 / (2.0 * c[j] * eta);
        for (double& v : P[j]) v *= pref;
        gv[j] = P[j][0];
    }
    const double den = lambda * eta + speed_sum(c);
    if (std::abs(den) <= 1e-12 * speed_sum(c))
        throw SingularSystem("free_resolvent_apply: -eta^2 = " + std::to_string(-eta * eta) +
                             " is an eigenvalue of the free operator");
    const double q = 2.0 * (c[1] * gv[1] + c[2] * gv[2] - c[0] * gv[0]) / den;
    const std::array<double, 3> dj{gv[0] + q, gv[1] - q, gv[2] - q};

    FreeResolvent out{GraphFunction::zeros(g), {2 * gv[0] + q, 2 * gv[1] - q, 2 * gv[2] - q}, eta * q};
    for (int j = 0; j < 3; ++j) {
        const double kappa = eta / c[j];
        for (std::size_t d = 0; d < N; ++d) {
            const double s = static_cast<double>(d) * h;
            out.phi.edge[j][j == 0 ? N - 1 - d : d] = dj[j] * std::exp(-kappa * s) + P[j][d];
        }
    }
    return out;
}

// Vertex conditions evaluated on the exact traces of a resolvent output.
inline std::array<double, 3> free_resolvent_vertex_residual(const FreeResolvent& r, const YJunction& g) {
    const auto& c = g.speeds();
    const double jump = c[1] * r.vertex_value[1] + c[2] * r.vertex_value[2] - c[0] * r.vertex_value[0];
    return {0.0, 0.0, jump - g.lambda() * r.flux};
}

// max_k |(H + eta^2) phi - u| / max |u| over nodes 2..N-3 of every edge, using
// the fourth-order centred second difference.
inline double resolvent_identity_error(const GraphFunction& phi, const GraphFunction& u, double eta,
                                       const YJunction& g) {
    const double h2 = g.h() * g.h();
    double err = 0.0;
    for (int j = 0; j < 3; ++j) {
        const auto& p = phi.edge[j];
        const double c2 = g.speed(j) * g.speed(j);
        for (std::size_t k = 2; k + 2 < p.size(); ++k) {
            const double d2 = (-p[k + 2] + 16 * p[k + 1] - 30 * p[k] + 16 * p[k - 1] - p[k - 2]) / (12 * h2);
            err = std::max(err, std::abs(-c2 * d2 + eta * eta * p[k] - u.edge[j][k]));
        }
    }
    const double scale = u.max_abs();
    return scale > 0 ? err / scale : err;
}

}  // namespace graphwave
