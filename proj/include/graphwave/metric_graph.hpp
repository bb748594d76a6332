#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphwave/error.hpp"

namespace graphwave {

using Speeds = std::array<double, 3>;

inline double speed_sum(const Speeds& c) { return c[0] + c[1] + c[2]; }
inline double speed_max(const Speeds& c) { return std::max({c[0], c[1], c[2]}); }

// Star graph with one incoming half-line (edge 1, x in [-L, 0]) and two
// outgoing ones (edges 2 and 3, x in [0, L]), all truncated at length L and
// sampled with the same spacing.
class YJunction {
public:
    YJunction(Speeds speeds, double lambda, double truncation_length, std::size_t points_per_edge)
        : speeds_(speeds), lambda_(lambda), L_(truncation_length), N_(points_per_edge) {
        for (int j = 0; j < 3; ++j)
            if (!(speeds_[j] > 0.0) || !std::isfinite(speeds_[j]))
                throw InvalidArgument("speeds: c" + std::to_string(j + 1) + " must be positive");
        if (!(L_ > 0.0) || !std::isfinite(L_))
            throw InvalidArgument("truncation_length must be positive");
        if (N_ < 16) throw InvalidArgument("points_per_edge must be at least 16");
        if (!std::isfinite(lambda_)) throw InvalidArgument("lambda must be finite");
    }

    const Speeds& speeds() const noexcept { return speeds_; }
    double speed(int edge) const { return speeds_[edge]; }
    double lambda() const noexcept { return lambda_; }
    double truncation_length() const noexcept { return L_; }
    std::size_t points_per_edge() const noexcept { return N_; }
    double h() const noexcept { return L_ / static_cast<double>(N_ - 1); }

    // Node index of the vertex on a given edge.
    std::size_t vertex_index(int edge) const noexcept { return edge == 0 ? N_ - 1 : 0; }
    double x(int edge, std::size_t k) const noexcept {
        return edge == 0 ? -L_ + static_cast<double>(k) * h() : static_cast<double>(k) * h();
    }

    YJunction with_lambda(double lambda) const { return {speeds_, lambda, L_, N_}; }
    YJunction with_grid(double L, std::size_t N) const { return {speeds_, lambda_, L, N}; }

private:
    Speeds speeds_;
    double lambda_;
    double L_;
    std::size_t N_;
};

class VertexCondition {
public:
    enum class Kind { DeltaPrime, KirchhoffLimit };

    static VertexCondition delta_prime(double lambda) {
        if (lambda == 0.0) throw UndefinedForZeroLambda();
        return VertexCondition(Kind::DeltaPrime, lambda);
    }
    static VertexCondition kirchhoff_limit() { return VertexCondition(Kind::KirchhoffLimit, 0.0); }
    // DeltaPrime(lambda) for lambda != 0, the constrained kind otherwise.
    static VertexCondition for_junction(const YJunction& g) {
        return g.lambda() == 0.0 ? kirchhoff_limit() : delta_prime(g.lambda());
    }

    Kind kind() const noexcept { return kind_; }
    bool is_kirchhoff() const noexcept { return kind_ == Kind::KirchhoffLimit; }
    double lambda() const noexcept { return lambda_; }

private:
    VertexCondition(Kind k, double l) : kind_(k), lambda_(l) {}
    Kind kind_;
    double lambda_;
};

struct GraphFunction {
    std::array<std::vector<double>, 3> edge;

    GraphFunction() = default;
    explicit GraphFunction(std::size_t n, double value = 0.0) {
        for (auto& e : edge) e.assign(n, value);
    }
    static GraphFunction zeros(const YJunction& g) { return GraphFunction(g.points_per_edge()); }

    std::size_t size() const noexcept { return edge[0].size(); }
    std::vector<double>& operator[](int j) { return edge[j]; }
    const std::vector<double>& operator[](int j) const { return edge[j]; }

    GraphFunction& operator+=(const GraphFunction& o) {
        for (int j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < edge[j].size(); ++k) edge[j][k] += o.edge[j][k];
        return *this;
    }
    GraphFunction& operator-=(const GraphFunction& o) {
        for (int j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < edge[j].size(); ++k) edge[j][k] -= o.edge[j][k];
        return *this;
    }
    GraphFunction& operator*=(double s) {
        for (auto& e : edge)
            for (double& v : e) v *= s;
        return *this;
    }
    friend GraphFunction operator+(GraphFunction a, const GraphFunction& b) { return a += b; }
    friend GraphFunction operator-(GraphFunction a, const GraphFunction& b) { return a -= b; }
    friend GraphFunction operator*(double s, GraphFunction a) { return a *= s; }

    double max_abs() const {
        double m = 0.0;
        for (const auto& e : edge)
            for (double v : e) m = std::max(m, std::abs(v));
        return m;
    }
};

struct GridDescription {
    double h = 0.0;
    std::array<std::vector<double>, 3> x;
};

inline GridDescription build_grid(const YJunction& g) {
    GridDescription d;
    d.h = g.h();
    const std::size_t N = g.points_per_edge();
    for (int j = 0; j < 3; ++j) {
        d.x[j].resize(N);
        for (std::size_t k = 0; k < N; ++k) d.x[j][k] = g.x(j, k);
    }
    // The endpoints are exact, not accumulated.
    d.x[0].back() = 0.0;
    d.x[1].front() = d.x[2].front() = 0.0;
    return d;
}

namespace detail {

inline void check_shape(const GraphFunction& u, const YJunction& g, const char* what) {
    for (int j = 0; j < 3; ++j)
        if (u.edge[j].size() != g.points_per_edge())
            throw InvalidArgument(std::string(what) + ": edge " + std::to_string(j + 1) + " has " +
                                  std::to_string(u.edge[j].size()) + " samples, grid has " +
                                  std::to_string(g.points_per_edge()));
}

inline double trapezoid(const std::vector<double>& f, double h) {
    if (f.empty()) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t k = 1; k + 1 < f.size(); ++k) s += f[k];
    return s * h;
}

// Second-order derivative samples: centred inside, three-point one-sided at the ends.
inline std::vector<double> derivative(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    std::vector<double> d(n);
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (f[k + 1] - f[k - 1]) / (2 * h);
    d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
    d[n - 1] = (3 * f[n - 1] - 4 * f[n - 2] + f[n - 3]) / (2 * h);
    return d;
}

}  // namespace detail

// Value of edge j at the vertex.
inline double vertex_value(const GraphFunction& u, int j) {
    return j == 0 ? u.edge[0].back() : u.edge[j].front();
}

// u_j'(0) along the edge's own x axis, three-point one-sided.
inline double vertex_derivative(const GraphFunction& u, int j, double h) {
    const auto& e = u.edge[j];
    if (j == 0) {
        const std::size_t n = e.size();
        return (3 * e[n - 1] - 4 * e[n - 2] + e[n - 3]) / (2 * h);
    }
    return (-3 * e[0] + 4 * e[1] - e[2]) / (2 * h);
}

// c2 u2(0+) + c3 u3(0+) - c1 u1(0-)
inline double vertex_jump(const GraphFunction& u, const Speeds& c) {
    return c[1] * vertex_value(u, 1) + c[2] * vertex_value(u, 2) - c[0] * vertex_value(u, 0);
}

inline double graph_inner_product(const GraphFunction& u, const GraphFunction& v, const YJunction& g) {
    detail::check_shape(u, g, "graph_inner_product");
    detail::check_shape(v, g, "graph_inner_product");
    const double h = g.h();
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
        const auto& a = u.edge[j];
        const auto& b = v.edge[j];
        const std::size_t n = a.size();
        double e = 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]);
        for (std::size_t k = 1; k + 1 < n; ++k) e += a[k] * b[k];
        s += e * h;
    }
    return s;
}

inline double graph_norm2(const GraphFunction& u, const YJunction& g) { return graph_inner_product(u, u, g); }

// Squared lambda-weighted H1 norm:
//   sum_j c_j^2 |u_j'|^2 + (beta0 + 1)|u|^2 + jump(u)^2 / lambda,
// beta0 = (sum c)^2 / lambda^2 for lambda < 0, else 0.
inline double graph_norm_lambda(const GraphFunction& u, const YJunction& g) {
    detail::check_shape(u, g, "graph_norm_lambda");
    const double lambda = g.lambda();
    if (lambda == 0.0) throw UndefinedForZeroLambda();
    const auto& c = g.speeds();
    const double h = g.h();
    const double beta0 = lambda < 0 ? std::pow(speed_sum(c) / lambda, 2) : 0.0;
    double grad = 0.0;
    for (int j = 0; j < 3; ++j) {
        auto d = detail::derivative(u.edge[j], h);
        for (double& v : d) v *= v;
        grad += c[j] * c[j] * detail::trapezoid(d, h);
    }
    const double J = vertex_jump(u, c);
    return grad + (beta0 + 1.0) * graph_norm2(u, g) + J * J / lambda;
}

// Standard squared H1 norm, |u'|^2 + |u|^2 summed over edges.
inline double graph_h1_norm2(const GraphFunction& u, const YJunction& g) {
    detail::check_shape(u, g, "graph_h1_norm2");
    double grad = 0.0;
    for (int j = 0; j < 3; ++j) {
        auto d = detail::derivative(u.edge[j], g.h());
        for (double& v : d) v *= v;
        grad += detail::trapezoid(d, g.h());
    }
    return grad + graph_norm2(u, g);
}

// (c1u1' - c2u2', c2u2' - c3u3', jump - lambda c1 u1') at the vertex; the last
// entry is the bare jump for the Kirchhoff-limit kind.
inline std::array<double, 3> vertex_residual(const GraphFunction& u, const VertexCondition& cond,
                                             const YJunction& g) {
    detail::check_shape(u, g, "vertex_residual");
    const auto& c = g.speeds();
    const double h = g.h();
    const double f1 = c[0] * vertex_derivative(u, 0, h);
    const double f2 = c[1] * vertex_derivative(u, 1, h);
    const double f3 = c[2] * vertex_derivative(u, 2, h);
    const double J = vertex_jump(u, c);
    return {f1 - f2, f2 - f3, cond.is_kirchhoff() ? J : J - cond.lambda() * f1};
}

// ---- serialisation -------------------------------------------------------

inline nlohmann::json to_json(const GridDescription& d) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& x : d.x) edges.push_back({{"x", x}});
    return {{"h", d.h}, {"edges", edges}};
}

inline GridDescription grid_from_json(const nlohmann::json& j) {
    GridDescription d;
    d.h = j.value("h", 0.0);
    const auto& edges = j.at("edges");
    if (edges.size() != 3) throw InvalidArgument("grid json: expected 3 edges");
    for (int e = 0; e < 3; ++e) d.x[e] = edges[e].at("x").get<std::vector<double>>();
    return d;
}

// CSV with header edge,x,value; edges numbered 1..3.
inline void write_csv(std::ostream& os, const GraphFunction& u, const YJunction& g) {
    detail::check_shape(u, g, "write_csv");
    const auto grid = build_grid(g);
    os << "edge,x,value\n" << std::setprecision(17);
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < u.edge[j].size(); ++k)
            os << j + 1 << ',' << grid.x[j][k] << ',' << u.edge[j][k] << '\n';
}

inline GraphFunction read_csv(std::istream& is) {
    GraphFunction u;
    std::string line;
    if (!std::getline(is, line) || line.rfind("edge,x,value", 0) != 0)
        throw InvalidArgument("read_csv: missing header edge,x,value");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f[3];
        for (auto& s : f)
            if (!std::getline(ls, s, ',')) throw InvalidArgument("read_csv: short row '" + line + "'");
        const int e = std::stoi(f[0]);
        if (e < 1 || e > 3) throw InvalidArgument("read_csv: edge out of range in '" + line + "'");
        u.edge[e - 1].push_back(std::stod(f[2]));
    }
    if (u.edge[0].size() != u.edge[1].size() || u.edge[1].size() != u.edge[2].size())
        throw InvalidArgument("read_csv: edges have different sample counts");
    return u;
}

}  // namespace graphwave
