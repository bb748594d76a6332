#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

#include <boost/math/tools/roots.hpp>
#include <nlohmann/json.hpp>

#include "graphwave/error.hpp"
#include "graphwave/metric_graph.hpp"

namespace graphwave {

enum class Family { Kink, KinkAntiKink };
enum class ProfileShape { Bump, Tail, Critical };

inline const char* to_string(Family f) { return f == Family::Kink ? "Kink" : "KinkAntiKink"; }
inline const char* to_string(ProfileShape s) {
    switch (s) {
        case ProfileShape::Bump: return "Bump";
        case ProfileShape::Tail: return "Tail";
        default: return "Critical";
    }
}

// Kink:          (-4atan(e^{(x-a1)/c1}), 4atan(e^{-(x-a2)/c2}), 4atan(e^{-(x-a3)/c3}))
// KinkAntiKink:  4atan(e^{-(x-a_j)}) on every edge, unit speeds, a2 = a3 = -a1.
// Edge 1 of the kink carries a minus sign so the triple meets the vertex
// conditions; its modulus is the usual kink connecting 0 and 2pi.
struct StationaryProfile {
    Family family = Family::Kink;
    std::array<double, 3> shifts{};
    Speeds speeds{1.0, 1.0, 1.0};
    double lambda = 0.0;
};

namespace detail {

inline constexpr double kPi = std::numbers::pi;

// Solve f(t) = 0 for a strictly monotone f given as (value, derivative).
// Expands an initial bracket around 0 then runs Newton safeguarded by bisection.
template <class F>
double solve_monotone(F f, bool increasing, const char* what) {
    double lo = -1.0, hi = 1.0;
    auto sgn = [&](double t) { double v = f(t).first; return increasing ? v : -v; };
    int guard = 0;
    while (sgn(lo) > 0) {
        lo *= 2;
        if (++guard > 12) throw NoSolution(std::string(what) + ": root below bracket");
    }
    guard = 0;
    while (sgn(hi) < 0) {
        hi *= 2;
        if (++guard > 12) throw NoSolution(std::string(what) + ": root above bracket");
    }
    std::uintmax_t iters = 200;
    const double guess = 0.5 * (lo + hi);
    const double t = boost::math::tools::newton_raphson_iterate(f, guess, lo, hi, 52, iters);
    if (iters >= 200) throw SolverNonConvergence(std::string(what) + ": Newton iteration did not converge");
    return t;
}

// (1+y^2)/y * atan(y) and its t-derivative for y = e^t.
inline std::pair<double, double> kink_map(double t) {
    const double y = std::exp(t);
    const double at = std::atan(y);
    return {(y + 1.0 / y) * at, (y - 1.0 / y) * at + 1.0};
}

// G(y) = 2 atan(y) - atan(1/y)
inline double antikink_G(double y) { return 2.0 * std::atan(y) - std::atan(1.0 / y); }

// F(y) = -(1+y^2)/y G(y) and y F'(y), y = e^t.
inline std::pair<double, double> antikink_map(double t) {
    const double y = std::exp(t);
    const double G = antikink_G(y);
    return {-(y + 1.0 / y) * G, -((y - 1.0 / y) * G + 3.0)};
}

inline void require_unit_speeds(const Speeds& c, const char* what) {
    if (c[0] != 1.0 || c[1] != 1.0 || c[2] != 1.0)
        throw InvalidArgument(std::string(what) + ": the kink/anti-kink family needs c = (1,1,1)");
}

struct EdgeShape {
    double sign;   // overall sign of the edge profile
    double sigma;  // +1: 4atan(e^{z}), -1: 4atan(e^{-z})
    double a;
    double c;
};

inline EdgeShape edge_shape(const StationaryProfile& p, int j) {
    if (p.family == Family::Kink)
        return j == 0 ? EdgeShape{-1.0, 1.0, p.shifts[0], p.speeds[0]}
                      : EdgeShape{1.0, -1.0, p.shifts[j], p.speeds[j]};
    return {1.0, -1.0, p.shifts[j], 1.0};
}

inline double sech(double z) { return 1.0 / std::cosh(z); }

}  // namespace detail

// Residual of atan(y) sum(c) + lambda y/(1+y^2) = 0 with y = e^{a2/c2}.
inline double kink_shift_residual(const StationaryProfile& p) {
    const double y = std::exp(p.shifts[1] / p.speeds[1]);
    return std::atan(y) * speed_sum(p.speeds) + p.lambda * y / (1.0 + y * y);
}

// Residual of F(y) = lambda scaled by y/(1+y^2): -G(y) - lambda y/(1+y^2), y = e^{-a1}.
inline double antikink_shift_residual(const StationaryProfile& p) {
    const double y = std::exp(-p.shifts[0]);
    return -detail::antikink_G(y) - p.lambda * y / (1.0 + y * y);
}

inline double shift_residual(const StationaryProfile& p) {
    return p.family == Family::Kink ? kink_shift_residual(p) : antikink_shift_residual(p);
}

inline StationaryProfile solve_kink_shifts(double lambda, const Speeds& c) {
    for (double cj : c)
        if (!(cj > 0.0)) throw InvalidArgument("solve_kink_shifts: speeds must be positive");
    const double S = speed_sum(c);
    if (!(lambda < -S))
        throw NoSolution("solve_kink_shifts: kink profiles exist only for lambda < -(c1+c2+c3) = " +
                         std::to_string(-S) + ", got " + std::to_string(lambda));
    auto f = [&](double t) {
        auto [g, dg] = detail::kink_map(t);
        return std::make_pair(S * g + lambda, S * dg);
    };
    const double t = detail::solve_monotone(f, true, "solve_kink_shifts");
    StationaryProfile p;
    p.family = Family::Kink;
    p.speeds = c;
    p.lambda = lambda;
    const double a2 = c[1] * t;
    p.shifts = {-(c[0] / c[1]) * a2, a2, (c[2] / c[1]) * a2};
    return p;
}

inline StationaryProfile solve_antikink_shift(double lambda) {
    if (!std::isfinite(lambda)) throw InvalidArgument("solve_antikink_shift: lambda must be finite");
    auto f = [&](double t) {
        auto [F, dF] = detail::antikink_map(t);
        return std::make_pair(F - lambda, dF);
    };
    const double t = detail::solve_monotone(f, false, "solve_antikink_shift");
    StationaryProfile p;
    p.family = Family::KinkAntiKink;
    p.lambda = lambda;
    p.shifts = {-t, t, t};
    return p;
}

inline StationaryProfile solve_profile(Family f, double lambda, const Speeds& c) {
    if (f == Family::Kink) return solve_kink_shifts(lambda, c);
    detail::require_unit_speeds(c, "solve_profile");
    return solve_antikink_shift(lambda);
}

// Critical parameter where the shifts vanish.
inline double critical_lambda(Family f, const Speeds& c = {1.0, 1.0, 1.0}) {
    return f == Family::Kink ? -0.5 * detail::kPi * speed_sum(c) : -0.5 * detail::kPi;
}

inline ProfileShape classify_profile(const StationaryProfile& p) {
    const double l0 = critical_lambda(p.family, p.speeds);
    const double tol = 64 * std::numeric_limits<double>::epsilon() * std::abs(l0);
    if (std::abs(p.lambda - l0) <= tol) return ProfileShape::Critical;
    return p.lambda < l0 ? ProfileShape::Bump : ProfileShape::Tail;
}

// Closed-form value and x-derivatives of edge j at coordinate x.
inline double profile_value(const StationaryProfile& p, int j, double x) {
    const auto e = detail::edge_shape(p, j);
    return e.sign * 4.0 * std::atan(std::exp(e.sigma * (x - e.a) / e.c));
}
inline double profile_derivative(const StationaryProfile& p, int j, double x) {
    const auto e = detail::edge_shape(p, j);
    return e.sign * 2.0 * e.sigma / e.c * detail::sech((x - e.a) / e.c);
}
inline double profile_second_derivative(const StationaryProfile& p, int j, double x) {
    const auto e = detail::edge_shape(p, j);
    const double z = (x - e.a) / e.c;
    return -e.sign * 2.0 * e.sigma / (e.c * e.c) * detail::sech(z) * std::tanh(z);
}
// d^3/dx^3, used by the perturbation integrals.
inline double profile_third_derivative(const StationaryProfile& p, int j, double x) {
    const auto e = detail::edge_shape(p, j);
    const double z = (x - e.a) / e.c;
    const double s = detail::sech(z), t = std::tanh(z);
    return e.sign * 2.0 * e.sigma / (e.c * e.c * e.c) * s * (2 * t * t - 1.0);
}

namespace detail {

inline void check_profile_speeds(const StationaryProfile& p, const YJunction& g) {
    if (p.speeds != g.speeds())
        throw InvalidArgument("profile speeds do not match the junction speeds");
    if (p.family == Family::KinkAntiKink) require_unit_speeds(g.speeds(), "eval_profile");
}

template <class Fn>
GraphFunction sample(const StationaryProfile& p, const YJunction& g, Fn fn) {
    check_profile_speeds(p, g);
    const auto grid = build_grid(g);
    GraphFunction u = GraphFunction::zeros(g);
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < grid.x[j].size(); ++k) u.edge[j][k] = fn(p, j, grid.x[j][k]);
    return u;
}

}  // namespace detail

inline GraphFunction eval_profile(const StationaryProfile& p, const YJunction& g) {
    return detail::sample(p, g, profile_value);
}
inline GraphFunction eval_derivative(const StationaryProfile& p, const YJunction& g) {
    return detail::sample(p, g, profile_derivative);
}
inline GraphFunction eval_second_derivative(const StationaryProfile& p, const YJunction& g) {
    return detail::sample(p, g, profile_second_derivative);
}

// Value the profile tends to at the far end of edge j.
inline double asymptotic_value(const StationaryProfile& p, int j) {
    return (p.family == Family::KinkAntiKink && j == 0) ? 2.0 * detail::kPi : 0.0;
}

// max over interior nodes of |-c^2 D2 phi + sin phi| with the centred D2.
inline double stationary_residual(const StationaryProfile& p, const YJunction& g) {
    const auto u = eval_profile(p, g);
    const double h2 = g.h() * g.h();
    double r = 0.0;
    for (int j = 0; j < 3; ++j) {
        const auto& e = u.edge[j];
        const double c2 = g.speed(j) * g.speed(j);
        for (std::size_t k = 1; k + 1 < e.size(); ++k) {
            const double d2 = (e[k + 1] - 2 * e[k] + e[k - 1]) / h2;
            r = std::max(r, std::abs(-c2 * d2 + std::sin(e[k])));
        }
    }
    return r;
}

// da1/dlambda from implicit differentiation of the shift map.
inline double shift_map_derivative(const StationaryProfile& p) {
    if (p.family == Family::KinkAntiKink) {
        // a1 = -t, F(e^t) = lambda  =>  a1' = -1 / (dF/dt)
        return -1.0 / detail::antikink_map(-p.shifts[0]).second;
    }
    // a2 = c2 t, S g(e^t) = -lambda  =>  a2' = -c2 / (S dg/dt), a1 = -(c1/c2) a2
    const double t = p.shifts[1] / p.speeds[1];
    const double da2 = -p.speeds[1] / (speed_sum(p.speeds) * detail::kink_map(t).second);
    return -(p.speeds[0] / p.speeds[1]) * da2;
}

inline nlohmann::json to_json(const StationaryProfile& p) {
    return {{"family", to_string(p.family)},
            {"lambda", p.lambda},
            {"shifts", p.shifts},
            {"speeds", p.speeds},
            {"shape", to_string(classify_profile(p))},
            {"shift_residual", shift_residual(p)}};
}

inline StationaryProfile profile_from_json(const nlohmann::json& j) {
    StationaryProfile p;
    const auto fam = j.at("family").get<std::string>();
    if (fam == "Kink") p.family = Family::Kink;
    else if (fam == "KinkAntiKink") p.family = Family::KinkAntiKink;
    else throw InvalidArgument("profile json: unknown family '" + fam + "'");
    p.lambda = j.at("lambda").get<double>();
    p.shifts = j.at("shifts").get<std::array<double, 3>>();
    p.speeds = j.at("speeds").get<Speeds>();
    return p;
}

}  // namespace graphwave
