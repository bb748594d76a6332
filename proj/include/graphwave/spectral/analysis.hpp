#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Dense>

#include "graphwave/error.hpp"
#include "graphwave/metric_graph.hpp"
#include "graphwave/profiles.hpp"
#include "graphwave/spectral/eigensolver.hpp"
#include "graphwave/spectral/operator.hpp"

namespace graphwave {

// ---- test directions -----------------------------------------------------

inline bool at_critical_lambda(const StationaryProfile& p) {
    return classify_profile(p) == ProfileShape::Critical;
}

// Translation modes spanning the kernel at the critical lambda:
// kink (Psi1', Psi2', 0), (0, Psi2', -Psi3'); anti-kink (phi1', phi2', 0), (phi1', 0, phi3').
inline std::array<GraphFunction, 2> kernel_candidates(const StationaryProfile& p, const YJunction& g) {
    if (!at_critical_lambda(p))
        throw InvalidArgument("kernel_candidates: profile is not at its critical lambda " +
                              std::to_string(critical_lambda(p.family, p.speeds)));
    const auto d = eval_derivative(p, g);
    GraphFunction a = d, b = d;
    if (p.family == Family::Kink) {
        std::fill(a.edge[2].begin(), a.edge[2].end(), 0.0);
        std::fill(b.edge[0].begin(), b.edge[0].end(), 0.0);
        for (double& v : b.edge[2]) v = -v;
    } else {
        std::fill(a.edge[2].begin(), a.edge[2].end(), 0.0);
        std::fill(b.edge[1].begin(), b.edge[1].end(), 0.0);
    }
    return {a, b};
}

// |A x| / |M x| for both kernel candidates, x their nodal interpolants.
inline std::array<double, 2> kernel_candidates_residual(const StationaryProfile& p, const YJunction& g) {
    const auto op = linearized_operator(p, g);
    const auto k = kernel_candidates(p, g);
    std::array<double, 2> r{};
    for (int i = 0; i < 2; ++i) {
        const Eigen::VectorXd x = op.restrict(k[static_cast<std::size_t>(i)]);
        r[static_cast<std::size_t>(i)] = (op.A() * x).norm() / (op.M() * x).norm();
    }
    return r;
}

// Gram determinant of the normalised pair (1 = orthogonal, 0 = parallel).
inline double gram_determinant(const GraphFunction& a, const GraphFunction& b, const YJunction& g) {
    const double aa = graph_norm2(a, g), bb = graph_norm2(b, g), ab = graph_inner_product(a, b, g);
    return 1.0 - ab * ab / (aa * bb);
}

// Anti-kink directions (phi1', phi2', phi2') and (0, phi2', phi2').
inline GraphFunction antikink_lambda1(const StationaryProfile& p, const YJunction& g) { return eval_derivative(p, g); }
inline GraphFunction antikink_lambda2(const StationaryProfile& p, const YJunction& g) {
    auto v = eval_derivative(p, g);
    std::fill(v.edge[0].begin(), v.edge[0].end(), 0.0);
    return v;
}

// P = c1^2 psi1(0)^2 phi1''(0)/phi1'(0) - sum_{j=2,3} c_j^2 psi_j(0)^2 phi_j''(0)/phi_j'(0)
inline double vertex_positivity_term(const StationaryProfile& p, const GraphFunction& v) {
    double P = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double d1 = profile_derivative(p, j, 0.0);
        if (d1 == 0.0) throw InvalidArgument("vertex_positivity_term: phi'(0) vanishes on edge " + std::to_string(j + 1));
        const double psi = vertex_value(v, j);
        const double term = p.speeds[j] * p.speeds[j] * psi * psi * profile_second_derivative(p, j, 0.0) / d1;
        P += j == 0 ? term : -term;
    }
    return P;
}

// ---- perturbation of the zero eigenvalue at lambda0 = -pi/2 --------------

// eta = 4 a1' int_{-L}^0 (phi1')^3 sin(phi1) + 2 a1' int_0^L (phi2')^3 sin(-phi2)
inline double eta_integral(const StationaryProfile& p, const YJunction& g) {
    if (p.family != Family::KinkAntiKink || !at_critical_lambda(p))
        throw InvalidArgument("eta_integral: needs the anti-kink profile at lambda = -pi/2");
    using boost::math::quadrature::gauss_kronrod;
    const double L = g.truncation_length();
    auto f1 = [&](double x) {
        const double d = profile_derivative(p, 0, x);
        return d * d * d * std::sin(profile_value(p, 0, x));
    };
    auto f2 = [&](double x) {
        const double d = profile_derivative(p, 1, x);
        return d * d * d * std::sin(-profile_value(p, 1, x));
    };
    const double i1 = gauss_kronrod<double, 61>::integrate(f1, -L, 0.0, 15, 1e-14);
    const double i2 = gauss_kronrod<double, 61>::integrate(f2, 0.0, L, 15, 1e-14);
    const double da = shift_map_derivative(p);
    return 4.0 * da * i1 + 2.0 * da * i2;
}

// The kernel direction inside C1 at lambda0: (2 phi1', phi2', phi2').
inline GraphFunction antikink_c1_kernel(const StationaryProfile& p, const YJunction& g) {
    auto v = eval_derivative(p, g);
    for (double& x : v.edge[0]) x *= 2.0;
    return v;
}

// Predicted slope of the zero eigenvalue branch in C1: eta / |Phi'|^2.
inline double predicted_branch_slope(const StationaryProfile& p, const YJunction& g) {
    using boost::math::quadrature::gauss_kronrod;
    const double L = g.truncation_length();
    auto sq = [&](int j) {
        return gauss_kronrod<double, 61>::integrate(
            [&](double x) { const double d = profile_derivative(p, j, x); return d * d; },
            j == 0 ? -L : 0.0, j == 0 ? 0.0 : L, 15, 1e-14);
    };
    const double norm2 = 4.0 * sq(0) + 2.0 * sq(1);
    return eta_integral(p, g) / norm2;
}

// ---- branch tracking -----------------------------------------------------

// M-inner product of nodal functions on the full (unconstrained) P1 space.
inline double mass_inner_product(const GraphFunction& u, const GraphFunction& v, const YJunction& g) {
    const double h = g.h();
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
        const auto& a = u.edge[j];
        const auto& b = v.edge[j];
        for (std::size_t k = 0; k + 1 < a.size(); ++k)
            s += h / 6.0 * (2 * a[k] * b[k] + a[k] * b[k + 1] + a[k + 1] * b[k] + 2 * a[k + 1] * b[k + 1]);
    }
    return 0.5 * s;
}

struct BranchTrackOptions {
    SubspaceKind subspace = SubspaceKind::Full;
    double threshold = 0.9;
    double zero_tol = -1.0;        // negative: grid default
    double overlap_min = 0.9;
    double guard_band = 0.1;       // extra window above the threshold used only for matching
    unsigned max_threads = 0;      // 0: hardware concurrency
};

struct Branch {
    int id = 0;
    std::vector<std::optional<double>> mu;        // per lambda
    std::vector<std::optional<double>> residual;
    std::vector<int> index;                       // eigenpair index per lambda, -1 when absent
};

struct ZeroCrossing {
    int branch = 0;
    double lambda_left = 0, lambda_right = 0;  // last negative and first positive grid point
    double lambda_cross = 0;                   // linear interpolation
    double slope_left = 0, slope_right = 0;    // one-sided difference quotients
};

struct BranchTrack {
    std::vector<double> lambdas;
    std::vector<SpectrumReport> reports;
    std::vector<Branch> branches;
    std::vector<ZeroCrossing> crossings;
    double zero_tol = 0.0;
};

namespace detail {

struct TrackPoint {
    SpectrumReport report;
    std::vector<GraphFunction> modes;
};

inline TrackPoint track_point(Family family, double lambda, const YJunction& base, const BranchTrackOptions& opt) {
    const YJunction g = base.with_lambda(lambda);
    const auto p = solve_profile(family, lambda, g.speeds());
    auto op = linearized_operator(p, g);
    if (opt.subspace != SubspaceKind::Full) op = subspace_project(op, opt.subspace);
    EigenSolveOptions eo;
    eo.threshold = opt.threshold + opt.guard_band;
    eo.zero_tol = opt.zero_tol;
    TrackPoint t{eigen_solve(op, eo), {}};
    for (Eigen::Index i = 0; i < t.report.eigenvectors.cols(); ++i) t.modes.push_back(eigenfunction(t.report, op, i));
    return t;
}

// Drops eigenpairs at or above the threshold.
inline SpectrumReport truncate_report(SpectrumReport r, double threshold) {
    std::size_t k = 0;
    while (k < r.eigenvalues.size() && r.eigenvalues[k] < threshold) ++k;
    r.threshold = threshold;
    r.eigenvalues.resize(k);
    r.residuals.resize(k);
    r.eigenvectors = r.eigenvectors.leftCols(static_cast<Eigen::Index>(k)).eval();
    return r;
}

inline std::vector<std::vector<int>> clusters_of(const std::vector<double>& mu, double rel) {
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (i == 0 || mu[i] - mu[i - 1] > rel * std::max(1.0, std::abs(mu[i]))) out.emplace_back();
        out.back().push_back(static_cast<int>(i));
    }
    return out;
}

}  // namespace detail

// Eigenvalues below the threshold on an ascending lambda grid, joined into
// branches by eigenvector overlap. Overlaps are taken against whole clusters
// of (near) degenerate eigenvalues, so symmetric pairs are matched as a unit.
inline BranchTrack eigen_branch_track(Family family, const std::vector<double>& lambda_grid, const YJunction& base,
                                      const BranchTrackOptions& opt = {}) {
    if (lambda_grid.empty()) throw InvalidArgument("eigen_branch_track: empty lambda grid");
    for (std::size_t i = 1; i < lambda_grid.size(); ++i)
        if (!(lambda_grid[i] > lambda_grid[i - 1]))
            throw InvalidArgument("eigen_branch_track: lambda grid must be strictly ascending");

    const std::size_t n = lambda_grid.size();
    std::vector<detail::TrackPoint> pts(n);
    {
        unsigned width = opt.max_threads ? opt.max_threads : std::max(1u, std::thread::hardware_concurrency());
        for (std::size_t start = 0; start < n; start += width) {
            std::vector<std::future<detail::TrackPoint>> fut;
            for (std::size_t i = start; i < std::min(n, start + width); ++i)
                fut.push_back(std::async(std::launch::async, detail::track_point, family, lambda_grid[i],
                                         std::cref(base), std::cref(opt)));
            for (std::size_t i = 0; i < fut.size(); ++i) pts[start + i] = fut[i].get();
        }
    }

    BranchTrack out;
    out.lambdas = lambda_grid;
    out.zero_tol = pts.front().report.zero_tol;
    for (auto& p : pts) out.reports.push_back(detail::truncate_report(p.report, opt.threshold));

    auto new_branch = [&](std::size_t at, int idx) {
        Branch b;
        b.id = static_cast<int>(out.branches.size());
        b.mu.assign(n, std::nullopt);
        b.residual.assign(n, std::nullopt);
        b.index.assign(n, -1);
        b.mu[at] = pts[at].report.eigenvalues[static_cast<std::size_t>(idx)];
        b.residual[at] = pts[at].report.residuals[static_cast<std::size_t>(idx)];
        b.index[at] = idx;
        out.branches.push_back(std::move(b));
    };
    for (int i = 0; i < static_cast<int>(pts[0].report.eigenvalues.size()); ++i) new_branch(0, i);

    const YJunction& g = base;
    for (std::size_t s = 0; s + 1 < n; ++s) {
        const auto& A = pts[s];
        const auto& B = pts[s + 1];
        const auto cl = detail::clusters_of(B.report.eigenvalues, 1e-6);
        // Overlap of every live branch with every cluster of the next point.
        struct Cand { double score; std::size_t branch; std::size_t cluster; };
        std::vector<Cand> cand;
        std::vector<std::size_t> live;
        for (std::size_t b = 0; b < out.branches.size(); ++b)
            if (out.branches[b].index[s] >= 0) live.push_back(b);
        for (std::size_t b : live) {
            const auto& u = A.modes[static_cast<std::size_t>(out.branches[b].index[s])];
            const double uu = mass_inner_product(u, u, g);
            for (std::size_t c = 0; c < cl.size(); ++c) {
                double acc = 0.0;
                for (int k : cl[c]) {
                    const auto& v = B.modes[static_cast<std::size_t>(k)];
                    const double o = mass_inner_product(u, v, g);
                    acc += o * o / (uu * mass_inner_product(v, v, g));
                }
                cand.push_back({std::sqrt(acc), b, c});
            }
        }
        std::stable_sort(cand.begin(), cand.end(), [](const Cand& x, const Cand& y) { return x.score > y.score; });
        std::vector<std::size_t> used(cl.size(), 0);
        std::vector<bool> matched(out.branches.size(), false), taken(B.report.eigenvalues.size(), false);
        for (const auto& c : cand) {
            if (c.score < opt.overlap_min) break;
            if (matched[c.branch] || used[c.cluster] >= cl[c.cluster].size()) continue;
            const int k = cl[c.cluster][used[c.cluster]++];
            auto& br = out.branches[c.branch];
            br.index[s + 1] = k;
            br.mu[s + 1] = B.report.eigenvalues[static_cast<std::size_t>(k)];
            br.residual[s + 1] = B.report.residuals[static_cast<std::size_t>(k)];
            matched[c.branch] = true;
            taken[static_cast<std::size_t>(k)] = true;
        }
        for (std::size_t b : live)
            if (!matched[b]) {
                const double mu = *out.branches[b].mu[s];
                if (mu < opt.threshold)
                    throw BranchMatchingError("eigen_branch_track: branch " + std::to_string(b) + " at mu = " +
                                              std::to_string(mu) + " lost between lambda = " +
                                              std::to_string(lambda_grid[s]) + " and " +
                                              std::to_string(lambda_grid[s + 1]) + "; refine the lambda grid");
            }
        for (std::size_t k = 0; k < taken.size(); ++k)
            if (!taken[k]) new_branch(s + 1, static_cast<int>(k));
    }

    // Values in the guard band were only needed for matching.
    std::vector<Branch> kept;
    for (auto& b : out.branches) {
        bool any = false;
        for (std::size_t i = 0; i < n; ++i)
            if (b.mu[i] && *b.mu[i] >= opt.threshold) {
                b.mu[i].reset();
                b.residual[i].reset();
                b.index[i] = -1;
            } else if (b.mu[i]) {
                any = true;
            }
        if (any) {
            b.id = static_cast<int>(kept.size());
            kept.push_back(std::move(b));
        }
    }
    out.branches = std::move(kept);

    // Sign changes through zero, skipping grid points classified as zero.
    auto cls = [&](double mu) { return mu < -out.zero_tol ? -1 : (mu > out.zero_tol ? 1 : 0); };
    for (const auto& b : out.branches) {
        int last_sign = 0;
        std::size_t last_idx = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!b.mu[i]) { last_sign = 0; continue; }
            const int c = cls(*b.mu[i]);
            if (c == 0) continue;
            if (last_sign != 0 && c != last_sign) {
                ZeroCrossing z;
                z.branch = b.id;
                z.lambda_left = lambda_grid[last_idx];
                z.lambda_right = lambda_grid[i];
                const double ml = *b.mu[last_idx], mr = *b.mu[i];
                z.lambda_cross = z.lambda_left + (z.lambda_right - z.lambda_left) * (-ml) / (mr - ml);
                z.slope_left = (b.mu[last_idx + 1].value() - ml) / (lambda_grid[last_idx + 1] - z.lambda_left);
                z.slope_right = (mr - b.mu[i - 1].value()) / (z.lambda_right - lambda_grid[i - 1]);
                out.crossings.push_back(z);
            }
            last_sign = c;
            last_idx = i;
        }
    }
    return out;
}

}  // namespace graphwave
