#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphwave/evolution.hpp"
#include "graphwave/runner/config.hpp"
#include "graphwave/spectral/analysis.hpp"
#include "graphwave/spectral/eigensolver.hpp"
#include "graphwave/spectral/free_operator.hpp"

#ifndef GRAPHWAVE_VERSION
#define GRAPHWAVE_VERSION "0.0.0"
#endif

namespace graphwave {

struct Check {
    std::string name;
    bool passed = false;
    double measured = 0;
    double bound = 0;
    std::string relation;  // "<=", ">=", "==", "<", ">"

    bool operator==(const Check&) const = default;
};

inline Check check_le(std::string name, double measured, double bound) {
    return {std::move(name), measured <= bound, measured, bound, "<="};
}
inline Check check_ge(std::string name, double measured, double bound) {
    return {std::move(name), measured >= bound, measured, bound, ">="};
}
inline Check check_lt(std::string name, double measured, double bound) {
    return {std::move(name), measured < bound, measured, bound, "<"};
}
inline Check check_eq(std::string name, double measured, double expected) {
    return {std::move(name), measured == expected, measured, expected, "=="};
}

inline nlohmann::json to_json(const Check& c) {
    return {{"name", c.name}, {"passed", c.passed}, {"measured", c.measured}, {"bound", c.bound}, {"relation", c.relation}};
}

inline bool all_passed(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

struct RunManifest {
    ExperimentConfig config;
    std::string version = GRAPHWAVE_VERSION;
    double wall_time = 0;  // seconds
    std::vector<Check> checks;
    nlohmann::json results = nlohmann::json::object();
    std::vector<std::string> artifacts;

    bool passed() const { return all_passed(checks); }
};

// with_wall_time = false gives the reproducible part.
inline nlohmann::json to_json(const RunManifest& m, bool with_wall_time = true) {
    nlohmann::json j;
    j["config"] = to_json(m.config);
    j["artifact_version"] = m.version;
    if (with_wall_time) j["wall_time_s"] = m.wall_time;
    j["passed"] = m.passed();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : m.checks) j["checks"].push_back(to_json(c));
    j["results"] = m.results;
    j["artifacts"] = m.artifacts;
    return j;
}

// file name -> contents, written next to the manifest
using Artifacts = std::map<std::string, std::string>;

namespace detail {

inline SpectrumReport solve_spectrum(const LinearizedOperator& op, const ExperimentConfig& c) {
    EigenSolveOptions o;
    o.threshold = c.threshold;
    o.zero_tol = c.tol("zero_tol");
    return eigen_solve(op, o);
}

inline double max_of(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, x);
    return m;
}

inline void run_profile(const ExperimentConfig& c, RunManifest& m, Artifacts& out) {
    const auto g = c.junction(*c.lambda);
    const auto p = solve_profile(c.family, *c.lambda, c.speeds);
    const auto shape = classify_profile(p);
    m.results["profile"] = to_json(p);
    m.results["shape"] = to_string(shape);
    m.results["shift_residual"] = shift_residual(p);
    m.results["stationary_residual"] = stationary_residual(p, g);
    m.checks.push_back(check_le("shift_residual", std::abs(shift_residual(p)), c.tol("shift_residual")));
    if (shape == ProfileShape::Critical) {
        double a = 0;
        for (double s : p.shifts) a = std::max(a, std::abs(s));
        m.checks.push_back(check_le("critical_shift", a, c.tol("critical_shift")));
    }
    out["profile.json"] = to_json(p).dump(2) + "\n";
    std::ostringstream csv;
    write_csv(csv, eval_profile(p, g), g);
    out["profile.csv"] = csv.str();
}

inline void run_spectrum(const ExperimentConfig& c, RunManifest& m, Artifacts& out) {
    const auto g = c.junction(*c.lambda);
    const auto p = solve_profile(c.family, *c.lambda, c.speeds);
    auto op = linearized_operator(p, g);
    if (c.subspace != SubspaceKind::Full) op = subspace_project(op, c.subspace);
    const auto rep = solve_spectrum(op, c);
    m.results["spectrum"] = to_json(rep);
    m.results["morse_index"] = rep.morse_index;
    m.results["kernel_dim"] = rep.kernel_dim;
    m.checks.push_back(check_le("eigen_residual", max_of(rep.residuals), c.tol("eigen_residual")));
    if (c.expect_morse_index)
        m.checks.push_back(check_eq("morse_index", rep.morse_index, static_cast<double>(*c.expect_morse_index)));
    if (c.expect_kernel_dim)
        m.checks.push_back(check_eq("kernel_dim", rep.kernel_dim, static_cast<double>(*c.expect_kernel_dim)));
    if (c.subspace == SubspaceKind::Full && at_critical_lambda(p)) {
        const auto r = kernel_candidates_residual(p, g);
        const auto k = kernel_candidates(p, g);
        m.results["kernel_candidate_residuals"] = r;
        m.results["kernel_candidate_gram"] = gram_determinant(k[0], k[1], g);
        m.checks.push_back(check_le("kernel_candidate_residual", std::max(r[0], r[1]), c.tol("kernel_residual")));
    }
    out["spectrum.json"] = to_json(rep).dump(2) + "\n";
}

inline void run_sweep(const ExperimentConfig& c, RunManifest& m, Artifacts& out) {
    BranchTrackOptions o;
    o.subspace = c.subspace;
    o.threshold = c.threshold;
    o.zero_tol = c.tol("zero_tol");
    const auto g = c.junction(c.lambda_grid.front());
    const auto t = eigen_branch_track(c.family, c.lambda_grid, g, o);
    std::ostringstream csv;
    csv.precision(17);
    csv << "lambda,branch_id,mu,residual\n";
    for (std::size_t i = 0; i < t.lambdas.size(); ++i)
        for (const auto& b : t.branches)
            if (b.mu[i]) csv << t.lambdas[i] << ',' << b.id << ',' << *b.mu[i] << ',' << *b.residual[i] << '\n';
    out["branches.csv"] = csv.str();
    m.results["branch_count"] = t.branches.size();
    m.results["morse_index"] = nlohmann::json::array();
    for (const auto& r : t.reports) m.results["morse_index"].push_back(r.morse_index);
    m.results["crossings"] = nlohmann::json::array();
    for (const auto& z : t.crossings)
        m.results["crossings"].push_back({{"branch", z.branch},
                                          {"lambda_left", z.lambda_left},
                                          {"lambda_right", z.lambda_right},
                                          {"lambda_cross", z.lambda_cross},
                                          {"slope_left", z.slope_left},
                                          {"slope_right", z.slope_right}});
    // the C1 anti-kink branch through the critical point has a known slope
    const double l0 = critical_lambda(Family::KinkAntiKink);
    if (c.family == Family::KinkAntiKink && c.subspace == SubspaceKind::C1 && c.lambda_grid.front() < l0 &&
        l0 < c.lambda_grid.back()) {
        const auto p0 = solve_antikink_shift(l0);
        const double beta = predicted_branch_slope(p0, c.junction(l0));
        m.results["predicted_slope"] = beta;
        m.results["shift_map_derivative"] = shift_map_derivative(p0);
        m.checks.push_back(check_eq("crossing_count", static_cast<double>(t.crossings.size()), 1));
        for (const auto& z : t.crossings) {
            m.checks.push_back(check_le("slope_left", std::abs(z.slope_left / beta - 1), c.tol("branch_slope")));
            m.checks.push_back(check_le("slope_right", std::abs(z.slope_right / beta - 1), c.tol("branch_slope")));
        }
        m.checks.push_back(
            check_le("shift_map_derivative", std::abs(shift_map_derivative(p0) - 1.0 / 3.0), c.tol("shift_derivative")));
    }
}

inline void run_forms(const ExperimentConfig& c, RunManifest& m, Artifacts&) {
    std::vector<double> lambdas = c.lambda_grid;
    if (c.lambda) lambdas.insert(lambdas.begin(), *c.lambda);
    m.results["points"] = nlohmann::json::array();
    for (double lam : lambdas) {
        const auto g = c.junction(lam);
        const auto p = solve_profile(c.family, lam, c.speeds);
        const auto op = linearized_operator(p, g);
        nlohmann::json r{{"lambda", lam}};
        const std::string at = "@" + nlohmann::json(lam).dump();
        if (c.family == Family::Kink) {
            const double q = quadratic_form(eval_profile(p, g), op);
            r["Q_profile"] = q;
            m.checks.push_back(check_lt("Q_profile" + at, q, 0.0));
        } else {
            const double q1 = quadratic_form(antikink_lambda1(p, g), op);
            r["Q_lambda1"] = q1;
            if (at_critical_lambda(p)) {
                r["eta"] = eta_integral(p, g);
                r["predicted_slope"] = predicted_branch_slope(p, g);
                m.checks.push_back(
                    check_le("Q_lambda1" + at, std::abs(q1 + 8.0 / std::numbers::pi), c.tol("quadratic_form")));
            }
            if (lam < 0) {
                const double q2 = quadratic_form(antikink_lambda2(p, g), op);
                r["Q_lambda2"] = q2;
                m.checks.push_back(check_lt("Q_lambda2" + at, q2, 0.0));
            }
        }
        m.results["points"].push_back(r);
    }
}

inline void run_instability(const ExperimentConfig& c, RunManifest& m, Artifacts& out) {
    const auto g = c.junction(*c.lambda);
    const auto cond = VertexCondition::for_junction(g);
    const auto p = solve_profile(c.family, *c.lambda, c.speeds);
    const auto op = linearized_operator(p, g);
    const auto rep = solve_spectrum(op, c);
    m.results["morse_index"] = rep.morse_index;
    m.checks.push_back(check_ge("morse_index", rep.morse_index, 1));
    if (rep.morse_index < 1) return;
    if (rep.eigenvalues.empty()) throw InvalidArgument("threshold lies below the lowest eigenvalue; no mode to seed");
    const double mu = rep.eigenvalues[0];
    const double sigma = std::sqrt(-mu);
    m.results["mu"] = mu;
    m.results["sigma_predicted"] = sigma;
    const auto psi = eigenfunction(rep, op, 0);
    const auto base = discrete_equilibrium(p, g);
    const double sup = base.max_abs();
    std::vector<double> sig;
    double horizon = 0;
    m.results["fits"] = nlohmann::json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        const auto s = seed_perturbation(p, psi, mu, c.eps[i] * sup, g);
        const auto tr = evolve(s, base, g, cond, {.t_end = c.t_end, .stride = 10, .stop_deviation = 0.05 * sup});
        std::ostringstream csv;
        write_trajectory_csv(csv, tr);
        out["trajectory_" + std::to_string(i) + ".csv"] = csv.str();
        const auto fit = growing_mode_fit(tr);
        const double e0 = std::abs(tr.samples.front().energy_total);
        m.results["fits"].push_back({{"eps", c.eps[i]},
                                     {"sigma", fit.sigma},
                                     {"ratio", fit.sigma / sigma},
                                     {"r2", fit.r2},
                                     {"t_begin", fit.t_begin},
                                     {"t_end", fit.t_end},
                                     {"samples", fit.samples},
                                     {"boundary_flux", tr.boundary_flux}});
        const std::string at = "@eps=" + nlohmann::json(c.eps[i]).dump();
        m.checks.push_back(check_le("growth_ratio" + at, std::abs(fit.sigma / sigma - 1), c.tol("growth_ratio")));
        m.checks.push_back(check_ge("fit_r2" + at, fit.r2, c.tol("fit_r2")));
        m.checks.push_back(check_le("boundary_flux" + at, tr.boundary_flux / e0, c.tol("boundary_flux")));
        sig.push_back(fit.sigma);
        horizon = std::max(horizon, fit.t_end);
    }
    if (sig.size() > 1) {
        const auto [lo, hi] = std::minmax_element(sig.begin(), sig.end());
        m.checks.push_back(check_le("eps_consistency", (*hi - *lo) / *hi, c.tol("eps_consistency")));
    }
    // the unperturbed equilibrium over the same horizon
    const auto tr0 = evolve({base, GraphFunction::zeros(g), 0}, base, g, cond, {.t_end = horizon, .stride = 10});
    double dev = 0, drift = 0;
    const double e0 = tr0.samples.front().energy_total;
    for (const auto& s : tr0.samples) {
        dev = std::max(dev, s.deviation);
        drift = std::max(drift, std::abs(s.energy_total - e0) / std::abs(e0));
    }
    m.results["unperturbed_horizon"] = horizon;
    m.results["unperturbed_deviation"] = dev;
    m.results["unperturbed_energy_drift"] = drift;
    m.checks.push_back(check_le("stationary_deviation", dev, c.tol("stationary_deviation")));
    m.checks.push_back(check_le("energy_drift", drift, c.tol("energy_drift")));
}

// Smooth bumps on each edge, centred away from the vertex and the far end.
inline GraphFunction random_bumps(const YJunction& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> amp(-1, 1), ctr(1.5, 6.0), wid(0.4, 1.2);
    GraphFunction u = GraphFunction::zeros(g);
    for (int j = 0; j < 3; ++j) {
        const double a = amp(rng), m = ctr(rng), w = wid(rng);
        for (std::size_t k = 0; k < u.edge[j].size(); ++k) {
            const double s = (std::abs(g.x(j, k)) - m) / w;
            u.edge[j][k] = a * std::exp(-s * s);
        }
    }
    return u;
}

inline void run_resolvent(const ExperimentConfig& c, RunManifest& m, Artifacts&) {
    const double lam = *c.lambda;
    const auto g = c.junction(lam);
    const double window = lam < 0 ? c.tol("free_window") : c.tol("free_positive_window");
    const auto rep = eigen_solve(free_operator(g), -window);
    m.results["free_eigenvalues"] = rep.eigenvalues;
    if (lam < 0) {
        const auto e = analytic_free_eigenpair(g);
        m.results["analytic_eigenvalue"] = e->mu;
        m.checks.push_back(check_eq("free_eigenvalue_count", static_cast<double>(rep.eigenvalues.size()), 1));
        if (!rep.eigenvalues.empty())
            m.checks.push_back(check_le("free_eigenvalue", std::abs(rep.eigenvalues[0] - e->mu), c.tol("free_eigenvalue")));
    } else if (lam > 0) {
        m.checks.push_back(check_eq("free_eigenvalue_count", static_cast<double>(rep.eigenvalues.size()), 0));
    }
    if (c.trials == 0) return;
    std::mt19937_64 rng(static_cast<std::uint64_t>(c.seed));
    double worst = 0;
    m.results["identity_errors"] = nlohmann::json::array();
    for (std::int64_t t = 0; t < c.trials; ++t) {
        const auto u = random_bumps(g, rng);
        const auto r = free_resolvent_apply(u, c.eta, g);
        const double err = resolvent_identity_error(r.phi, u, c.eta, g);
        m.results["identity_errors"].push_back(err);
        worst = std::max(worst, err);
    }
    m.checks.push_back(check_le("resolvent_identity", worst, c.tol("resolvent_identity")));
}

}  // namespace detail

// Runs the configured experiment in memory. Library errors are rethrown with
// the experiment name prepended.
inline RunManifest execute(const ExperimentConfig& c, Artifacts& out) {
    validate(c);
    RunManifest m;
    m.config = c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        switch (c.experiment) {
            case Experiment::Profile: detail::run_profile(c, m, out); break;
            case Experiment::Spectrum: detail::run_spectrum(c, m, out); break;
            case Experiment::BranchSweep: detail::run_sweep(c, m, out); break;
            case Experiment::QuadraticForms: detail::run_forms(c, m, out); break;
            case Experiment::Instability: detail::run_instability(c, m, out); break;
            case Experiment::ResolventCheck: detail::run_resolvent(c, m, out); break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(std::string(to_string(c.experiment)) + ": " + e.what());
    }
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& [name, body] : out) m.artifacts.push_back(name);
    return m;
}

// Writes through a temporary sibling and renames, so readers never see a
// partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& body) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot write '" + tmp.string() + "'");
        os << body;
        if (!os.flush()) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

// execute() plus outputs: every artifact, config.toml and manifest.json.
inline RunManifest run(const ExperimentConfig& c) {
    Artifacts out;
    auto m = execute(c, out);
    const auto dir = resolve_output_dir(c);
    std::filesystem::create_directories(dir);
    for (const auto& [name, body] : out) write_file_atomic(dir / name, body);
    write_file_atomic(dir / "config.toml", to_toml(c));
    write_file_atomic(dir / "manifest.json", to_json(m).dump(2) + "\n");
    return m;
}

}  // namespace graphwave
