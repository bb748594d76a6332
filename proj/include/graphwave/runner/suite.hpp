#pragma once

#include <functional>
#include <future>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "graphwave/runner/run.hpp"

namespace graphwave {

struct SuiteRow {
    std::string key;
    int criterion = 0;
    std::string title;
    std::vector<Check> checks;
    nlohmann::json details = nlohmann::json::object();
    std::string error;  // non-empty when the row threw

    bool passed() const { return error.empty() && !checks.empty() && all_passed(checks); }
};

struct SuiteReport {
    std::string name;
    std::vector<SuiteRow> rows;

    bool passed() const {
        return std::all_of(rows.begin(), rows.end(), [](const SuiteRow& r) { return r.passed(); });
    }
};

namespace detail {

using std::numbers::pi;

struct RowSpec {
    std::string key;
    int criterion;
    std::string title;
    std::function<void(SuiteRow&)> body;
};

inline RowSpec experiment_row(std::string key, int criterion, std::string title, ExperimentConfig c) {
    return {std::move(key), criterion, std::move(title), [c](SuiteRow& r) {
                Artifacts a;
                auto m = execute(c, a);
                r.checks = m.checks;
                r.details = m.results;
            }};
}

inline std::string num(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

// Richardson order from three values on grids h, h/2, h/4.
inline double observed_order(double a, double b, double c) { return std::log2(std::abs(a - b) / std::abs(b - c)); }

inline std::vector<RowSpec> paper_tables(const ExperimentConfig& base) {
    std::vector<RowSpec> rows;
    auto cfg = [&](Experiment e, Family f, double lam) {
        ExperimentConfig c = base;
        c.experiment = e;
        c.family = f;
        c.lambda = lam;
        c.lambda_grid.clear();
        c.subspace = SubspaceKind::Full;
        c.speeds = {1, 1, 1};
        c.expect_morse_index.reset();
        c.expect_kernel_dim.reset();
        return c;
    };
    const double k0 = critical_lambda(Family::Kink), a0 = critical_lambda(Family::KinkAntiKink);

    // free operator
    {
        auto c = cfg(Experiment::ResolventCheck, Family::Kink, -3);
        c.trials = 0;
        rows.push_back(experiment_row("free_operator.unit_speeds", 1, "free operator, lambda=-3, c=(1,1,1)", c));
        c.lambda = -6;
        c.speeds = {1, 2, 3};
        // decay is slowest on the fastest edge
        c.truncation_length = 3 * base.truncation_length;
        c.points_per_edge = 3 * (base.points_per_edge - 1) + 1;
        rows.push_back(experiment_row("free_operator.mixed_speeds", 1, "free operator, lambda=-6, c=(1,2,3)", c));
        c = cfg(Experiment::ResolventCheck, Family::Kink, 2);
        c.trials = 0;
        rows.push_back(experiment_row("free_operator.positive_lambda", 1, "free operator, lambda=2: no eigenvalue", c));
    }

    // kink shift map
    rows.push_back(experiment_row("kink_shift.critical", 2, "kink shifts vanish at lambda=-3pi/2",
                                  cfg(Experiment::Profile, Family::Kink, k0)));
    rows.push_back({"kink_shift.regimes", 2, "sign of a2 on a 20-point grid", [k0](SuiteRow& r) {
                        int bad = 0;
                        r.details["points"] = nlohmann::json::array();
                        for (int i = 0; i < 20; ++i) {
                            const double lam = -10.0 + i * (10.0 - 3.05) / 19;
                            const double a2 = solve_kink_shifts(lam, {1, 1, 1}).shifts[1];
                            const bool ok = lam < k0 ? a2 > 0 : a2 < 0;
                            bad += !ok;
                            r.details["points"].push_back({{"lambda", lam}, {"a2", a2}});
                        }
                        r.checks.push_back(check_eq("regime_mismatches", bad, 0));
                    }});

    // kink spectra
    for (double lam : {-3.2, -4.0, -4.5}) {
        auto c = cfg(Experiment::Spectrum, Family::Kink, lam);
        c.expect_morse_index = 1;
        c.expect_kernel_dim = 0;
        rows.push_back(experiment_row("kink_spectrum.tail@" + num(lam), 3, "kink full space, tail profile", c));
    }
    {
        auto c = cfg(Experiment::Spectrum, Family::Kink, k0);
        c.expect_kernel_dim = 2;
        rows.push_back(experiment_row("kink_spectrum.critical", 3, "kink full space at lambda=-3pi/2", c));
    }
    for (double lam : {k0, -5.0, -8.0}) {
        auto c = cfg(Experiment::Spectrum, Family::Kink, lam);
        c.subspace = SubspaceKind::C2;
        c.expect_morse_index = 1;
        c.expect_kernel_dim = 0;
        rows.push_back(experiment_row("kink_spectrum.c2@" + num(lam), 4, "kink in C2", c));
    }

    // anti-kink spectra
    for (double lam : {a0, -1.0, 0.0, 1.0, 5.0}) {
        auto c = cfg(Experiment::Spectrum, Family::KinkAntiKink, lam);
        c.expect_morse_index = 1;
        c.expect_kernel_dim = lam == a0 ? 2 : 0;
        rows.push_back(experiment_row("antikink_spectrum.full@" + num(lam), 5, "anti-kink full space", c));
    }
    for (double lam : {-1.8, -2.5}) {
        auto c = cfg(Experiment::Spectrum, Family::KinkAntiKink, lam);
        c.subspace = SubspaceKind::C1;
        c.expect_morse_index = 2;
        rows.push_back(experiment_row("antikink_spectrum.c1@" + num(lam), 5, "anti-kink in C1", c));
    }

    // quadratic forms
    {
        auto c = cfg(Experiment::QuadraticForms, Family::KinkAntiKink, a0);
        c.lambda_grid = {-1.2, -0.8, -0.3};
        rows.push_back(experiment_row("forms.antikink", 6, "anti-kink forms Q(phi'), Q(0,phi2',phi3')", c));
        c = cfg(Experiment::QuadraticForms, Family::Kink, -5.0);
        c.lambda.reset();
        c.lambda_grid = {-5.0, -4.0};
        rows.push_back(experiment_row("forms.kink", 6, "kink form <L Psi, Psi>", c));
    }

    // C1 branch through the critical anti-kink
    {
        auto c = cfg(Experiment::BranchSweep, Family::KinkAntiKink, a0);
        c.lambda.reset();
        c.subspace = SubspaceKind::C1;
        for (int i = -4; i <= 4; ++i) c.lambda_grid.push_back(a0 + 0.05 * i);
        rows.push_back(experiment_row("antikink_branch.c1", 7, "C1 branch slope at lambda=-pi/2", c));
    }

    // growing modes
    rows.push_back(experiment_row("instability.kink@-4", 8, "kink growth rate", cfg(Experiment::Instability, Family::Kink, -4)));
    rows.push_back(experiment_row("instability.antikink@1", 8, "anti-kink growth rate",
                                  cfg(Experiment::Instability, Family::KinkAntiKink, 1)));

    // conservation and convergence
    const double L = base.truncation_length;
    const std::int64_t N = base.points_per_edge;
    const auto tol = base.tolerances;
    rows.push_back({"properties.energy", 9, "energy drift over t <= 20", [L, N, tol](SuiteRow& r) {
                        auto drift_of = [](const Trajectory& tr) {
                            const double e0 = tr.samples.front().energy_total;
                            double d = 0;
                            for (const auto& s : tr.samples) d = std::max(d, std::abs(s.energy_total - e0) / std::abs(e0));
                            return d;
                        };
                        for (auto [f, lam] : {std::pair{Family::Kink, -4.0}, std::pair{Family::KinkAntiKink, 1.0}}) {
                            YJunction g({1, 1, 1}, lam, L, static_cast<std::size_t>(N));
                            const auto p = solve_profile(f, lam, g.speeds());
                            const auto cond = VertexCondition::for_junction(g);
                            const auto u0 = discrete_equilibrium(p, g);
                            auto tr = evolve({u0, GraphFunction::zeros(g), 0}, u0, g, cond, {.t_end = 20, .stride = 100});
                            const std::string name = std::string("drift.") + to_string(f) + "@" + num(lam);
                            r.details[name] = drift_of(tr);
                            r.checks.push_back(check_le(name, drift_of(tr), tol.at("energy_drift")));
                            if (f == Family::KinkAntiKink) {
                                // stable profile kicked along its lowest mode
                                const auto op = linearized_operator(p, g);
                                const auto rep = eigen_solve(op, 0.9);
                                EvolutionState s{u0 + 0.05 * eigenfunction(rep, op, 0), GraphFunction::zeros(g), 0};
                                VertexSolver(g, cond).enforce(s.u);
                                tr = evolve(s, u0, g, cond, {.t_end = 20, .stride = 100});
                                r.details["drift.perturbed"] = drift_of(tr);
                                r.checks.push_back(check_le("drift.perturbed", drift_of(tr), tol.at("energy_drift")));
                            }
                        }
                    }});
    rows.push_back({"properties.convergence", 9, "observed order on an h, h/2, h/4 ladder", [L, N, tol, a0](SuiteRow& r) {
                        std::array<std::size_t, 3> n{};
                        for (int i = 0; i < 3; ++i) n[i] = static_cast<std::size_t>((N - 1) / (4 >> i) + 1);
                        r.details["points_per_edge"] = n;
                        auto order_check = [&](const std::string& name, double p) {
                            r.details[name] = p;
                            r.checks.push_back(check_ge(name + ".min", p, tol.at("convergence_order_min")));
                            r.checks.push_back(check_le(name + ".max", p, tol.at("convergence_order_max")));
                        };
                        for (auto [f, lam] : {std::pair{Family::Kink, -4.0}, std::pair{Family::KinkAntiKink, -1.0}}) {
                            std::array<double, 3> mu{};
                            for (int i = 0; i < 3; ++i) {
                                YJunction g({1, 1, 1}, lam, L, n[i]);
                                mu[i] = eigen_solve(linearized_operator(solve_profile(f, lam, g.speeds()), g), 0.9).eigenvalues.at(0);
                            }
                            order_check(std::string("order.mu0.") + to_string(f), observed_order(mu[0], mu[1], mu[2]));
                        }
                        const auto p = solve_antikink_shift(a0);
                        std::array<double, 3> res{};
                        for (int i = 0; i < 3; ++i) res[i] = kernel_candidates_residual(p, YJunction({1, 1, 1}, a0, L, n[i]))[0];
                        order_check("order.kernel_residual.coarse", std::log2(res[0] / res[1]));
                        order_check("order.kernel_residual.fine", std::log2(res[1] / res[2]));
                    }});
    rows.push_back({"properties.truncation", 9, "spectra below 0.5 under L -> 2L", [L, N, tol](SuiteRow& r) {
                        for (auto [f, lam] : {std::pair{Family::Kink, -4.0}, std::pair{Family::KinkAntiKink, -1.0}}) {
                            const auto p = solve_profile(f, lam, {1, 1, 1});
                            const auto s1 = eigen_solve(linearized_operator(p, YJunction({1, 1, 1}, lam, L, N)), 0.5);
                            const auto s2 = eigen_solve(
                                linearized_operator(p, YJunction({1, 1, 1}, lam, 2 * L, 2 * (N - 1) + 1)), 0.5);
                            const std::string name = std::string(to_string(f)) + "@" + num(lam);
                            r.checks.push_back(check_eq("count." + name, static_cast<double>(s2.eigenvalues.size()),
                                                        static_cast<double>(s1.eigenvalues.size())));
                            double d = 0;
                            for (std::size_t i = 0; i < std::min(s1.eigenvalues.size(), s2.eigenvalues.size()); ++i)
                                d = std::max(d, std::abs(s1.eigenvalues[i] - s2.eigenvalues[i]));
                            r.details[name] = {{"L", s1.eigenvalues}, {"2L", s2.eigenvalues}};
                            r.checks.push_back(check_le("shift." + name, d, tol.at("truncation_stability")));
                        }
                    }});

    // resolvent
    for (auto [lam, eta] : {std::pair{1.0, 1.0}, std::pair{-3.0, 2.0}}) {
        auto c = cfg(Experiment::ResolventCheck, Family::Kink, lam);
        c.eta = eta;
        rows.push_back(experiment_row("resolvent@" + num(lam) + "," + num(eta), 10, "resolvent identity on random bumps", c));
    }
    return rows;
}

}  // namespace detail

// Known suites: "paper-tables", the full acceptance matrix on the grid,
// tolerances and seeds of `base`. Rows run concurrently; a failing row is
// recorded and the rest still run.
inline SuiteReport suite(const std::string& name, const ExperimentConfig& base = {}, unsigned max_threads = 0) {
    if (name.empty()) throw UsageError("suite: empty suite name (known: paper-tables)");
    if (name != "paper-tables") throw UsageError("suite: unknown suite '" + name + "' (known: paper-tables)");
    const auto specs = detail::paper_tables(base);
    SuiteReport rep{name, {}};
    rep.rows.resize(specs.size());
    const std::size_t width = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t i0 = 0; i0 < specs.size(); i0 += width) {
        std::vector<std::future<void>> jobs;
        for (std::size_t i = i0; i < std::min(specs.size(), i0 + width); ++i)
            jobs.push_back(std::async(std::launch::async, [&, i] {
                auto& row = rep.rows[i];
                row.key = specs[i].key;
                row.criterion = specs[i].criterion;
                row.title = specs[i].title;
                try {
                    specs[i].body(row);
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
            }));
        for (auto& j : jobs) j.get();
    }
    return rep;
}

inline nlohmann::json to_json(const SuiteRow& r) {
    nlohmann::json j{{"key", r.key}, {"criterion", r.criterion}, {"title", r.title}, {"passed", r.passed()}};
    j["checks"] = nlohmann::json::array();
    for (const auto& c : r.checks) j["checks"].push_back(to_json(c));
    j["details"] = r.details;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

inline nlohmann::json to_json(const SuiteReport& s) {
    nlohmann::json j{{"suite", s.name}, {"artifact_version", GRAPHWAVE_VERSION}, {"passed", s.passed()}};
    j["rows"] = nlohmann::json::object();
    for (const auto& r : s.rows) j["rows"][r.key] = to_json(r);
    return j;
}

inline std::string to_markdown(const SuiteReport& s) {
    std::ostringstream os;
    os << "# " << s.name << ": " << (s.passed() ? "PASS" : "FAIL") << "\n\n";
    os << "| # | row | result | measured vs bound |\n|---|---|---|---|\n";
    for (const auto& r : s.rows) {
        os << "| " << r.criterion << " | `" << r.key << "` | " << (r.passed() ? "pass" : "**FAIL**") << " | ";
        if (!r.error.empty()) os << "error: " << r.error;
        // failing checks, or the first one when everything passed
        std::vector<const Check*> shown;
        for (const auto& c : r.checks)
            if (!c.passed) shown.push_back(&c);
        if (shown.empty() && !r.checks.empty()) shown.push_back(&r.checks.front());
        for (std::size_t i = 0; i < shown.size(); ++i)
            os << (i ? "; " : "") << shown[i]->name << " " << shown[i]->measured << " " << shown[i]->relation << " "
               << shown[i]->bound;
        os << " |\n";
    }
    return os.str();
}

}  // namespace graphwave
