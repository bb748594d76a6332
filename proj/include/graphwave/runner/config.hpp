#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "graphwave/error.hpp"
#include "graphwave/metric_graph.hpp"
#include "graphwave/profiles.hpp"
#include "graphwave/spectral/operator.hpp"

namespace graphwave {

// Bad command line or suite name.
class UsageError : public Error {
public:
    using Error::Error;
};

enum class Experiment { Profile, Spectrum, BranchSweep, QuadraticForms, Instability, ResolventCheck };

inline const char* to_string(Experiment e) {
    switch (e) {
        case Experiment::Profile: return "Profile";
        case Experiment::Spectrum: return "Spectrum";
        case Experiment::BranchSweep: return "BranchSweep";
        case Experiment::QuadraticForms: return "QuadraticForms";
        case Experiment::Instability: return "Instability";
        default: return "ResolventCheck";
    }
}

struct ToleranceDefault {
    const char* name;
    double value;
    const char* doc;
};

// Every check threshold the runner uses, with its default.
inline constexpr ToleranceDefault kToleranceDefaults[] = {
    {"shift_residual", 1e-12, "max |shift map residual| of a profile"},
    {"critical_shift", 1e-12, "max |a_j| of a profile at its critical lambda"},
    {"eigen_residual", 1e-8, "max |A psi - mu M psi| / |M psi| over reported eigenpairs"},
    {"zero_tol", 1e-4, "|mu| at or below this counts toward the kernel"},
    {"kernel_residual", 1e-3, "max |A x| / |M x| of the analytic kernel directions"},
    {"quadratic_form", 1e-3, "|Q(phi') + 8/pi| for the critical anti-kink"},
    {"shift_derivative", 1e-8, "|a1'(lambda0) - 1/3| for the anti-kink"},
    {"branch_slope", 0.1, "relative error of one-sided crossing slopes against eta/|phi'|^2"},
    {"growth_ratio", 0.05, "|sigma_measured / sqrt(-mu) - 1|"},
    {"fit_r2", 0.999, "minimum r^2 of the log-linear growth fit"},
    {"eps_consistency", 0.01, "relative spread of sigma across seed amplitudes"},
    {"stationary_deviation", 1e-4, "max L2 distance of the unperturbed run from equilibrium"},
    {"energy_drift", 1e-5, "max relative energy drift"},
    {"boundary_flux", 1e-6, "energy flux through the far field, relative to |E|"},
    {"free_window", 1e-3, "free operator eigenvalues are counted below -free_window (lambda < 0)"},
    {"free_positive_window", 1e-6, "free operator eigenvalues are counted below -free_positive_window (lambda > 0)"},
    {"free_eigenvalue", 1e-3, "|mu + 1| for the free operator"},
    {"resolvent_identity", 1e-6, "relative |(H + eta^2) R u - u|"},
    {"convergence_order_min", 1.8, "lower bound on measured convergence order"},
    {"convergence_order_max", 2.2, "upper bound on measured convergence order"},
    {"truncation_stability", 1e-4, "max eigenvalue change under L -> 2L"},
};

inline std::map<std::string, double> default_tolerances() {
    std::map<std::string, double> m;
    for (const auto& t : kToleranceDefaults) m[t.name] = t.value;
    return m;
}

struct ExperimentConfig {
    Experiment experiment = Experiment::Spectrum;
    Family family = Family::Kink;
    std::optional<double> lambda;
    std::vector<double> lambda_grid;
    Speeds speeds{1.0, 1.0, 1.0};
    double truncation_length = 40.0;
    std::int64_t points_per_edge = 4001;
    SubspaceKind subspace = SubspaceKind::Full;
    double threshold = 0.9;                  // upper end of the spectral window
    double eta = 1.0;                        // resolvent parameter
    std::vector<double> eps{1e-5, 1e-4};     // seed sizes relative to max|base|
    double t_end = 40.0;
    std::int64_t trials = 10;
    std::int64_t seed = 2024;
    std::optional<std::int64_t> expect_morse_index;
    std::optional<std::int64_t> expect_kernel_dim;
    std::map<std::string, double> tolerances = default_tolerances();
    std::string output_dir = "graphwave-out";

    bool operator==(const ExperimentConfig&) const = default;

    double tol(const std::string& name) const {
        auto it = tolerances.find(name);
        if (it == tolerances.end()) throw ConfigError("tolerances." + name, "unknown tolerance");
        return it->second;
    }
    YJunction junction(double lam) const {
        return YJunction(speeds, lam, truncation_length, static_cast<std::size_t>(points_per_edge));
    }
};

namespace detail {

template <class E>
E parse_enum(const nlohmann::json& v, const char* field, std::initializer_list<std::pair<const char*, E>> names) {
    if (!v.is_string()) throw ConfigError(field, "expected a string");
    const auto s = v.get<std::string>();
    for (auto [n, e] : names)
        if (s == n) return e;
    std::string allowed;
    for (auto [n, e] : names) allowed += std::string(allowed.empty() ? "" : "|") + n;
    throw ConfigError(field, "unknown value '" + s + "' (expected " + allowed + ")");
}

inline double as_real(const nlohmann::json& v, const std::string& field) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(field, "must be finite");
    return x;
}

inline std::int64_t as_int(const nlohmann::json& v, const std::string& field) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (x == std::floor(x) && std::abs(x) < 9e15) return static_cast<std::int64_t>(x);
    }
    throw ConfigError(field, "expected an integer");
}

inline std::vector<double> as_reals(const nlohmann::json& v, const std::string& field) {
    if (!v.is_array()) throw ConfigError(field, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_real(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

inline nlohmann::json toml_to_json(const toml::node& n) {
    if (auto t = n.as_table()) {
        nlohmann::json j = nlohmann::json::object();
        for (auto&& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (auto a = n.as_array()) {
        nlohmann::json j = nlohmann::json::array();
        for (auto&& v : *a) j.push_back(toml_to_json(v));
        return j;
    }
    if (auto v = n.as_integer()) return v->get();
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_boolean()) return v->get();
    if (auto v = n.as_string()) return v->get();
    throw ConfigError("<document>", "dates and times are not supported");
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("<document>", "expected a table");
    ExperimentConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        if (k == "experiment") {
            c.experiment = detail::parse_enum<Experiment>(
                v, "experiment",
                {{"Profile", Experiment::Profile}, {"Spectrum", Experiment::Spectrum},
                 {"BranchSweep", Experiment::BranchSweep}, {"QuadraticForms", Experiment::QuadraticForms},
                 {"Instability", Experiment::Instability}, {"ResolventCheck", Experiment::ResolventCheck}});
        } else if (k == "family") {
            c.family = detail::parse_enum<Family>(v, "family", {{"Kink", Family::Kink}, {"KinkAntiKink", Family::KinkAntiKink}});
        } else if (k == "subspace") {
            c.subspace = detail::parse_enum<SubspaceKind>(
                v, "subspace", {{"Full", SubspaceKind::Full}, {"C1", SubspaceKind::C1}, {"C2", SubspaceKind::C2}});
        } else if (k == "lambda") {
            c.lambda = detail::as_real(v, k);
        } else if (k == "lambda_grid") {
            c.lambda_grid = detail::as_reals(v, k);
        } else if (k == "speeds") {
            auto s = detail::as_reals(v, k);
            if (s.size() != 3) throw ConfigError(k, "expected three speeds");
            c.speeds = {s[0], s[1], s[2]};
        } else if (k == "truncation_length") {
            c.truncation_length = detail::as_real(v, k);
        } else if (k == "points_per_edge") {
            c.points_per_edge = detail::as_int(v, k);
        } else if (k == "threshold") {
            c.threshold = detail::as_real(v, k);
        } else if (k == "eta") {
            c.eta = detail::as_real(v, k);
        } else if (k == "eps") {
            c.eps = detail::as_reals(v, k);
        } else if (k == "t_end") {
            c.t_end = detail::as_real(v, k);
        } else if (k == "trials") {
            c.trials = detail::as_int(v, k);
        } else if (k == "seed") {
            c.seed = detail::as_int(v, k);
        } else if (k == "expect_morse_index") {
            c.expect_morse_index = detail::as_int(v, k);
        } else if (k == "expect_kernel_dim") {
            c.expect_kernel_dim = detail::as_int(v, k);
        } else if (k == "output_dir") {
            if (!v.is_string()) throw ConfigError(k, "expected a string");
            c.output_dir = v.get<std::string>();
        } else if (k == "tolerances") {
            if (!v.is_object()) throw ConfigError(k, "expected a table");
            for (auto t = v.begin(); t != v.end(); ++t) {
                const std::string field = "tolerances." + t.key();
                if (!c.tolerances.contains(t.key())) throw ConfigError(field, "unknown tolerance");
                c.tolerances[t.key()] = detail::as_real(t.value(), field);
            }
        } else {
            throw ConfigError(k, "unknown field");
        }
    }
    return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["experiment"] = to_string(c.experiment);
    j["family"] = to_string(c.family);
    if (c.lambda) j["lambda"] = *c.lambda;
    if (!c.lambda_grid.empty()) j["lambda_grid"] = c.lambda_grid;
    j["speeds"] = c.speeds;
    j["truncation_length"] = c.truncation_length;
    j["points_per_edge"] = c.points_per_edge;
    j["subspace"] = to_string(c.subspace);
    j["threshold"] = c.threshold;
    j["eta"] = c.eta;
    j["eps"] = c.eps;
    j["t_end"] = c.t_end;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    if (c.expect_morse_index) j["expect_morse_index"] = *c.expect_morse_index;
    if (c.expect_kernel_dim) j["expect_kernel_dim"] = *c.expect_kernel_dim;
    j["output_dir"] = c.output_dir;
    j["tolerances"] = c.tolerances;
    return j;
}

// Grid, speeds and tolerances; enough for a suite base.
inline void validate_common(const ExperimentConfig& c) {
    for (int i = 0; i < 3; ++i)
        if (!(c.speeds[i] > 0)) throw ConfigError("speeds", "speeds must be positive");
    if (c.family == Family::KinkAntiKink && c.speeds != Speeds{1.0, 1.0, 1.0})
        throw ConfigError("speeds", "the anti-kink family needs unit speeds");
    if (!(c.truncation_length > 0)) throw ConfigError("truncation_length", "must be positive");
    if (c.points_per_edge < 16) throw ConfigError("points_per_edge", "must be at least 16");
    if (!(c.eta > 0)) throw ConfigError("eta", "must be positive");
    if (!(c.t_end > 0)) throw ConfigError("t_end", "must be positive");
    if (c.trials < 0) throw ConfigError("trials", "must be non-negative");
    for (double e : c.eps)
        if (!(e > 0)) throw ConfigError("eps", "seed sizes must be positive");
    for (std::size_t i = 1; i < c.lambda_grid.size(); ++i)
        if (!(c.lambda_grid[i] > c.lambda_grid[i - 1])) throw ConfigError("lambda_grid", "must be strictly ascending");
    for (const auto& [k, v] : c.tolerances)
        if (!(v >= 0)) throw ConfigError("tolerances." + k, "must be non-negative");
}

inline void validate(const ExperimentConfig& c) {
    validate_common(c);
    switch (c.experiment) {
        case Experiment::BranchSweep:
            if (c.lambda_grid.size() < 2) throw ConfigError("lambda_grid", "a sweep needs at least two points");
            break;
        case Experiment::QuadraticForms:
            if (!c.lambda && c.lambda_grid.empty()) throw ConfigError("lambda", "set lambda or lambda_grid");
            break;
        default:
            if (!c.lambda) throw ConfigError("lambda", "required for " + std::string(to_string(c.experiment)));
    }
    if (c.family == Family::Kink) {
        const double top = -speed_sum(c.speeds);
        auto check = [&](double l, const char* f) {
            if (!(l < top)) {
                std::ostringstream m;
                m << "kink profiles exist only for lambda < " << top;
                throw ConfigError(f, m.str());
            }
        };
        if (c.lambda && c.experiment != Experiment::ResolventCheck) check(*c.lambda, "lambda");
        for (double l : c.lambda_grid) check(l, "lambda_grid");
    }
}

// Sets a dotted key ("tolerances.zero_tol") in a JSON tree. The value is read
// as a TOML value and falls back to a bare string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
    nlohmann::json v;
    try {
        auto t = toml::parse("v = " + value);
        v = detail::toml_to_json(*t.get("v"));
    } catch (const toml::parse_error&) {
        v = value;
    }
    nlohmann::json* cur = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw UsageError("--set: malformed key '" + key + "'");
        if (dot == std::string::npos) {
            (*cur)[part] = v;
            break;
        }
        if (!cur->contains(part)) (*cur)[part] = nlohmann::json::object();
        cur = &(*cur)[part];
        start = dot + 1;
    }
}

inline nlohmann::json read_config_tree(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    if (path.extension() == ".json") {
        try {
            return nlohmann::json::parse(ss.str());
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("<document>", std::string("JSON parse error: ") + e.what());
        }
    }
    try {
        return detail::toml_to_json(toml::parse(ss.str(), path.string()));
    } catch (const toml::parse_error& e) {
        std::ostringstream m;
        m << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError("<document>", m.str());
    }
}

inline ExperimentConfig parse_config_toml(std::string_view text) {
    try {
        return config_from_json(detail::toml_to_json(toml::parse(text)));
    } catch (const toml::parse_error& e) {
        throw ConfigError("<document>", std::string("TOML parse error: ") + std::string(e.description()));
    }
}

inline std::string to_toml(const ExperimentConfig& c) {
    auto arr = [](const auto& v) {
        toml::array a;
        for (auto x : v) a.push_back(x);
        return a;
    };
    toml::table t;
    t.insert("experiment", to_string(c.experiment));
    t.insert("family", to_string(c.family));
    if (c.lambda) t.insert("lambda", *c.lambda);
    if (!c.lambda_grid.empty()) t.insert("lambda_grid", arr(c.lambda_grid));
    t.insert("speeds", arr(c.speeds));
    t.insert("truncation_length", c.truncation_length);
    t.insert("points_per_edge", c.points_per_edge);
    t.insert("subspace", to_string(c.subspace));
    t.insert("threshold", c.threshold);
    t.insert("eta", c.eta);
    t.insert("eps", arr(c.eps));
    t.insert("t_end", c.t_end);
    t.insert("trials", c.trials);
    t.insert("seed", c.seed);
    if (c.expect_morse_index) t.insert("expect_morse_index", *c.expect_morse_index);
    if (c.expect_kernel_dim) t.insert("expect_kernel_dim", *c.expect_kernel_dim);
    t.insert("output_dir", c.output_dir);
    toml::table tol;
    for (const auto& [k, v] : c.tolerances) tol.insert(k, v);
    t.insert("tolerances", std::move(tol));
    std::ostringstream os;
    os << t;
    return os.str();
}

// File (TOML, or JSON by extension) plus --set overrides. Without a default
// experiment only the common fields are validated (suite bases).
inline ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                                    const std::vector<std::string>& overrides = {},
                                    std::optional<Experiment> default_experiment = std::nullopt) {
    nlohmann::json tree = path ? read_config_tree(*path) : nlohmann::json::object();
    if (default_experiment && !tree.contains("experiment")) tree["experiment"] = to_string(*default_experiment);
    for (const auto& o : overrides) apply_override(tree, o);
    auto c = config_from_json(tree);
    if (default_experiment)
        validate(c);
    else
        validate_common(c);
    return c;
}

// GRAPHWAVE_OUT wins over the configured directory.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c) {
    if (const char* env = std::getenv("GRAPHWAVE_OUT"); env && *env) return env;
    return c.output_dir;
}

}  // namespace graphwave
