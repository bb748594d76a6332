// graphwave profile|spectrum|sweep|forms|evolve|suite --config <path> [--set key=value ...]
//
// exit status: 0 every check passed, 1 a check failed or a computation
// raised, 2 usage error (bad flags, bad config, unknown suite).

#include <filesystem>
#include <iostream>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graphwave/graphwave.hpp"

namespace gw = graphwave;

namespace {

constexpr int kPass = 0, kCheckFailed = 1, kUsage = 2;

struct Common {
    std::string config;
    std::vector<std::string> sets;
    // shortcuts, applied before --set
    std::optional<std::string> family, subspace;
    std::optional<double> lambda, threshold, L;
    std::optional<long long> N;

    std::vector<std::string> overrides() const {
        std::vector<std::string> o;
        auto str = [](const std::string& s) { return "'" + s + "'"; };
        auto real = [](double x) {
            std::ostringstream os;
            os.precision(17);
            os << x;
            auto s = os.str();
            if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
            return s;
        };
        if (family) o.push_back("family=" + str(*family));
        if (subspace) o.push_back("subspace=" + str(*subspace));
        if (lambda) o.push_back("lambda=" + real(*lambda));
        if (threshold) o.push_back("threshold=" + real(*threshold));
        if (L) o.push_back("truncation_length=" + real(*L));
        if (N) o.push_back("points_per_edge=" + std::to_string(*N));
        o.insert(o.end(), sets.begin(), sets.end());
        return o;
    }
    std::optional<std::filesystem::path> path() const {
        if (config.empty()) return std::nullopt;
        return std::filesystem::path(config);
    }
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "TOML (or .json) experiment config")->check(CLI::ExistingFile);
    sub->add_option("--set", c.sets, "override a config field, e.g. --set tolerances.zero_tol=1e-5");
    sub->add_option("--family", c.family, "Kink | KinkAntiKink");
    sub->add_option("--lambda", c.lambda, "vertex parameter");
    sub->add_option("--subspace", c.subspace, "Full | C1 | C2");
    sub->add_option("--threshold", c.threshold, "upper end of the spectral window");
    sub->add_option("--L", c.L, "truncation length");
    sub->add_option("--N", c.N, "points per edge");
}

void print_checks(const std::vector<gw::Check>& checks) {
    for (const auto& c : checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.measured << ' ' << c.relation << ' ' << c.bound
                  << '\n';
}

int run_experiment(const Common& c, gw::Experiment kind, const std::optional<std::string>& csv) {
    auto cfg = gw::load_config(c.path(), c.overrides(), kind);
    const bool compatible =
        cfg.experiment == kind || (kind == gw::Experiment::Spectrum && cfg.experiment == gw::Experiment::ResolventCheck);
    if (!compatible)
        throw gw::UsageError(std::string("config experiment '") + gw::to_string(cfg.experiment) +
                             "' does not match this subcommand");
    const auto m = gw::run(cfg);
    if (cfg.experiment == gw::Experiment::Profile) {
        std::cout << m.results["profile"].dump(2) << '\n';
        if (csv) {
            const auto g = cfg.junction(*cfg.lambda);
            std::ofstream os(*csv);
            gw::write_csv(os, gw::eval_profile(gw::solve_profile(cfg.family, *cfg.lambda, cfg.speeds), g), g);
        }
    }
    print_checks(m.checks);
    std::cout << "manifest: " << (gw::resolve_output_dir(cfg) / "manifest.json").string() << '\n';
    return m.passed() ? kPass : kCheckFailed;
}

int run_suite(const Common& c, const std::string& name, unsigned threads) {
    auto base = gw::load_config(c.path(), c.overrides());
    const auto rep = gw::suite(name, base, threads);
    const auto dir = gw::resolve_output_dir(base);
    std::filesystem::create_directories(dir);
    const auto md = gw::to_markdown(rep);
    gw::write_file_atomic(dir / "suite.json", gw::to_json(rep).dump(2) + "\n");
    gw::write_file_atomic(dir / "suite.md", md);
    std::cout << md << "summary: " << (dir / "suite.json").string() << '\n';
    return rep.passed() ? kPass : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sine-Gordon stationary states on a Y-junction with delta' vertex conditions"};
    app.set_version_flag("--version", GRAPHWAVE_VERSION);
    app.require_subcommand(1);

    Common common;
    std::optional<std::string> csv;
    std::string suite_name;
    unsigned threads = 0;

    struct Sub {
        const char* name;
        const char* help;
        gw::Experiment kind;
    };
    const Sub subs[] = {
        {"profile", "stationary profile record and sampled CSV", gw::Experiment::Profile},
        {"spectrum", "eigenvalues, Morse index and kernel of the linearized operator", gw::Experiment::Spectrum},
        {"sweep", "eigenvalue branches over lambda_grid", gw::Experiment::BranchSweep},
        {"forms", "quadratic form values on test directions", gw::Experiment::QuadraticForms},
        {"evolve", "growing-mode fit by time evolution", gw::Experiment::Instability},
    };
    std::vector<std::pair<CLI::App*, gw::Experiment>> commands;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, common);
        if (s.kind == gw::Experiment::Profile) sub->add_option("--csv", csv, "also write the sampled profile here");
        commands.emplace_back(sub, s.kind);
    }
    auto* suite = app.add_subcommand("suite", "run a named experiment suite");
    add_common(suite, common);
    suite->add_option("name", suite_name, "suite name (paper-tables)")->required();
    suite->add_option("--threads", threads, "concurrent rows (0: all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }

    try {
        if (suite->parsed()) return run_suite(common, suite_name, threads);
        for (auto [sub, kind] : commands)
            if (sub->parsed()) return run_experiment(common, kind, csv);
    } catch (const gw::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const gw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kCheckFailed;
    }
    return kUsage;
}
