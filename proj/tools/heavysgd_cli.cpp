// heavysgd: run, analyze and verify heavy-tailed SGD experiments.

#include <yaml-cpp/yaml.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "heavysgd/errors.hpp"
#include "heavysgd/experiment.hpp"
#include "heavysgd/io.hpp"
#include "heavysgd/lemmas.hpp"
#include "heavysgd/ppd.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace heavysgd;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_validation = 2;

void report_error(const std::string& kind, const std::string& message, int code) {
    json e = {{"error", {{"type", kind}, {"message", message}}}, {"exit_code", code}};
    std::cerr << e.dump() << std::endl;
}

void report_warning(const std::string& message) {
    std::cerr << json{{"warning", message}}.dump() << std::endl;
}

fs::path output_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(output_root_env); env != nullptr && *env != '\0') return env;
    return "runs";
}

unsigned default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> parse_p_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(io::parse_double(item));
    }
    if (out.empty()) throw ValidationError("empty p list");
    return out;
}

SymMatrix load_matrix(const fs::path& path) {
    YAML::Node node;
    try {
        node = YAML::Load(io::read_file(path));
    } catch (const YAML::Exception& e) {
        throw ValidationError(std::string("matrix parse error: ") + e.what());
    }
    if (node.IsMap() && node["matrix"]) node = node["matrix"];
    if (!node.IsSequence() || node.size() == 0) throw ValidationError("matrix must be a non-empty list of rows");
    std::vector<std::vector<double>> rows;
    for (const auto& r : node) {
        if (!r.IsSequence()) throw ValidationError("matrix rows must be lists");
        std::vector<double> row;
        for (const auto& v : r) {
            try {
                row.push_back(v.as<double>());
            } catch (const YAML::Exception&) {
                throw ValidationError("matrix entries must be numbers");
            }
        }
        rows.push_back(std::move(row));
    }
    for (const auto& r : rows)
        if (r.size() != rows.size()) throw ValidationError("matrix must be square");
    try {
        return SymMatrix::from_rows(rows);
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError(e.what());
    }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, unsigned threads,
            const std::string& out) {
    ExperimentConfig config = load_config(config_path);
    if (seed) config.run.seed = *seed;
    validate(config);
    for (const auto& w : config_warnings(config)) report_warning(w);
    const RunResult res = run_experiment(config, output_root(out), threads);
    std::cout << res.dir.string() << std::endl;
    if (res.exit_code != 0) {
        report_error("divergence",
                     std::to_string(res.censored) + " of " + std::to_string(res.traces.size()) +
                         " replications diverged",
                     res.exit_code);
    }
    return res.exit_code;
}

int cmd_check_ppd(const std::string& matrix_path, const std::string& p_text, const std::string& json_path,
                  std::size_t resolution) {
    const SymMatrix q = load_matrix(matrix_path);
    const auto ps = parse_p_list(p_text);
    for (double p : ps)
        if (!(p >= 1.0 && p <= 2.0)) throw ValidationError("p values must lie in [1, 2]");
    const auto cls = classify_cones(q, ps, resolution);

    json out;
    out["schema_version"] = schema_version;
    out["matrix"] = q.rows();
    json rows = json::array();
    std::cout << std::left << std::setw(10) << "cone" << std::setw(8) << "PD" << std::setw(8) << "PSD"
              << std::setw(22) << "margin" << "method" << '\n';
    for (const auto& row : cls.rows) {
        const bool requested = std::any_of(ps.begin(), ps.end(), [&](double p) { return p == row.report.p; });
        if (!requested) continue;
        const auto& r = row.report;
        std::cout << std::setw(10) << row.cone << std::setw(8) << (r.member_pd ? "yes" : "no") << std::setw(8)
                  << (r.member_psd ? "yes" : "no") << std::setw(22) << io::format_double(r.margin) << r.method
                  << (r.determined ? "" : " (undetermined)") << '\n';
        json e = ppd_report_json(r);
        e["cone"] = row.cone;
        if (row.reference) {
            e["reference"] = {{"name", row.reference_name}, {"value", *row.reference}, {"agrees", row.reference_agrees}};
        }
        rows.push_back(std::move(e));
    }
    out["rows"] = std::move(rows);
    out["ordering_violations"] = cls.violations;
    if (!cls.violations.empty())
        for (const auto& v : cls.violations) report_warning("cone ordering: " + v);
    if (json_path.empty()) {
        std::cout << out.dump(2) << std::endl;
    } else {
        io::write_file_atomic(json_path, out.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_verify_lemmas(const std::string& budget_name, std::uint64_t seed, const std::string& json_path) {
    const Budget budget = budget_from_string(budget_name);
    const LemmaSuite suite = run_lemma_suite(budget, seed);
    json out;
    out["schema_version"] = schema_version;
    out["budget"] = to_string(budget);
    out["rows"] = json::array();
    for (const auto& r : suite.rows) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << std::left << std::setw(18) << r.name << r.summary << '\n';
        out["rows"].push_back({{"name", r.name}, {"pass", r.pass}, {"summary", r.summary}, {"detail", r.detail}});
    }
    out["all_pass"] = suite.all_pass();
    if (!json_path.empty()) io::write_file_atomic(json_path, out.dump(2) + "\n");
    return suite.all_pass() ? exit_ok : exit_failure;
}

int cmd_fit_rate(const std::string& dir, const std::string& p_text, std::optional<std::uint64_t> burn_in) {
    LoadedRun run = load_run(dir);
    if (!p_text.empty()) run.config.analysis.moment_orders = parse_p_list(p_text);
    if (burn_in) run.config.analysis.burn_in = *burn_in;
    validate(run.config);
    const Experiment experiment = build_experiment(run.config);
    const AnalysisOutput analysis = analyze_traces(run.config, experiment, run.traces);
    for (const auto& [name, body] : analysis.csv_files) io::write_file_atomic(fs::path(dir) / name, body);
    json summary = json::array();
    for (const auto& c : analysis.json["moment_curves"]) {
        json s = {{"p", c["p"]}};
        if (c.contains("fit")) s["fit"] = c["fit"];
        if (c.contains("fit_error")) s["fit_error"] = c["fit_error"];
        if (c.contains("error")) s["error"] = c["error"];
        summary.push_back(std::move(s));
    }
    io::write_file_atomic(fs::path(dir) / "analysis.json", analysis.json.dump(2) + "\n");
    std::cout << summary.dump(2) << std::endl;
    return exit_ok;
}

int cmd_stable_test(const std::string& dir, std::optional<double> alpha, std::optional<std::uint64_t> t_final) {
    const LoadedRun run = load_run(dir);
    const Experiment experiment = build_experiment(run.config);
    StableLimitOptions opt;
    opt.level = run.config.analysis.level;
    opt.hill_window = run.config.analysis.hill_window;
    opt.min_replications = run.config.analysis.stable_min_replications;
    auto dirs = run.config.analysis.directions;
    for (auto& d : dirs) d.normalize();
    if (dirs.empty()) dirs = default_directions(experiment.x_star.size());
    const std::uint64_t tf = t_final ? *t_final
                                     : (run.config.analysis.t_final ? run.config.analysis.t_final : run.config.run.horizon);
    const auto rep = stable_limit_diagnostic(run.traces, alpha.value_or(experiment.tail_index), experiment.x_star,
                                             dirs, tf, opt);
    json out = stable_report_json(rep);
    io::write_file_atomic(fs::path(dir) / "stable_test.json", out.dump(2) + "\n");
    std::cout << out.dump(2) << std::endl;
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heavy-tailed SGD experiments: simulation, rate fits, stable-limit diagnostics"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    unsigned threads = default_threads();
    std::string out;
    std::string budget = "default";

    auto* run = app.add_subcommand("run", "Run an experiment config (YAML, or a manifest.json to reproduce a run)");
    std::string config_path;
    run->add_option("config", config_path, "config or manifest path")->required();
    run->add_option("--seed", seed, "override run.seed");
    run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out, std::string("output root (default $") + output_root_env + " or ./runs)");

    auto* ppd = app.add_subcommand("check-ppd", "Classify a symmetric matrix into the p-PD cones");
    std::string matrix_path, p_text = "1,1.5,2", json_path;
    std::size_t resolution = default_sphere_resolution;
    ppd->add_option("matrix", matrix_path, "YAML/JSON list of rows")->required();
    ppd->add_option("--p", p_text, "comma separated p values in [1, 2]");
    ppd->add_option("--json", json_path, "write the JSON report here instead of standard output");
    ppd->add_option("--resolution", resolution, "sphere search resolution")->check(CLI::PositiveNumber);

    auto* lemmas = app.add_subcommand("verify-lemmas", "Run the inequality and recursion oracle suite");
    lemmas->add_option("--budget", budget, "quick, default or full")
        ->check(CLI::IsMember({"quick", "default", "full"}));
    lemmas->add_option("--seed", seed, "random seed for the Monte-Carlo oracles");
    std::string lemma_json;
    lemmas->add_option("--json", lemma_json, "also write the JSON table here");

    auto* fit = app.add_subcommand("fit-rate", "Re-analyze an existing run directory");
    std::string fit_dir, fit_p;
    std::optional<std::uint64_t> burn_in;
    fit->add_option("run_dir", fit_dir)->required()->check(CLI::ExistingDirectory);
    fit->add_option("--p", fit_p, "comma separated moment orders");
    fit->add_option("--burn-in", burn_in, "first checkpoint used by the fit");

    auto* stable = app.add_subcommand("stable-test", "Stable-limit diagnostics on an existing run directory");
    std::string stable_dir;
    std::optional<double> alpha;
    std::optional<std::uint64_t> t_final;
    stable->add_option("run_dir", stable_dir)->required()->check(CLI::ExistingDirectory);
    stable->add_option("--alpha", alpha, "tail index of the limit (default: the noise tail index)");
    stable->add_option("--t-final", t_final, "checkpoint to test (default: the horizon)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        report_error("usage", e.what(), exit_validation);
        return exit_validation;
    }

    try {
        if (*run) return cmd_run(config_path, seed, threads, out);
        if (*ppd) return cmd_check_ppd(matrix_path, p_text, json_path, resolution);
        if (*lemmas) return cmd_verify_lemmas(budget, seed.value_or(1), lemma_json);
        if (*fit) return cmd_fit_rate(fit_dir, fit_p, burn_in);
        if (*stable) return cmd_stable_test(stable_dir, alpha, t_final);
    } catch (const ValidationError& e) {
        report_error("validation", e.what(), exit_validation);
        return exit_validation;
    } catch (const DomainError& e) {
        report_error("validation", e.what(), exit_validation);
        return exit_validation;
    } catch (const ConvergenceError& e) {
        report_error("convergence", e.what(), exit_failure);
        return exit_failure;
    } catch (const InsufficientDataError& e) {
        report_error("insufficient-data", e.what(), exit_failure);
        return exit_failure;
    } catch (const EstimationError& e) {
        report_error("estimation", e.what(), exit_failure);
        return exit_failure;
    } catch (const std::exception& e) {
        report_error("runtime", e.what(), exit_failure);
        return exit_failure;
    }
    return exit_failure;
}
