#include "heavysgd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "heavysgd/errors.hpp"
#include "heavysgd/io.hpp"

namespace heavysgd {

namespace {

using json = nlohmann::ordered_json;
using io::format_double;

json vec_json(const Vector& v) {
    json out = json::array();
    for (double x : v) out.push_back(x);
    return out;
}

json ks_json(const stats::KsResult& r) {
    return {{"statistic", r.statistic}, {"threshold", r.threshold}, {"p_value", r.p_value}, {"pass", r.pass}};
}

}  // namespace

std::string run_id(const ExperimentConfig& config) {
    return io::sha256_hex(config_to_json(config).dump()).substr(0, 16);
}

std::string traces_to_csv(std::span<const SgdTrace> traces, double alpha, const Vector& x_star) {
    std::string out = traces_csv_header;
    out += '\n';
    const double expo = 1.0 - 1.0 / alpha;
    for (std::size_t r = 0; r < traces.size(); ++r) {
        const auto& tr = traces[r];
        if (tr.censored) continue;
        const std::string rep = std::to_string(r);
        for (std::size_t i = 0; i < tr.checkpoints.size(); ++i) {
            const auto t = tr.checkpoints[i];
            const std::string ts = std::to_string(t);
            const double scale = std::pow(static_cast<double>(t), expo);
            const std::string err = format_double(tr.err[i]);
            const std::string err_bar = format_double(tr.err_bar[i]);
            for (Eigen::Index k = 0; k < tr.iterates[i].size(); ++k) {
                const double xb = tr.pr_averages[i](k);
                out += rep;
                out += ',';
                out += ts;
                out += ',';
                out += std::to_string(k);
                out += ',';
                out += format_double(tr.iterates[i](k));
                out += ',';
                out += format_double(xb);
                out += ',';
                out += err;
                out += ',';
                out += err_bar;
                out += ',';
                out += format_double(scale * (xb - x_star(k)));
                out += '\n';
            }
        }
    }
    return out;
}

std::vector<SgdTrace> traces_from_csv(const std::string& text, std::size_t replications, const json& censored) {
    const auto rows = io::parse_csv(text);
    if (rows.empty() || rows.front().size() != 8) throw ValidationError("traces.csv: bad header");
    std::vector<SgdTrace> traces(replications);
    for (std::size_t r = 0; r < replications; ++r) traces[r].stream_id = r;
    for (const auto& c : censored) {
        const auto r = c.at("replication").get<std::size_t>();
        if (r >= replications) throw ValidationError("manifest: censored replication out of range");
        traces[r].censored = true;
        traces[r].diverged_at = c.at("diverged_at").get<std::uint64_t>();
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        if (f.size() != 8) throw ValidationError("traces.csv: row " + std::to_string(i) + " has the wrong width");
        const auto r = std::stoull(f[0]);
        const auto t = std::stoull(f[1]);
        const auto k = static_cast<Eigen::Index>(std::stoll(f[2]));
        if (r >= replications || traces[r].censored) throw ValidationError("traces.csv: unexpected replication");
        auto& tr = traces[r];
        if (tr.checkpoints.empty() || tr.checkpoints.back() != t) {
            if (k != 0) throw ValidationError("traces.csv: coordinates out of order");
            tr.checkpoints.push_back(t);
            tr.iterates.emplace_back();
            tr.pr_averages.emplace_back();
            tr.err.push_back(io::parse_double(f[5]));
            tr.err_bar.push_back(io::parse_double(f[6]));
        }
        auto& x = tr.iterates.back();
        auto& xb = tr.pr_averages.back();
        if (x.size() != k) throw ValidationError("traces.csv: coordinates out of order");
        x.conservativeResize(k + 1);
        xb.conservativeResize(k + 1);
        x(k) = io::parse_double(f[3]);
        xb(k) = io::parse_double(f[4]);
    }
    return traces;
}

json moment_curve_json(const MomentCurve& c) {
    json j;
    j["p"] = c.p;
    j["replications"] = c.replications;
    j["censored"] = c.censored;
    j["heavy"] = c.heavy;
    j["error_tail_index"] = c.error_tail_index ? json(*c.error_tail_index) : json(nullptr);
    j["times"] = c.times;
    j["values"] = c.values;
    j["std_errors"] = c.std_errors;
    j["band_low"] = c.band_low;
    j["band_high"] = c.band_high;
    return j;
}

json rate_fit_json(const RateFit& f) {
    return {{"slope", f.slope},
            {"intercept", f.intercept},
            {"r_squared", f.r_squared},
            {"burn_in", f.burn_in},
            {"points", f.points},
            {"theory_slope", f.theory_slope},
            {"abs_gap", f.abs_gap}};
}

json stable_report_json(const StableLimitReport& r) {
    json j;
    j["alpha"] = r.alpha;
    j["t_final"] = r.t_final;
    j["replications"] = r.replications;
    j["censored"] = r.censored;
    j["verdict"] = r.verdict;
    j["hill_in_window"] = r.hill_in_window;
    j["self_similarity_passes"] = r.self_similarity_passes;
    j["reference_passes"] = r.reference_passes;
    j["degenerate"] = r.degenerate;
    json dirs = json::array();
    for (const auto& d : r.directions) {
        json e;
        e["direction"] = vec_json(d.direction);
        e["samples"] = d.samples;
        e["verdict"] = d.verdict;
        e["location"] = d.location;
        e["scale"] = d.scale;
        e["hill"] = d.hill ? json(*d.hill) : json(nullptr);
        e["hill_in_window"] = d.hill_in_window;
        if (d.self_similarity) {
            const auto& s = *d.self_similarity;
            e["self_similarity"] = {{"statistic", s.statistic}, {"threshold", s.threshold},
                                    {"p_value", s.p_value},     {"pass", s.pass},
                                    {"sums", s.sums},           {"singles", s.singles}};
        }
        if (d.reference_ks) e["reference_ks"] = ks_json(*d.reference_ks);
        if (d.normality_ks) e["normality_ks"] = ks_json(*d.normality_ks);
        dirs.push_back(std::move(e));
    }
    j["directions"] = std::move(dirs);
    return j;
}

json ppd_report_json(const PpdReport& r) {
    return {{"p", r.p},
            {"margin", r.margin},
            {"member_pd", r.member_pd},
            {"member_psd", r.member_psd},
            {"determined", r.determined},
            {"tolerance", r.tolerance},
            {"grid_tolerance", r.grid_tolerance},
            {"method", r.method},
            {"evaluations", r.evaluations},
            {"witness", vec_json(r.witness)}};
}

AnalysisOutput analyze_traces(const ExperimentConfig& config, const Experiment& experiment,
                              std::span<const SgdTrace> traces) {
    AnalysisOutput out;
    json& j = out.json;
    j["schema_version"] = schema_version;
    j["tail_index"] = experiment.tail_index;
    j["x_star"] = vec_json(experiment.x_star);
    j["replications"] = traces.size();
    const auto censored =
        static_cast<std::size_t>(std::count_if(traces.begin(), traces.end(), [](const auto& t) { return t.censored; }));
    j["censored"] = censored;

    const bool noiseless = config.noise.law == "zero" && config.noise.m_rule == "none";
    json curves = json::array();
    for (double p : config.analysis.moment_orders) {
        json entry;
        try {
            const MomentCurve curve = moment_curve(traces, p, experiment.x_star);
            entry = moment_curve_json(curve);
            const double theory = heavy_tail_rate_exponent(config.schedule.rho, p, experiment.tail_index);
            entry["theory_slope"] = noiseless ? json(nullptr) : json(theory);
            std::optional<RateFit> fit;
            try {
                fit = fit_rate(curve, config.analysis.burn_in, theory);
                entry["fit"] = rate_fit_json(*fit);
            } catch (const std::exception& e) {
                entry["fit"] = nullptr;
                entry["fit_error"] = e.what();
            }
            std::string csv = curve_csv_header;
            csv += '\n';
            // Theory line anchored to the fitted value at the first fitted checkpoint.
            std::optional<std::pair<double, double>> anchor;
            if (fit)
                for (auto t : curve.times)
                    if (t >= config.analysis.burn_in) {
                        anchor = {static_cast<double>(t), fit->predict(static_cast<double>(t))};
                        break;
                    }
            for (std::size_t i = 0; i < curve.times.size(); ++i) {
                const double t = static_cast<double>(curve.times[i]);
                const double fv = fit ? fit->predict(t) : std::nan("");
                const double tv = (anchor && !noiseless) ? anchor->second * std::pow(t / anchor->first, theory)
                                                         : std::nan("");
                csv += std::to_string(curve.times[i]) + ',' + format_double(curve.values[i]) + ',' +
                       format_double(curve.band_low[i]) + ',' + format_double(curve.band_high[i]) + ',' +
                       format_double(fv) + ',' + format_double(tv) + '\n';
            }
            const std::string name = "curve_p" + format_double(p) + ".csv";
            entry["csv"] = name;
            out.csv_files[name] = std::move(csv);
        } catch (const std::exception& e) {
            entry["p"] = p;
            entry["error"] = e.what();
        }
        curves.push_back(std::move(entry));
    }
    j["moment_curves"] = std::move(curves);

    const std::uint64_t t_final = config.analysis.t_final == 0 ? config.run.horizon : config.analysis.t_final;
    const std::size_t kept = traces.size() - censored;
    if (kept < config.analysis.stable_min_replications) {
        j["stable_limit"] = {{"skipped", "only " + std::to_string(kept) + " uncensored replications (need " +
                                             std::to_string(config.analysis.stable_min_replications) + ")"}};
    } else {
        StableLimitOptions opt;
        opt.level = config.analysis.level;
        opt.hill_window = config.analysis.hill_window;
        opt.min_replications = config.analysis.stable_min_replications;
        auto dirs = config.analysis.directions;
        for (auto& d : dirs) d.normalize();
        if (dirs.empty()) dirs = default_directions(experiment.x_star.size());
        try {
            // t_final must be a checkpoint; the plan always contains the horizon.
            j["stable_limit"] = stable_report_json(
                stable_limit_diagnostic(traces, experiment.tail_index, experiment.x_star, dirs, t_final, opt));
        } catch (const std::exception& e) {
            j["stable_limit"] = {{"error", e.what()}};
        }
    }

    // Pooled |m|^2 / (1 + |x|^2) spot check.
    std::uint64_t count = 0;
    double sum = 0.0, sumsq_se = 0.0;
    for (const auto& t : traces) {
        if (t.censored || t.m_check.count == 0) continue;
        const double c = static_cast<double>(t.m_check.count);
        count += t.m_check.count;
        sum += c * t.m_check.mean;
        sumsq_se += c * c * t.m_check.stderr_ * t.m_check.stderr_;
    }
    if (count > 0) {
        const double mean = sum / static_cast<double>(count);
        const double se = std::sqrt(sumsq_se) / static_cast<double>(count);
        json mc = {{"count", count}, {"mean", mean}, {"stderr", se}};
        if (experiment.declared_k) {
            mc["declared_k"] = *experiment.declared_k;
            mc["within_bound"] = mean <= *experiment.declared_k + 3.0 * se;
        }
        j["m_spot_check"] = std::move(mc);
    } else {
        j["m_spot_check"] = {{"skipped", "oracle does not expose its noise decomposition during runs"}};
    }
    return out;
}

RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_root, unsigned threads) {
    const Experiment experiment = build_experiment(config);
    const auto resolved = config_to_json(config);
    RunResult res;
    const std::string id = run_id(config);
    res.dir = out_root / id;

    const RngStream base(config.run.seed, 0);
    res.traces = replicate(experiment.spec, config.run.replications, base, std::max(1u, threads));
    json censored = json::array();
    for (std::size_t r = 0; r < res.traces.size(); ++r) {
        if (!res.traces[r].censored) continue;
        ++res.censored;
        censored.push_back({{"replication", r}, {"diverged_at", res.traces[r].diverged_at}});
    }
    res.exit_code = 2 * res.censored > res.traces.size() ? 3 : 0;

    io::write_file_atomic(res.dir / "traces.csv", traces_to_csv(res.traces, experiment.tail_index, experiment.x_star));
    AnalysisOutput analysis = analyze_traces(config, experiment, res.traces);
    for (const auto& [name, body] : analysis.csv_files) io::write_file_atomic(res.dir / name, body);
    io::write_file_atomic(res.dir / "analysis.json", analysis.json.dump(2) + "\n");
    res.analysis = std::move(analysis.json);

    const auto cond = gclt_exponent_condition(experiment.tail_index, config.schedule.rho, experiment.tail_index);
    json m;
    m["schema_version"] = schema_version;
    m["csv_schema_version"] = schema_version;
    m["tool"] = "heavysgd";
    m["run_id"] = id;
    m["config"] = resolved;
    m["warnings"] = config_warnings(config);
    m["gclt_condition"] = {{"alpha", experiment.tail_index},
                           {"rho", config.schedule.rho},
                           {"lower", cond.lower},
                           {"upper", cond.upper},
                           {"feasible", gclt_exponent_feasible(experiment.tail_index, config.schedule.rho)}};
    m["declared_k"] = experiment.declared_k ? json(*experiment.declared_k) : json(nullptr);
    m["model"] = experiment.model_info;
    m["x_star"] = vec_json(experiment.x_star);
    m["replications"] = res.traces.size();
    m["censored"] = std::move(censored);
    m["files"] = {"traces.csv", "analysis.json"};
    for (const auto& [name, body] : analysis.csv_files) m["files"].push_back(name);
    io::write_file_atomic(res.dir / "manifest.json", m.dump(2) + "\n");
    res.manifest = std::move(m);
    return res;
}

LoadedRun load_run(const std::filesystem::path& dir) {
    LoadedRun run;
    const std::string manifest_text = io::read_file(dir / "manifest.json");
    try {
        run.manifest = json::parse(manifest_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("manifest.json: ") + e.what());
    }
    if (run.manifest.value("schema_version", 0) != schema_version)
        throw ValidationError("manifest.json: unsupported schema_version");
    run.config = parse_config(manifest_text);
    run.traces = traces_from_csv(io::read_file(dir / "traces.csv"), run.manifest.at("replications").get<std::size_t>(),
                                 run.manifest.at("censored"));
    return run;
}

}  // namespace heavysgd
