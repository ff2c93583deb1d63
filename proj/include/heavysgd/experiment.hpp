#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "heavysgd/analysis.hpp"
#include "heavysgd/config.hpp"
#include "heavysgd/ppd.hpp"

namespace heavysgd {

inline constexpr int schema_version = 1;
inline constexpr const char* output_root_env = "HEAVYSGD_OUT";

/// Header of traces.csv; one row per (replication, checkpoint, coordinate).
inline constexpr const char* traces_csv_header = "replication,t,coord,x,x_bar,err,err_bar,scaled_err_bar";
/// Header of the per-moment-order analysis CSVs.
inline constexpr const char* curve_csv_header = "t,value,stderr_low,stderr_high,fit_value,theory_value";

/// 16 hex digits of SHA-256 over the canonical resolved config (which includes the seed).
std::string run_id(const ExperimentConfig& config);

std::string traces_to_csv(std::span<const SgdTrace> traces, double alpha, const Vector& x_star);
/// Inverse of traces_to_csv for the uncensored rows; `replications` fixes the
/// trace count and censored entries come from the manifest.
std::vector<SgdTrace> traces_from_csv(const std::string& text, std::size_t replications,
                                      const nlohmann::ordered_json& censored);

nlohmann::ordered_json moment_curve_json(const MomentCurve& curve);
nlohmann::ordered_json rate_fit_json(const RateFit& fit);
nlohmann::ordered_json stable_report_json(const StableLimitReport& report);
nlohmann::ordered_json ppd_report_json(const PpdReport& report);

struct AnalysisOutput {
    nlohmann::ordered_json json;
    std::map<std::string, std::string> csv_files;  // file name -> contents
};

AnalysisOutput analyze_traces(const ExperimentConfig& config, const Experiment& experiment,
                              std::span<const SgdTrace> traces);

struct RunResult {
    std::filesystem::path dir;
    std::vector<SgdTrace> traces;
    nlohmann::ordered_json manifest;
    nlohmann::ordered_json analysis;
    std::size_t censored = 0;
    int exit_code = 0;  // 0, or 3 when more than half the replications diverged
};

/// Runs replications, writes manifest.json, traces.csv, analysis.json and the
/// curve CSVs into <out_root>/<run_id>. Every file is written atomically and
/// the manifest last, so a directory without a manifest is incomplete.
RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_root, unsigned threads);

/// Reads manifest.json and traces.csv from a run directory.
struct LoadedRun {
    ExperimentConfig config;
    nlohmann::ordered_json manifest;
    std::vector<SgdTrace> traces;
};
LoadedRun load_run(const std::filesystem::path& dir);

}  // namespace heavysgd
