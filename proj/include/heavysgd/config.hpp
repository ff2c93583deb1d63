#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "heavysgd/linalg.hpp"
#include "heavysgd/models.hpp"
#include "heavysgd/sgd.hpp"

namespace YAML {
class Node;
}

namespace heavysgd {

struct ModelConfig {
    std::string kind = "quadratic";  // quadratic | ols | glm
    // quadratic: grad f(x) = A (x - x_star)
    Matrix a = Matrix::Identity(2, 2);
    Vector x_star = (Vector(2) << 1.0, -1.0).finished();
    // ols / glm: y = z^T beta0 + eps, z = cov_chol * N(0, I)
    Vector beta0 = (Vector(2) << 1.0, -1.0).finished();
    Matrix cov_chol = Matrix::Identity(2, 2);
    // glm
    Cgf cgf = Cgf::logistic;
    double lambda = 0.1;
    std::uint64_t panel_size = 100000;
    std::uint64_t panel_seed = 0x5eed;
    double optimum_tol = 1e-8;
};

/// For quadratic models the law is the i.i.d. per-coordinate gradient noise;
/// for ols/glm it is the response noise eps.
struct NoiseConfig {
    std::string law = "pareto";  // zero | gaussian | stable | pareto
    double alpha = 1.5;
    double scale = 1.0;
    double skew = 0.0;
    bool symmetrize = true;
    bool centered = false;
    std::string m_rule = "none";  // none | gaussian-multiplicative (quadratic only)
    double m_scale = 0.5;

    ScalarLaw law_spec() const;
};

struct RunConfig {
    std::uint64_t horizon = 10000;
    std::uint64_t replications = 32;
    double checkpoint_ratio = 1.25;
    std::uint64_t seed = 1;
    std::optional<Vector> x0;  // zeros when absent
};

struct AnalysisConfig {
    std::vector<double> moment_orders{1.2};
    std::uint64_t burn_in = 100;
    std::vector<Vector> directions;  // empty: axes + 4 quasi-random
    double hill_window = 0.2;
    double level = 0.01;
    std::uint64_t t_final = 0;  // 0: horizon
    std::uint64_t stable_min_replications = 500;
};

struct ExperimentConfig {
    ModelConfig model;
    NoiseConfig noise;
    StepSchedule schedule;
    RunConfig run;
    AnalysisConfig analysis;

    Eigen::Index dim() const;
};

/// Parses a YAML document (JSON manifests are accepted too: a top-level
/// `config` key is followed). Missing keys keep their defaults; unknown keys
/// are rejected.
ExperimentConfig config_from_yaml(const YAML::Node& node);
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

/// Throws ValidationError on the first violated constraint.
void validate(const ExperimentConfig& config);
/// Non-fatal remarks (e.g. the stable-limit moment condition is infeasible).
std::vector<std::string> config_warnings(const ExperimentConfig& config);

/// Fully resolved config; key order is fixed so the dump is canonical.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

/// Everything needed to run and analyze one config.
struct Experiment {
    RunSpec spec;
    Vector x_star;
    double tail_index = 2.0;  // of the driving noise, clamped to (1, 2]
    std::optional<double> declared_k;
    nlohmann::ordered_json model_info = nlohmann::ordered_json::object();
};

Experiment build_experiment(const ExperimentConfig& config);

}  // namespace heavysgd
