#include "heavysgd/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "heavysgd/analysis.hpp"
#include "heavysgd/errors.hpp"
#include "heavysgd/io.hpp"
#include "heavysgd/ppd.hpp"

namespace heavysgd {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const YAML::Node& node, const std::string& section, const std::set<std::string>& allowed) {
    if (!node.IsMap()) throw ValidationError(section + " must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ValidationError("unknown key '" + section + "." + key + "'");
    }
}

template <class T>
void read(const YAML::Node& node, const char* key, const std::string& section, T& out) {
    const auto v = node[key];
    if (!v) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception&) {
        throw ValidationError("cannot parse " + section + "." + key);
    }
}

Vector read_vector(const YAML::Node& v, const std::string& where) {
    if (!v.IsSequence()) throw ValidationError(where + " must be a list of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    try {
        for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].as<double>();
    } catch (const YAML::Exception&) {
        throw ValidationError(where + " must be a list of numbers");
    }
    return out;
}

Matrix read_matrix(const YAML::Node& v, const std::string& where) {
    if (!v.IsSequence() || v.size() == 0) throw ValidationError(where + " must be a non-empty list of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    const Vector first = read_vector(v[0], where);
    Matrix out(rows, first.size());
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Vector r = read_vector(v[static_cast<std::size_t>(i)], where);
        if (r.size() != first.size()) throw ValidationError(where + " rows have different lengths");
        out.row(i) = r.transpose();
    }
    return out;
}

json vec_json(const Vector& v) {
    json out = json::array();
    for (double x : v) out.push_back(x);
    return out;
}

json mat_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vec_json(m.row(i).transpose()));
    return out;
}

}  // namespace

ScalarLaw NoiseConfig::law_spec() const {
    ScalarLaw l;
    l.kind = scalar_law_kind_from_string(law);
    l.alpha = l.kind == ScalarLaw::Kind::gaussian ? 2.0 : alpha;
    l.scale = scale;
    l.skew = skew;
    l.symmetrize = symmetrize;
    l.centered = centered;
    return l;
}

Eigen::Index ExperimentConfig::dim() const {
    return model.kind == "quadratic" ? model.x_star.size() : model.beta0.size();
}

ExperimentConfig config_from_yaml(const YAML::Node& root_in) {
    YAML::Node root = root_in;
    if (root.IsMap() && root["config"] && root["schema_version"]) root = root["config"];
    ExperimentConfig c;
    if (!root || root.IsNull()) return c;
    check_keys(root, "config", {"model", "noise", "schedule", "run", "analysis"});

    if (const auto m = root["model"]) {
        check_keys(m, "model", {"kind", "a", "x_star", "beta0", "cov_chol", "cgf", "lambda", "panel_size",
                                "panel_seed", "optimum_tol"});
        read(m, "kind", "model", c.model.kind);
        if (m["a"]) c.model.a = read_matrix(m["a"], "model.a");
        if (m["x_star"]) c.model.x_star = read_vector(m["x_star"], "model.x_star");
        if (m["beta0"]) c.model.beta0 = read_vector(m["beta0"], "model.beta0");
        if (m["cov_chol"]) c.model.cov_chol = read_matrix(m["cov_chol"], "model.cov_chol");
        if (m["cgf"]) c.model.cgf = cgf_from_string(m["cgf"].as<std::string>());
        read(m, "lambda", "model", c.model.lambda);
        read(m, "panel_size", "model", c.model.panel_size);
        read(m, "panel_seed", "model", c.model.panel_seed);
        read(m, "optimum_tol", "model", c.model.optimum_tol);
        // A quadratic with only A given keeps a matching zero-padded optimum.
        if (m["a"] && !m["x_star"] && c.model.x_star.size() != c.model.a.rows()) {
            Vector xs = Vector::Zero(c.model.a.rows());
            xs.head(std::min(xs.size(), c.model.x_star.size())) =
                c.model.x_star.head(std::min(xs.size(), c.model.x_star.size()));
            c.model.x_star = xs;
        }
    }
    if (const auto n = root["noise"]) {
        check_keys(n, "noise", {"law", "alpha", "scale", "skew", "symmetrize", "centered", "m_rule", "m_scale"});
        read(n, "law", "noise", c.noise.law);
        read(n, "alpha", "noise", c.noise.alpha);
        read(n, "scale", "noise", c.noise.scale);
        read(n, "skew", "noise", c.noise.skew);
        read(n, "symmetrize", "noise", c.noise.symmetrize);
        read(n, "centered", "noise", c.noise.centered);
        read(n, "m_rule", "noise", c.noise.m_rule);
        read(n, "m_scale", "noise", c.noise.m_scale);
    }
    if (const auto s = root["schedule"]) {
        check_keys(s, "schedule", {"gamma0", "rho", "t0"});
        read(s, "gamma0", "schedule", c.schedule.gamma0);
        read(s, "rho", "schedule", c.schedule.rho);
        read(s, "t0", "schedule", c.schedule.t0);
    }
    if (const auto r = root["run"]) {
        check_keys(r, "run", {"T", "R", "checkpoint_ratio", "seed", "x0"});
        read(r, "T", "run", c.run.horizon);
        read(r, "R", "run", c.run.replications);
        read(r, "checkpoint_ratio", "run", c.run.checkpoint_ratio);
        read(r, "seed", "run", c.run.seed);
        if (r["x0"] && !r["x0"].IsNull()) c.run.x0 = read_vector(r["x0"], "run.x0");
    }
    if (const auto a = root["analysis"]) {
        check_keys(a, "analysis", {"moment_orders", "burn_in", "directions", "hill_window", "level", "t_final",
                                   "stable_min_replications"});
        if (a["moment_orders"]) {
            const Vector v = read_vector(a["moment_orders"], "analysis.moment_orders");
            c.analysis.moment_orders.assign(v.begin(), v.end());
        }
        read(a, "burn_in", "analysis", c.analysis.burn_in);
        if (const auto d = a["directions"]) {
            if (d.IsScalar() && d.as<std::string>() == "default") {
                c.analysis.directions.clear();
            } else {
                const Matrix m = read_matrix(d, "analysis.directions");
                for (Eigen::Index i = 0; i < m.rows(); ++i) c.analysis.directions.push_back(m.row(i).transpose());
            }
        }
        read(a, "hill_window", "analysis", c.analysis.hill_window);
        read(a, "level", "analysis", c.analysis.level);
        read(a, "t_final", "analysis", c.analysis.t_final);
        read(a, "stable_min_replications", "analysis", c.analysis.stable_min_replications);
    }
    return c;
}

ExperimentConfig parse_config(const std::string& text) {
    try {
        return config_from_yaml(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(io::read_file(path));
}

void validate(const ExperimentConfig& c) {
    const auto& m = c.model;
    const auto n = c.dim();
    if (n < 1) throw ValidationError("model dimension must be >= 1");
    if (m.kind == "quadratic") {
        if (m.a.rows() != n || m.a.cols() != n)
            throw ValidationError("model.a must be " + std::to_string(n) + "x" + std::to_string(n));
        if (!m.a.allFinite() || !m.x_star.allFinite()) throw ValidationError("model.a and model.x_star must be finite");
    } else if (m.kind == "ols" || m.kind == "glm") {
        if (m.cov_chol.rows() != n || m.cov_chol.cols() != n)
            throw ValidationError("model.cov_chol must be " + std::to_string(n) + "x" + std::to_string(n));
        if (m.kind == "glm" && !(m.lambda > 0.0)) throw ValidationError("model.lambda must be > 0");
        if (m.kind == "glm" && !(m.optimum_tol > 0.0)) throw ValidationError("model.optimum_tol must be > 0");
        if (m.kind == "glm" && m.panel_size < 2) throw ValidationError("model.panel_size must be >= 2");
    } else {
        throw ValidationError("model.kind must be quadratic, ols or glm (got '" + m.kind + "')");
    }

    ScalarLaw law;
    try {
        law = c.noise.law_spec();
        law.validate();
    } catch (const std::exception& e) {
        throw ValidationError(std::string("noise: ") + e.what());
    }
    if (law.kind == ScalarLaw::Kind::stable || law.kind == ScalarLaw::Kind::pareto) {
        if (!(c.noise.alpha > 1.0))
            throw ValidationError("noise.alpha = " + io::format_double(c.noise.alpha) +
                                  " must exceed 1: the gradient noise needs a finite mean");
    }
    if (law.kind == ScalarLaw::Kind::pareto && !law.symmetrize && !law.centered)
        throw ValidationError("noise: a Pareto law must be symmetrized or centered to have mean zero");
    if (c.noise.m_rule != "none" && c.noise.m_rule != "gaussian-multiplicative")
        throw ValidationError("noise.m_rule must be none or gaussian-multiplicative");
    if (c.noise.m_rule != "none" && m.kind != "quadratic")
        throw ValidationError("noise.m_rule applies to quadratic models only; ols/glm supply their own m");
    if (c.noise.m_rule != "none" && !(c.noise.m_scale >= 0.0)) throw ValidationError("noise.m_scale must be >= 0");

    if (!(c.schedule.rho > 0.0 && c.schedule.rho < 1.0))
        throw ValidationError("schedule.rho = " + io::format_double(c.schedule.rho) +
                              " violates the step-size constraint rho in (0, 1) of the L^p rate theorem");
    try {
        c.schedule.validate();
    } catch (const std::exception& e) {
        throw ValidationError(std::string("schedule: ") + e.what());
    }

    if (c.run.horizon < 1) throw ValidationError("run.T must be >= 1");
    if (c.run.replications < 1) throw ValidationError("run.R must be >= 1");
    if (!(c.run.checkpoint_ratio > 1.0)) throw ValidationError("run.checkpoint_ratio must be > 1");
    if (c.run.x0 && c.run.x0->size() != n) throw ValidationError("run.x0 has the wrong dimension");

    for (double p : c.analysis.moment_orders)
        if (!(p > 0.0 && p < 2.0)) throw ValidationError("analysis.moment_orders must lie in (0, 2)");
    for (const auto& d : c.analysis.directions)
        if (d.size() != n || !(d.norm() > 0.0)) throw ValidationError("analysis.directions must be non-zero " +
                                                                      std::to_string(n) + "-vectors");
    if (!(c.analysis.level > 0.0 && c.analysis.level < 1.0)) throw ValidationError("analysis.level must lie in (0, 1)");
    if (!(c.analysis.hill_window > 0.0)) throw ValidationError("analysis.hill_window must be > 0");
    if (c.analysis.t_final > c.run.horizon) throw ValidationError("analysis.t_final exceeds run.T");
}

std::vector<std::string> config_warnings(const ExperimentConfig& c) {
    std::vector<std::string> out;
    const double alpha = std::min(2.0, c.noise.law_spec().tail_index());
    if (alpha > 1.0 && !gclt_exponent_feasible(alpha, c.schedule.rho)) {
        const auto cond = gclt_exponent_condition(alpha, c.schedule.rho, alpha);
        out.push_back("stable-limit moment condition max((a+a*rho)/(1+a*rho), a*rho) <= p <= a has no solution for a = " +
                      io::format_double(alpha) + ", rho = " + io::format_double(c.schedule.rho) + " (lower bound " +
                      io::format_double(cond.lower) + "); the averaged-error diagnostics are not backed by theory");
    }
    if (c.run.replications < c.analysis.stable_min_replications)
        out.push_back("R = " + std::to_string(c.run.replications) + " is below " +
                      std::to_string(c.analysis.stable_min_replications) +
                      "; the stable-limit diagnostic will be skipped");
    return out;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    json m;
    m["kind"] = c.model.kind;
    if (c.model.kind == "quadratic") {
        m["a"] = mat_json(c.model.a);
        m["x_star"] = vec_json(c.model.x_star);
    } else {
        m["beta0"] = vec_json(c.model.beta0);
        m["cov_chol"] = mat_json(c.model.cov_chol);
        if (c.model.kind == "glm") {
            m["cgf"] = to_string(c.model.cgf);
            m["lambda"] = c.model.lambda;
            m["panel_size"] = c.model.panel_size;
            m["panel_seed"] = c.model.panel_seed;
            m["optimum_tol"] = c.model.optimum_tol;
        }
    }
    j["model"] = m;
    j["noise"] = {{"law", c.noise.law},
                  {"alpha", c.noise.alpha},
                  {"scale", c.noise.scale},
                  {"skew", c.noise.skew},
                  {"symmetrize", c.noise.symmetrize},
                  {"centered", c.noise.centered},
                  {"m_rule", c.noise.m_rule},
                  {"m_scale", c.noise.m_scale}};
    j["schedule"] = {{"gamma0", c.schedule.gamma0}, {"rho", c.schedule.rho}, {"t0", c.schedule.t0}};
    json run = {{"T", c.run.horizon},
                {"R", c.run.replications},
                {"checkpoint_ratio", c.run.checkpoint_ratio},
                {"seed", c.run.seed}};
    run["x0"] = vec_json(c.run.x0 ? *c.run.x0 : Vector::Zero(c.dim()));
    j["run"] = run;
    json a;
    a["moment_orders"] = c.analysis.moment_orders;
    a["burn_in"] = c.analysis.burn_in;
    if (c.analysis.directions.empty()) {
        a["directions"] = "default";
    } else {
        json d = json::array();
        for (const auto& v : c.analysis.directions) d.push_back(vec_json(v));
        a["directions"] = d;
    }
    a["hill_window"] = c.analysis.hill_window;
    a["level"] = c.analysis.level;
    a["t_final"] = c.analysis.t_final == 0 ? c.run.horizon : c.analysis.t_final;
    a["stable_min_replications"] = c.analysis.stable_min_replications;
    j["analysis"] = a;
    return j;
}

namespace {

// p-PD membership of the curvature matrix at p = 1, the noise tail index and 2;
// the rate results assume it, so it is checked rather than taken on faith.
nlohmann::ordered_json cone_membership(const Matrix& m, double tail) {
    std::vector<double> ps{1.0, 2.0};
    if (tail > 1.0 && tail < 2.0) ps.insert(ps.begin() + 1, tail);
    const auto cls = classify_cones(SymMatrix(0.5 * (m + m.transpose())), ps);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (double p : ps) {
        const auto& r = cls.at(p).report;
        rows.push_back({{"p", p}, {"margin", r.margin}, {"member_pd", r.member_pd}, {"determined", r.determined}});
    }
    return rows;
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& c) {
    validate(c);
    Experiment e;
    const auto n = c.dim();
    const ScalarLaw law = c.noise.law_spec();
    e.tail_index = std::clamp(law.tail_index(), 1.0 + 1e-12, 2.0);
    e.spec.x0 = c.run.x0 ? *c.run.x0 : Vector::Zero(n);
    e.spec.schedule = c.schedule;
    e.spec.checkpoints = CheckpointPlan::geometric(c.run.horizon, c.run.checkpoint_ratio);

    if (c.model.kind == "quadratic") {
        NoiseSpec noise = NoiseSpec::iid(law);
        if (c.noise.m_rule == "gaussian-multiplicative")
            noise.m_rule = std::make_shared<GaussianMultiplicativeRule>(c.noise.m_scale);
        e.spec.oracle = make_quadratic_oracle(c.model.a, c.model.x_star, std::move(noise));
        e.x_star = c.model.x_star;
        e.declared_k = e.spec.oracle->declared_k();
        e.model_info["hessian"] = mat_json(0.5 * (c.model.a + c.model.a.transpose()));
        e.model_info["curvature_cones"] = cone_membership(c.model.a, e.tail_index);
    } else if (c.model.kind == "ols") {
        auto model = std::make_shared<OlsModel>(LinearModelSpec{c.model.beta0, c.model.cov_chol, law});
        e.x_star = model->x_star();
        e.declared_k = model->k_constant();
        e.model_info["second_moment"] = mat_json(model->second_moment());
        e.model_info["declared_k"] = model->k_constant();
        e.model_info["curvature_cones"] = cone_membership(model->second_moment(), e.tail_index);
        e.spec.oracle = std::move(model);
    } else {
        GlmSpec spec;
        spec.cgf = c.model.cgf;
        spec.lambda = c.model.lambda;
        spec.beta0 = c.model.beta0;
        spec.cov_chol = c.model.cov_chol;
        spec.eps = law;
        spec.panel_size = c.model.panel_size;
        spec.panel_seed = c.model.panel_seed;
        GlmModel model(std::move(spec));
        const auto opt = find_glm_optimum(model, c.model.optimum_tol);
        auto cached = std::make_shared<GlmModel>(model.with_optimum(opt));
        e.x_star = opt.x_star;
        e.model_info["x_star"] = vec_json(opt.x_star);
        e.model_info["x_star_grad_norm"] = opt.grad_norm;
        e.model_info["x_star_tolerance"] = opt.tolerance;
        e.model_info["x_star_iterations"] = opt.iterations;
        e.model_info["x_star_mc_stderr"] = cached->mean_score(opt.x_star).stderr_.norm();
        e.model_info["curvature_cones"] = cone_membership(c.model.cov_chol * c.model.cov_chol.transpose(), e.tail_index);
        e.spec.oracle = std::move(cached);
    }
    e.spec.x_star = e.x_star;
    return e;
}

}  // namespace heavysgd
