#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "heavysgd/linalg.hpp"
#include "heavysgd/rng.hpp"
#include "heavysgd/stable.hpp"

namespace heavysgd {

/// gamma_t = gamma0 * (t + t0)^(-rho), t >= 1.
struct StepSchedule {
    double gamma0 = 0.5;
    double rho = 0.7;
    std::uint64_t t0 = 0;

    void validate() const;
    double operator()(std::uint64_t t) const;
};

/// Sorted, de-duplicated iteration indices in [1, T] at which the trace is
/// recorded. T itself is always included.
class CheckpointPlan {
public:
    /// t = ceil(start * ratio^k), k = 0, 1, ...
    static CheckpointPlan geometric(std::uint64_t horizon, double ratio = 1.25, double start = 1.0);
    static CheckpointPlan every(std::uint64_t horizon);
    static CheckpointPlan at(std::vector<std::uint64_t> times);

    const std::vector<std::uint64_t>& times() const { return times_; }
    std::uint64_t horizon() const { return times_.empty() ? 0 : times_.back(); }

private:
    std::vector<std::uint64_t> times_;
};

/// The two noise components of one gradient evaluation.
struct NoiseParts {
    Vector zeta;
    Vector m;
};

/// Source of stochastic gradients g = grad f(x) + xi(x).
///
/// Implementations are immutable and may be shared across threads; all
/// randomness comes from the caller's stream.
class GradientOracle {
public:
    virtual ~GradientOracle() = default;
    virtual Eigen::Index dim() const = 0;
    /// Writes g into `grad`. When `parts` is non-null and the oracle exposes its
    /// decomposition, the zeta and m components are written there too.
    virtual void sample(const Vector& x, RngStream& rng, Vector& grad, NoiseParts* parts) const = 0;
    /// True when sample() can fill NoiseParts at negligible extra cost.
    virtual bool exposes_decomposition() const { return false; }
    /// Constant K of E[|m|^2 | x] <= K (1 + |x|^2), when declared.
    virtual std::optional<double> declared_k() const { return std::nullopt; }
};

/// State-dependent martingale-difference component m(x).
class MartingaleRule {
public:
    virtual ~MartingaleRule() = default;
    virtual std::string name() const = 0;
    virtual double k_constant() const = 0;
    virtual void draw(const Vector& x, RngStream& rng, Vector& out) const = 0;
};

/// m_i = scale * eta_i * x_i with eta_i i.i.d. standard normal, so
/// E|m|^2 = scale^2 |x|^2 and K = scale^2.
class GaussianMultiplicativeRule final : public MartingaleRule {
public:
    explicit GaussianMultiplicativeRule(double scale);
    std::string name() const override { return "gaussian-multiplicative"; }
    double k_constant() const override { return scale_ * scale_; }
    void draw(const Vector& x, RngStream& rng, Vector& out) const override;

private:
    double scale_;
};

/// xi = zeta + m, with zeta i.i.d. per coordinate from `zeta` (empty = none) and
/// m from `m_rule` (null = none). Each step draws all zeta coordinates first,
/// then m.
struct NoiseSpec {
    Sampler zeta;
    std::string zeta_description = "none";
    std::shared_ptr<const MartingaleRule> m_rule;

    static NoiseSpec none() { return {}; }
    static NoiseSpec iid(const ScalarLaw& law);
};

using GradientFn = std::function<Vector(const Vector&)>;

/// grad(x) + NoiseSpec noise as a GradientOracle.
class AdditiveNoiseOracle final : public GradientOracle {
public:
    AdditiveNoiseOracle(Eigen::Index dim, GradientFn grad, NoiseSpec noise);
    Eigen::Index dim() const override { return dim_; }
    void sample(const Vector& x, RngStream& rng, Vector& grad, NoiseParts* parts) const override;
    bool exposes_decomposition() const override { return true; }
    std::optional<double> declared_k() const override;

private:
    Eigen::Index dim_;
    GradientFn grad_;
    NoiseSpec noise_;
};

/// grad f(x) = A (x - x_star) plus additive noise.
std::shared_ptr<const GradientOracle> make_quadratic_oracle(const Matrix& a, const Vector& x_star,
                                                            NoiseSpec noise);

/// Running statistics of |m_{t+1}|^2 / (1 + |x_t|^2) collected during a run.
struct MomentSpotCheck {
    std::uint64_t count = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    std::optional<double> declared_k;
    /// mean <= K + 3 standard errors (true when nothing was declared or observed).
    bool within_bound() const;
};

struct SgdTrace {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    std::vector<std::uint64_t> checkpoints;
    std::vector<Vector> iterates;     // x_t
    std::vector<Vector> pr_averages;  // (x_0 + ... + x_{t-1}) / t
    std::vector<double> err;          // |x_t - x*| when x* is known
    std::vector<double> err_bar;      // |xbar_t - x*|
    bool censored = false;
    std::uint64_t diverged_at = 0;
    MomentSpotCheck m_check;
};

struct RunSpec {
    std::shared_ptr<const GradientOracle> oracle;
    Vector x0;
    StepSchedule schedule;
    CheckpointPlan checkpoints;
    std::optional<Vector> x_star;
};

/// x_{t+1} = x_t - gamma_{t+1} g_t with Polyak-Ruppert averages maintained
/// online. Throws DivergenceError at the first non-finite iterate.
SgdTrace sgd_run(const GradientOracle& oracle, const Vector& x0, const StepSchedule& schedule,
                 const CheckpointPlan& plan, RngStream rng, const std::optional<Vector>& x_star = {});

SgdTrace sgd_run(const GradientFn& grad, const NoiseSpec& noise, const Vector& x0,
                 const StepSchedule& schedule, const CheckpointPlan& plan, RngStream rng,
                 const std::optional<Vector>& x_star = {});

inline SgdTrace sgd_run(const RunSpec& spec, RngStream rng) {
    return sgd_run(*spec.oracle, spec.x0, spec.schedule, spec.checkpoints, std::move(rng), spec.x_star);
}

struct ScaledError {
    std::uint64_t t = 0;
    Vector value;  // t^(1 - 1/alpha) (xbar_t - x*)
};

std::vector<ScaledError> scaled_pr_error(const SgdTrace& trace, double alpha, const Vector& x_star);

/// R independent runs on streams base.stream_id + r. Results are indexed by
/// replication and identical for any thread count; a diverging replication is
/// returned with `censored = true` and does not affect the others.
std::vector<SgdTrace> replicate(const RunSpec& spec, std::size_t replications, const RngStream& base,
                                unsigned threads = 1);

}  // namespace heavysgd
