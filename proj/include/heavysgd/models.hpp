#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "heavysgd/linalg.hpp"
#include "heavysgd/sgd.hpp"
#include "heavysgd/stable.hpp"

namespace heavysgd {

/// Convex cumulant generating functions for the GLM oracle.
enum class Cgf { linear, logistic };

std::string to_string(Cgf cgf);
Cgf cgf_from_string(const std::string& name);

double cgf_value(Cgf cgf, double x);
double cgf_d1(Cgf cgf, double x);
double cgf_d2(Cgf cgf, double x);
/// sup psi''; the curvature bound used for step sizes.
double cgf_d2_bound(Cgf cgf);

/// One stochastic gradient with its noise decomposition g = grad f(x) + zeta + m.
struct NoiseStep {
    Vector g;
    Vector zeta;
    Vector m;
};

/// y = z^T beta0 + eps with z = L w, w i.i.d. standard normal, so E[z z^T] = L L^T.
/// Each draw consumes n normals for z, then one eps draw.
struct LinearModelSpec {
    Vector beta0;
    Matrix cov_chol;
    ScalarLaw eps;

    void validate() const;
};

/// Streaming least squares. grad f(x) = E[zz^T] x - E[zy], x* = beta0.
class OlsModel final : public GradientOracle {
public:
    explicit OlsModel(LinearModelSpec spec);

    const LinearModelSpec& spec() const { return spec_; }
    const Matrix& second_moment() const { return sigma_; }
    const Vector& cross_moment() const { return ezy_; }  // E[z y] = E[zz^T] beta0
    Vector x_star() const { return spec_.beta0; }
    Vector gradient(const Vector& x) const;
    /// K = 2 ||E zz^T||_2^2 + 2 E|z|^4 (E|z|^4 = tr(S)^2 + 2 tr(S^2) for Gaussian z).
    double k_constant() const { return k_; }

    NoiseStep noise_step(const Vector& x, RngStream& rng) const;

    Eigen::Index dim() const override { return spec_.beta0.size(); }
    void sample(const Vector& x, RngStream& rng, Vector& grad, NoiseParts* parts) const override;
    bool exposes_decomposition() const override { return true; }
    std::optional<double> declared_k() const override { return k_; }

private:
    LinearModelSpec spec_;
    Matrix sigma_;
    Vector ezy_;
    double k_ = 0.0;
};

/// Ridge-regularized GLM f(x) = E[psi(x^T z) - y x^T z] + (lambda/2)|x|^2, with
/// responses generated by the linear model of LinearModelSpec (the canonical
/// link may be misspecified).
struct GlmSpec {
    Cgf cgf = Cgf::logistic;
    double lambda = 0.1;
    Vector beta0;
    Matrix cov_chol;
    ScalarLaw eps;
    std::size_t panel_size = 100000;
    std::uint64_t panel_seed = 0x5eed;

    void validate() const;
};

struct Estimate {
    Vector value;
    Vector stderr_;
};

struct HessianEstimate {
    SymMatrix value;
    Matrix stderr_;
};

struct OptimumEstimate {
    Vector x_star;
    double grad_norm = 0.0;
    double tolerance = 0.0;
    std::size_t iterations = 0;
};

/// GLM oracle. Population expectations E[z psi'(z^T x)] and E[zz^T psi''(z^T x)]
/// are exact for the linear CGF and averaged over a fixed covariate panel
/// (common random numbers) otherwise, so grad f is a deterministic function.
class GlmModel final : public GradientOracle {
public:
    explicit GlmModel(GlmSpec spec);

    const GlmSpec& spec() const { return spec_; }
    const Matrix& second_moment() const { return sigma_; }
    const Vector& cross_moment() const { return ezy_; }

    Estimate mean_score(const Vector& x) const;  // E[z psi'(z^T x)]
    Vector gradient(const Vector& x) const;
    HessianEstimate hessian(const Vector& x) const;

    /// Copy carrying a cached optimum.
    GlmModel with_optimum(OptimumEstimate opt) const;
    const std::optional<OptimumEstimate>& optimum() const { return optimum_; }

    NoiseStep noise_step(const Vector& x, RngStream& rng) const;

    Eigen::Index dim() const override { return spec_.beta0.size(); }
    /// g = z psi'(z^T x) - z y + lambda x; the decomposition is not filled in
    /// (m needs the panel expectation, use noise_step for that).
    void sample(const Vector& x, RngStream& rng, Vector& grad, NoiseParts* parts) const override;

private:
    GlmSpec spec_;
    Matrix sigma_;
    Vector ezy_;
    std::shared_ptr<const Matrix> panel_;  // n x panel_size, columns are z draws
    std::optional<OptimumEstimate> optimum_;
};

NoiseStep ols_noise_step(const OlsModel& model, const Vector& x, RngStream& rng);
NoiseStep glm_noise_step(const GlmModel& model, const Vector& x, RngStream& rng);

/// Gradient descent with step 1 / (sup psi'' * lambda_max(S) + lambda) on the
/// deterministic population gradient until |grad f| < tol.
OptimumEstimate find_glm_optimum(const GlmModel& model, double tol, std::size_t max_iterations = 100000);

HessianEstimate hessian_at(const OlsModel& model, const Vector& x);
HessianEstimate hessian_at(const GlmModel& model, const Vector& x);

}  // namespace heavysgd
