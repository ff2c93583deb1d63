#include "heavysgd/models.hpp"

#include <cmath>
#include <stdexcept>

#include "heavysgd/errors.hpp"

namespace heavysgd {

std::string to_string(Cgf cgf) {
    return cgf == Cgf::linear ? "linear" : "logistic";
}

Cgf cgf_from_string(const std::string& name) {
    if (name == "linear") return Cgf::linear;
    if (name == "logistic") return Cgf::logistic;
    throw ValidationError("unknown cgf '" + name + "' (expected linear or logistic)");
}

double cgf_value(Cgf cgf, double x) {
    if (cgf == Cgf::linear) return 0.5 * x * x;
    // log(1 + e^x) without overflow
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double cgf_d1(Cgf cgf, double x) {
    if (cgf == Cgf::linear) return x;
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double cgf_d2(Cgf cgf, double x) {
    if (cgf == Cgf::linear) return 1.0;
    const double s = cgf_d1(cgf, x);
    return s * (1.0 - s);
}

double cgf_d2_bound(Cgf cgf) {
    return cgf == Cgf::linear ? 1.0 : 0.25;
}

namespace {

void check_design(const Vector& beta0, const Matrix& cov_chol, const ScalarLaw& eps) {
    if (beta0.size() == 0) throw ValidationError("beta0 must be non-empty");
    if (cov_chol.rows() != beta0.size() || cov_chol.cols() != beta0.size())
        throw ValidationError("cov_chol must be square with the dimension of beta0");
    if (!beta0.allFinite() || !cov_chol.allFinite())
        throw ValidationError("model parameters must be finite");
    const Matrix s = cov_chol * cov_chol.transpose();
    if (SymMatrix(s).min_eigenvalue() <= 0.0)
        throw ValidationError("E[zz^T] must be positive definite");
    eps.validate();
    if (eps.kind == ScalarLaw::Kind::stable && eps.skew != 0.0 && eps.alpha <= 1.0)
        throw ValidationError("response noise must have E[eps | z] = 0");
    if (eps.kind == ScalarLaw::Kind::pareto && !eps.symmetrize && !eps.centered)
        throw ValidationError("pareto response noise must be centered or symmetrized");
    if (eps.kind == ScalarLaw::Kind::pareto && eps.alpha <= 1.0)
        throw ValidationError("response noise needs a finite mean (alpha > 1)");
}

// z = L w with w standard normal; n draws.
Vector draw_covariate(const Matrix& chol, RngStream& rng) {
    Vector w(chol.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
    return chol * w;
}

}  // namespace

void LinearModelSpec::validate() const {
    check_design(beta0, cov_chol, eps);
}

OlsModel::OlsModel(LinearModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    sigma_ = spec_.cov_chol * spec_.cov_chol.transpose();
    sigma_ = 0.5 * (sigma_ + sigma_.transpose());
    ezy_ = sigma_ * spec_.beta0;
    const double op = spectral_norm(sigma_);
    const double tr = sigma_.trace();
    const double fourth = tr * tr + 2.0 * (sigma_ * sigma_).trace();
    k_ = 2.0 * op * op + 2.0 * fourth;
}

Vector OlsModel::gradient(const Vector& x) const {
    return sigma_ * x - ezy_;
}

NoiseStep OlsModel::noise_step(const Vector& x, RngStream& rng) const {
    const Vector z = draw_covariate(spec_.cov_chol, rng);
    const double y = z.dot(spec_.beta0) + spec_.eps.draw(rng);
    NoiseStep out;
    out.g = z * (z.dot(x) - y);
    out.zeta = ezy_ - z * y;
    out.m = z * z.dot(x) - sigma_ * x;
    return out;
}

void OlsModel::sample(const Vector& x, RngStream& rng, Vector& grad, NoiseParts* parts) const {
    if (parts == nullptr) {
        const Vector z = draw_covariate(spec_.cov_chol, rng);
        const double y = z.dot(spec_.beta0) + spec_.eps.draw(rng);
        grad = z * (z.dot(x) - y);
        return;
    }
    NoiseStep s = noise_step(x, rng);
    grad = std::move(s.g);
    parts->zeta = std::move(s.zeta);
    parts->m = std::move(s.m);
}

NoiseStep ols_noise_step(const OlsModel& model, const Vector& x, RngStream& rng) {
    return model.noise_step(x, rng);
}

HessianEstimate hessian_at(const OlsModel& model, const Vector& x) {
    if (x.size() != model.dim()) throw DomainError("hessian_at: dimension mismatch");
    return {SymMatrix(model.second_moment()), Matrix::Zero(model.dim(), model.dim())};
}

// ---------------------------------------------------------------------------

void GlmSpec::validate() const {
    check_design(beta0, cov_chol, eps);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be > 0");
    if (panel_size < 2) throw ValidationError("panel_size must be >= 2");
}

GlmModel::GlmModel(GlmSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    sigma_ = spec_.cov_chol * spec_.cov_chol.transpose();
    sigma_ = 0.5 * (sigma_ + sigma_.transpose());
    ezy_ = sigma_ * spec_.beta0;
    if (spec_.cgf != Cgf::linear) {
        const auto n = spec_.beta0.size();
        const auto count = static_cast<Eigen::Index>(spec_.panel_size);
        Matrix w(n, count);
        RngStream rng(spec_.panel_seed, 0);
        for (Eigen::Index j = 0; j < count; ++j)
            for (Eigen::Index i = 0; i < n; ++i) w(i, j) = rng.normal();
        panel_ = std::make_shared<const Matrix>(spec_.cov_chol * w);
    }
}

Estimate GlmModel::mean_score(const Vector& x) const {
    const auto n = dim();
    if (x.size() != n) throw DomainError("mean_score: dimension mismatch");
    if (spec_.cgf == Cgf::linear) return {sigma_ * x, Vector::Zero(n)};

    const Matrix& z = *panel_;
    const auto count = z.cols();
    const Eigen::RowVectorXd u = x.transpose() * z;
    Vector sum = Vector::Zero(n);
    Vector sumsq = Vector::Zero(n);
    for (Eigen::Index j = 0; j < count; ++j) {
        const double d = cgf_d1(spec_.cgf, u(j));
        const auto col = z.col(j) * d;
        sum += col;
        sumsq += col.cwiseProduct(col);
    }
    const double c = static_cast<double>(count);
    Vector mean = sum / c;
    Vector var = (sumsq / c - mean.cwiseProduct(mean)).cwiseMax(0.0) * (c / (c - 1.0));
    Vector se = (var / c).cwiseSqrt();
    if (!mean.allFinite() || !se.allFinite())
        throw EstimationError("inner Monte Carlo for E[z psi'(z^T x)] produced non-finite values");
    return {std::move(mean), std::move(se)};
}

Vector GlmModel::gradient(const Vector& x) const {
    return mean_score(x).value - ezy_ + spec_.lambda * x;
}

HessianEstimate GlmModel::hessian(const Vector& x) const {
    const auto n = dim();
    if (x.size() != n) throw DomainError("hessian_at: dimension mismatch");
    const Matrix ridge = spec_.lambda * Matrix::Identity(n, n);
    if (spec_.cgf == Cgf::linear) return {SymMatrix(sigma_ + ridge), Matrix::Zero(n, n)};

    const Matrix& z = *panel_;
    const auto count = z.cols();
    const Eigen::RowVectorXd u = x.transpose() * z;
    Matrix sum = Matrix::Zero(n, n);
    Matrix sumsq = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < count; ++k) {
        const double w = cgf_d2(spec_.cgf, u(k));
        const Matrix term = w * z.col(k) * z.col(k).transpose();
        sum += term;
        sumsq += term.cwiseProduct(term);
    }
    const double c = static_cast<double>(count);
    Matrix mean = sum / c;
    Matrix var = (sumsq / c - mean.cwiseProduct(mean)).cwiseMax(0.0) * (c / (c - 1.0));
    Matrix se = (var / c).cwiseSqrt();
    if (!mean.allFinite()) throw EstimationError("inner Monte Carlo Hessian is non-finite");
    return {SymMatrix(0.5 * (mean + mean.transpose()) + ridge), std::move(se)};
}

GlmModel GlmModel::with_optimum(OptimumEstimate opt) const {
    if (opt.x_star.size() != dim()) throw DomainError("with_optimum: dimension mismatch");
    GlmModel copy = *this;
    copy.optimum_ = std::move(opt);
    return copy;
}

NoiseStep GlmModel::noise_step(const Vector& x, RngStream& rng) const {
    const Vector z = draw_covariate(spec_.cov_chol, rng);
    const double y = z.dot(spec_.beta0) + spec_.eps.draw(rng);
    const Vector score = z * cgf_d1(spec_.cgf, z.dot(x));
    NoiseStep out;
    out.g = score - z * y + spec_.lambda * x;
    out.zeta = ezy_ - z * y;
    out.m = score - mean_score(x).value;
    return out;
}

void GlmModel::sample(const Vector& x, RngStream& rng, Vector& grad, NoiseParts* /*parts*/) const {
    const Vector z = draw_covariate(spec_.cov_chol, rng);
    const double y = z.dot(spec_.beta0) + spec_.eps.draw(rng);
    grad = z * (cgf_d1(spec_.cgf, z.dot(x)) - y) + spec_.lambda * x;
}

NoiseStep glm_noise_step(const GlmModel& model, const Vector& x, RngStream& rng) {
    return model.noise_step(x, rng);
}

HessianEstimate hessian_at(const GlmModel& model, const Vector& x) {
    return model.hessian(x);
}

OptimumEstimate find_glm_optimum(const GlmModel& model, double tol, std::size_t max_iterations) {
    if (!(tol > 0.0)) throw DomainError("find_glm_optimum: tol must be > 0");
    const auto& spec = model.spec();
    const double lip = cgf_d2_bound(spec.cgf) * spectral_norm(model.second_moment()) + spec.lambda;
    const double step = 1.0 / lip;

    Vector x = Vector::Zero(model.dim());
    Vector g = model.gradient(x);
    double norm = g.norm();
    std::size_t it = 0;
    while (norm >= tol) {
        if (it == max_iterations)
            throw ConvergenceError("find_glm_optimum: gradient norm " + std::to_string(norm) +
                                       " above tolerance after " + std::to_string(it) + " iterations",
                                   norm);
        x -= step * g;
        g = model.gradient(x);
        norm = g.norm();
        ++it;
        if (!std::isfinite(norm)) throw ConvergenceError("find_glm_optimum: non-finite gradient", norm);
    }
    return {std::move(x), norm, tol, it};
}

}  // namespace heavysgd
