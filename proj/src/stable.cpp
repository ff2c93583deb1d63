#include "heavysgd/stable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "heavysgd/errors.hpp"
#include "heavysgd/stats.hpp"

namespace heavysgd {

namespace {

constexpr double pi = std::numbers::pi;

// tan(pi alpha / 2) with the Gaussian endpoint pinned to zero.
double skew_tangent(double alpha) { return alpha == 2.0 ? 0.0 : std::tan(pi * alpha / 2.0); }

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void StableParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw DomainError("stable alpha must lie in (0, 2]");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("stable sigma must be >= 0");
    if (!(theta >= -1.0 && theta <= 1.0)) throw DomainError("stable theta must lie in [-1, 1]");
    if (!std::isfinite(mu)) throw DomainError("stable mu must be finite");
}

void ParetoParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("pareto alpha must be > 0");
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("pareto c must be > 0");
    if (centered && !(alpha > 1.0))
        throw DomainError("centered pareto needs alpha > 1 (the mean is infinite otherwise)");
}

double ParetoParams::mean() const {
    if (!(alpha > 1.0)) return std::numeric_limits<double>::infinity();
    return alpha * c / (alpha - 1.0);
}

double sample_stable(const StableParams& params, RngStream& rng) {
    params.validate();
    const double v = pi * (rng.uniform() - 0.5);
    const double w = -std::log(rng.uniform());
    if (params.sigma == 0.0) return params.mu;

    const double a = params.alpha;
    const double th = params.theta;
    if (a == 1.0) {
        const double half_pi = pi / 2.0;
        const double shifted = half_pi + th * v;
        const double x =
            (2.0 / pi) * (shifted * std::tan(v) - th * std::log(half_pi * w * std::cos(v) / shifted));
        return params.sigma * x + (2.0 / pi) * th * params.sigma * std::log(params.sigma) + params.mu;
    }
    const double tv = skew_tangent(a);
    const double b = std::atan(th * tv) / a;
    const double s = std::pow(1.0 + th * th * tv * tv, 1.0 / (2.0 * a));
    const double x = s * std::sin(a * (v + b)) / std::pow(std::cos(v), 1.0 / a) *
                     std::pow(std::cos(v - a * (v + b)) / w, (1.0 - a) / a);
    return params.sigma * x + params.mu;
}

std::complex<double> stable_char_fn(const StableParams& params, double u) {
    params.validate();
    if (u == 0.0) return {1.0, 0.0};
    const double au = std::abs(u);
    const double a = params.alpha;
    std::complex<double> expo;
    if (a == 1.0) {
        expo = -params.sigma * au *
               std::complex<double>(1.0, params.theta * (2.0 / pi) * sgn(u) * std::log(au));
    } else {
        expo = -std::pow(params.sigma, a) * std::pow(au, a) *
               std::complex<double>(1.0, -params.theta * sgn(u) * skew_tangent(a));
    }
    expo += std::complex<double>(0.0, params.mu * u);
    return std::exp(expo);
}

double pareto_from_uniform(const ParetoParams& params, double u) {
    params.validate();
    if (!(u > 0.0 && u <= 1.0)) throw DomainError("pareto inverse transform needs u in (0, 1]");
    const double x = params.c * std::pow(u, -1.0 / params.alpha);
    return params.centered ? x - params.mean() : x;
}

double sample_pareto(const ParetoParams& params, RngStream& rng) {
    return pareto_from_uniform(params, rng.uniform());
}

Sampler symmetrize(Sampler base) {
    return [base = std::move(base)](RngStream& rng) {
        const double x = base(rng);
        return x * rng.sign();
    };
}

ScalarLaw ScalarLaw::gaussian(double sd) {
    ScalarLaw law;
    law.kind = Kind::gaussian;
    law.scale = sd;
    return law;
}

ScalarLaw ScalarLaw::stable(double alpha, double sigma, double theta) {
    ScalarLaw law;
    law.kind = Kind::stable;
    law.alpha = alpha;
    law.scale = sigma;
    law.skew = theta;
    return law;
}

ScalarLaw ScalarLaw::symmetric_pareto(double alpha, double c) {
    ScalarLaw law;
    law.kind = Kind::pareto;
    law.alpha = alpha;
    law.scale = c;
    law.symmetrize = true;
    return law;
}

ScalarLaw ScalarLaw::centered_pareto(double alpha, double c) {
    ScalarLaw law;
    law.kind = Kind::pareto;
    law.alpha = alpha;
    law.scale = c;
    law.centered = true;
    return law;
}

void ScalarLaw::validate() const {
    switch (kind) {
        case Kind::zero:
            return;
        case Kind::gaussian:
            if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("gaussian sd must be >= 0");
            return;
        case Kind::stable:
            StableParams{alpha, scale, skew, 0.0}.validate();
            return;
        case Kind::pareto:
            ParetoParams{alpha, scale, centered}.validate();
            return;
    }
}

double ScalarLaw::draw(RngStream& rng) const {
    double x = 0.0;
    switch (kind) {
        case Kind::zero:
            break;
        case Kind::gaussian:
            x = scale * rng.normal();
            break;
        case Kind::stable:
            x = sample_stable(StableParams{alpha, scale, skew, 0.0}, rng);
            break;
        case Kind::pareto:
            x = sample_pareto(ParetoParams{alpha, scale, centered}, rng);
            break;
    }
    return symmetrize ? x * rng.sign() : x;
}

Sampler ScalarLaw::sampler() const {
    validate();
    return [law = *this](RngStream& rng) { return law.draw(rng); };
}

double ScalarLaw::tail_index() const {
    switch (kind) {
        case Kind::zero:
            return std::numeric_limits<double>::infinity();
        case Kind::gaussian:
            return 2.0;
        case Kind::stable:
        case Kind::pareto:
            return alpha;
    }
    return 2.0;
}

std::string to_string(ScalarLaw::Kind kind) {
    switch (kind) {
        case ScalarLaw::Kind::zero:
            return "none";
        case ScalarLaw::Kind::gaussian:
            return "gaussian";
        case ScalarLaw::Kind::stable:
            return "stable";
        case ScalarLaw::Kind::pareto:
            return "pareto";
    }
    return "none";
}

ScalarLaw::Kind scalar_law_kind_from_string(const std::string& name) {
    if (name == "none" || name == "zero") return ScalarLaw::Kind::zero;
    if (name == "gaussian") return ScalarLaw::Kind::gaussian;
    if (name == "stable") return ScalarLaw::Kind::stable;
    if (name == "pareto") return ScalarLaw::Kind::pareto;
    throw DomainError("unknown noise law '" + name + "' (expected none, gaussian, stable, pareto)");
}

std::string ScalarLaw::describe() const {
    std::ostringstream os;
    os << to_string(kind);
    if (kind == Kind::gaussian) os << "(sd=" << scale << ")";
    if (kind == Kind::stable) os << "(alpha=" << alpha << ", sigma=" << scale << ", theta=" << skew << ")";
    if (kind == Kind::pareto)
        os << "(alpha=" << alpha << ", c=" << scale << (centered ? ", centered" : "") << ")";
    if (symmetrize) os << " x random sign";
    return os.str();
}

double hill_tail_index(std::span<const double> samples, std::optional<std::size_t> k) {
    std::vector<double> mags;
    mags.reserve(samples.size());
    for (double x : samples) {
        const double a = std::abs(x);
        if (a > 0.0 && std::isfinite(a)) mags.push_back(a);
    }
    const std::size_t kk =
        k.value_or(std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(mags.size())))));
    if (kk < 2) throw DomainError("hill estimator needs k >= 2");
    if (mags.size() < kk + 1)
        throw InsufficientDataError("hill estimator needs at least k + 1 positive magnitudes");
    std::partial_sort(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(kk + 1), mags.end(),
                      std::greater<>());
    const double threshold = mags[kk];
    double sum = 0.0;
    for (std::size_t i = 0; i < kk; ++i) sum += std::log(mags[i] / threshold);
    if (!(sum > 0.0)) throw InsufficientDataError("hill estimator: zero log-spacings (degenerate sample)");
    return static_cast<double>(kk) / sum;
}

SelfSimilarityReport self_similarity_test(std::span<const double> samples, double alpha, double level) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw DomainError("self-similarity alpha must lie in (0, 2]");
    if (samples.size() < 200 || samples.size() % 2 != 0)
        throw InsufficientDataError("self-similarity test needs an even sample count >= 200");
    const std::size_t half = samples.size() / 2;
    std::vector<double> sums;
    sums.reserve(half / 2);
    for (std::size_t i = 0; i + 1 < half; i += 2) sums.push_back(samples[i] + samples[i + 1]);
    const double factor = std::pow(2.0, 1.0 / alpha);
    std::vector<double> singles;
    singles.reserve(half);
    for (std::size_t i = half; i < samples.size(); ++i) singles.push_back(factor * samples[i]);

    const auto ks = stats::ks_test_two_sample(sums, singles, level);
    SelfSimilarityReport r;
    r.statistic = ks.statistic;
    r.threshold = ks.threshold;
    r.p_value = ks.p_value;
    r.pass = ks.pass;
    r.sums = sums.size();
    r.singles = singles.size();
    return r;
}

}  // namespace heavysgd
