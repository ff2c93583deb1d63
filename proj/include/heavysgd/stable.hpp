#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "heavysgd/rng.hpp"

namespace heavysgd {

/// Univariate stable law S_alpha(sigma, theta, mu) with characteristic function
/// exp(-sigma^a |u|^a (1 - i theta sgn(u) tan(pi a / 2)) + i mu u) for a != 1 and
/// exp(-sigma |u| (1 + i theta (2/pi) sgn(u) log|u|) + i mu u) for a == 1.
///
/// At alpha = 2 the law is Gaussian with variance 2 sigma^2 (not sigma^2).
struct StableParams {
    double alpha = 2.0;
    double sigma = 1.0;
    double theta = 0.0;
    double mu = 0.0;

    void validate() const;
};

/// Pareto law with P(X > x) = (x / c)^(-alpha) for x >= c. When centered, the
/// mean alpha c / (alpha - 1) is subtracted, which needs alpha > 1.
struct ParetoParams {
    double alpha = 1.5;
    double c = 1.0;
    bool centered = false;

    void validate() const;
    double mean() const;
};

using Sampler = std::function<double(RngStream&)>;

/// One Chambers-Mallows-Stuck draw; consumes two uniforms.
double sample_stable(const StableParams& params, RngStream& rng);

std::complex<double> stable_char_fn(const StableParams& params, double u);

/// Inverse transform c * u^(-1/alpha), u in (0, 1], minus the mean when centered.
double pareto_from_uniform(const ParetoParams& params, double u);

/// One Pareto draw; consumes one uniform.
double sample_pareto(const ParetoParams& params, RngStream& rng);

/// Wraps a sampler so each draw is multiplied by an independent fair sign drawn
/// after the underlying value.
Sampler symmetrize(Sampler base);

/// Scalar noise law used wherever a configurable heavy-tailed variate is needed
/// (the i.i.d. gradient noise, regression response noise). Draws consume a fixed
/// number of stream values: zero 0, gaussian 2, stable 2, pareto 1, plus one for
/// the symmetrizing sign.
struct ScalarLaw {
    enum class Kind { zero, gaussian, stable, pareto };

    Kind kind = Kind::zero;
    double alpha = 2.0;  // tail index (stable, pareto)
    double scale = 1.0;  // sd (gaussian), sigma (stable), c (pareto)
    double skew = 0.0;   // theta (stable)
    bool centered = false;
    bool symmetrize = false;

    static ScalarLaw zero() { return {}; }
    static ScalarLaw gaussian(double sd);
    static ScalarLaw stable(double alpha, double sigma, double theta = 0.0);
    static ScalarLaw symmetric_pareto(double alpha, double c = 1.0);
    static ScalarLaw centered_pareto(double alpha, double c = 1.0);

    void validate() const;
    double draw(RngStream& rng) const;
    Sampler sampler() const;
    /// Tail index of the law: 2 for gaussian, infinity for zero.
    double tail_index() const;
    std::string describe() const;
};

std::string to_string(ScalarLaw::Kind kind);
ScalarLaw::Kind scalar_law_kind_from_string(const std::string& name);

/// Hill estimate of the tail index from the k largest |samples|. k defaults to
/// floor(sqrt(n)) where n counts strictly positive magnitudes.
double hill_tail_index(std::span<const double> samples, std::optional<std::size_t> k = {});

struct SelfSimilarityReport {
    double statistic = 0.0;
    double threshold = 0.0;
    double p_value = 1.0;
    bool pass = false;
    std::size_t sums = 0;
    std::size_t singles = 0;
};

/// Checks X1 + X2 =d 2^(1/alpha) X: the first half of the sample is summed in
/// consecutive pairs, the second half is scaled by 2^(1/alpha), and the two
/// groups are compared with a two-sample KS test at `level`.
SelfSimilarityReport self_similarity_test(std::span<const double> samples, double alpha,
                                          double level = 0.01);

}  // namespace heavysgd
