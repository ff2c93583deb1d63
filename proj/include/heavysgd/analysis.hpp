#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heavysgd/linalg.hpp"
#include "heavysgd/rng.hpp"
#include "heavysgd/sgd.hpp"
#include "heavysgd/stable.hpp"
#include "heavysgd/stats.hpp"

namespace heavysgd {

// --- moment curves and rate fits -------------------------------------------

/// Monte-Carlo estimate of E|x_t - x*|^p along a checkpoint plan.
///
/// When the 2p-th moment of |x_t - x*| looks infinite (Hill estimate of the
/// error tail at the last checkpoint below 2p) `heavy` is set, std_errors are
/// NaN, and band_low/band_high are the quartiles of 200 bootstrap means.
/// Otherwise the bands are value -/+ one standard error.
struct MomentCurve {
    double p = 1.0;
    std::vector<std::uint64_t> times;
    std::vector<double> values;
    std::vector<double> std_errors;
    std::vector<double> band_low;
    std::vector<double> band_high;
    std::size_t censored = 0;
    std::size_t replications = 0;
    bool heavy = false;
    std::optional<double> error_tail_index;
};

struct MomentCurveOptions {
    std::size_t bootstrap_resamples = 200;
    std::uint64_t bootstrap_seed = 0xb007;
};

MomentCurve moment_curve(std::span<const SgdTrace> traces, double p, const Vector& x_star,
                         const MomentCurveOptions& options = {});

/// Curve wrapper for a deterministic sequence (no replications).
MomentCurve curve_from_values(std::vector<std::uint64_t> times, std::vector<double> values, double p = 1.0);

inline constexpr std::uint64_t default_burn_in = 100;

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;  // log scale
    double r_squared = 0.0;
    std::uint64_t burn_in = 0;
    std::size_t points = 0;
    double theory_slope = 0.0;
    double abs_gap = 0.0;

    double predict(double t) const;
};

/// OLS of log(value) on log(t) over checkpoints with t >= burn_in.
RateFit fit_rate(const MomentCurve& curve, std::uint64_t burn_in, double theory_slope);

/// -rho (p - 1): exponent of E|x_t - x*|^p for a contracting p-PD problem.
double lp_rate_exponent(double rho, double p);
/// -rho q (alpha - 1) / alpha: exponent for moment order q under tail index alpha.
double heavy_tail_rate_exponent(double rho, double q, double alpha);

/// Joint condition max((a + a r)/(1 + a r), a r) <= p <= a on the moment order
/// used by the stable-limit theorem.
struct ExponentCondition {
    double lower = 0.0;
    double upper = 0.0;
    bool holds = false;
};
ExponentCondition gclt_exponent_condition(double alpha, double rho, double p);
/// Some p satisfies the condition.
bool gclt_exponent_feasible(double alpha, double rho);

// --- deterministic recursions ---------------------------------------------

/// b_1 = b0, b_{t+1} = b_t (1 - A t^-alpha) + B t^(-alpha-beta); returns b_1..b_T.
std::vector<double> fabian_recursion(double a, double b, double alpha, double beta, double b0, std::size_t horizon);

/// (max - min) / |mean| of t^beta b_t over t in [t_lo, t_hi] (1-based).
double relative_oscillation(std::span<const double> b, double beta, std::size_t t_lo, std::size_t t_hi);

/// s_1..s_T with s_t = t^-kappa sum_{j<t} exp(-lam sum_{i=j}^{t-1} gamma_i),
/// gamma_i = gamma0 i^-rho. O(T) through E_{t+1} = e^{-lam gamma_t} (E_t + 1).
std::vector<double> check_rho_exp(double rho, double kappa, double lam, double gamma0, std::size_t horizon);

/// u_1..u_T with u_t = t^-kappa sum_{j<t} ||Phi_j^t||_2 where
/// X_j^j = I, X_j^{i+1} = (I - gamma_i A) X_j^i, Xbar_j^t = gamma_j sum_{i=j}^{t-1} X_j^i
/// and Phi_j^t = A^-1 - Xbar_j^t. O(T^2) matrix products.
std::vector<double> check_phi_sum(const SymMatrix& a, double rho, double kappa, double gamma0, std::size_t horizon);

/// Same sequence for a diagonal A from per-eigenvalue scalar products
/// prod (1 - gamma_k a); ||Phi|| is the largest |phi| over the diagonal.
std::vector<double> phi_sum_diagonal(std::span<const double> diag, double rho, double kappa, double gamma0,
                                     std::size_t horizon);

// --- inequality oracles ----------------------------------------------------

struct InequalityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// ||x+y||_p^p <= ||x||_p^p + 4||y||_p^p + p y^T x^<p-1>, p in [1, 2].
InequalityCheck check_vecexpandp(const Vector& x, const Vector& y, double p);

struct SweepResult {
    std::size_t trials = 0;
    std::size_t violations = 0;
    double worst_excess = 0.0;  // max (lhs - rhs) / (1 + |rhs|)
};

/// Random triples: dimension 1..6, coordinates Cauchy / symmetrized Pareto(1.1)
/// / Gaussian mixtures at random scales, p uniform on [1, 2] with the end points
/// hit on purpose.
SweepResult vecexpandp_sweep(std::size_t trials, RngStream rng);

/// Monte-Carlo check of E|S_t|^{1+p} <= 2^{1-p} n^{1-(1+p)/2} sum_i E|X_i|^{1+p}
/// for S_t = X_1 + ... + X_t, X_i in R^n with i.i.d. coordinates.
struct PExpandResult {
    double lhs = 0.0;
    double lhs_stderr = 0.0;
    double bound = 0.0;
    double bound_stderr = 0.0;
    double ratio = 0.0;  // lhs / bound
    double relative_stderr = 0.0;
    bool holds = false;  // lhs <= bound (1 + 3 relative_stderr)
};
PExpandResult check_p_expand(const Sampler& increment, double p, std::size_t t, std::size_t trials,
                             std::size_t n, RngStream rng);

// --- stable-limit diagnostics ----------------------------------------------

struct StableLimitOptions {
    double level = 0.01;
    double hill_window = 0.2;  // |hill - alpha| <= window
    std::optional<std::size_t> hill_k;
    std::size_t reference_draws = 20000;
    std::uint64_t reference_seed = 0x57ab1e;
    std::size_t min_replications = 500;
};

struct DirectionDiagnostic {
    Vector direction;
    std::size_t samples = 0;
    bool degenerate = false;
    double location = 0.0;  // median
    double scale = 0.0;     // fitted stable sigma (IQR ratio)
    std::optional<double> hill;
    bool hill_in_window = false;
    std::optional<SelfSimilarityReport> self_similarity;
    std::optional<stats::KsResult> reference_ks;
    std::optional<stats::KsResult> normality_ks;  // alpha = 2 only
    std::string verdict;                          // "stable", "rejected" or "degenerate"
};

struct StableLimitReport {
    double alpha = 2.0;
    std::uint64_t t_final = 0;
    std::size_t replications = 0;
    std::size_t censored = 0;
    std::vector<DirectionDiagnostic> directions;
    std::size_t hill_in_window = 0;
    std::size_t self_similarity_passes = 0;
    std::size_t reference_passes = 0;
    std::size_t degenerate = 0;
    std::string verdict;  // "stable", "rejected" or "degenerate"
};

/// The n axes followed by `extra` fixed quasi-random unit vectors, pairwise at
/// least 15 degrees apart up to sign (just the axis for n = 1).
std::vector<Vector> default_directions(Eigen::Index n, std::size_t extra = 4);

/// Projections of t^(1-1/alpha)(xbar_t - x*) onto `direction` across uncensored traces.
std::vector<double> projected_scaled_errors(std::span<const SgdTrace> traces, double alpha, const Vector& x_star,
                                            const Vector& direction, std::uint64_t t_final);

StableLimitReport stable_limit_diagnostic(std::span<const SgdTrace> traces, double alpha, const Vector& x_star,
                                          const std::vector<Vector>& directions, std::uint64_t t_final,
                                          const StableLimitOptions& options = {});

}  // namespace heavysgd
