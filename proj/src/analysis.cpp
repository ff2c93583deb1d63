#include "heavysgd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "heavysgd/errors.hpp"
#include "heavysgd/ppd.hpp"

namespace heavysgd {

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

std::vector<const SgdTrace*> uncensored(std::span<const SgdTrace> traces, std::size_t& censored) {
    std::vector<const SgdTrace*> kept;
    censored = 0;
    for (const auto& t : traces) {
        if (t.censored) {
            ++censored;
        } else {
            kept.push_back(&t);
        }
    }
    return kept;
}

}  // namespace

MomentCurve moment_curve(std::span<const SgdTrace> traces, double p, const Vector& x_star,
                         const MomentCurveOptions& options) {
    if (!(p > 0.0 && p < 2.0)) throw DomainError("moment order p must lie in (0, 2)");
    MomentCurve curve;
    curve.p = p;
    curve.replications = traces.size();
    const auto kept = uncensored(traces, curve.censored);
    if (kept.empty()) throw EstimationError("moment_curve: every replication is censored");

    curve.times = kept.front()->checkpoints;
    for (const auto* t : kept) {
        if (t->checkpoints != curve.times) throw DomainError("moment_curve: traces use different checkpoint plans");
        if (t->iterates.size() != curve.times.size()) throw DomainError("moment_curve: malformed trace");
    }
    if (x_star.size() != kept.front()->iterates.front().size())
        throw DomainError("moment_curve: x_star dimension mismatch");

    const std::size_t m = curve.times.size();
    const std::size_t r = kept.size();

    // Per-checkpoint error magnitudes, replication-major for bootstrap reuse.
    std::vector<std::vector<double>> mags(m, std::vector<double>(r));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < r; ++k) mags[i][k] = (kept[k]->iterates[i] - x_star).norm();

    try {
        curve.error_tail_index = hill_tail_index(mags.back());
        curve.heavy = *curve.error_tail_index < 2.0 * p;
    } catch (const InsufficientDataError&) {
        curve.heavy = false;
    }

    curve.values.resize(m);
    curve.std_errors.resize(m);
    curve.band_low.resize(m);
    curve.band_high.resize(m);
    std::vector<std::vector<double>> powed(m, std::vector<double>(r));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < r; ++k) powed[i][k] = std::pow(mags[i][k], p);
        curve.values[i] = stats::mean(powed[i]);
        const double se = r > 1 ? stats::stddev(powed[i]) / std::sqrt(static_cast<double>(r)) : 0.0;
        curve.std_errors[i] = curve.heavy ? nan_v : se;
        curve.band_low[i] = curve.values[i] - se;
        curve.band_high[i] = curve.values[i] + se;
    }

    if (curve.heavy && options.bootstrap_resamples > 1) {
        // One resampling of replication indices per bootstrap draw, shared by all
        // checkpoints so the bands describe whole curves.
        RngStream rng(options.bootstrap_seed, 0);
        const std::size_t b = options.bootstrap_resamples;
        std::vector<std::vector<double>> boot(m, std::vector<double>(b));
        std::vector<std::size_t> idx(r);
        for (std::size_t s = 0; s < b; ++s) {
            for (auto& v : idx) v = static_cast<std::size_t>(rng.next_u64() % r);
            for (std::size_t i = 0; i < m; ++i) {
                double acc = 0.0;
                for (auto k : idx) acc += powed[i][k];
                boot[i][s] = acc / static_cast<double>(r);
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            curve.band_low[i] = stats::quantile(boot[i], 0.25);
            curve.band_high[i] = stats::quantile(boot[i], 0.75);
        }
    }
    return curve;
}

MomentCurve curve_from_values(std::vector<std::uint64_t> times, std::vector<double> values, double p) {
    if (times.size() != values.size()) throw DomainError("curve_from_values: size mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1]) throw DomainError("curve_from_values: times must increase strictly");
    MomentCurve c;
    c.p = p;
    c.times = std::move(times);
    c.values = std::move(values);
    c.std_errors.assign(c.values.size(), 0.0);
    c.band_low = c.values;
    c.band_high = c.values;
    c.replications = 1;
    return c;
}

double RateFit::predict(double t) const {
    return std::exp(intercept + slope * std::log(t));
}

RateFit fit_rate(const MomentCurve& curve, std::uint64_t burn_in, double theory_slope) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        if (curve.times[i] < burn_in) continue;
        const double v = curve.values[i];
        if (!(v > 0.0) || !std::isfinite(v))
            throw DomainError("fit_rate: non-positive curve value " + std::to_string(v) + " at t = " +
                              std::to_string(curve.times[i]));
        lx.push_back(std::log(static_cast<double>(curve.times[i])));
        ly.push_back(std::log(v));
    }
    if (lx.size() < 5)
        throw InsufficientDataError("fit_rate: " + std::to_string(lx.size()) + " points after burn-in, need 5");

    const double n = static_cast<double>(lx.size());
    const double mx = stats::mean(lx);
    const double my = stats::mean(ly);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    RateFit fit;
    fit.burn_in = burn_in;
    fit.points = lx.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double e = ly[i] - fit.intercept - fit.slope * lx[i];
        sse += e * e;
    }
    // A flat curve has nothing to explain; it is fitted perfectly.
    const double scale = std::max(1.0, std::abs(my)) * std::max(1.0, n);
    fit.r_squared = syy <= 1e-24 * scale ? 1.0 : std::clamp(1.0 - sse / syy, 0.0, 1.0);
    fit.theory_slope = theory_slope;
    fit.abs_gap = std::abs(fit.slope - theory_slope);
    return fit;
}

double lp_rate_exponent(double rho, double p) {
    return -rho * (p - 1.0);
}

double heavy_tail_rate_exponent(double rho, double q, double alpha) {
    return -rho * q * (alpha - 1.0) / alpha;
}

ExponentCondition gclt_exponent_condition(double alpha, double rho, double p) {
    ExponentCondition c;
    c.lower = std::max((alpha + alpha * rho) / (1.0 + alpha * rho), alpha * rho);
    c.upper = alpha;
    c.holds = c.lower <= p && p <= c.upper;
    return c;
}

bool gclt_exponent_feasible(double alpha, double rho) {
    return gclt_exponent_condition(alpha, rho, alpha).holds;
}

// ---------------------------------------------------------------------------

std::vector<double> fabian_recursion(double a, double b, double alpha, double beta, double b0, std::size_t horizon) {
    if (!(a > 0.0)) throw DomainError("fabian_recursion: A must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("fabian_recursion: alpha must lie in (0, 1)");
    if (horizon < 10) throw DomainError("fabian_recursion: T must be >= 10");
    std::vector<double> out(horizon);
    out[0] = b0;
    for (std::size_t t = 1; t < horizon; ++t) {
        const double td = static_cast<double>(t);
        const double ta = std::pow(td, -alpha);
        out[t] = out[t - 1] * (1.0 - a * ta) + b * ta * std::pow(td, -beta);
    }
    return out;
}

double relative_oscillation(std::span<const double> b, double beta, std::size_t t_lo, std::size_t t_hi) {
    if (t_lo < 1 || t_hi > b.size() || t_lo > t_hi) throw DomainError("relative_oscillation: bad range");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    for (std::size_t t = t_lo; t <= t_hi; ++t) {
        const double v = std::pow(static_cast<double>(t), beta) * b[t - 1];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    const double mean = sum / static_cast<double>(t_hi - t_lo + 1);
    if (mean == 0.0) return hi == lo ? 0.0 : std::numeric_limits<double>::infinity();
    return (hi - lo) / std::abs(mean);
}

namespace {

void check_rho_kappa(double rho, double kappa, double gamma0) {
    if (!(rho > 0.0 && rho < kappa && kappa <= 1.0)) throw DomainError("need 0 < rho < kappa <= 1");
    if (!(gamma0 > 0.0)) throw DomainError("gamma0 must be > 0");
}

}  // namespace

std::vector<double> check_rho_exp(double rho, double kappa, double lam, double gamma0, std::size_t horizon) {
    check_rho_kappa(rho, kappa, gamma0);
    if (!(lam > 0.0)) throw DomainError("check_rho_exp: lambda must be > 0");
    if (horizon < 1) throw DomainError("check_rho_exp: T must be >= 1");
    std::vector<double> s(horizon);
    double e = 0.0;  // E_1 = 0 (empty sum)
    s[0] = 0.0;
    for (std::size_t t = 1; t < horizon; ++t) {
        const double gamma = gamma0 * std::pow(static_cast<double>(t), -rho);
        e = std::exp(-lam * gamma) * (e + 1.0);
        s[t] = std::pow(static_cast<double>(t + 1), -kappa) * e;
    }
    return s;
}

std::vector<double> check_phi_sum(const SymMatrix& a, double rho, double kappa, double gamma0, std::size_t horizon) {
    check_rho_kappa(rho, kappa, gamma0);
    if (a.min_eigenvalue() <= 0.0) throw DomainError("check_phi_sum: A must be positive definite");
    if (horizon < 1) throw DomainError("check_phi_sum: T must be >= 1");
    const auto n = a.dim();
    const Matrix& am = a.matrix();
    const Matrix a_inv = am.inverse();
    const Matrix id = Matrix::Identity(n, n);

    std::vector<double> gamma(horizon + 1);
    for (std::size_t i = 1; i <= horizon; ++i) gamma[i] = gamma0 * std::pow(static_cast<double>(i), -rho);

    std::vector<double> sums(horizon + 1, 0.0);  // sums[t] = sum_{j<t} ||Phi_j^t||
    Matrix x(n, n), acc(n, n);
    for (std::size_t j = 1; j < horizon; ++j) {
        x = id;               // X_j^j
        acc.setZero();        // sum_{i=j}^{t-1} X_j^i
        for (std::size_t t = j + 1; t <= horizon; ++t) {
            acc += x;         // adds X_j^{t-1}
            sums[t] += spectral_norm(a_inv - gamma[j] * acc);
            x -= gamma[t - 1] * (am * x);  // X_j^t
        }
    }
    std::vector<double> u(horizon);
    for (std::size_t t = 1; t <= horizon; ++t) u[t - 1] = std::pow(static_cast<double>(t), -kappa) * sums[t];
    return u;
}

std::vector<double> phi_sum_diagonal(std::span<const double> diag, double rho, double kappa, double gamma0,
                                     std::size_t horizon) {
    check_rho_kappa(rho, kappa, gamma0);
    for (double d : diag)
        if (!(d > 0.0)) throw DomainError("phi_sum_diagonal: entries must be > 0");
    std::vector<double> gamma(horizon + 1);
    for (std::size_t i = 1; i <= horizon; ++i) gamma[i] = gamma0 * std::pow(static_cast<double>(i), -rho);

    std::vector<double> sums(horizon + 1, 0.0);
    std::vector<double> prod(diag.size()), acc(diag.size());
    for (std::size_t j = 1; j < horizon; ++j) {
        std::fill(prod.begin(), prod.end(), 1.0);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t t = j + 1; t <= horizon; ++t) {
            double worst = 0.0;
            for (std::size_t k = 0; k < diag.size(); ++k) {
                acc[k] += prod[k];
                worst = std::max(worst, std::abs(1.0 / diag[k] - gamma[j] * acc[k]));
                prod[k] *= 1.0 - gamma[t - 1] * diag[k];
            }
            sums[t] += worst;
        }
    }
    std::vector<double> u(horizon);
    for (std::size_t t = 1; t <= horizon; ++t) u[t - 1] = std::pow(static_cast<double>(t), -kappa) * sums[t];
    return u;
}

// ---------------------------------------------------------------------------

InequalityCheck check_vecexpandp(const Vector& x, const Vector& y, double p) {
    if (x.size() != y.size()) throw DomainError("check_vecexpandp: dimension mismatch");
    if (!(p >= 1.0 && p <= 2.0)) throw DomainError("check_vecexpandp: p must lie in [1, 2]");
    InequalityCheck c;
    c.lhs = lp_norm_pow(x + y, p);
    c.rhs = lp_norm_pow(x, p) + 4.0 * lp_norm_pow(y, p) + p * y.dot(signed_power(x, p - 1.0));
    c.holds = c.lhs <= c.rhs + 1e-12 * (1.0 + std::abs(c.rhs));
    return c;
}

SweepResult vecexpandp_sweep(std::size_t trials, RngStream rng) {
    SweepResult res;
    res.trials = trials;
    res.worst_excess = -std::numeric_limits<double>::infinity();
    const ScalarLaw cauchy = ScalarLaw::stable(1.0, 1.0);
    const ScalarLaw pareto = ScalarLaw::symmetric_pareto(1.1);
    auto coord = [&](int kind) {
        switch (kind) {
            case 0: return cauchy.draw(rng);
            case 1: return pareto.draw(rng);
            default: return rng.normal() * std::exp(4.0 * (rng.uniform() - 0.5));
        }
    };
    for (std::size_t k = 0; k < trials; ++k) {
        const auto n = static_cast<Eigen::Index>(1 + rng.next_u64() % 6);
        const int kind = static_cast<int>(rng.next_u64() % 3);
        Vector x(n), y(n);
        for (Eigen::Index i = 0; i < n; ++i) x(i) = coord(kind);
        for (Eigen::Index i = 0; i < n; ++i) y(i) = coord(kind);
        // Mix in relative scales and near-cancellation y ~ -x.
        const auto shape = rng.next_u64() % 4;
        if (shape == 1) y *= std::exp(6.0 * (rng.uniform() - 0.5));
        if (shape == 2) y = -x + 1e-3 * y;
        const auto pick = rng.next_u64() % 10;
        const double p = pick == 0 ? 1.0 : pick == 1 ? 2.0 : 1.0 + rng.uniform();
        const auto c = check_vecexpandp(x, y, p);
        if (!c.holds) ++res.violations;
        res.worst_excess = std::max(res.worst_excess, (c.lhs - c.rhs) / (1.0 + std::abs(c.rhs)));
    }
    return res;
}

PExpandResult check_p_expand(const Sampler& increment, double p, std::size_t t, std::size_t trials,
                             std::size_t n, RngStream rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("check_p_expand: p must lie in [0, 1]");
    if (t < 1 || n < 1 || trials < 2) throw DomainError("check_p_expand: need t, n >= 1 and trials >= 2");
    const double q = 1.0 + p;
    const double c = std::pow(2.0, 1.0 - p) * std::pow(static_cast<double>(n), 1.0 - q / 2.0);
    std::vector<double> lhs(trials), rhs(trials);
    Vector s(static_cast<Eigen::Index>(n)), xi(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < trials; ++k) {
        s.setZero();
        double sum_moments = 0.0;
        for (std::size_t i = 0; i < t; ++i) {
            for (auto& v : xi) v = increment(rng);
            s += xi;
            sum_moments += std::pow(xi.norm(), q);
        }
        lhs[k] = std::pow(s.norm(), q);
        rhs[k] = c * sum_moments;
    }
    const double root = std::sqrt(static_cast<double>(trials));
    PExpandResult r;
    r.lhs = stats::mean(lhs);
    r.lhs_stderr = stats::stddev(lhs) / root;
    r.bound = stats::mean(rhs);
    r.bound_stderr = stats::stddev(rhs) / root;
    r.ratio = r.lhs / r.bound;
    const double rel_l = r.lhs > 0.0 ? r.lhs_stderr / r.lhs : 0.0;
    const double rel_b = r.bound > 0.0 ? r.bound_stderr / r.bound : 0.0;
    r.relative_stderr = std::hypot(rel_l, rel_b);
    r.holds = r.lhs <= r.bound * (1.0 + 3.0 * r.relative_stderr);
    return r;
}

// ---------------------------------------------------------------------------

std::vector<Vector> default_directions(Eigen::Index n, std::size_t extra) {
    std::vector<Vector> dirs;
    for (Eigen::Index i = 0; i < n; ++i) dirs.push_back(Vector::Unit(n, i));
    // Points of the 2n-dimensional R-sequence (powers of the generalized golden
    // ratio) pushed through Box-Muller: Gaussian coordinates, so the normalized
    // vectors spread over the sphere instead of hugging the axes.
    const std::size_t d = 2 * static_cast<std::size_t>(n);
    double g = 2.0;
    for (int it = 0; it < 64; ++it) g = std::pow(1.0 + g, 1.0 / (static_cast<double>(d) + 1.0));
    std::size_t k = 1;
    while (dirs.size() < static_cast<std::size_t>(n) + extra) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto frac = [&](std::size_t j) {
                const double u = std::fmod(0.5 + static_cast<double>(k) * std::pow(g, -static_cast<double>(j + 1)), 1.0);
                return std::clamp(u, 1e-12, 1.0 - 1e-12);
            };
            const auto j = 2 * static_cast<std::size_t>(i);
            v(i) = std::sqrt(-2.0 * std::log(frac(j))) * std::cos(2.0 * std::numbers::pi * frac(j + 1));
        }
        ++k;
        const double norm = v.norm();
        if (!(norm > 1e-6) || !std::isfinite(norm)) continue;
        v /= norm;
        // Keep directions at least 15 degrees apart (up to sign); in one
        // dimension there is nothing to add.
        if (n == 1) break;
        bool separated = true;
        for (const auto& w : dirs) separated = separated && std::abs(w.dot(v)) < std::cos(std::numbers::pi / 12.0);
        if (separated) dirs.push_back(v);
    }
    return dirs;
}

std::vector<double> projected_scaled_errors(std::span<const SgdTrace> traces, double alpha, const Vector& x_star,
                                            const Vector& direction, std::uint64_t t_final) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("scaled error needs alpha in (1, 2]");
    const double scale = std::pow(static_cast<double>(t_final), 1.0 - 1.0 / alpha);
    std::vector<double> out;
    out.reserve(traces.size());
    for (const auto& tr : traces) {
        if (tr.censored) continue;
        const auto it = std::find(tr.checkpoints.begin(), tr.checkpoints.end(), t_final);
        if (it == tr.checkpoints.end())
            throw DomainError("t_final = " + std::to_string(t_final) + " is not a checkpoint");
        const auto i = static_cast<std::size_t>(it - tr.checkpoints.begin());
        out.push_back(scale * direction.dot(tr.pr_averages[i] - x_star));
    }
    return out;
}

StableLimitReport stable_limit_diagnostic(std::span<const SgdTrace> traces, double alpha, const Vector& x_star,
                                          const std::vector<Vector>& directions, std::uint64_t t_final,
                                          const StableLimitOptions& options) {
    StableLimitReport rep;
    rep.alpha = alpha;
    rep.t_final = t_final;
    const auto kept = uncensored(traces, rep.censored);
    rep.replications = kept.size();
    if (kept.size() < options.min_replications)
        throw EstimationError("stable_limit_diagnostic: " + std::to_string(kept.size()) +
                              " uncensored replications, need " + std::to_string(options.min_replications));

    // Standard symmetric reference draws; the IQR ratio converts an empirical
    // IQR into a stable scale.
    RngStream rng(options.reference_seed, 0);
    const StableParams unit{alpha, 1.0, 0.0, 0.0};
    std::vector<double> reference(options.reference_draws);
    for (auto& v : reference) v = sample_stable(unit, rng);
    const double ref_iqr = stats::interquartile_range(reference);
    const double ref_median = stats::median(reference);

    for (const auto& d : directions) {
        if (d.size() != x_star.size()) throw DomainError("direction dimension mismatch");
        DirectionDiagnostic diag;
        diag.direction = d;
        const auto sample = projected_scaled_errors(traces, alpha, x_star, d, t_final);
        diag.samples = sample.size();
        const double iqr = stats::interquartile_range(sample);
        diag.location = stats::median(sample);
        if (!(iqr > 0.0)) {
            diag.degenerate = true;
            diag.verdict = "degenerate";
            ++rep.degenerate;
            rep.directions.push_back(std::move(diag));
            continue;
        }
        diag.scale = iqr / ref_iqr;
        try {
            diag.hill = hill_tail_index(sample, options.hill_k);
            diag.hill_in_window = std::abs(*diag.hill - alpha) <= options.hill_window;
        } catch (const InsufficientDataError&) {
        }
        if (sample.size() >= 200) {
            std::vector<double> even(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(sample.size() & ~std::size_t{1}));
            diag.self_similarity = self_similarity_test(even, alpha, options.level);
        }
        std::vector<double> fitted(reference.size());
        for (std::size_t i = 0; i < reference.size(); ++i)
            fitted[i] = diag.location + diag.scale * (reference[i] - ref_median);
        diag.reference_ks = stats::ks_test_two_sample(sample, fitted, options.level);
        if (alpha == 2.0) {
            // 2-stable with scale sigma is N(mu, 2 sigma^2); quantile-matched sd.
            const double sd = iqr / (2.0 * 0.6744897501960817);
            const double mu = diag.location;
            diag.normality_ks = stats::ks_test(sample, [mu, sd](double x) { return stats::normal_cdf(x, mu, sd); },
                                               options.level);
        }

        const bool ss_ok = !diag.self_similarity || diag.self_similarity->pass;
        const bool norm_ok = !diag.normality_ks || diag.normality_ks->pass;
        // Hill does not estimate 2 for Gaussian limits; normality decides there.
        const bool tail_ok = alpha == 2.0 || diag.hill_in_window;
        const bool ok = tail_ok && ss_ok && diag.reference_ks->pass && norm_ok;
        diag.verdict = ok ? "stable" : "rejected";
        rep.hill_in_window += diag.hill_in_window ? 1 : 0;
        rep.self_similarity_passes += (diag.self_similarity && diag.self_similarity->pass) ? 1 : 0;
        rep.reference_passes += diag.reference_ks->pass ? 1 : 0;
        rep.directions.push_back(std::move(diag));
    }

    if (rep.degenerate == rep.directions.size()) {
        rep.verdict = "degenerate";
    } else {
        const bool all = std::all_of(rep.directions.begin(), rep.directions.end(), [](const auto& d) {
            return d.verdict != "rejected";
        });
        rep.verdict = all ? "stable" : "rejected";
    }
    return rep;
}

}  // namespace heavysgd
