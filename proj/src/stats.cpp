#include "heavysgd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "heavysgd/errors.hpp"

namespace heavysgd::stats {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw InsufficientDataError("mean of empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    // Shifted two-pass sums: exact zero for a constant sample.
    const double shift = xs[0];
    double s1 = 0.0;
    for (double x : xs) s1 += x - shift;
    const double d = s1 / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - shift - d) * (x - shift - d);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double quantile(std::span<const double> xs, double prob) {
    if (xs.empty()) throw InsufficientDataError("quantile of empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile probability outside [0, 1]");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const double h = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::span<const double> xs) { return quantile(xs, 0.5); }

double interquartile_range(std::span<const double> xs) {
    return quantile(xs, 0.75) - quantile(xs, 0.25);
}

double normal_cdf(double x, double mean, double sd) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double kolmogorov_cdf(double x) {
    if (x <= 0.0) return 0.0;
    if (x < 0.2) {
        // Jacobi-theta form converges fast near zero.
        const double pi2 = 9.869604401089358;
        double sum = 0.0;
        for (int k = 1; k <= 50; k += 2) sum += std::exp(-k * k * pi2 / (8.0 * x * x));
        return std::sqrt(2.0 * 3.141592653589793) / x * sum;
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return 1.0 - 2.0 * sum;
}

double kolmogorov_critical(double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("significance level outside (0, 1)");
    double lo = 0.2, hi = 5.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (kolmogorov_cdf(mid) < 1.0 - level ? lo : hi) = mid;
    }
    return hi;
}

double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw InsufficientDataError("KS test on empty sample");
    std::vector<double> v(sample.begin(), sample.end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = cdf(v[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_statistic_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InsufficientDataError("KS test on empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    return d;
}

namespace {

KsResult finish(double d, double n_eff, double level) {
    const double root = std::sqrt(n_eff);
    KsResult r;
    r.statistic = d;
    r.threshold = kolmogorov_critical(level) / root;
    r.p_value = 1.0 - kolmogorov_cdf((root + 0.12 + 0.11 / root) * d);
    r.pass = d < r.threshold;
    return r;
}

}  // namespace

KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf,
                 double level) {
    return finish(ks_statistic(sample, cdf), static_cast<double>(sample.size()), level);
}

KsResult ks_test_two_sample(std::span<const double> a, std::span<const double> b, double level) {
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    return finish(ks_statistic_two_sample(a, b), na * nb / (na + nb), level);
}

}  // namespace heavysgd::stats
