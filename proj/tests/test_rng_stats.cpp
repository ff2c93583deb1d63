#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "heavysgd/rng.hpp"
#include "heavysgd/stats.hpp"

using namespace heavysgd;

TEST_CASE("identical seed and stream reproduce the sequence") {
    RngStream a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    RngStream c(42, 7);
    RngStream fork = c;
    CHECK(c.uniform() == fork.uniform());
}

TEST_CASE("distinct stream ids give different sequences") {
    RngStream a(42, 0), b(42, 1), c(43, 0);
    int same_ab = 0, same_ac = 0;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        same_ab += x == b.next_u64();
        same_ac += x == c.next_u64();
    }
    CHECK(same_ab == 0);
    CHECK(same_ac == 0);
    CHECK(a.sibling(9).stream_id() == 9);
    CHECK(a.sibling(9).seed() == 42);
}

TEST_CASE("uniform draws stay inside the open unit interval") {
    RngStream r(1, 0);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    // sd of the mean is sqrt(1/12/n) ~ 6.5e-4
    CHECK(std::abs(sum / n - 0.5) < 4 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal draws have unit variance and a symmetric sign") {
    RngStream r(3, 0);
    const int n = 200000;
    std::vector<double> xs(n);
    int pos = 0;
    for (auto& x : xs) x = r.normal();
    for (int i = 0; i < n; ++i) pos += r.sign() > 0;
    CHECK(std::abs(stats::mean(xs)) < 4.0 / std::sqrt(n));
    CHECK(std::abs(stats::stddev(xs) - 1.0) < 0.01);
    CHECK(std::abs(pos / double(n) - 0.5) < 0.005);
    CHECK(stats::ks_test(xs, [](double x) { return stats::normal_cdf(x); }).pass);
}

TEST_CASE("quantiles follow the type-7 definition") {
    const std::vector<double> xs{4, 1, 3, 2};
    CHECK(stats::quantile(xs, 0.0) == 1.0);
    CHECK(stats::quantile(xs, 1.0) == 4.0);
    CHECK(stats::median(xs) == doctest::Approx(2.5));
    // h = (n-1) p = 0.75 -> 1 + 0.75 (2 - 1)
    CHECK(stats::quantile(xs, 0.25) == doctest::Approx(1.75));
    CHECK(stats::interquartile_range(xs) == doctest::Approx(1.5));
}

TEST_CASE("Kolmogorov distribution matches its series") {
    // P(K <= x) = 1 - 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)
    auto series = [](double x) {
        double s = 0.0;
        for (int k = 1; k < 100; ++k) s += (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * x * x);
        return 1.0 - 2.0 * s;
    };
    for (double x : {0.3, 0.5, 0.8, 1.0, 1.36, 1.63, 2.0}) CHECK(stats::kolmogorov_cdf(x) == doctest::Approx(series(x)).epsilon(1e-9));
    CHECK(stats::kolmogorov_cdf(0.05) < 1e-50);
    CHECK(stats::kolmogorov_critical(0.01) == doctest::Approx(1.6276).epsilon(1e-4));
    CHECK(stats::kolmogorov_critical(0.05) == doctest::Approx(1.3581).epsilon(1e-4));
}

TEST_CASE("KS statistics on small hand-checked samples") {
    // Uniform cdf, sample {0.1, 0.6}: D = max(1/2 - 0.1, 0.6 - 1/2, 1 - 0.6, ...) = 0.4
    const std::vector<double> s{0.6, 0.1};
    CHECK(stats::ks_statistic(s, [](double x) { return x; }) == doctest::Approx(0.4));
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    CHECK(stats::ks_statistic_two_sample(a, b) == doctest::Approx(1.0));
    CHECK(stats::ks_statistic_two_sample(a, a) == doctest::Approx(0.0));
    const std::vector<double> c{1, 2, 3, 4}, d{3, 4};
    CHECK(stats::ks_statistic_two_sample(c, d) == doctest::Approx(0.5));
}

TEST_CASE("two-sample KS separates shifted samples and accepts equal laws") {
    RngStream r(5, 0);
    std::vector<double> a(5000), b(5000), c(5000);
    for (auto& x : a) x = r.normal();
    for (auto& x : b) x = r.normal();
    for (auto& x : c) x = r.normal() + 0.2;
    CHECK(stats::ks_test_two_sample(a, b).pass);
    CHECK_FALSE(stats::ks_test_two_sample(a, c).pass);
}
