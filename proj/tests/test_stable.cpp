#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "heavysgd/errors.hpp"
#include "heavysgd/stable.hpp"
#include "heavysgd/stats.hpp"

using namespace heavysgd;
using cd = std::complex<double>;

namespace {

// Characteristic function written out independently of the library.
cd oracle_cf(double a, double sigma, double theta, double mu, double u) {
    if (u == 0.0) return {1.0, 0.0};
    const double sg = u > 0 ? 1.0 : -1.0;
    const double au = std::abs(u);
    cd expo;
    if (a == 1.0) {
        expo = -sigma * au * (cd(1.0, 0.0) + cd(0.0, theta * (2.0 / std::numbers::pi) * sg * std::log(au)));
    } else {
        expo = -std::pow(sigma * au, a) * (cd(1.0, 0.0) - cd(0.0, theta * sg * std::tan(std::numbers::pi * a / 2)));
    }
    return std::exp(expo + cd(0.0, mu * u));
}

std::vector<double> draws(const StableParams& p, std::size_t n, std::uint64_t seed) {
    RngStream rng(seed, 0);
    std::vector<double> out(n);
    for (auto& x : out) x = sample_stable(p, rng);
    return out;
}

}  // namespace

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(StableParams({0.0, 1, 0, 0}).validate(), DomainError);
    CHECK_THROWS_AS(StableParams({2.1, 1, 0, 0}).validate(), DomainError);
    CHECK_THROWS_AS(StableParams({1.5, -1, 0, 0}).validate(), DomainError);
    CHECK_THROWS_AS(StableParams({1.5, 1, 1.5, 0}).validate(), DomainError);
    CHECK_THROWS_AS(ParetoParams({1.0, 1.0, true}).validate(), DomainError);
    CHECK_THROWS_AS(ParetoParams({1.5, 0.0, false}).validate(), DomainError);
    RngStream rng(1, 0);
    CHECK_THROWS_AS(sample_stable({0.0, 1, 0, 0}, rng), DomainError);
    CHECK_THROWS_AS(sample_pareto({0.8, 1, true}, rng), DomainError);
}

TEST_CASE("zero scale returns the location") {
    RngStream rng(1, 0);
    for (int i = 0; i < 100; ++i) CHECK(sample_stable({1.3, 0.0, 0.4, 3.5}, rng) == 3.5);
}

TEST_CASE("alpha = 2 is Gaussian with variance 2") {
    // A single KS test at 1% rejects a correct sampler one time in a hundred, so
    // check the rejection count over 20 independent samples instead:
    // P(Binomial(20, 0.01) > 3) is about 2e-5.
    int rejections = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto xs = draws({2.0, 1.0, 0.0, 0.0}, 20000, 1000 + seed);
        rejections += !stats::ks_test(xs, [](double x) { return 0.5 * std::erfc(-x / 2.0); }).pass;  // N(0, 2)
    }
    CHECK(rejections <= 3);
    // theta has no effect at alpha = 2
    CHECK(stats::ks_test(draws({2.0, 1.0, 0.9, 0.0}, 100000, 12), [](double x) { return 0.5 * std::erfc(-x / 2.0); })
              .pass);
}

TEST_CASE("alpha = 1 symmetric is standard Cauchy") {
    const auto xs = draws({1.0, 1.0, 0.0, 0.0}, 100000, 13);
    // q(u) = tan(pi (u - 1/2)) gives quartiles -1 and +1
    CHECK(std::abs(stats::quantile(xs, 0.25) + 1.0) < 0.05);
    CHECK(std::abs(stats::quantile(xs, 0.75) - 1.0) < 0.05);
}

TEST_CASE("characteristic function values") {
    CHECK(stable_char_fn({1.2, 2.0, 0.3, 1.0}, 0.0) == cd(1.0, 0.0));
    const cd v = stable_char_fn({2.0, 1.0, 0.0, 0.0}, 1.0);
    CHECK(v.real() == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(v.imag() == doctest::Approx(0.0));
    const StableParams p{1.5, 1.0, 0.5, 0.0};
    const cd plus = stable_char_fn(p, 1.0), minus = stable_char_fn(p, -1.0);
    CHECK(minus.real() == doctest::Approx(plus.real()));
    CHECK(minus.imag() == doctest::Approx(-plus.imag()));
    for (double a : {0.7, 1.0, 1.5, 2.0})
        for (double u : {-2.0, -0.3, 0.5, 3.0}) {
            const cd got = stable_char_fn({a, 0.8, -0.4, 0.2}, u);
            const cd want = oracle_cf(a, 0.8, -0.4, 0.2, u);
            CHECK(std::abs(got - want) < 1e-14);
        }
}

TEST_CASE("empirical characteristic function matches on the grid") {
    const std::size_t n = 100000;
    const double tol = 4.0 / std::sqrt(static_cast<double>(n));
    for (double a : {1.2, 1.5, 2.0})
        for (double theta : {0.0, 0.5}) {
            const auto xs = draws({a, 1.0, theta, 0.0}, n, 100 + static_cast<std::uint64_t>(10 * a + theta * 2));
            for (double u : {-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0}) {
                double re = 0.0, im = 0.0;
                for (double x : xs) {
                    re += std::cos(u * x);
                    im += std::sin(u * x);
                }
                const cd want = oracle_cf(a, 1.0, theta, 0.0, u);
                CAPTURE(a);
                CAPTURE(theta);
                CAPTURE(u);
                CHECK(std::abs(re / n - want.real()) <= tol);
                CHECK(std::abs(im / n - want.imag()) <= tol);
            }
        }
}

TEST_CASE("Pareto inverse transform") {
    CHECK(pareto_from_uniform({1.7, 2.5, false}, 1.0) == 2.5);
    CHECK(pareto_from_uniform({2.0, 1.0, false}, 0.25) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(pareto_from_uniform({1.5, 1.0, true}, 1.0) == doctest::Approx(1.0 - 3.0));
    CHECK_THROWS_AS(pareto_from_uniform({1.5, 1.0, false}, 0.0), DomainError);
}

TEST_CASE("centered Pareto has mean zero") {
    RngStream rng(21, 0);
    const ParetoParams p{1.5, 1.0, true};
    double sum = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) sum += sample_pareto(p, rng);
    CHECK(std::abs(sum / n) < 0.05);
}

TEST_CASE("Pareto tail fractions") {
    RngStream rng(22, 0);
    const double a = 1.5, c = 2.0;
    const int n = 200000;
    std::vector<double> xs(n);
    for (auto& x : xs) x = sample_pareto({a, c, false}, rng);
    for (double m : {2.0, 4.0, 8.0}) {
        const double prob = std::pow(m, -a);
        const double frac = std::count_if(xs.begin(), xs.end(), [&](double x) { return x > m * c; }) / double(n);
        CHECK(std::abs(frac - prob) <= 3.0 * std::sqrt(prob * (1 - prob) / n));
    }
}

TEST_CASE("symmetrize") {
    RngStream rng(23, 0);
    const Sampler three = symmetrize([](RngStream&) { return 3.0; });
    int plus = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = three(rng);
        CHECK(std::abs(v) == 3.0);
        plus += v > 0;
    }
    CHECK(std::abs(plus / double(n) - 0.5) < 0.01);

    const Sampler sp = ScalarLaw::symmetric_pareto(1.5).sampler();
    const int m = 1000000;
    std::vector<double> xs(m);
    for (auto& x : xs) x = sp(rng);
    // Mean exists (alpha > 1); its standard error is estimated from the sample.
    CHECK(std::abs(stats::mean(xs)) <= 3.0 * stats::stddev(xs) / std::sqrt(double(m)));

    std::vector<double> a(20000), b(20000);
    for (auto& x : a) x = sp(rng);
    for (auto& x : b) x = -sp(rng);
    CHECK(stats::ks_test_two_sample(a, b).pass);
}

TEST_CASE("Hill estimator") {
    const std::size_t n = 100000;
    const double a = 1.5;
    std::vector<double> exact(n);
    for (std::size_t i = 0; i < n; ++i) exact[i] = std::pow((i + 1.0) / (n + 1.0), -1.0 / a);
    const double h = hill_tail_index(exact);
    CHECK(h >= 1.4);
    CHECK(h <= 1.6);

    std::vector<double> same(1000, 2.0);
    CHECK_THROWS_AS(hill_tail_index(same), InsufficientDataError);
    CHECK_THROWS_AS(hill_tail_index(std::vector<double>{1.0, 2.0}, 5), InsufficientDataError);

    RngStream rng(31, 0);
    std::vector<double> g(n);
    for (auto& x : g) x = rng.normal();
    CHECK(hill_tail_index(g) > 2.5);

    // Scaling by a power of two is exact in floating point, so the estimate is unchanged bit for bit.
    std::vector<double> scaled(g);
    for (auto& x : scaled) x *= 4.0;
    CHECK(hill_tail_index(scaled) == hill_tail_index(g));
    CHECK(hill_tail_index(scaled, 50) == hill_tail_index(g, 50));
}

TEST_CASE("self-similarity test") {
    const auto st = draws({1.5, 1.0, 0.0, 0.0}, 10000, 41);
    CHECK(self_similarity_test(st, 1.5).pass);

    RngStream rng(42, 0);
    std::vector<double> uni(10000);
    for (auto& x : uni) x = 2.0 * rng.uniform() - 1.0;
    CHECK_FALSE(self_similarity_test(uni, 1.5).pass);

    // Pareto is only attracted to a stable law: the statistic is recorded, not gated.
    std::vector<double> par(10000);
    for (auto& x : par) x = sample_pareto({1.5, 1.0, true}, rng);
    const auto rep = self_similarity_test(par, 1.5);
    CHECK(std::isfinite(rep.statistic));
    CHECK(rep.sums == 2500);
    CHECK(rep.singles == 5000);

    CHECK_THROWS_AS(self_similarity_test(std::vector<double>(201, 1.0), 1.5), InsufficientDataError);
    CHECK_THROWS_AS(self_similarity_test(std::vector<double>(100, 1.0), 1.5), InsufficientDataError);
}

TEST_CASE("scalar laws") {
    RngStream a(5, 0), b(5, 0);
    const auto law = ScalarLaw::stable(1.5, 2.0, 0.3);
    CHECK(law.draw(a) == sample_stable({1.5, 2.0, 0.3, 0.0}, b));
    CHECK(ScalarLaw::gaussian(1.0).tail_index() == 2.0);
    CHECK(std::isinf(ScalarLaw::zero().tail_index()));
    CHECK(ScalarLaw::symmetric_pareto(1.3).tail_index() == 1.3);
    CHECK(scalar_law_kind_from_string(to_string(ScalarLaw::Kind::pareto)) == ScalarLaw::Kind::pareto);
    RngStream z(1, 0);
    CHECK(ScalarLaw::zero().draw(z) == 0.0);
}
