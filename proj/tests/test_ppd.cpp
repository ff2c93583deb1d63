#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "heavysgd/errors.hpp"
#include "heavysgd/linalg.hpp"
#include "heavysgd/ppd.hpp"
#include "heavysgd/rng.hpp"

using namespace heavysgd;

namespace {

const SymMatrix worked = SymMatrix::from_rows({{1.0, 1.5}, {1.5, 4.0}});

// Brute-force min of v^T Q v^<p-1> over the 2-D l_p sphere, v = (cos t, sin t) / ||.||_p.
double brute_margin_2d(const Matrix& q, double p, int steps = 200000) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < steps; ++k) {
        const double t = 2.0 * M_PI * k / steps;
        double v0 = std::cos(t), v1 = std::sin(t);
        const double norm = std::pow(std::pow(std::abs(v0), p) + std::pow(std::abs(v1), p), 1.0 / p);
        v0 /= norm;
        v1 /= norm;
        auto sp = [&](double x) { return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), p - 1.0), x); };
        const double w0 = sp(v0), w1 = sp(v1);
        const double val = v0 * (q(0, 0) * w0 + q(0, 1) * w1) + v1 * (q(1, 0) * w0 + q(1, 1) * w1);
        best = std::min(best, val);
    }
    return best;
}

double oracle_diag_dominance(const Matrix& q) {
    double m = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        double off = 0.0;
        for (Eigen::Index j = 0; j < q.cols(); ++j)
            if (j != i) off += std::abs(q(i, j));
        m = std::min(m, q(i, i) - off);
    }
    return m;
}

SymMatrix random_sym(RngStream& rng, Eigen::Index n) {
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = 4.0 * rng.uniform() - 2.0;
    // Shift the diagonal so a mix of definite and indefinite cases appears.
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) += 2.0 * rng.uniform();
    return SymMatrix(m);
}

}  // namespace

TEST_CASE("signed power") {
    Vector v(2);
    v << 2, -3;
    CHECK(signed_power(v, 1.0) == v);
    Vector w(3);
    w << 2, -3, 0;
    Vector e(3);
    e << 1, -1, 0;
    CHECK(signed_power(w, 0.0) == e);
    Vector r(2);
    r << 4, -9;
    CHECK(signed_power(r, 0.5).isApprox(v, 1e-15));
    CHECK_THROWS_AS(signed_power(v, -0.5), DomainError);
}

TEST_CASE("duality identity v^T v^<p-1> = ||v||_p^p") {
    RngStream rng(3, 0);
    for (int k = 0; k < 1000; ++k) {
        Vector v(4);
        for (auto& x : v) x = rng.normal() * std::exp(rng.normal());
        const double p = 1.0 + rng.uniform();
        CHECK(std::abs(v.dot(signed_power(v, p - 1.0)) - lp_norm_pow(v, p)) <= 1e-12 * (1 + lp_norm_pow(v, p)));
    }
}

TEST_CASE("symmetric matrix construction") {
    CHECK_THROWS_AS(SymMatrix::from_rows({{1, 2}, {0, 1}}), ValidationError);
    const auto s = SymMatrix::from_rows({{1, 2 + 1e-13}, {2, 1}});
    CHECK(s(0, 1) == s(1, 0));
}

TEST_CASE("identity margin is one") {
    for (Eigen::Index n : {1, 2, 3, 5})
        for (double p : {1.0, 1.3, 1.5, 2.0}) {
            const auto r = ppd_margin(SymMatrix::identity(n), p);
            CAPTURE(n);
            CAPTURE(p);
            CHECK(r.margin == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(r.member_pd);
        }
}

TEST_CASE("diagonal margin at p = 1.5") {
    const auto q = SymMatrix::from_rows({{2, 0}, {0, 3}});
    const double brute = brute_margin_2d(q.matrix(), 1.5);
    CHECK(brute == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(ppd_margin(q, 1.5).margin == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("worked 2x2 matrix") {
    const double eig = (5.0 - std::sqrt(18.0)) / 2.0;
    const auto r2 = ppd_margin(worked, 2.0);
    CHECK(r2.margin == doctest::Approx(eig).epsilon(1e-6));
    CHECK(r2.margin == doctest::Approx(0.3787).epsilon(1e-4));
    const auto r1 = ppd_margin(worked, 1.0);
    CHECK(r1.margin == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK_FALSE(r1.member_psd);
    // Interior p against a brute-force scan of the sphere.
    for (double p : {1.25, 1.5, 1.75}) {
        CAPTURE(p);
        CHECK(ppd_margin(worked, p).margin == doctest::Approx(brute_margin_2d(worked.matrix(), p)).epsilon(1e-6));
    }
}

TEST_CASE("diagonal dominance margin") {
    CHECK(diag_dominance_margin(SymMatrix::identity(3)) == 1.0);
    CHECK(diag_dominance_margin(SymMatrix::from_rows({{2, 1}, {1, 2}})) == 1.0);
    CHECK(diag_dominance_margin(worked) == -0.5);
}

TEST_CASE("report invariants") {
    RngStream rng(5, 0);
    for (int k = 0; k < 40; ++k) {
        const auto q = random_sym(rng, 2 + k % 3);
        for (double p : {1.0, 1.5, 2.0}) {
            const auto r = ppd_margin(q, p);
            CHECK(lp_norm(r.witness, p) == doctest::Approx(1.0).epsilon(1e-9));
            CHECK((!r.member_pd || r.member_psd));
            // The witness attains (or, at p = 1, approaches) the margin.
            CHECK(ppd_objective(q, r.witness, p) == doctest::Approx(r.margin).epsilon(1e-6));
        }
    }
}

TEST_CASE("p = 2 margin is the smallest eigenvalue, p = 1 margin the dominance margin") {
    RngStream rng(6, 0);
    for (int k = 0; k < 60; ++k) {
        const Eigen::Index n = 2 + k % 3;  // dimensions 2..4
        const auto q = random_sym(rng, n);
        Eigen::SelfAdjointEigenSolver<Matrix> es(q.matrix());
        const double eig = es.eigenvalues()(0);
        const double m2 = ppd_margin(q, 2.0).margin;
        CAPTURE(n);
        CHECK(std::abs(m2 - eig) <= 1e-3 * std::abs(eig) + 1e-12);
        CHECK(std::abs(ppd_margin(q, 1.0).margin - oracle_diag_dominance(q.matrix())) <= 1e-9);
    }
}

TEST_CASE("positive homogeneity") {
    RngStream rng(7, 0);
    for (int k = 0; k < 20; ++k) {
        const auto q = random_sym(rng, 3);
        for (double p : {1.0, 1.4, 2.0}) {
            const double m = ppd_margin(q, p).margin;
            const double m3 = ppd_margin(q.scaled(3.0), p).margin;
            CHECK(std::abs(m3 - 3.0 * m) <= 1e-6 * (1.0 + std::abs(m)));
        }
    }
}

TEST_CASE("large dimensions") {
    const auto big = SymMatrix::identity(10);
    CHECK(ppd_margin(big, 2.0).method == "eigen");
    CHECK(ppd_margin(big, 1.0).margin == 1.0);
    CHECK_THROWS_AS(ppd_margin(big, 1.5), DomainError);
    CHECK_THROWS_AS(ppd_margin(SymMatrix::identity(2), 2.5), DomainError);
    CHECK_THROWS_AS(ppd_margin(SymMatrix::identity(2), 2.0, 4), DomainError);
}

TEST_CASE("contraction check") {
    const std::vector<double> t1{0.1};
    const auto id = contraction_check(SymMatrix::identity(2), 2.0, t1);
    CHECK(id.rows[0].norm_pow == doctest::Approx(0.81).epsilon(1e-9));
    // Any L <= 1.9 satisfies 0.81 <= 1 - 0.1 L.
    CHECK(id.rows[0].norm_pow <= 1.0 - 0.1 * 1.9 + 1e-12);
    CHECK(id.rows[0].satisfied);

    const std::vector<double> t2{0.05};
    const auto d = contraction_check(SymMatrix::from_rows({{1, 0}, {0, 2}}), 1.5, t2);
    CHECK(d.rows[0].norm_pow < 1.0);
    CHECK(d.norm_is_lower_bound);

    // l_1 operator norm is the largest absolute column sum: I - 0.1 Q = [[0.9, -0.15], [-0.15, 0.6]] -> 1.05.
    const auto w = contraction_check(worked, 1.0, t1);
    CHECK(w.margin == -0.5);
    CHECK(w.rows[0].norm_pow == doctest::Approx(1.05).epsilon(1e-9));
    CHECK(w.rows[0].norm_pow >= 1.0);
    CHECK(w.rows[0].rate == 0.0);
}

TEST_CASE("cone classification") {
    const std::vector<double> ps{1.5};
    const auto dd = classify_cones(SymMatrix::from_rows({{2, 1}, {1, 2}}), ps);
    for (const auto& row : dd.rows) CHECK(row.report.member_pd);
    CHECK(dd.ordering_consistent());

    const auto w = classify_cones(worked, ps);
    CHECK_FALSE(w.at(1.0).report.member_pd);
    CHECK(w.at(2.0).report.member_pd);
    CHECK(w.at(1.0).reference_agrees);
    CHECK(w.at(2.0).reference_agrees);
    CHECK(w.at(1.5).report.member_pd == (w.at(1.5).report.margin > w.at(1.5).report.tolerance));
    CHECK(w.ordering_consistent());

    const auto neg = classify_cones(SymMatrix::identity(3).scaled(-1.0), ps);
    for (const auto& row : neg.rows) {
        CHECK_FALSE(row.report.member_psd);
        CHECK(row.report.margin == doctest::Approx(-1.0).epsilon(1e-9));
    }

    const auto zero = classify_cones(SymMatrix(Matrix::Zero(2, 2)), ps);
    for (const auto& row : zero.rows) {
        CHECK(row.report.member_psd);
        CHECK_FALSE(row.report.member_pd);
    }
}

TEST_CASE("cone ordering holds on random matrices") {
    RngStream rng(8, 0);
    const std::vector<double> ps{1.0, 1.25, 1.5, 1.75, 2.0};
    for (int k = 0; k < 50; ++k) {
        const auto c = classify_cones(random_sym(rng, 2 + k % 2), ps);
        CHECK(c.ordering_consistent());
    }
}

TEST_CASE("spectral norm closed forms agree with SVD") {
    RngStream rng(9, 0);
    for (Eigen::Index n : {1, 2, 3, 4, 6}) {
        for (int k = 0; k < 20; ++k) {
            Matrix m(n, n);
            for (auto& x : m.reshaped()) x = rng.normal();
            Eigen::JacobiSVD<Matrix> svd(m);
            CHECK(spectral_norm(m) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-9));
        }
    }
}
