#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "heavysgd/errors.hpp"
#include "heavysgd/models.hpp"
#include "heavysgd/ppd.hpp"
#include "heavysgd/stats.hpp"

using namespace heavysgd;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

Matrix chol2() {
    Matrix l(2, 2);
    l << 1.0, 0.0, 0.5, 0.8;
    return l;
}

LinearModelSpec ols_spec(ScalarLaw eps = ScalarLaw::symmetric_pareto(1.5)) {
    return {vec({1.0, -1.0}), chol2(), eps};
}

GlmSpec glm_spec(Cgf cgf, double lambda, std::size_t panel = 100000) {
    GlmSpec s;
    s.cgf = cgf;
    s.lambda = lambda;
    s.beta0 = vec({1.0, -1.0});
    s.cov_chol = chol2();
    s.eps = ScalarLaw::symmetric_pareto(1.5);
    s.panel_size = panel;
    return s;
}

}  // namespace

TEST_CASE("cumulant generating functions") {
    for (double x = -60.0; x <= 60.0; x += 0.01) {
        CHECK(cgf_d2(Cgf::logistic, x) >= 0.0);
        CHECK(cgf_d2(Cgf::linear, x) >= 0.0);
        if (std::abs(x) <= 50.0) CHECK(std::abs(cgf_d1(Cgf::logistic, x)) <= 1.0 * (1.0 + std::abs(x)));
    }
    CHECK(cgf_value(Cgf::logistic, 0.0) == doctest::Approx(std::log(2.0)));
    CHECK(cgf_value(Cgf::logistic, 800.0) == doctest::Approx(800.0));
    CHECK(cgf_d1(Cgf::logistic, 0.0) == 0.5);
    CHECK(cgf_d2(Cgf::logistic, 0.0) == 0.25);
    CHECK(cgf_d1(Cgf::linear, 3.0) == 3.0);
    // Derivatives against central differences.
    for (double x : {-3.0, -0.2, 0.7, 4.0}) {
        const double h = 1e-5;
        CHECK(cgf_d1(Cgf::logistic, x) ==
              doctest::Approx((cgf_value(Cgf::logistic, x + h) - cgf_value(Cgf::logistic, x - h)) / (2 * h)).epsilon(1e-8));
        CHECK(cgf_d2(Cgf::logistic, x) ==
              doctest::Approx((cgf_d1(Cgf::logistic, x + h) - cgf_d1(Cgf::logistic, x - h)) / (2 * h)).epsilon(1e-7));
    }
    CHECK(cgf_from_string("logistic") == Cgf::logistic);
    CHECK_THROWS_AS(cgf_from_string("poisson"), ValidationError);
}

TEST_CASE("model validation") {
    auto bad = ols_spec();
    bad.cov_chol = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(OlsModel{bad}, ValidationError);
    auto uncentered = ols_spec(ScalarLaw{ScalarLaw::Kind::pareto, 1.5, 1.0, 0.0, false, false});
    CHECK_THROWS_AS(OlsModel{uncentered}, ValidationError);
    auto g = glm_spec(Cgf::logistic, 0.0, 100);
    CHECK_THROWS_AS(GlmModel{g}, ValidationError);
}

TEST_CASE("OLS decomposition identity") {
    const OlsModel model(ols_spec());
    RngStream rng(3, 0), xr(4, 0);
    for (int k = 0; k < 1000; ++k) {
        const Vector x = vec({3.0 * xr.normal(), 3.0 * xr.normal()});
        const auto s = ols_noise_step(model, x, rng);
        const Vector resid = s.g - model.gradient(x) - s.zeta - s.m;
        CHECK(resid.norm() <= 1e-12 * (1.0 + s.g.norm() + s.zeta.norm() + s.m.norm()));
    }
    CHECK(model.x_star() == vec({1.0, -1.0}));
    CHECK(model.gradient(model.x_star()).norm() < 1e-15);
}

TEST_CASE("OLS at the optimum with zero noise: g = zeta + m") {
    const OlsModel model(ols_spec(ScalarLaw::zero()));
    RngStream rng(5, 0);
    const auto s = ols_noise_step(model, model.x_star(), rng);
    CHECK((s.g - (s.zeta + s.m)).norm() < 1e-14);
    // With eps = 0 at x = beta0, g = z (z^T beta0 - y) = 0 as well.
    CHECK(s.g.norm() < 1e-14);
}

TEST_CASE("OLS degenerate model has zeta identically zero") {
    const OlsModel model({Vector::Zero(2), Matrix::Identity(2, 2), ScalarLaw::zero()});
    RngStream rng(6, 0);
    for (int k = 0; k < 100; ++k) CHECK(ols_noise_step(model, vec({1.0, 2.0}), rng).zeta.norm() == 0.0);
}

TEST_CASE("OLS m second moment stays within 3 ||E zz^T|| E|z|^2") {
    const OlsModel model(ols_spec());
    const Matrix s = model.second_moment();
    const double c = 3.0 * spectral_norm(s) * s.trace();
    RngStream rng(7, 0), xr(8, 0);
    double sum = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const Vector x = vec({5.0 * xr.normal(), 5.0 * xr.normal()});
        const auto st = ols_noise_step(model, x, rng);
        sum += st.m.squaredNorm() / (1.0 + x.squaredNorm());
    }
    CHECK(sum / n <= c);
    CHECK(model.k_constant() >= c / 3.0);
}

TEST_CASE("OLS Hessian is the second moment at every x") {
    const OlsModel model(ols_spec());
    const auto h1 = hessian_at(model, vec({0.0, 0.0}));
    const auto h2 = hessian_at(model, vec({5.0, -7.0}));
    CHECK(h1.value.matrix() == h2.value.matrix());
    const OlsModel id({vec({1.0, 1.0}), Matrix::Identity(2, 2), ScalarLaw::zero()});
    CHECK(hessian_at(id, vec({1.0, 2.0})).value.matrix() == Matrix::Identity(2, 2));
}

TEST_CASE("zeta from a running SGD matches zeta with the iterate frozen") {
    const OlsModel model(ols_spec());
    RngStream run_rng(9, 0), frozen_rng(9, 1);
    Vector x = Vector::Zero(2);
    const StepSchedule sched{0.25, 0.7, 0};
    const int n = 4000;
    std::vector<double> run0, run1, fr0, fr1;
    for (int t = 1; t <= n; ++t) {
        const auto s = ols_noise_step(model, x, run_rng);
        run0.push_back(s.zeta(0));
        run1.push_back(s.zeta(1));
        x -= sched(t) * s.g;
        const auto f = ols_noise_step(model, Vector::Zero(2), frozen_rng);
        fr0.push_back(f.zeta(0));
        fr1.push_back(f.zeta(1));
    }
    CHECK(stats::ks_test_two_sample(run0, fr0).pass);
    CHECK(stats::ks_test_two_sample(run1, fr1).pass);
}

TEST_CASE("GLM with linear cgf reduces to OLS plus ridge") {
    const double lambda = 0.3;
    const GlmModel glm(glm_spec(Cgf::linear, lambda));
    LinearModelSpec ls{glm.spec().beta0, glm.spec().cov_chol, glm.spec().eps};
    const OlsModel ols(ls);
    RngStream a(10, 0), b(10, 0);
    for (int k = 0; k < 200; ++k) {
        const Vector x = vec({0.1 * k, -0.05 * k});
        const auto sg = glm_noise_step(glm, x, a);
        const auto so = ols_noise_step(ols, x, b);
        CHECK((sg.g - (so.g + lambda * x)).norm() <= 1e-12 * (1 + so.g.norm()));
        CHECK((sg.zeta - so.zeta).norm() <= 1e-12 * (1 + so.zeta.norm()));
        CHECK((sg.m - so.m).norm() <= 1e-12 * (1 + so.m.norm()));
    }
}

TEST_CASE("GLM decomposition identity") {
    const GlmModel model(glm_spec(Cgf::logistic, 0.1, 20000));
    RngStream rng(11, 0), xr(12, 0);
    for (int k = 0; k < 1000; ++k) {
        const Vector x = vec({xr.normal(), xr.normal()});
        const auto s = glm_noise_step(model, x, rng);
        const Vector resid = s.g - model.gradient(x) - s.zeta - s.m;
        CHECK(resid.norm() <= 1e-12 * (1.0 + s.g.norm() + s.zeta.norm()));
    }
}

TEST_CASE("GLM optimum: linear cgf closed form") {
    const double lambda = 0.2;
    const GlmModel model(glm_spec(Cgf::linear, lambda));
    const Matrix s = model.second_moment();
    const Vector want = (s + lambda * Matrix::Identity(2, 2)).ldlt().solve(s * model.spec().beta0);
    const double tol = 1e-10;
    const auto opt = find_glm_optimum(model, tol);
    CHECK(opt.grad_norm < tol);
    // ||x - x*|| <= ||grad|| / (lambda_min(S) + lambda)
    CHECK((opt.x_star - want).norm() <= tol / lambda);
    CHECK_THROWS_AS(find_glm_optimum(model, 1e-12, 2), ConvergenceError);
}

TEST_CASE("GLM optimum: symmetric design with beta0 = 0 gives x* = 0") {
    auto spec = glm_spec(Cgf::logistic, 0.1);
    spec.beta0 = Vector::Zero(2);
    const GlmModel model(spec);
    const auto opt = find_glm_optimum(model, 1e-10);
    // On a finite panel grad f(0) = psi'(0) mean(z) ~ 1/sqrt(N): x* is 0 up to panel error.
    const double se = model.mean_score(Vector::Zero(2)).stderr_.norm();
    CHECK(opt.x_star.norm() <= 4.0 * se / spec.lambda);
}

TEST_CASE("GLM optimum holds up on an independent panel twice the size") {
    const auto spec = glm_spec(Cgf::logistic, 0.1);
    const GlmModel model(spec);
    const auto opt = find_glm_optimum(model, 1e-8);
    auto other = spec;
    other.panel_seed = spec.panel_seed + 1;
    other.panel_size = 2 * spec.panel_size;
    const GlmModel check(other);
    const double se = std::hypot(model.mean_score(opt.x_star).stderr_.norm(), check.mean_score(opt.x_star).stderr_.norm());
    CHECK(check.gradient(opt.x_star).norm() <= opt.grad_norm + 4.0 * se);
}

TEST_CASE("GLM Hessian") {
    const double lambda = 0.1;
    const GlmModel lin(glm_spec(Cgf::linear, lambda));
    const auto hl = hessian_at(lin, vec({1.0, 2.0}));
    CHECK(hl.value.matrix().isApprox(lin.second_moment() + lambda * Matrix::Identity(2, 2), 1e-15));

    auto spec = glm_spec(Cgf::logistic, lambda, 1000000);
    spec.cov_chol = Matrix::Identity(2, 2);
    const GlmModel logit(spec);
    const auto h = hessian_at(logit, Vector::Zero(2));
    const Matrix want = (0.25 + lambda) * Matrix::Identity(2, 2);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(h.value(i, j) - want(i, j)) <= 3.0 * h.stderr_(i, j));
}

TEST_CASE("large ridge makes the GLM Hessian diagonally dominant") {
    auto spec = glm_spec(Cgf::logistic, 5.0, 50000);
    const GlmModel model(spec);
    const auto opt = find_glm_optimum(model, 1e-8);
    const auto h = hessian_at(model, opt.x_star);
    CHECK(diag_dominance_margin(h.value) > 0.0);
    const std::vector<double> ps{1.5};
    CHECK(classify_cones(h.value, ps).at(1.0).report.member_pd);
}

TEST_CASE("GLM with_optimum caches the solution") {
    const GlmModel model(glm_spec(Cgf::logistic, 0.1, 1000));
    CHECK_FALSE(model.optimum().has_value());
    const auto cached = model.with_optimum(find_glm_optimum(model, 1e-8));
    REQUIRE(cached.optimum().has_value());
    CHECK(cached.gradient(cached.optimum()->x_star).norm() < 1e-8);
}
