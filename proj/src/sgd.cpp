#include "heavysgd/sgd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "heavysgd/errors.hpp"

namespace heavysgd {

void StepSchedule::validate() const {
    if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw DomainError("gamma0 must be > 0");
    if (!(rho > 0.0 && rho < 1.0))
        throw DomainError("rho must lie in (0, 1): rate theory needs gamma_t ~ t^(-rho) with 0 < rho < 1");
}

double StepSchedule::operator()(std::uint64_t t) const {
    return gamma0 * std::pow(static_cast<double>(t + t0), -rho);
}

CheckpointPlan CheckpointPlan::geometric(std::uint64_t horizon, double ratio, double start) {
    if (horizon < 1) throw DomainError("checkpoint horizon must be >= 1");
    if (!(ratio > 1.0)) throw DomainError("checkpoint ratio must be > 1");
    if (!(start >= 1.0)) throw DomainError("checkpoint start must be >= 1");
    CheckpointPlan plan;
    for (int k = 0;; ++k) {
        const double t = std::ceil(start * std::pow(ratio, k));
        if (t > static_cast<double>(horizon)) break;
        const auto ti = static_cast<std::uint64_t>(t);
        if (plan.times_.empty() || plan.times_.back() != ti) plan.times_.push_back(ti);
    }
    if (plan.times_.empty() || plan.times_.back() != horizon) plan.times_.push_back(horizon);
    return plan;
}

CheckpointPlan CheckpointPlan::every(std::uint64_t horizon) {
    if (horizon < 1) throw DomainError("checkpoint horizon must be >= 1");
    CheckpointPlan plan;
    plan.times_.resize(horizon);
    for (std::uint64_t t = 1; t <= horizon; ++t) plan.times_[t - 1] = t;
    return plan;
}

CheckpointPlan CheckpointPlan::at(std::vector<std::uint64_t> times) {
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    if (times.empty() || times.front() < 1) throw DomainError("checkpoints must be >= 1");
    CheckpointPlan plan;
    plan.times_ = std::move(times);
    return plan;
}

GaussianMultiplicativeRule::GaussianMultiplicativeRule(double scale) : scale_(scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("m-rule scale must be >= 0");
}

void GaussianMultiplicativeRule::draw(const Vector& x, RngStream& rng, Vector& out) const {
    out.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = scale_ * rng.normal() * x(i);
}

NoiseSpec NoiseSpec::iid(const ScalarLaw& law) {
    NoiseSpec spec;
    if (law.kind != ScalarLaw::Kind::zero) {
        spec.zeta = law.sampler();
        spec.zeta_description = law.describe();
    }
    return spec;
}

AdditiveNoiseOracle::AdditiveNoiseOracle(Eigen::Index dim, GradientFn grad, NoiseSpec noise)
    : dim_(dim), grad_(std::move(grad)), noise_(std::move(noise)) {
    if (dim < 1) throw DomainError("oracle dimension must be >= 1");
    if (!grad_) throw DomainError("gradient function is empty");
}

void AdditiveNoiseOracle::sample(const Vector& x, RngStream& rng, Vector& grad, NoiseParts* parts) const {
    grad = grad_(x);
    if (parts) parts->zeta.setZero(dim_);
    if (noise_.zeta) {
        for (Eigen::Index i = 0; i < dim_; ++i) {
            const double z = noise_.zeta(rng);
            grad(i) += z;
            if (parts) parts->zeta(i) = z;
        }
    }
    if (noise_.m_rule) {
        Vector m;
        noise_.m_rule->draw(x, rng, m);
        grad += m;
        if (parts) parts->m = std::move(m);
    } else if (parts) {
        parts->m.setZero(dim_);
    }
}

std::optional<double> AdditiveNoiseOracle::declared_k() const {
    if (!noise_.m_rule) return std::nullopt;
    return noise_.m_rule->k_constant();
}

std::shared_ptr<const GradientOracle> make_quadratic_oracle(const Matrix& a, const Vector& x_star,
                                                            NoiseSpec noise) {
    if (a.rows() != a.cols() || a.rows() != x_star.size())
        throw DomainError("quadratic model: A must be square and match x*");
    return std::make_shared<AdditiveNoiseOracle>(
        a.rows(), [a, x_star](const Vector& x) -> Vector { return a * (x - x_star); }, std::move(noise));
}

bool MomentSpotCheck::within_bound() const {
    if (!declared_k || count == 0) return true;
    return mean <= *declared_k + 3.0 * stderr_;
}

namespace {

void record(SgdTrace& trace, std::uint64_t t, const Vector& x, const Vector& xbar,
            const std::optional<Vector>& x_star) {
    trace.checkpoints.push_back(t);
    trace.iterates.push_back(x);
    trace.pr_averages.push_back(xbar);
    if (x_star) {
        trace.err.push_back((x - *x_star).norm());
        trace.err_bar.push_back((xbar - *x_star).norm());
    }
}

}  // namespace

SgdTrace sgd_run(const GradientOracle& oracle, const Vector& x0, const StepSchedule& schedule,
                 const CheckpointPlan& plan, RngStream rng, const std::optional<Vector>& x_star) {
    schedule.validate();
    const Eigen::Index n = oracle.dim();
    if (x0.size() != n) throw DomainError("x0 dimension does not match the oracle");
    if (x_star && x_star->size() != n) throw DomainError("x* dimension does not match the oracle");
    const auto& times = plan.times();
    if (times.empty()) throw DomainError("empty checkpoint plan");

    SgdTrace trace;
    trace.seed = rng.seed();
    trace.stream_id = rng.stream_id();
    trace.checkpoints.reserve(times.size());
    trace.m_check.declared_k = oracle.declared_k();

    const bool track_m = oracle.exposes_decomposition();
    NoiseParts parts;
    // Welford accumulators for |m|^2 / (1 + |x|^2).
    double m_mean = 0.0, m_m2 = 0.0;
    std::uint64_t m_count = 0;

    Vector x = x0;
    Vector xbar = Vector::Zero(n);
    Vector g(n);
    std::size_t next = 0;
    const std::uint64_t horizon = times.back();
    for (std::uint64_t t = 0; t < horizon; ++t) {
        xbar += (x - xbar) / static_cast<double>(t + 1);
        oracle.sample(x, rng, g, track_m ? &parts : nullptr);
        if (track_m) {
            const double ratio = parts.m.squaredNorm() / (1.0 + x.squaredNorm());
            ++m_count;
            const double delta = ratio - m_mean;
            m_mean += delta / static_cast<double>(m_count);
            m_m2 += delta * (ratio - m_mean);
        }
        x -= schedule(t + 1) * g;
        if (!x.allFinite()) throw DivergenceError(t + 1);
        if (next < times.size() && times[next] == t + 1) {
            record(trace, t + 1, x, xbar, x_star);
            ++next;
        }
    }
    if (m_count > 0) {
        trace.m_check.count = m_count;
        trace.m_check.mean = m_mean;
        trace.m_check.stderr_ =
            m_count > 1 ? std::sqrt(m_m2 / static_cast<double>(m_count - 1) / static_cast<double>(m_count)) : 0.0;
    }
    return trace;
}

SgdTrace sgd_run(const GradientFn& grad, const NoiseSpec& noise, const Vector& x0,
                 const StepSchedule& schedule, const CheckpointPlan& plan, RngStream rng,
                 const std::optional<Vector>& x_star) {
    AdditiveNoiseOracle oracle(x0.size(), grad, noise);
    return sgd_run(oracle, x0, schedule, plan, std::move(rng), x_star);
}

std::vector<ScaledError> scaled_pr_error(const SgdTrace& trace, double alpha, const Vector& x_star) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("scaled error needs alpha in (1, 2]");
    std::vector<ScaledError> out;
    out.reserve(trace.checkpoints.size());
    const double expo = 1.0 - 1.0 / alpha;
    for (std::size_t i = 0; i < trace.checkpoints.size(); ++i) {
        const std::uint64_t t = trace.checkpoints[i];
        out.push_back({t, std::pow(static_cast<double>(t), expo) * (trace.pr_averages[i] - x_star)});
    }
    return out;
}

std::vector<SgdTrace> replicate(const RunSpec& spec, std::size_t replications, const RngStream& base,
                                unsigned threads) {
    if (replications < 1) throw DomainError("replication count must be >= 1");
    if (!spec.oracle) throw DomainError("run spec has no oracle");
    spec.schedule.validate();

    std::vector<SgdTrace> out(replications);
    auto run_one = [&](std::size_t r) {
        RngStream rng = base.sibling(base.stream_id() + r);
        try {
            out[r] = sgd_run(spec, rng);
        } catch (const DivergenceError& e) {
            SgdTrace censored;
            censored.seed = rng.seed();
            censored.stream_id = rng.stream_id();
            censored.censored = true;
            censored.diverged_at = e.index();
            out[r] = std::move(censored);
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(replications)));
    if (workers == 1) {
        for (std::size_t r = 0; r < replications; ++r) run_one(r);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t r = next.fetch_add(1); r < replications; r = next.fetch_add(1)) {
                    try {
                        run_one(r);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace heavysgd
