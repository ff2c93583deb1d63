#include "heavysgd/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "heavysgd/analysis.hpp"
#include "heavysgd/errors.hpp"
#include "heavysgd/io.hpp"

namespace heavysgd {

using json = nlohmann::ordered_json;
using io::format_double;

Budget budget_from_string(const std::string& name) {
    if (name == "quick") return Budget::quick;
    if (name == "default") return Budget::standard;
    if (name == "full") return Budget::full;
    throw ValidationError("--budget must be quick, default or full");
}

std::string to_string(Budget budget) {
    switch (budget) {
        case Budget::quick: return "quick";
        case Budget::standard: return "default";
        case Budget::full: return "full";
    }
    return "default";
}

bool LemmaSuite::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
}

namespace {

struct Sizes {
    std::size_t sweep;
    std::size_t p_trials;
    std::size_t fabian_t;
    std::size_t rho_t;
    std::size_t phi_t;
};

Sizes sizes_for(Budget b) {
    switch (b) {
        case Budget::quick: return {10000, 2000, 100000, 10000, 2000};
        case Budget::standard: return {100000, 10000, 1000000, 100000, 5000};
        case Budget::full: return {1000000, 100000, 1000000, 1000000, 5000};
    }
    return {};
}

}  // namespace

LemmaSuite run_lemma_suite(Budget budget, std::uint64_t seed) {
    LemmaSuite suite;
    suite.budget = budget;
    const Sizes n = sizes_for(budget);
    const RngStream base(seed, 0);

    {
        const auto r = vecexpandp_sweep(n.sweep, base.sibling(1));
        LemmaRow row{"vector-expansion", r.violations == 0,
                     std::to_string(r.violations) + " violations in " + std::to_string(r.trials) + " triples",
                     {{"trials", r.trials}, {"violations", r.violations}, {"worst_excess", r.worst_excess}}};
        suite.rows.push_back(std::move(row));
    }

    {
        const Sampler inc = ScalarLaw::symmetric_pareto(1.8).sampler();
        json detail = json::array();
        bool ok = true;
        std::string worst;
        for (std::size_t dim : {1u, 3u}) {
            const auto r = check_p_expand(inc, 0.5, 100, n.p_trials, dim, base.sibling(10 + dim));
            ok = ok && r.holds;
            detail.push_back({{"n", dim}, {"lhs", r.lhs}, {"bound", r.bound}, {"ratio", r.ratio},
                              {"relative_stderr", r.relative_stderr}, {"holds", r.holds}});
            worst += (worst.empty() ? "" : ", ") + ("n=" + std::to_string(dim) + " ratio " + format_double(r.ratio));
        }
        suite.rows.push_back({"p-expansion", ok, worst, std::move(detail)});
    }

    {
        const std::size_t t_hi = n.fabian_t;
        const std::size_t t_lo = t_hi / 10;
        json detail = json::array();
        std::size_t failures = 0;
        double worst = 0.0;
        // A = B in {0.5, 1, 2}: the 27-point grid.
        for (double a : {0.5, 1.0, 2.0})
            for (double alpha : {0.3, 0.5, 0.7})
                for (double beta : {0.25, 0.5, 1.0}) {
                    const double b = a;
                    const auto seq = fabian_recursion(a, b, alpha, beta, 1.0, t_hi);
                    const double osc = relative_oscillation(seq, beta, t_lo, t_hi);
                    worst = std::max(worst, osc);
                    const bool pass = osc < 0.02;
                    failures += pass ? 0 : 1;
                    detail.push_back({{"A", a}, {"B", b}, {"alpha", alpha}, {"beta", beta},
                                      {"oscillation", osc}, {"pass", pass}});
                }
        suite.rows.push_back({"fabian-grid", failures == 0,
                              std::to_string(failures) + " of " + std::to_string(detail.size()) +
                                  " grid points oscillate >= 2%, worst " + format_double(worst),
                              std::move(detail)});
    }

    {
        json detail = json::array();
        bool ok = true;
        for (double kappa : {0.9, 1.0}) {
            const auto s = check_rho_exp(0.5, kappa, 1.0, 1.0, n.rho_t);
            const double last = s.back();
            const double tenth = s[n.rho_t / 10 - 1];
            const bool pass = last < 0.05 && last < tenth;
            ok = ok && pass;
            detail.push_back({{"rho", 0.5}, {"kappa", kappa}, {"T", n.rho_t}, {"s_T", last}, {"s_T_over_10", tenth},
                              {"pass", pass}});
        }
        suite.rows.push_back({"rho-exp", ok, "s_T = " + format_double(detail[0]["s_T"].get<double>()), detail});
    }

    {
        const std::vector<double> diag{1.0, 2.0};
        const auto u = check_phi_sum(SymMatrix::diagonal(diag), 0.5, 0.9, 1.0, n.phi_t);
        const auto v = phi_sum_diagonal(diag, 0.5, 0.9, 1.0, n.phi_t);
        double diff = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) diff = std::max(diff, std::abs(u[i] - v[i]));
        bool decreasing = true;
        for (std::size_t i = 3 * n.phi_t / 4; i < n.phi_t; ++i) decreasing = decreasing && u[i] <= u[i - 1];
        const bool pass = u.back() < 0.1 && decreasing && diff <= 1e-10;
        suite.rows.push_back({"phi-sum", pass,
                              "u_T = " + format_double(u.back()) + ", diagonal cross-check diff " + format_double(diff),
                              {{"T", n.phi_t}, {"u_T", u.back()}, {"decreasing_last_quarter", decreasing},
                               {"cross_check_max_diff", diff}}});
    }
    return suite;
}

}  // namespace heavysgd
