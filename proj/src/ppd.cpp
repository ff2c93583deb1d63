#include "heavysgd/ppd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "heavysgd/errors.hpp"

namespace heavysgd {

Vector signed_power(const Vector& v, double q) {
    if (!(q >= 0.0)) throw DomainError("signed power exponent must be >= 0");
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = v(i);
        const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
#ifdef HEAVYSGD_INJECT_SIGNED_POWER_FAULT
        out(i) = -s * std::pow(std::abs(x), q);
#else
        out(i) = s * std::pow(std::abs(x), q);
#endif
    }
    return out;
}

double ppd_objective(const SymMatrix& q, const Vector& v, double p) {
    return v.dot(q.matrix() * signed_power(v, p - 1.0));
}

double diag_dominance_margin(const SymMatrix& q) {
    const Matrix& m = q.matrix();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double off = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (j != i) off += std::abs(m(i, j));
        best = std::min(best, m(i, i) - off);
    }
    return best;
}

namespace {

using Objective = std::function<double(const Vector&)>;

bool lex_less(const Vector& a, const Vector& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) < b(i)) return true;
        if (a(i) > b(i)) return false;
    }
    return false;
}

// Strictly better value, or equal value with the lexicographically smaller point.
bool better(double va, const Vector& a, double vb, const Vector& b, bool maximize) {
    if (va != vb) return maximize ? va > vb : va < vb;
    return lex_less(a, b);
}

Vector to_sphere(const Vector& v, double p) { return v / lp_norm(v, p); }

double matrix_scale(const Matrix& m) {
    const double s = m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0;
    return s > 0.0 ? s : 1.0;
}

std::vector<Vector> sphere_grid(Eigen::Index n, double p, std::size_t resolution) {
    std::vector<Vector> pts;
    auto push = [&](Vector v) {
        if (v.cwiseAbs().maxCoeff() > 0.0) pts.push_back(to_sphere(v, p));
    };
    if (n == 1) {
        push(Vector::Constant(1, 1.0));
        push(Vector::Constant(1, -1.0));
        return pts;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        Vector e = Vector::Zero(n);
        e(k) = 1.0;
        push(e);
        push(-e);
    }
    if (n == 2) {
        const std::size_t count = 4 * resolution;
        for (std::size_t k = 0; k < count; ++k) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
            Vector v(2);
            v << std::cos(a), std::sin(a);
            push(v);
        }
    } else if (n == 3) {
        const std::size_t count = resolution * resolution;
        const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (std::size_t k = 0; k < count; ++k) {
            const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden_angle * static_cast<double>(k);
            Vector v(3);
            v << r * std::cos(phi), r * std::sin(phi), z;
            push(v);
        }
    } else {
        // Kronecker sequence with the generalized golden ratio of dimension n.
        double g = 2.0;
        for (int it = 0; it < 64; ++it) g = std::pow(1.0 + g, 1.0 / static_cast<double>(n + 1));
        Vector step(n);
        for (Eigen::Index k = 0; k < n; ++k) step(k) = std::fmod(std::pow(1.0 / g, static_cast<double>(k + 1)), 1.0);
        const std::size_t count = 256 * resolution;
        for (std::size_t i = 1; i <= count; ++i) {
            Vector v(n);
            for (Eigen::Index k = 0; k < n; ++k) {
                const double u = std::fmod(0.5 + static_cast<double>(i) * step(k), 1.0);
                v(k) = 2.0 * u - 1.0;
            }
            push(v);
        }
    }
    return pts;
}

struct SphereOptimum {
    double value = 0.0;
    Vector witness;
    std::size_t evaluations = 0;
};

SphereOptimum compass_refine(Vector v, double fv, const Objective& f, double p, double h,
                             bool maximize, std::size_t& evals) {
    const Eigen::Index n = v.size();
    const std::size_t budget = evals + 200000;
    while (h > 1e-13 && evals < budget) {
        bool improved = false;
        for (Eigen::Index k = 0; k < n; ++k) {
            for (double dir : {1.0, -1.0}) {
                Vector w = v;
                w(k) += dir * h;
                if (w.cwiseAbs().maxCoeff() == 0.0) continue;
                w = to_sphere(w, p);
                const double fw = f(w);
                ++evals;
                if (maximize ? fw > fv : fw < fv) {
                    v = std::move(w);
                    fv = fw;
                    improved = true;
                }
            }
        }
        if (!improved) h *= 0.5;
    }
    return {fv, v, 0};
}

SphereOptimum optimize_on_sphere(Eigen::Index n, double p, std::size_t resolution, const Objective& f,
                                 bool maximize) {
    const auto grid = sphere_grid(n, p, resolution);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) scored.emplace_back(f(grid[i]), i);
    std::size_t evals = grid.size();
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        return better(a.first, grid[a.second], b.first, grid[b.second], maximize);
    });

    SphereOptimum best{scored.front().first, grid[scored.front().second], 0};
    if (n > 1) {
        const std::size_t starts = std::min<std::size_t>(8, scored.size());
        const double h0 = 4.0 / static_cast<double>(resolution);
        for (std::size_t s = 0; s < starts; ++s) {
            auto r = compass_refine(grid[scored[s].second], scored[s].first, f, p, h0, maximize, evals);
            if (better(r.value, r.witness, best.value, best.witness, maximize)) {
                best.value = r.value;
                best.witness = std::move(r.witness);
            }
        }
    }
    best.evaluations = evals;
    return best;
}

void check_p(double p) {
    if (!(p >= 1.0 && p <= 2.0)) throw DomainError("p must lie in [1, 2]");
}

void finish_membership(PpdReport& r) {
    r.member_pd = r.margin > r.tolerance;
    r.member_psd = r.margin > -r.tolerance;
    r.determined = std::abs(r.margin) > r.grid_tolerance;
}

PpdReport margin_p1(const SymMatrix& q) {
    const Matrix& m = q.matrix();
    const Eigen::Index n = m.rows();
    constexpr double eps = 1e-12;
    PpdReport r;
    r.p = 1.0;
    r.grid_tolerance = 1e-9;

    auto witness_for = [&](const Vector& s, Eigen::Index i) {
        Vector v = Vector::Zero(n);
        if (n == 1) {
            v(0) = s(0);
            return v;
        }
        for (Eigen::Index j = 0; j < n; ++j) v(j) = (j == i ? 1.0 - eps : eps / static_cast<double>(n - 1)) * s(j);
        return v;
    };
    bool have = false;
    auto consider = [&](const Vector& s) {
        const Vector qs = m * s;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double value = s(i) * qs(i);
            Vector w = witness_for(s, i);
            if (!have || better(value, w, r.margin, r.witness, false)) {
                r.margin = value;
                r.witness = std::move(w);
                have = true;
            }
            ++r.evaluations;
        }
    };
    if (n <= 16) {
        r.method = "sign-enumeration";
        const std::uint64_t patterns = std::uint64_t{1} << (n - 1);
        for (std::uint64_t bits = 0; bits < patterns; ++bits) {
            Vector s(n);
            s(0) = 1.0;
            for (Eigen::Index j = 1; j < n; ++j) s(j) = ((bits >> (j - 1)) & 1U) ? -1.0 : 1.0;
            consider(s);
        }
        r.grid_resolution = static_cast<std::size_t>(patterns);
    } else {
        // Row i is worst under s_i = 1, s_j = -sg(q_ij).
        r.method = "row-dominance";
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector s(n);
            for (Eigen::Index j = 0; j < n; ++j) s(j) = j == i ? 1.0 : (m(i, j) > 0.0 ? -1.0 : 1.0);
            consider(s);
        }
    }
    return r;
}

}  // namespace

PpdReport ppd_margin(const SymMatrix& q, double p, std::size_t resolution) {
    check_p(p);
    if (resolution < 8) throw DomainError("sphere resolution must be >= 8");
    const Eigen::Index n = q.dim();
    if (n < 1) throw DomainError("empty matrix");

    PpdReport r;
    if (p == 1.0) {
        r = margin_p1(q);
    } else if (n > max_interior_p_dimension) {
        if (p != 2.0)
            throw DomainError("interior-p margins are limited to dimension <= 8 (got " + std::to_string(n) + ")");
        Eigen::SelfAdjointEigenSolver<Matrix> es(q.matrix());
        r.p = 2.0;
        r.margin = es.eigenvalues()(0);
        r.witness = es.eigenvectors().col(0);
        r.method = "eigen";
        r.grid_tolerance = 1e-9;
    } else {
        const auto opt = optimize_on_sphere(
            n, p, resolution, [&](const Vector& v) { return ppd_objective(q, v, p); }, false);
        r.p = p;
        r.margin = opt.value;
        r.witness = opt.witness;
        r.evaluations = opt.evaluations;
        r.grid_resolution = resolution;
        r.method = "grid+compass";
        r.grid_tolerance = 1e-6 * matrix_scale(q.matrix());
    }
    r.tolerance = 1e-9;
    r.margin += 0.0;  // no "-0" in reports
    finish_membership(r);
    return r;
}

double operator_norm_estimate(const Matrix& m, double p, std::size_t resolution) {
    check_p(p);
    const Eigen::Index n = m.rows();
    if (n != m.cols() || n < 1) throw DomainError("operator norm needs a non-empty square matrix");
    if (n > max_interior_p_dimension) {
        if (p == 1.0) return m.cwiseAbs().colwise().sum().maxCoeff();
        if (p == 2.0) return spectral_norm(m);
        throw DomainError("interior-p operator norms are limited to dimension <= 8");
    }
    return optimize_on_sphere(n, p, resolution, [&](const Vector& v) { return lp_norm(m * v, p); }, true)
        .value;
}

ContractionReport contraction_check(const SymMatrix& q, double p, std::span<const double> t_grid,
                                    std::size_t resolution) {
    check_p(p);
    ContractionReport rep;
    rep.p = p;
    rep.margin = ppd_margin(q, p, resolution).margin;
    rep.q_norm_pow = std::pow(operator_norm_estimate(q.matrix(), p, resolution), p);
    const Eigen::Index n = q.dim();
    for (double t : t_grid) {
        if (!(t > 0.0)) throw DomainError("contraction check needs t > 0");
        ContractionRow row;
        row.t = t;
        const Matrix step = Matrix::Identity(n, n) - t * q.matrix();
        row.norm_pow = std::pow(operator_norm_estimate(step, p, resolution), p);
        row.rate = std::max(0.0, p * rep.margin - 4.0 * std::pow(t, p - 1.0) * rep.q_norm_pow);
        row.bound = 1.0 - row.rate * t;
        row.satisfied = row.norm_pow <= row.bound + 1e-12;
        rep.rows.push_back(row);
    }
    return rep;
}

const ConeRow& ConeClassification::at(double p) const {
    for (const auto& r : rows)
        if (r.report.p == p) return r;
    throw DomainError("no cone row for p = " + std::to_string(p));
}

ConeClassification classify_cones(const SymMatrix& q, std::span<const double> p_list, std::size_t resolution) {
    std::set<double> ps{1.0, 2.0};
    for (double p : p_list) {
        check_p(p);
        ps.insert(p);
    }
    const double scale = matrix_scale(q.matrix());
    ConeClassification out;
    for (double p : ps) {
        ConeRow row;
        std::ostringstream name;
        name << "S^" << p << "_+";
        row.cone = name.str();
        row.report = ppd_margin(q, p, resolution);
        if (p == 1.0) {
            row.reference = diag_dominance_margin(q);
            row.reference_name = "diag_dominance_margin";
            row.reference_agrees = std::abs(row.report.margin - *row.reference) <= 1e-9 * scale;
        } else if (p == 2.0) {
            row.reference = q.min_eigenvalue();
            row.reference_name = "min_eigenvalue";
            row.reference_agrees =
                std::abs(row.report.margin - *row.reference) <= 1e-3 * std::abs(*row.reference) + 1e-12 * scale;
        }
        out.rows.push_back(std::move(row));
    }
    const ConeRow& first = out.rows.front();
    const ConeRow& last = out.rows.back();
    for (const auto& row : out.rows) {
        const double p = row.report.p;
        if (first.report.member_pd && !row.report.member_pd) {
            std::ostringstream os;
            os << "member of S^1_+ but not of S^" << p << "_+";
            out.violations.push_back(os.str());
        }
        if (row.report.member_pd && row.report.margin > row.report.grid_tolerance && !last.report.member_pd) {
            std::ostringstream os;
            os << "member of S^" << p << "_+ (margin " << row.report.margin << ") but not of S^2_+";
            out.violations.push_back(os.str());
        }
    }
    return out;
}

}  // namespace heavysgd
