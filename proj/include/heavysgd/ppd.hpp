#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heavysgd/linalg.hpp"

namespace heavysgd {

/// Componentwise sg(v_i) |v_i|^q with sg(0) = 0, so zeros stay zero even at q = 0.
Vector signed_power(const Vector& v, double q);

/// v^T Q v^<p-1>.
double ppd_objective(const SymMatrix& q, const Vector& v, double p);

/// Result of minimizing v^T Q v^<p-1> over the l_p unit sphere.
///
/// `margin` is the smallest value found; for the grid search it is an upper
/// bound on the true minimum. Membership flags compare the margin against
/// `tolerance` (1e-9); `determined` is false when |margin| <= grid_tolerance,
/// i.e. the sign of the true minimum is not resolved by the search.
struct PpdReport {
    double p = 2.0;
    double margin = 0.0;
    Vector witness;
    bool member_pd = false;
    bool member_psd = false;
    bool determined = true;
    double tolerance = 1e-9;
    double grid_tolerance = 1e-9;
    std::size_t grid_resolution = 0;
    std::size_t evaluations = 0;
    std::string method;
};

inline constexpr std::size_t default_sphere_resolution = 64;
inline constexpr Eigen::Index max_interior_p_dimension = 8;

/// Approximate min of v^T Q v^<p-1> on S_p.
///
/// p = 1 enumerates sign patterns (the infimum over the open face of a sign
/// pattern is a vertex limit); p = 2 with n > 8 uses the eigen-decomposition;
/// otherwise a deterministic grid (angles for n = 2, Fibonacci points for n = 3,
/// Kronecker quasi-random points for n <= 8) is refined by compass search.
PpdReport ppd_margin(const SymMatrix& q, double p, std::size_t resolution = default_sphere_resolution);

/// min_i (q_ii - sum_{j != i} |q_ij|)
double diag_dominance_margin(const SymMatrix& q);

/// Lower-bound estimate of the operator p-norm max_{v in S_p} ||M v||_p.
double operator_norm_estimate(const Matrix& m, double p,
                              std::size_t resolution = default_sphere_resolution);

struct ContractionRow {
    double t = 0.0;
    double norm_pow = 0.0;  // estimate of ||I - tQ||_p^p (a lower bound)
    double rate = 0.0;      // L = max(0, p*margin - 4 t^(p-1) ||Q||_p^p)
    double bound = 1.0;     // 1 - L t
    bool satisfied = false;
};

/// Checks ||I - tQ||_p^p <= 1 - L t on a grid of t. The operator norm is a
/// search-based lower bound, so `satisfied` is necessary but not certified.
struct ContractionReport {
    double p = 2.0;
    double margin = 0.0;
    double q_norm_pow = 0.0;
    bool norm_is_lower_bound = true;
    std::vector<ContractionRow> rows;
};

ContractionReport contraction_check(const SymMatrix& q, double p, std::span<const double> t_grid,
                                    std::size_t resolution = default_sphere_resolution);

struct ConeRow {
    std::string cone;  // "S^1_+", "S^1.5_+", "S^2_+"
    PpdReport report;
    std::optional<double> reference;  // diag-dominance margin (p = 1) or min eigenvalue (p = 2)
    std::string reference_name;
    bool reference_agrees = true;
};

struct ConeClassification {
    std::vector<ConeRow> rows;  // ascending p, always including 1 and 2
    std::vector<std::string> violations;
    bool ordering_consistent() const { return violations.empty(); }
    const ConeRow& at(double p) const;
};

ConeClassification classify_cones(const SymMatrix& q, std::span<const double> p_list,
                                  std::size_t resolution = default_sphere_resolution);

}  // namespace heavysgd
