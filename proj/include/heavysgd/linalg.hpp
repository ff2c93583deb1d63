#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace heavysgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Symmetric real matrix. Inputs asymmetric by more than 1e-12 (absolute) are
/// rejected; smaller discrepancies are averaged away on construction.
class SymMatrix {
public:
    static constexpr double symmetry_tolerance = 1e-12;

    SymMatrix() = default;
    explicit SymMatrix(const Matrix& entries);
    static SymMatrix from_rows(const std::vector<std::vector<double>>& rows);
    static SymMatrix identity(Eigen::Index n);
    static SymMatrix diagonal(std::span<const double> diag);

    Eigen::Index dim() const { return m_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
    const Matrix& matrix() const { return m_; }

    SymMatrix scaled(double c) const;
    double min_eigenvalue() const;
    std::vector<std::vector<double>> rows() const;

private:
    Matrix m_;
};

double lp_norm(const Vector& v, double p);
/// sum_i |v_i|^p
double lp_norm_pow(const Vector& v, double p);

/// Largest singular value. Closed forms for n <= 3, power iteration on M^T M above.
double spectral_norm(const Matrix& m);

}  // namespace heavysgd
