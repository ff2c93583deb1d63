#include "heavysgd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "heavysgd/errors.hpp"

namespace heavysgd {

SymMatrix::SymMatrix(const Matrix& entries) {
    if (entries.rows() != entries.cols()) throw ValidationError("matrix is not square");
    if (!entries.allFinite()) throw ValidationError("matrix has non-finite entries");
    const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
    if (entries.size() > 0 && asym > symmetry_tolerance)
        throw ValidationError("matrix is not symmetric (max |q_ij - q_ji| = " + std::to_string(asym) + ")");
    m_ = 0.5 * (entries + entries.transpose());
}

SymMatrix SymMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
            throw ValidationError("matrix rows must all have length " + std::to_string(n));
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return SymMatrix(m);
}

SymMatrix SymMatrix::identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    Vector d(static_cast<Eigen::Index>(diag.size()));
    for (std::size_t i = 0; i < diag.size(); ++i) d(static_cast<Eigen::Index>(i)) = diag[i];
    return SymMatrix(Matrix(d.asDiagonal()));
}

SymMatrix SymMatrix::scaled(double c) const {
    SymMatrix out;
    out.m_ = c * m_;
    return out;
}

double SymMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

std::vector<std::vector<double>> SymMatrix::rows() const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(dim()));
    for (Eigen::Index i = 0; i < dim(); ++i)
        for (Eigen::Index j = 0; j < dim(); ++j) out[static_cast<std::size_t>(i)].push_back(m_(i, j));
    return out;
}

double lp_norm_pow(const Vector& v, double p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v(i)), p);
    return s;
}

double lp_norm(const Vector& v, double p) { return std::pow(lp_norm_pow(v, p), 1.0 / p); }

namespace {

// Largest eigenvalue of a symmetric positive semi-definite 3x3 matrix (trigonometric form).
double largest_eigenvalue_sym3(const Matrix& a) {
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double q = a.trace() / 3.0;
    if (p1 == 0.0) return std::max({a(0, 0), a(1, 1), a(2, 2)});
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                      (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const Matrix b = (a - q * Matrix::Identity(3, 3)) / p;
    const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
    return q + 2.0 * p * std::cos(std::acos(r) / 3.0);
}

}  // namespace

double spectral_norm(const Matrix& m) {
    const Eigen::Index n = m.rows();
    if (n == 0) return 0.0;
    if (n == 1 && m.cols() == 1) return std::abs(m(0, 0));
    if (n == 2 && m.cols() == 2) {
        const double s = m.squaredNorm();
        const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        const double disc = std::max(0.0, s * s - 4.0 * det * det);
        return std::sqrt(std::max(0.0, (s + std::sqrt(disc)) / 2.0));
    }
    const Matrix gram = m.transpose() * m;
    if (gram.rows() == 3) return std::sqrt(std::max(0.0, largest_eigenvalue_sym3(gram)));

    // Irregular start vector so it is not orthogonal to a structured top eigenvector.
    Vector v(gram.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 + 0.6180339887498949 * static_cast<double>(i % 7);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Vector w = gram * v;
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        w /= nw;
        const double next = w.dot(gram * w);
        const bool done = std::abs(next - lambda) <= 1e-15 * std::max(1.0, std::abs(next));
        lambda = next;
        v = w;
        if (done) break;
    }
    return std::sqrt(std::max(0.0, lambda));
}

}  // namespace heavysgd
