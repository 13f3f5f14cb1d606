#pragma once

#include <cmath>

#include <Eigen/Eigenvalues>

#include "wynn/types.hpp"

namespace wynn {

/// Default positive-definiteness floor for inverses and log-determinants.
inline constexpr double kPdFloor = 1e-12;

/// Symmetric eigendecomposition of a positive definite matrix. Construction
/// fails with SingularMatrix when the smallest eigenvalue is not above
/// `floor`; no regularization is ever applied.
class SpdFactor {
 public:
  explicit SpdFactor(const Matrix& m, double floor = kPdFloor) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InvalidInput("SpdFactor: matrix must be square and nonempty");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw SingularMatrix("eigendecomposition failed", std::nan(""));
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
    if (!(values_(0) > floor)) throw SingularMatrix("information matrix is not positive definite", values_(0));
  }

  Eigen::Index dim() const { return values_.size(); }
  double min_eigenvalue() const { return values_(0); }
  const Vector& eigenvalues() const { return values_; }

  double log_det() const { return values_.array().log().sum(); }

  /// f' M^{-1} f, summed over eigen-directions so it is exactly invariant
  /// under f -> -f.
  double inv_quad(const Vector& f) const {
    const Vector proj = vectors_.transpose() * f;
    return (proj.array().square() / values_.array()).sum();
  }

  Matrix inverse() const { return vectors_ * values_.cwiseInverse().asDiagonal() * vectors_.transpose(); }

  /// Unique positive definite square root.
  Matrix sqrt() const { return vectors_ * values_.cwiseSqrt().asDiagonal() * vectors_.transpose(); }

 private:
  Vector values_;
  Matrix vectors_;
};

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Positive semidefinite square root. Eigenvalues in [-1e-10, 0) are treated
/// as zero; anything more negative is rejected.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Vector values = es.eigenvalues();
  if (values(0) < -1e-10) throw SingularMatrix("matrix is not nonnegative definite", values(0));
  values = values.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * values.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace wynn
