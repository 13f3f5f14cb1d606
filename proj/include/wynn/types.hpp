#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wynn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violated a documented precondition (wrong dimension, point
/// outside its space, non-finite input, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be positive definite is not. Carries the smallest
/// eigenvalue that was observed.
class SingularMatrix : public Error {
 public:
  SingularMatrix(const std::string& what, double min_eigenvalue)
      : Error(what + " (min eigenvalue " + std::to_string(min_eigenvalue) + ")"),
        min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// An iterative procedure ran out of iterations. `gap` is the final value of
/// its stopping measure.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double gap)
      : Error(what + " (final gap " + std::to_string(gap) + ")"), gap_(gap) {}
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

class FitFailure : public Error {
 public:
  using Error::Error;
};

class InitializationFailure : public Error {
 public:
  using Error::Error;
};

/// A response source could not deliver an observation.
class AcquisitionError : public Error {
 public:
  using Error::Error;
};

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector to_eigen(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace wynn
