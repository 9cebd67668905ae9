#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace alpha {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline void require_finite(const Matrix& a, const std::string& what) {
  if (!a.allFinite()) {
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j)
        if (!std::isfinite(a(i, j)))
          throw NumericError(what + ": non-finite entry at (" +
                             std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
  }
}

/// Elementwise max absolute difference between two same-shaped matrices.
inline double max_norm_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("max_norm_diff: shape mismatch " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

inline double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

/// Matrix L1 norm (max absolute column sum).
inline double l1_norm(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline bool is_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return max_norm_diff(a, Matrix(a.transpose())) <= tol;
}

}  // namespace alpha
