#pragma once

#include <utility>

#include "alpha/matrix.hpp"

namespace alpha {

struct EigenPairs {
  Vector values;   // descending
  Matrix vectors;  // n x k, orthonormal columns
};

namespace detail {

/// Deterministic sign convention: the entry of largest magnitude is positive.
inline void fix_signs(Matrix& vectors) {
  for (Index k = 0; k < vectors.cols(); ++k) {
    Index imax = 0;
    vectors.col(k).cwiseAbs().maxCoeff(&imax);
    if (vectors(imax, k) < 0.0) vectors.col(k) = -vectors.col(k);
  }
}

}  // namespace detail

/// Top-k eigenpairs of a symmetric matrix, eigenvalues in descending order.
inline EigenPairs top_eigenpairs(const Matrix& S, Index k) {
  const Index n = S.rows();
  if (n < 1 || S.cols() != n) throw DimensionError("top_eigenpairs: matrix must be square");
  const double scale = std::max(max_abs(S), 1.0);
  if (!is_symmetric(S, 1e-8 * scale))
    throw NumericError("top_eigenpairs: matrix is not symmetric");
  if (k < 1 || k > n)
    throw DimensionError("top_eigenpairs: k=" + std::to_string(k) + " out of range for n=" +
                         std::to_string(n));

  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
  if (es.info() != Eigen::Success) throw NumericError("top_eigenpairs: eigensolver failed");

  EigenPairs out;
  out.values = Vector(k);
  out.vectors = Matrix(n, k);
  for (Index j = 0; j < k; ++j) {
    out.values(j) = es.eigenvalues()(n - 1 - j);
    out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
  }
  detail::fix_signs(out.vectors);
  return out;
}

/// All eigenvalues of a symmetric matrix, descending.
inline Vector sym_eigenvalues(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("sym_eigenvalues: eigensolver failed");
  return es.eigenvalues().reverse();
}

}  // namespace alpha
