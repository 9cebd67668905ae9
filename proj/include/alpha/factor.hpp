#pragma once

// Per-batch heterogeneity removal: PCA on X'X (regime 1) and Projected-PCA
// on X'PX (regime 2), both sharing the residual form U = X (I - FF'/n).

#include <string>
#include <utility>

#include "alpha/eigen_solver.hpp"
#include "alpha/matrix.hpp"
#include "alpha/sieve.hpp"

namespace alpha {

enum class FactorMethod { PCA, PPCA };

struct FactorFit {
  FactorMethod method = FactorMethod::PCA;
  Index K = 0;
  Matrix F;       // n x K, F'F/n = I
  Matrix Lambda;  // p x K
  Matrix U;       // p x n
};

/// X (I - FF'/n) for an orthonormal-scaled factor matrix (F'F/n = I).
inline Matrix residual(const Matrix& X, const Matrix& F) {
  const Index n = X.cols();
  if (F.size() == 0) return X;
  if (F.rows() != n) throw DimensionError("residual: F rows must equal sample count");
  const Matrix gram = F.transpose() * F / static_cast<double>(n);
  if (max_norm_diff(gram, Matrix(Matrix::Identity(F.cols(), F.cols()))) > 1e-6)
    throw NumericError("residual: F'F/n is not the identity");
  return X - (X * F) * F.transpose() / static_cast<double>(n);
}

inline FactorFit fit_pca(const Matrix& X, Index K) {
  const Index p = X.rows(), n = X.cols();
  if (K < 0 || K > std::min(p, n) - 1)
    throw DimensionError("fit_pca: K=" + std::to_string(K) + " out of range for p=" +
                         std::to_string(p) + ", n=" + std::to_string(n));
  FactorFit fit;
  fit.method = FactorMethod::PCA;
  fit.K = K;
  if (K == 0) {
    fit.U = X;
    return fit;
  }
  const Matrix S = symmetrize(X.transpose() * X) / static_cast<double>(p * n);
  auto pairs = top_eigenpairs(S, K);
  fit.F = std::sqrt(static_cast<double>(n)) * pairs.vectors;
  fit.Lambda = X * fit.F / static_cast<double>(n);
  fit.U = X - fit.Lambda * fit.F.transpose();
  return fit;
}

inline FactorFit fit_ppca(const Matrix& X, const ProjectionContext& ctx, Index K) {
  const Index p = X.rows(), n = X.cols();
  if (ctx.p() != p)
    throw DimensionError("fit_ppca: projection built for p=" + std::to_string(ctx.p()) +
                         ", data has p=" + std::to_string(p));
  if (K < 0 || K > std::min(ctx.rank, n) - 1)
    throw DimensionError("fit_ppca: K=" + std::to_string(K) + " out of range for rank(Phi)=" +
                         std::to_string(ctx.rank) + ", n=" + std::to_string(n));
  FactorFit fit;
  fit.method = FactorMethod::PPCA;
  fit.K = K;
  if (K == 0) {
    fit.U = X;
    return fit;
  }
  // X'PX formed as M'M with M = Q'X: symmetric PSD by construction.
  const Matrix M = ctx.Q.transpose() * X;
  const Matrix S = symmetrize(M.transpose() * M) / static_cast<double>(p * n);
  auto pairs = top_eigenpairs(S, K);
  fit.F = std::sqrt(static_cast<double>(n)) * pairs.vectors;
  fit.Lambda = X * fit.F / static_cast<double>(n);
  fit.U = X - fit.Lambda * fit.F.transpose();
  return fit;
}

/// Split PPCA loadings into the covariate-explained part Phi*B and the
/// orthogonal residual Gamma:  B = n^{-1} (Phi'Phi)^{-1} Phi' X F,
/// Gamma = n^{-1} (I - P) X F, so that Phi*B + Gamma = Lambda.
inline std::pair<Matrix, Matrix> decompose_loadings(const FactorFit& fit,
                                                    const ProjectionContext& ctx,
                                                    const Matrix& X) {
  if (fit.method != FactorMethod::PPCA)
    throw Error("decompose_loadings: fit must come from PPCA");
  if (X.rows() != ctx.p() || fit.F.rows() != X.cols())
    throw DimensionError("decompose_loadings: dimension mismatch");
  const double n = static_cast<double>(X.cols());
  const Matrix XF = X * fit.F / n;  // = Lambda
  const Matrix PXF = ctx.apply(XF);

  // Solve Phi * B = PXF in least squares; dropped columns get zero rows.
  Matrix B;
  if (ctx.dropped.empty()) {
    B = ctx.Phi.colPivHouseholderQr().solve(PXF);
  } else {
    B = Matrix::Zero(ctx.basis_dim(), fit.K);
    std::vector<Index> kept;
    for (Index c = 0; c < ctx.basis_dim(); ++c)
      if (std::find(ctx.dropped.begin(), ctx.dropped.end(), c) == ctx.dropped.end())
        kept.push_back(c);
    Matrix phi_kept(ctx.p(), static_cast<Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) phi_kept.col(static_cast<Index>(k)) = ctx.Phi.col(kept[k]);
    const Matrix Bk = phi_kept.colPivHouseholderQr().solve(PXF);
    for (std::size_t k = 0; k < kept.size(); ++k) B.row(kept[k]) = Bk.row(static_cast<Index>(k));
  }
  const Matrix Gamma = XF - PXF;
  return {B, Gamma};
}

}  // namespace alpha
