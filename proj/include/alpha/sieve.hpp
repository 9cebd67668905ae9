#pragma once

// Sieve basis construction from per-variable covariates, and the associated
// projection operator P = Phi (Phi'Phi)^{-1} Phi'.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "alpha/matrix.hpp"

namespace alpha {

enum class BasisKind { indicator, polynomial, bspline };

struct BasisSpec {
  BasisKind kind = BasisKind::indicator;
  Index J = 10;                       // basis functions per covariate dimension
  Index degree = 3;                   // bspline only
  std::vector<double> categories;     // indicator; defaults to 1..J
  std::optional<double> lo, hi;       // continuous support; defaults to data range

  void validate() const {
    if (J < 1) throw Error("BasisSpec: J must be >= 1");
    if (kind == BasisKind::bspline) {
      if (degree < 1) throw Error("BasisSpec: bspline degree must be >= 1");
      if (J < degree + 1)
        throw Error("BasisSpec: bspline needs J >= degree + 1 (J=" + std::to_string(J) +
                    ", degree=" + std::to_string(degree) + ")");
    }
    if (kind == BasisKind::indicator && !categories.empty() &&
        static_cast<Index>(categories.size()) != J)
      throw Error("BasisSpec: indicator needs J = number of categories");
  }

  std::vector<double> effective_categories() const {
    if (!categories.empty()) return categories;
    std::vector<double> cats(static_cast<std::size_t>(J));
    for (Index s = 0; s < J; ++s) cats[s] = static_cast<double>(s + 1);
    return cats;
  }
};

namespace detail {

/// Clamped uniform knot vector for J cubic-like bsplines of given degree on [lo,hi].
inline std::vector<double> uniform_knots(Index J, Index degree, double lo, double hi) {
  const Index segments = J - degree;  // >= 1 by BasisSpec validation
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(J + degree + 1));
  for (Index i = 0; i <= degree; ++i) knots.push_back(lo);
  for (Index i = 1; i < segments; ++i)
    knots.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(segments));
  for (Index i = 0; i <= degree; ++i) knots.push_back(hi);
  return knots;
}

/// All J bspline basis values at w via the de Boor triangle over the knot span.
inline void bspline_row(double w, Index J, Index degree, const std::vector<double>& knots,
                        double* out) {
  std::fill(out, out + J, 0.0);
  const double lo = knots.front(), hi = knots.back();
  // Locate the knot span [knots[s], knots[s+1]) containing w; w = hi maps to the last span.
  Index s = degree;
  if (w >= hi) {
    s = J - 1;
  } else {
    while (s < J - 1 && w >= knots[s + 1]) ++s;
  }
  (void)lo;
  std::vector<double> vals(static_cast<std::size_t>(degree + 1), 0.0);
  vals[0] = 1.0;
  for (Index r = 1; r <= degree; ++r) {
    double saved = 0.0;
    for (Index k = 0; k < r; ++k) {
      const Index idx = s - r + 1 + k;
      const double denom = knots[idx + r] - knots[idx];
      const double term = denom > 0.0 ? vals[k] / denom : 0.0;
      vals[k] = saved + (knots[idx + r] - w) * term;
      saved = (w - knots[idx]) * term;
    }
    vals[r] = saved;
  }
  for (Index k = 0; k <= degree; ++k) out[s - degree + k] = vals[k];
}

}  // namespace detail

/// Phi(W): p x J*d, one J-column block per covariate dimension.
inline Matrix build_basis(const Matrix& W, const BasisSpec& spec) {
  spec.validate();
  const Index p = W.rows(), d = W.cols(), J = spec.J;
  if (p < 1 || d < 1) throw DimensionError("build_basis: empty covariate matrix");
  Matrix phi = Matrix::Zero(p, J * d);

  for (Index l = 0; l < d; ++l) {
    const Index off = l * J;
    switch (spec.kind) {
      case BasisKind::indicator: {
        const auto cats = spec.effective_categories();
        for (Index j = 0; j < p; ++j) {
          const double w = W(j, l);
          auto it = std::find_if(cats.begin(), cats.end(),
                                 [&](double c) { return std::abs(c - w) <= 1e-9; });
          if (it == cats.end())
            throw Error("build_basis: unknown category " + std::to_string(w) +
                        " for variable " + std::to_string(j + 1) + ", dimension " +
                        std::to_string(l + 1));
          phi(j, off + (it - cats.begin())) = 1.0;
        }
        break;
      }
      case BasisKind::polynomial:
      case BasisKind::bspline: {
        double lo = spec.lo ? *spec.lo : W.col(l).minCoeff();
        double hi = spec.hi ? *spec.hi : W.col(l).maxCoeff();
        if (!(hi > lo)) hi = lo + 1.0;  // constant covariate: any interval works
        for (Index j = 0; j < p; ++j) {
          const double w = W(j, l);
          if (w < lo - 1e-12 || w > hi + 1e-12)
            throw Error("build_basis: value " + std::to_string(w) + " outside support [" +
                        std::to_string(lo) + "," + std::to_string(hi) + "] for variable " +
                        std::to_string(j + 1) + ", dimension " + std::to_string(l + 1));
        }
        if (spec.kind == BasisKind::polynomial) {
          for (Index j = 0; j < p; ++j) {
            double pw = 1.0;
            for (Index k = 0; k < J; ++k) {
              phi(j, off + k) = pw;
              pw *= W(j, l);
            }
          }
          // Center the non-constant monomials (a span-preserving transform) and
          // scale every column to unit norm for Gram conditioning.
          for (Index k = 1; k < J; ++k)
            phi.col(off + k).array() -= phi.col(off + k).mean();
          for (Index k = 0; k < J; ++k) {
            const double norm = phi.col(off + k).norm();
            if (norm > 0.0) phi.col(off + k) /= norm;
          }
        } else {
          const auto knots = detail::uniform_knots(J, spec.degree, lo, hi);
          std::vector<double> row(static_cast<std::size_t>(J));
          for (Index j = 0; j < p; ++j) {
            detail::bspline_row(std::min(std::max(W(j, l), lo), hi), J, spec.degree, knots,
                                row.data());
            for (Index k = 0; k < J; ++k) phi(j, off + k) = row[k];
          }
        }
        break;
      }
    }
  }
  return phi;
}

/// Projection onto the column space of Phi.  Dense P is materialized only for
/// small p; apply() always works through the orthonormal factor Q.
struct ProjectionContext {
  Matrix Phi;                   // p x Jd as built (before rank filtering)
  Matrix Q;                     // p x rank, orthonormal columns
  Matrix P;                     // dense p x p when materialized, else 0x0
  std::vector<Index> dropped;   // Phi columns removed by rank filtering
  Index rank = 0;
  Index dims = 1;               // covariate dimension d behind Phi
  double gram_condition = 0.0;

  Index p() const { return Phi.rows(); }
  Index basis_dim() const { return Phi.cols(); }  // Jd

  Matrix apply(const Matrix& X) const { return Q * (Q.transpose() * X); }

  Matrix dense() const { return P.size() > 0 ? P : Matrix(Q * Q.transpose()); }
};

inline constexpr Index kDenseProjectorLimit = 4096;

inline ProjectionContext build_projection(const Matrix& Phi) {
  const Index p = Phi.rows(), jd = Phi.cols();
  if (p < 1 || jd < 1) throw DimensionError("build_projection: empty basis matrix");

  Eigen::ColPivHouseholderQR<Matrix> qr(Phi);
  qr.setThreshold(1e-12);
  const Index rank = qr.rank();

  ProjectionContext ctx;
  ctx.Phi = Phi;
  ctx.rank = rank;
  const auto& perm = qr.colsPermutation().indices();
  for (Index k = rank; k < jd; ++k) ctx.dropped.push_back(perm[k]);
  std::sort(ctx.dropped.begin(), ctx.dropped.end());

  if (rank == 0) {
    std::string cols;
    for (auto c : ctx.dropped) cols += (cols.empty() ? "" : ",") + std::to_string(c + 1);
    throw NumericError("build_projection: basis matrix has rank 0 (dropped columns " + cols + ")");
  }

  ctx.Q = qr.householderQ() * Matrix::Identity(p, rank);

  // Gram condition on the retained columns.
  Matrix kept(p, rank);
  for (Index k = 0; k < rank; ++k) kept.col(k) = Phi.col(perm[k]);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(kept.transpose() * kept));
  const auto& ev = es.eigenvalues();
  ctx.gram_condition = ev(ev.size() - 1) / std::max(ev(0), 1e-300);

  if (p <= kDenseProjectorLimit) ctx.P = ctx.Q * ctx.Q.transpose();
  return ctx;
}

inline ProjectionContext build_projection(const Matrix& W, const BasisSpec& spec) {
  auto ctx = build_projection(build_basis(W, spec));
  ctx.dims = W.cols();
  return ctx;
}

}  // namespace alpha
