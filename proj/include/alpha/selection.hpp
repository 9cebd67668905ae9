#pragma once

// Per-batch model selection: eigenvalue-ratio estimation of the factor count,
// the covariate specification test, and Benjamini-Hochberg routing of batches
// into the PCA (M1) and Projected-PCA (M2) regimes.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "alpha/dataset.hpp"
#include "alpha/eigen_solver.hpp"
#include "alpha/factor.hpp"
#include "alpha/matrix.hpp"
#include "alpha/sieve.hpp"

namespace alpha {

enum class Regime { M1, M2 };

struct SpecTestResult {
  double S = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  Index J = 0;  // basis functions per covariate dimension (Jd = basis_dim)
  Index d = 0;
  Index K = 0;
};

struct RegimeAssignment {
  std::string batch_id;
  Regime regime = Regime::M1;
  Index K = 0;
  double p_value = 1.0;
  double S = 0.0;
  double z = 0.0;
  bool tested = false;  // false when W absent or loadings degenerate
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// argmax_{k <= K_max} lambda_k / lambda_{k+1}; ties go to the smallest k.
inline Index estimate_k_ratio(const Vector& eigenvalues, Index K_max) {
  if (K_max < 1) throw Error("estimate_k_ratio: K_max must be >= 1");
  if (eigenvalues.size() < K_max + 1)
    throw DimensionError("estimate_k_ratio: need at least K_max+1 eigenvalues, got " +
                         std::to_string(eigenvalues.size()));
  const double floor = 1e-12 * std::max(eigenvalues(0), 0.0);
  Index best = 1;
  double best_ratio = -1.0;
  for (Index k = 1; k <= K_max; ++k) {
    const double num = std::max(eigenvalues(k - 1), floor);
    const double den = std::max(eigenvalues(k), floor);
    const double ratio = den > 0.0 ? num / den : 0.0;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = k;
    }
  }
  return best;
}

/// Eigenvalue-ratio estimator on X'X (no context) or X'PX (projected variant).
inline Index estimate_k(const Matrix& X, const ProjectionContext* ctx, Index K_max) {
  Vector ev;
  if (ctx) {
    const Matrix M = ctx->Q.transpose() * X;
    ev = sym_eigenvalues(symmetrize(M.transpose() * M));
  } else {
    ev = sym_eigenvalues(symmetrize(X.transpose() * X));
  }
  return estimate_k_ratio(ev, K_max);
}

/// S = p^{-1} tr(Xi Lhat' P Lhat), Xi = (Lhat'Lhat/p)^{-1}, with Lhat from PCA.
/// Large S rejects H0 (covariates explain loadings); upper-tail p-value from
/// the normal limit of (pS - JdK)/sqrt(2JdK).
inline SpecTestResult spec_test(const Matrix& X, const ProjectionContext& ctx, Index K) {
  if (K < 1) throw Error("spec_test: K must be >= 1");
  const Index p = X.rows();
  const auto fit = fit_pca(X, K);
  const Matrix& L = fit.Lambda;

  const Matrix gram = symmetrize(L.transpose() * L) / static_cast<double>(p);
  Eigen::LDLT<Matrix> ldlt(gram);
  const double gmax = max_abs(gram);
  if (ldlt.info() != Eigen::Success || gmax <= 0.0 ||
      sym_eigenvalues(gram)(K - 1) <= 1e-12 * gmax)
    throw NumericError("spec_test: singular loading Gram matrix");

  const Matrix PL = ctx.apply(L);
  SpecTestResult r;
  r.S = (ldlt.solve(L.transpose() * PL)).trace() / static_cast<double>(p);
  r.d = ctx.dims;
  r.J = ctx.basis_dim() / std::max<Index>(1, ctx.dims);
  r.K = K;
  const double jdk = static_cast<double>(ctx.basis_dim()) * static_cast<double>(K);
  r.z = (static_cast<double>(p) * r.S - jdk) / std::sqrt(2.0 * jdk);
  r.p_value = 1.0 - normal_cdf(r.z);
  return r;
}

/// Benjamini-Hochberg step-up at level q: indices of rejected hypotheses.
inline std::set<std::size_t> bh_fdr(const std::vector<double>& p_values, double q) {
  if (q <= 0.0 || q >= 1.0) throw Error("bh_fdr: q must be in (0,1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw Error("bh_fdr: p-value outside [0,1]");
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::size_t cutoff = 0;
  for (std::size_t k = 1; k <= m; ++k)
    if (p_values[order[k - 1]] <= q * static_cast<double>(k) / static_cast<double>(m))
      cutoff = k;
  std::set<std::size_t> rejected;
  for (std::size_t k = 0; k < cutoff; ++k) rejected.insert(order[k]);
  return rejected;
}

struct SelectionConfig {
  BasisSpec basis;
  double q = 0.01;       // FDR level
  Index K_max = 5;       // non-projected ratio estimator bound
  std::optional<Index> K_max_projected;  // default rank(Phi)/2, floored at 1
};

/// Algorithm lines 2-6: per-batch K-hat, spec test, BH routing; rejected
/// batches move to M2 with K refined by the projected ratio estimator.
/// Batches without covariates (or with degenerate loadings) go to M1
/// unconditionally and are excluded from the BH family.
inline std::vector<RegimeAssignment> assign_regimes(const Dataset& dataset,
                                                    const SelectionConfig& cfg) {
  const Index m = dataset.m();
  std::vector<RegimeAssignment> out(static_cast<std::size_t>(m));
  std::vector<std::optional<ProjectionContext>> contexts(static_cast<std::size_t>(m));
  std::vector<std::size_t> tested_idx;
  std::vector<double> tested_p;

  for (Index i = 0; i < m; ++i) {
    const auto& b = dataset.batches[static_cast<std::size_t>(i)];
    auto& a = out[static_cast<std::size_t>(i)];
    a.batch_id = b.id;
    const Index n = b.X.cols();
    const Index kmax = std::min(cfg.K_max, std::min(b.X.rows(), n) - 1);
    a.K = estimate_k(b.X, nullptr, std::max<Index>(1, kmax));
    if (!b.W) continue;
    auto ctx = build_projection(*b.W, cfg.basis);
    try {
      const auto t = spec_test(b.X, ctx, a.K);
      a.p_value = t.p_value;
      a.S = t.S;
      a.z = t.z;
      a.tested = true;
      tested_idx.push_back(static_cast<std::size_t>(i));
      tested_p.push_back(t.p_value);
    } catch (const NumericError&) {
      // degenerate loadings: routed to M1 by convention
      continue;
    }
    contexts[static_cast<std::size_t>(i)] = std::move(ctx);
  }

  if (!tested_p.empty()) {
    const auto rejected = bh_fdr(tested_p, cfg.q);
    for (std::size_t r : rejected) {
      const std::size_t i = tested_idx[r];
      auto& a = out[i];
      const auto& ctx = *contexts[i];
      const auto& b = dataset.batches[i];
      a.regime = Regime::M2;
      Index kmax = cfg.K_max_projected ? *cfg.K_max_projected : ctx.rank / 2;
      kmax = std::max<Index>(1, std::min(kmax, std::min(ctx.rank, b.X.cols()) - 1));
      a.K = estimate_k(b.X, &ctx, kmax);
    }
  }
  return out;
}

}  // namespace alpha
