#pragma once

// Calibrated synthetic multi-batch generator (VAR(1) factors, multinomial
// covariates, loadings Phi*B + Gamma, noise N(0, Omega^{-1})) and the
// benchmark harness scoring PCA/PPCA/no-adjust/oracle pipelines.

#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "alpha/aggregation.hpp"
#include "alpha/clime.hpp"
#include "alpha/dataset.hpp"
#include "alpha/factor.hpp"
#include "alpha/matrix.hpp"
#include "alpha/rng.hpp"
#include "alpha/selection.hpp"
#include "alpha/sieve.hpp"

namespace alpha {

// ---------------------------------------------------------------------------
// VAR(1) calibration

struct Var1Fit {
  Matrix A;          // K x K transition
  Matrix Sigma_eps;  // K x K innovation covariance
};

/// Least-squares fit of f_t = A f_{t-1} + eps_t from the rows of F (n x K).
/// A nonstationary estimate is spectrally clipped to radius 0.98.
inline Var1Fit fit_var1(const Matrix& F) {
  const Index n = F.rows(), K = F.cols();
  if (n < K + 2) throw DimensionError("fit_var1: need n >= K + 2 observations");

  Matrix lag = F.topRows(n - 1);    // f_{t-1}
  Matrix lead = F.bottomRows(n - 1);  // f_t
  const Matrix gram = lag.transpose() * lag;
  Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible())
    throw NumericError("fit_var1: singular lag Gram matrix");
  Var1Fit fit;
  fit.A = (lu.solve(lag.transpose() * lead)).transpose();

  const double radius = fit.A.eigenvalues().cwiseAbs().maxCoeff();
  if (radius >= 0.98) fit.A *= 0.98 / radius;

  const Matrix resid = lead - lag * fit.A.transpose();
  fit.Sigma_eps = symmetrize(resid.transpose() * resid) / static_cast<double>(n - 1);
  return fit;
}

// ---------------------------------------------------------------------------
// Specification of a synthetic dataset

enum class SyntheticRegime { covariate_driven, pure_gamma };

struct SyntheticSpec {
  Index m = 10;
  std::vector<Index> n_i;  // one entry per batch, or a single shared value
  Index p = 100;
  Index K = 1;
  SyntheticRegime regime = SyntheticRegime::covariate_driven;
  std::vector<double> covariate_probs;  // simplex over J categories
  Matrix var_coef;                      // K x K, spectral radius < 1
  Matrix var_noise;                     // K x K PSD
  Matrix B;                             // Jd x K
  double gamma_sd = 0.5;
  Matrix Omega_true;                    // p x p PD
  std::uint64_t seed = 1;
  bool orthonormalize_factors = false;

  Index batch_n(Index i) const {
    if (n_i.empty()) throw Error("SyntheticSpec: n_i not set");
    return n_i.size() == 1 ? n_i.front() : n_i.at(static_cast<std::size_t>(i));
  }

  Index categories() const { return static_cast<Index>(covariate_probs.size()); }

  void validate() const {
    if (m < 1 || p < 1 || K < 0) throw Error("SyntheticSpec: bad m/p/K");
    if (covariate_probs.empty()) throw Error("SyntheticSpec: covariate_probs not set");
    double sum = 0.0;
    for (double w : covariate_probs) sum += w;
    if (std::abs(sum - 1.0) > 1e-8)
      throw Error("SyntheticSpec: covariate_probs must sum to 1");
    if (K > 0) {
      if (var_coef.rows() != K || var_coef.cols() != K)
        throw DimensionError("SyntheticSpec: var_coef must be K x K");
      if (var_coef.eigenvalues().cwiseAbs().maxCoeff() >= 1.0)
        throw Error("SyntheticSpec: var_coef spectral radius must be < 1");
      if (var_noise.rows() != K || var_noise.cols() != K)
        throw DimensionError("SyntheticSpec: var_noise must be K x K");
      if (regime == SyntheticRegime::covariate_driven &&
          (B.rows() != categories() || B.cols() != K))
        throw DimensionError("SyntheticSpec: B must be Jd x K");
    }
    if (Omega_true.rows() != p || Omega_true.cols() != p)
      throw DimensionError("SyntheticSpec: Omega_true must be p x p");
    Eigen::LLT<Matrix> llt(symmetrize(Omega_true));
    if (llt.info() != Eigen::Success)
      throw NumericError("SyntheticSpec: Omega_true is not positive definite");
  }
};

/// Banded precision matrix with unit diagonal; PD for the default band values.
inline Matrix banded_precision(Index p, double off1 = 0.5, double off2 = 0.25) {
  Matrix omega = Matrix::Identity(p, p);
  for (Index i = 0; i + 1 < p; ++i) omega(i, i + 1) = omega(i + 1, i) = off1;
  for (Index i = 0; i + 2 < p; ++i) omega(i, i + 2) = omega(i + 2, i) = off2;
  return omega;
}

/// Copy a base block along the diagonal to reach size p (last block truncated).
inline Matrix block_diag_replicate(const Matrix& base, Index p) {
  const Index bs = base.rows();
  Matrix out = Matrix::Zero(p, p);
  for (Index off = 0; off < p; off += bs) {
    const Index len = std::min(bs, p - off);
    out.block(off, off, len, len) = base.topLeftCorner(len, len);
  }
  return out;
}

/// Shipped calibration-style parameter set (stands in for fitting these
/// parameters from a real panel; no such data is distributed here).
inline SyntheticSpec default_synthetic_spec(Index m, Index n, Index p, Index K,
                                            SyntheticRegime regime,
                                            std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.m = m;
  spec.n_i = {n};
  spec.p = p;
  spec.K = K;
  spec.regime = regime;
  spec.seed = seed;
  spec.covariate_probs = {0.14, 0.12, 0.12, 0.11, 0.10, 0.10, 0.09, 0.08, 0.07, 0.07};
  if (K > 0) {
    spec.var_coef = 0.5 * Matrix::Identity(K, K);
    spec.var_noise = 0.75 * Matrix::Identity(K, K);  // stationary variance = I
    Rng rng(derive_seed(seed, 0xB, 0));
    spec.B = rng.normal_matrix(spec.categories(), K);
  }
  spec.gamma_sd = 0.5;
  spec.Omega_true = block_diag_replicate(banded_precision(std::min<Index>(100, p)), p);
  return spec;
}

// ---------------------------------------------------------------------------
// Generation

struct BatchTruth {
  Matrix F;       // n x K
  Matrix Lambda;  // p x K
  Matrix U;       // p x n
};

struct SyntheticDataset {
  Dataset dataset;             // batches carry shared W
  std::vector<BatchTruth> truth;
  Matrix W;                    // p x 1 categorical covariate
  Matrix Omega_true;
  Matrix Sigma_true;           // Omega_true^{-1}
};

inline constexpr Index kVarBurnIn = 200;

namespace detail {

inline Matrix sample_var1(Rng& rng, const Matrix& A, const Matrix& chol_eps, Index n) {
  const Index K = A.rows();
  Vector f = Vector::Zero(K);
  Matrix F(n, K);
  for (Index t = 0; t < kVarBurnIn + n; ++t) {
    Vector eps(K);
    for (Index k = 0; k < K; ++k) eps(k) = rng.normal();
    f = A * f + chol_eps * eps;
    if (t >= kVarBurnIn) F.row(t - kVarBurnIn) = f.transpose();
  }
  return F;
}

/// F -> F R with R chosen so that F'F/n = I (Gram square root).
inline Matrix orthonormalize_columns(const Matrix& F) {
  const double n = static_cast<double>(F.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(F.transpose() * F) / n);
  const Vector inv_sqrt = es.eigenvalues().cwiseMax(1e-14).cwiseSqrt().cwiseInverse();
  return F * es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline SyntheticDataset generate(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset out;
  out.Omega_true = symmetrize(spec.Omega_true);
  out.Sigma_true =
      Eigen::LLT<Matrix>(out.Omega_true).solve(Matrix::Identity(spec.p, spec.p));
  const Matrix noise_chol = Eigen::LLT<Matrix>(symmetrize(out.Sigma_true)).matrixL();

  // Shared covariates across batches (one categorical covariate per variable).
  Rng wrng(derive_seed(spec.seed, 0xC0, 0));
  out.W = Matrix(spec.p, 1);
  for (Index j = 0; j < spec.p; ++j)
    out.W(j, 0) = static_cast<double>(wrng.categorical(spec.covariate_probs) + 1);

  BasisSpec basis;
  basis.kind = BasisKind::indicator;
  basis.J = spec.categories();
  const Matrix Phi = build_basis(out.W, basis);

  Matrix chol_eps;
  if (spec.K > 0) chol_eps = Eigen::LLT<Matrix>(symmetrize(spec.var_noise)).matrixL();

  for (Index i = 0; i < spec.m; ++i) {
    const Index n = spec.batch_n(i);
    Rng rng(derive_seed(spec.seed, 1 + static_cast<std::uint64_t>(i), 0));
    BatchTruth truth;

    if (spec.K > 0) {
      const Matrix Gamma = spec.gamma_sd * rng.normal_matrix(spec.p, spec.K);
      truth.Lambda = spec.regime == SyntheticRegime::covariate_driven
                         ? Matrix(Phi * spec.B + Gamma)
                         : Gamma;
      truth.F = detail::sample_var1(rng, spec.var_coef, chol_eps, n);
      if (spec.orthonormalize_factors)
        truth.F = detail::orthonormalize_columns(truth.F);
    } else {
      truth.Lambda = Matrix(spec.p, 0);
      truth.F = Matrix(n, 0);
    }
    truth.U = noise_chol * rng.normal_matrix(spec.p, n);

    BatchPanel batch;
    batch.id = "synthetic_" + std::to_string(i + 1);
    batch.X = truth.U;
    if (spec.K > 0) batch.X += truth.Lambda * truth.F.transpose();
    batch.W = out.W;
    out.dataset.batches.push_back(std::move(batch));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark

enum class BenchMethod { ppca, pca, none, oracle };

inline std::string to_string(BenchMethod m) {
  switch (m) {
    case BenchMethod::ppca: return "ppca";
    case BenchMethod::pca: return "pca";
    case BenchMethod::none: return "no_adjust";
    case BenchMethod::oracle: return "oracle";
  }
  return "?";
}

struct RocPoint {
  double fpr = 0.0, tpr = 0.0;
};

struct MethodMetrics {
  double sigma_max_err = 0.0;       // ||Sigma_hat - Sigma||_max
  double sigma_vs_oracle_err = 0.0; // ||Sigma_hat - Sigma_N||_max
  double omega_max_err = 0.0;
  double omega_l1_err = 0.0;
  double roc_auc_mean = 0.0;
  std::vector<RocPoint> roc_points;
};

struct BenchPoint {
  double grid_value = 0.0;
  std::map<BenchMethod, MethodMetrics> metrics;
};

enum class BenchCase { case1, case2, case3, case4 };

struct BenchOptions {
  Index reps = 20;
  Index K_max = 5;
  std::vector<double> lambda_grid;  // empty: skip the precision-matrix stage
  double roc_support_tol = 1e-8;
};

/// TPR/FPR of recovered off-diagonal support per lambda, sorted by FPR.
inline std::vector<RocPoint> roc_curve(
    const std::vector<std::pair<double, Matrix>>& omega_path, const Matrix& Omega_true,
    double tol = 1e-8) {
  if (omega_path.empty()) throw Error("roc_curve: empty path");
  const Index p = Omega_true.rows();
  double positives = 0.0, negatives = 0.0;
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j)
      (std::abs(Omega_true(i, j)) > tol ? positives : negatives) += 1.0;

  std::vector<RocPoint> points;
  for (const auto& [lambda, omega] : omega_path) {
    (void)lambda;
    double tp = 0.0, fp = 0.0;
    for (Index i = 0; i < p; ++i)
      for (Index j = i + 1; j < p; ++j) {
        const bool est = std::abs(omega(i, j)) > tol;
        if (!est) continue;
        (std::abs(Omega_true(i, j)) > tol ? tp : fp) += 1.0;
      }
    points.push_back({negatives > 0.0 ? fp / negatives : 0.0,
                      positives > 0.0 ? tp / positives : 0.0});
  }
  std::sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
    if (a.fpr != b.fpr) return a.fpr < b.fpr;
    return a.tpr < b.tpr;
  });
  return points;
}

/// Trapezoidal AUC with (0,0) and (1,1) anchors.
inline double roc_auc(std::vector<RocPoint> points) {
  points.insert(points.begin(), {0.0, 0.0});
  points.push_back({1.0, 1.0});
  double auc = 0.0;
  for (std::size_t k = 1; k < points.size(); ++k)
    auc += 0.5 * (points[k].tpr + points[k - 1].tpr) * (points[k].fpr - points[k - 1].fpr);
  return auc;
}

namespace detail {

/// Pooled estimator for one method on one generated dataset.
inline Matrix method_sigma(BenchMethod method, const SyntheticDataset& data,
                           const BenchOptions& opt) {
  std::vector<BatchContribution> contribs;
  std::optional<ProjectionContext> ctx;
  if (method == BenchMethod::ppca) {
    BasisSpec basis;
    basis.kind = BasisKind::indicator;
    basis.J = 10;
    // Category count comes from the data; recover it from distinct W values.
    double maxcat = data.W.col(0).maxCoeff();
    basis.J = static_cast<Index>(maxcat);
    ctx = build_projection(data.W, basis);
  }
  for (std::size_t i = 0; i < data.dataset.batches.size(); ++i) {
    const auto& b = data.dataset.batches[i];
    BatchContribution con;
    con.batch_id = b.id;
    con.n = b.X.cols();
    switch (method) {
      case BenchMethod::oracle:
        con.U = data.truth[i].U;
        con.K = 0;
        break;
      case BenchMethod::none:
        con.U = b.X;
        con.K = 0;
        break;
      case BenchMethod::pca: {
        const Index kmax = std::max<Index>(
            1, std::min(opt.K_max, std::min(b.X.rows(), b.X.cols()) - 1));
        con.K = estimate_k(b.X, nullptr, kmax);
        con.U = fit_pca(b.X, con.K).U;
        break;
      }
      case BenchMethod::ppca: {
        const Index kmax = std::max<Index>(
            1, std::min(ctx->rank / 2, std::min(ctx->rank, b.X.cols()) - 1));
        con.K = estimate_k(b.X, &*ctx, kmax);
        con.U = fit_ppca(b.X, *ctx, con.K).U;
        con.regime = Regime::M2;
        break;
      }
    }
    contribs.push_back(std::move(con));
  }
  return aggregate_sigma(contribs).Sigma_hat;
}

}  // namespace detail

/// Mean metrics over replications, per grid value and method.  The grid sweeps
/// p (case1), m (case2), n_i (case3) or m = n_i (case4, G = 0).
inline std::vector<BenchPoint> run_benchmark(const SyntheticSpec& base, BenchCase bench_case,
                                             const std::vector<Index>& sweep,
                                             const BenchOptions& opt) {
  if (sweep.empty()) throw Error("run_benchmark: empty sweep");
  const std::vector<BenchMethod> methods = {BenchMethod::ppca, BenchMethod::pca,
                                            BenchMethod::none, BenchMethod::oracle};
  std::vector<BenchPoint> out;
  for (std::size_t g = 0; g < sweep.size(); ++g) {
    BenchPoint point;
    point.grid_value = static_cast<double>(sweep[g]);
    for (auto mth : methods) point.metrics[mth] = {};
    std::map<BenchMethod, std::vector<double>> auc_acc;

    for (Index rep = 0; rep < opt.reps; ++rep) {
      SyntheticSpec spec = base;
      switch (bench_case) {
        case BenchCase::case1:
          spec.p = sweep[g];
          spec.Omega_true = block_diag_replicate(
              base.Omega_true.topLeftCorner(std::min<Index>(100, base.Omega_true.rows()),
                                            std::min<Index>(100, base.Omega_true.rows())),
              spec.p);
          break;
        case BenchCase::case2:
          spec.m = sweep[g];
          break;
        case BenchCase::case3:
          spec.n_i = {sweep[g]};
          break;
        case BenchCase::case4:
          spec.m = sweep[g];
          spec.n_i = {sweep[g]};
          spec.regime = SyntheticRegime::pure_gamma;
          break;
      }
      spec.seed = derive_seed(base.seed, static_cast<std::uint64_t>(rep) + 1,
                              static_cast<std::uint64_t>(g) + 1);
      const auto data = generate(spec);

      // Oracle pooled covariance Sigma_N.
      const Matrix sigma_oracle = detail::method_sigma(BenchMethod::oracle, data, opt);
      for (auto mth : methods) {
        const Matrix sigma_hat =
            mth == BenchMethod::oracle ? sigma_oracle : detail::method_sigma(mth, data, opt);
        auto& acc = point.metrics[mth];
        acc.sigma_max_err += max_norm_diff(sigma_hat, data.Sigma_true);
        acc.sigma_vs_oracle_err += max_norm_diff(sigma_hat, sigma_oracle);
        if (!opt.lambda_grid.empty()) {
          std::vector<std::pair<double, Matrix>> path;
          for (double lambda : opt.lambda_grid)
            path.push_back({lambda, clime_solve(sigma_hat, lambda).Omega});
          acc.omega_max_err += max_norm_diff(path.front().second, data.Omega_true);
          acc.omega_l1_err += l1_norm(path.front().second - data.Omega_true);
          auc_acc[mth].push_back(roc_auc(roc_curve(path, data.Omega_true, opt.roc_support_tol)));
          if (rep == 0)
            acc.roc_points = roc_curve(path, data.Omega_true, opt.roc_support_tol);
        }
      }
    }
    const double r = static_cast<double>(opt.reps);
    for (auto mth : methods) {
      auto& acc = point.metrics[mth];
      acc.sigma_max_err /= r;
      acc.sigma_vs_oracle_err /= r;
      acc.omega_max_err /= r;
      acc.omega_l1_err /= r;
      const auto& aucs = auc_acc[mth];
      if (!aucs.empty())
        acc.roc_auc_mean =
            std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
    }
    out.push_back(std::move(point));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Specification-test null calibration (H0: loadings independent of covariates)

struct NullCalibration {
  std::vector<double> z_scores;
  std::vector<double> p_values;
  double rejection_rate_5pct = 0.0;
};

inline NullCalibration run_null_calibration(Index p, Index n, Index J, Index K, Index reps,
                                            std::uint64_t seed) {
  std::vector<double> probs(static_cast<std::size_t>(J), 1.0 / static_cast<double>(J));
  NullCalibration out;
  Index rejected = 0;
  for (Index rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep) + 1, 0x5e5));
    Matrix W(p, 1);
    for (Index j = 0; j < p; ++j)
      W(j, 0) = static_cast<double>(rng.categorical(probs) + 1);
    const Matrix Lambda = rng.normal_matrix(p, K);
    const Matrix F = rng.normal_matrix(n, K);
    const Matrix X = Lambda * F.transpose() + rng.normal_matrix(p, n);

    BasisSpec basis;
    basis.kind = BasisKind::indicator;
    basis.J = J;
    const auto ctx = build_projection(W, basis);
    const auto t = spec_test(X, ctx, K);
    out.z_scores.push_back(t.z);
    out.p_values.push_back(t.p_value);
    if (t.p_value < 0.05) ++rejected;
  }
  out.rejection_rate_5pct = static_cast<double>(rejected) / static_cast<double>(reps);
  return out;
}

}  // namespace alpha
