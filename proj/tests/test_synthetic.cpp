#include <gtest/gtest.h>

#include "alpha/rng.hpp"
#include "alpha/synthetic.hpp"
#include "support/stats.hpp"

using namespace alpha;

TEST(FitVar1, RecoversTransitionMatrix) {
  const Index n = 5000, K = 2;
  const Matrix a0 = 0.5 * Matrix::Identity(K, K);
  Rng rng(601);
  Matrix f(n, K);
  Vector state = Vector::Zero(K);
  for (Index t = 0; t < 200 + n; ++t) {
    Vector eps(K);
    for (Index k = 0; k < K; ++k) eps(k) = rng.normal();
    state = a0 * state + eps;
    if (t >= 200) f.row(t - 200) = state.transpose();
  }
  const auto fit = fit_var1(f);
  EXPECT_LE(max_norm_diff(fit.A, a0), 0.05);
  EXPECT_LE(max_norm_diff(fit.Sigma_eps, Matrix::Identity(K, K)), 0.1);
}

TEST(FitVar1, WhiteNoiseGivesNearZeroTransition) {
  Rng rng(607);
  const Matrix f = rng.normal_matrix(5000, 2);
  const auto fit = fit_var1(f);
  EXPECT_LE(max_abs(fit.A), 0.05);
}

TEST(FitVar1, ConstantFactorsRejected) {
  EXPECT_THROW(fit_var1(Matrix::Zero(50, 2)), NumericError);
}

TEST(FitVar1, TooFewObservations) {
  EXPECT_THROW(fit_var1(Matrix::Random(3, 2)), DimensionError);
}

TEST(FitVar1, NonstationaryEstimateClipped) {
  // A deterministic exploding series forces an OLS estimate with spectral
  // radius > 1, which must be clipped below 1.
  Matrix f(40, 1);
  double v = 1.0;
  for (Index t = 0; t < 40; ++t) {
    f(t, 0) = v;
    v *= 1.2;
  }
  const auto fit = fit_var1(f);
  EXPECT_LT(fit.A.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
}

TEST(Generate, DeterministicUnderSeed) {
  const auto spec = default_synthetic_spec(3, 8, 40, 2, SyntheticRegime::covariate_driven, 77);
  const auto a = generate(spec);
  const auto b = generate(spec);
  ASSERT_EQ(a.dataset.m(), b.dataset.m());
  EXPECT_EQ(max_norm_diff(a.W, b.W), 0.0);
  for (Index i = 0; i < a.dataset.m(); ++i) {
    EXPECT_EQ(max_norm_diff(a.dataset.batches[static_cast<std::size_t>(i)].X,
                            b.dataset.batches[static_cast<std::size_t>(i)].X),
              0.0);
    EXPECT_EQ(max_norm_diff(a.truth[static_cast<std::size_t>(i)].U,
                            b.truth[static_cast<std::size_t>(i)].U),
              0.0);
  }
}

TEST(Generate, DifferentSeedsDiffer) {
  const auto a = generate(default_synthetic_spec(1, 8, 40, 1, SyntheticRegime::pure_gamma, 1));
  const auto b = generate(default_synthetic_spec(1, 8, 40, 1, SyntheticRegime::pure_gamma, 2));
  EXPECT_GT(max_norm_diff(a.dataset.batches[0].X, b.dataset.batches[0].X), 1e-6);
}

TEST(Generate, NearNoiselessPpcaRecovery) {
  // Omega_true scaled so noise variance is ~1e-12: the projected fit with the
  // true K recovers the common component almost exactly.
  auto spec = default_synthetic_spec(1, 10, 100, 1, SyntheticRegime::covariate_driven, 91);
  spec.gamma_sd = 0.0;
  spec.Omega_true *= 1e12;
  const auto data = generate(spec);
  const auto& b = data.dataset.batches[0];
  BasisSpec basis;
  basis.kind = BasisKind::indicator;
  basis.J = 10;
  const auto ctx = build_projection(*b.W, basis);
  const auto fit = fit_ppca(b.X, ctx, 1);
  const Matrix truth = data.truth[0].Lambda * data.truth[0].F.transpose();
  EXPECT_LE(max_norm_diff(Matrix(fit.Lambda * fit.F.transpose()), truth), 1e-3);
}

TEST(Generate, NoiseMomentsMatchSigmaTrue) {
  // Sample covariance of many generated noise columns approximates
  // Omega_true^{-1}.
  auto spec = default_synthetic_spec(1, 100000, 10, 0, SyntheticRegime::pure_gamma, 97);
  const auto data = generate(spec);
  const Matrix& u = data.truth[0].U;
  const Matrix cov = symmetrize(u * u.transpose()) / static_cast<double>(u.cols());
  EXPECT_LE(max_norm_diff(cov, data.Sigma_true), 0.05);
}

TEST(Generate, PureGammaLoadingsIgnoreCovariates) {
  // In the G = 0 regime the loadings are pure Gamma draws; their category
  // means should be near zero rather than tracking a B pattern.
  auto spec = default_synthetic_spec(1, 8, 2000, 1, SyntheticRegime::pure_gamma, 101);
  const auto data = generate(spec);
  BasisSpec basis;
  basis.kind = BasisKind::indicator;
  basis.J = 10;
  const auto ctx = build_projection(data.W, basis);
  const Matrix projected = ctx.apply(data.truth[0].Lambda);
  // Category means of N(0, 0.5^2) entries over ~200 variables each.
  EXPECT_LE(max_abs(projected), 0.2);
}

TEST(Generate, FactorStationarity) {
  // Lag-1 autocovariance of the VAR(1) factors approximately equals
  // A * (stationary variance) = 0.5 * I for the shipped coefficients.
  auto spec = default_synthetic_spec(1, 10000, 5, 1, SyntheticRegime::pure_gamma, 103);
  const auto data = generate(spec);
  const Matrix& f = data.truth[0].F;
  const Index n = f.rows();
  double var = 0.0, lag1 = 0.0;
  for (Index t = 0; t < n; ++t) var += f(t, 0) * f(t, 0);
  for (Index t = 1; t < n; ++t) lag1 += f(t, 0) * f(t - 1, 0);
  var /= static_cast<double>(n);
  lag1 /= static_cast<double>(n - 1);
  EXPECT_NEAR(var, 1.0, 0.1);
  EXPECT_NEAR(lag1, 0.5, 0.1 * 0.5 + 0.05);
}

TEST(Generate, OrthonormalizedFactorsHaveIdentityGram) {
  auto spec = default_synthetic_spec(1, 12, 30, 2, SyntheticRegime::covariate_driven, 107);
  spec.orthonormalize_factors = true;
  const auto data = generate(spec);
  const Matrix& f = data.truth[0].F;
  EXPECT_LT(max_norm_diff(Matrix(f.transpose() * f / 12.0), Matrix::Identity(2, 2)), 1e-10);
}

TEST(Generate, SpecValidation) {
  auto spec = default_synthetic_spec(1, 8, 20, 1, SyntheticRegime::covariate_driven, 1);
  spec.covariate_probs = {0.5, 0.4};  // does not sum to 1
  EXPECT_THROW(generate(spec), Error);
  spec = default_synthetic_spec(1, 8, 20, 1, SyntheticRegime::covariate_driven, 1);
  spec.var_coef = 1.5 * Matrix::Identity(1, 1);
  EXPECT_THROW(generate(spec), Error);
  spec = default_synthetic_spec(1, 8, 20, 1, SyntheticRegime::covariate_driven, 1);
  spec.Omega_true = -Matrix::Identity(20, 20);
  EXPECT_THROW(generate(spec), NumericError);
}

TEST(RocCurve, ExactEstimateIsTopLeft) {
  const Matrix omega = banded_precision(8);
  const auto pts = roc_curve({{0.1, omega}}, omega);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].fpr, 0.0);
  EXPECT_EQ(pts[0].tpr, 1.0);
}

TEST(RocCurve, ZeroAndDenseEndpoints) {
  const Matrix omega = banded_precision(8);
  const Matrix zero = Matrix::Zero(8, 8);
  Matrix dense = Matrix::Ones(8, 8);
  const auto pts = roc_curve({{0.5, zero}, {0.01, dense}}, omega);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].fpr, 0.0);
  EXPECT_EQ(pts[0].tpr, 0.0);
  EXPECT_EQ(pts[1].fpr, 1.0);
  EXPECT_EQ(pts[1].tpr, 1.0);
}

TEST(RocCurve, SortedByFpr) {
  Rng rng(613);
  const Matrix omega = banded_precision(12);
  std::vector<std::pair<double, Matrix>> path;
  for (double t : {2.0, 0.5, 0.1, 1.0}) {
    Matrix est = Matrix::Zero(12, 12);
    for (Index i = 0; i < 12; ++i)
      for (Index j = i + 1; j < 12; ++j)
        if (std::abs(rng.normal()) > t) est(i, j) = est(j, i) = 1.0;
    path.push_back({t, est});
  }
  const auto pts = roc_curve(path, omega);
  for (std::size_t k = 1; k < pts.size(); ++k) EXPECT_GE(pts[k].fpr, pts[k - 1].fpr);
}

TEST(RocAuc, RangeAndAnchors) {
  EXPECT_EQ(roc_auc({}), 0.5);  // anchors only: straight diagonal
  EXPECT_NEAR(roc_auc({{0.0, 1.0}}), 1.0, 1e-12);
  EXPECT_NEAR(roc_auc({{1.0, 0.0}}), 0.0, 1e-12);
}

TEST(RocAuc, RandomGuessingBaseline) {
  // Threshold paths over random magnitudes carry no support information:
  // the mean AUC against a banded truth sits near one half.
  const Matrix omega = banded_precision(30);
  Rng rng(617);
  double auc_sum = 0.0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    const Matrix mags = symmetrize(rng.normal_matrix(30, 30));
    std::vector<std::pair<double, Matrix>> path;
    for (double t : {2.0, 1.5, 1.0, 0.7, 0.4, 0.2, 0.05}) {
      Matrix est = Matrix::Zero(30, 30);
      for (Index i = 0; i < 30; ++i)
        for (Index j = i + 1; j < 30; ++j)
          if (std::abs(mags(i, j)) > t) est(i, j) = est(j, i) = 1.0;
      path.push_back({t, est});
    }
    auc_sum += roc_auc(roc_curve(path, omega));
  }
  EXPECT_NEAR(auc_sum / reps, 0.5, 0.1);
}

TEST(RunBenchmark, OracleDominatesAdjustedMethods) {
  // Enough batches that the pooled errors concentrate; with few batches the
  // per-draw comparison is a coin flip whenever the errors nearly tie.
  const auto base = default_synthetic_spec(60, 10, 50, 1, SyntheticRegime::covariate_driven, 881);
  BenchOptions opt;
  opt.reps = 30;
  int dominated = 0;
  for (Index rep = 0; rep < opt.reps; ++rep) {
    auto spec = base;
    spec.seed = derive_seed(base.seed, static_cast<std::uint64_t>(rep) + 1, 1);
    const auto data = generate(spec);
    const double oracle =
        max_norm_diff(detail::method_sigma(BenchMethod::oracle, data, opt), data.Sigma_true);
    const double pca =
        max_norm_diff(detail::method_sigma(BenchMethod::pca, data, opt), data.Sigma_true);
    const double ppca =
        max_norm_diff(detail::method_sigma(BenchMethod::ppca, data, opt), data.Sigma_true);
    if (oracle <= pca && oracle <= ppca) ++dominated;
  }
  EXPECT_GE(dominated, opt.reps * 90 / 100);
}

TEST(RunBenchmark, StructureAndDeterminism) {
  const auto base = default_synthetic_spec(5, 10, 40, 1, SyntheticRegime::covariate_driven, 883);
  BenchOptions opt;
  opt.reps = 3;
  const auto a = run_benchmark(base, BenchCase::case1, {30, 40}, opt);
  const auto b = run_benchmark(base, BenchCase::case1, {30, 40}, opt);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t g = 0; g < a.size(); ++g) {
    for (const auto mth :
         {BenchMethod::ppca, BenchMethod::pca, BenchMethod::none, BenchMethod::oracle}) {
      const auto& ma = a[g].metrics.at(mth);
      const auto& mb = b[g].metrics.at(mth);
      EXPECT_GE(ma.sigma_max_err, 0.0);
      EXPECT_EQ(ma.sigma_max_err, mb.sigma_max_err);  // bitwise determinism
      EXPECT_EQ(ma.sigma_vs_oracle_err, mb.sigma_vs_oracle_err);
    }
    // No-adjust leaves the common component in place and must be far worse.
    EXPECT_GT(a[g].metrics.at(BenchMethod::none).sigma_max_err,
              a[g].metrics.at(BenchMethod::oracle).sigma_max_err);
  }
}

TEST(NullCalibration, SizeNearNominal) {
  const auto cal = run_null_calibration(100, 30, 10, 1, 100, 2024);
  EXPECT_EQ(cal.z_scores.size(), 100u);
  EXPECT_GE(cal.rejection_rate_5pct, 0.0);
  EXPECT_LE(cal.rejection_rate_5pct, 0.15);
}

TEST(BlockDiagReplicate, TruncatesLastBlock) {
  const Matrix base = banded_precision(4);
  const Matrix out = block_diag_replicate(base, 10);
  EXPECT_EQ(out.rows(), 10);
  EXPECT_LT(max_norm_diff(out.topLeftCorner(4, 4), base), 1e-15);
  EXPECT_LT(max_norm_diff(out.block(4, 4, 4, 4), base), 1e-15);
  EXPECT_LT(max_norm_diff(out.bottomRightCorner(2, 2), base.topLeftCorner(2, 2)), 1e-15);
  EXPECT_EQ(out(0, 5), 0.0);  // off-block stays zero
}
