#pragma once

// CLIME precision-matrix estimation: per-column constrained L1 minimization
//     min ||w||_1  s.t.  ||Sigma w - e_j||_inf <= lambda
// solved as an LP with the split w = w+ - w-, then min-magnitude
// symmetrization and edge extraction.

#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "alpha/eigen_solver.hpp"
#include "alpha/lp.hpp"
#include "alpha/matrix.hpp"

namespace alpha {

struct ColumnStatus {
  long iterations = 0;
  double feasibility_gap = 0.0;  // ||Sigma w - e_j||_inf - lambda, clipped at 0
};

struct ClimeSolution {
  Matrix Omega_raw;  // pre-symmetrization
  Matrix Omega;      // min-magnitude symmetrized
  double lambda = 0.0;
  std::vector<ColumnStatus> column_status;
};

struct ClimeColumnResult {
  Vector omega;
  ColumnStatus status;
};

inline ClimeColumnResult clime_column_full(const Matrix& Sigma, Index j, double lambda) {
  const Index p = Sigma.rows();
  if (Sigma.cols() != p) throw DimensionError("clime_column: Sigma must be square");
  if (j < 0 || j >= p) throw DimensionError("clime_column: column index out of range");
  if (!(lambda > 0.0)) throw Error("clime_column: lambda must be positive");

  // Variables [w+ ; w-], constraints  Sigma(w+ - w-) <= e_j + lambda,
  //                                  -Sigma(w+ - w-) <= -e_j + lambda.
  Matrix A(2 * p, 2 * p);
  A.topLeftCorner(p, p) = Sigma;
  A.topRightCorner(p, p) = -Sigma;
  A.bottomLeftCorner(p, p) = -Sigma;
  A.bottomRightCorner(p, p) = Sigma;
  Vector b(2 * p);
  b.head(p).setConstant(lambda);
  b(j) += 1.0;
  b.tail(p).setConstant(lambda);
  b(p + j) -= 1.0;
  const Vector c = Vector::Ones(2 * p);

  SimplexSolver solver;
  const LpResult lp = solver.solve(A, b, c);
  if (lp.status == LpStatus::iteration_limit)
    throw NumericError("clime_column: simplex did not converge for column " +
                       std::to_string(j + 1));
  if (lp.status != LpStatus::optimal)
    throw NumericError("clime_column: LP " +
                       std::string(lp.status == LpStatus::infeasible ? "infeasible" : "unbounded") +
                       " for column " + std::to_string(j + 1));

  ClimeColumnResult out;
  out.omega = lp.x.head(p) - lp.x.tail(p);
  out.status.iterations = lp.iterations;
  Vector e = Vector::Zero(p);
  e(j) = 1.0;
  out.status.feasibility_gap =
      std::max(0.0, (Sigma * out.omega - e).cwiseAbs().maxCoeff() - lambda);
  return out;
}

inline Vector clime_column(const Matrix& Sigma, Index j, double lambda) {
  return clime_column_full(Sigma, j, lambda).omega;
}

inline ClimeSolution clime_solve(const Matrix& Sigma, double lambda, int threads = 1) {
  const Index p = Sigma.rows();
  if (!is_symmetric(Sigma, 1e-8 * std::max(1.0, max_abs(Sigma))))
    throw NumericError("clime_solve: Sigma is not symmetric");

  ClimeSolution sol;
  sol.lambda = lambda;
  sol.Omega_raw = Matrix::Zero(p, p);
  sol.column_status.resize(static_cast<std::size_t>(p));

  std::atomic<Index> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const Index j = next.fetch_add(1);
      if (j >= p || failed.load()) break;
      try {
        auto col = clime_column_full(Sigma, j, lambda);
        sol.Omega_raw.col(j) = col.omega;
        sol.column_status[static_cast<std::size_t>(j)] = col.status;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) error_message = e.what();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw NumericError(error_message);

  sol.Omega = sol.Omega_raw;
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j) {
      const double a = sol.Omega_raw(i, j), b = sol.Omega_raw(j, i);
      const double v = std::abs(a) <= std::abs(b) ? a : b;
      sol.Omega(i, j) = v;
      sol.Omega(j, i) = v;
    }
  return sol;
}

struct EdgeSet {
  std::set<std::pair<Index, Index>> edges;  // i < j
  double sparsity = 0.0;
};

enum class EdgeMode { nonzero, top_sparsity };

inline EdgeSet extract_edges(const Matrix& Omega, EdgeMode mode, double param) {
  const Index p = Omega.rows();
  if (!is_symmetric(Omega, 1e-8 * std::max(1.0, max_abs(Omega))))
    throw NumericError("extract_edges: Omega is not symmetric");
  const double total = static_cast<double>(p) * static_cast<double>(p - 1) / 2.0;

  EdgeSet out;
  if (mode == EdgeMode::nonzero) {
    for (Index i = 0; i < p; ++i)
      for (Index j = i + 1; j < p; ++j)
        if (std::abs(Omega(i, j)) > param) out.edges.insert({i, j});
  } else {
    if (!(param > 0.0 && param <= 1.0)) throw Error("extract_edges: level outside (0,1]");
    const auto want = static_cast<std::size_t>(std::ceil(param * total));
    std::vector<std::pair<double, std::pair<Index, Index>>> mags;
    mags.reserve(static_cast<std::size_t>(total));
    for (Index i = 0; i < p; ++i)
      for (Index j = i + 1; j < p; ++j) mags.push_back({std::abs(Omega(i, j)), {i, j}});
    std::sort(mags.begin(), mags.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;  // lexicographic tie-break
    });
    for (std::size_t k = 0; k < want && k < mags.size(); ++k) out.edges.insert(mags[k].second);
  }
  out.sparsity = total > 0.0 ? static_cast<double>(out.edges.size()) / total : 0.0;
  return out;
}

/// Negative Gaussian log-likelihood score against a validation covariance,
/// with the estimate clipped to positive definite for the logdet.
inline double clime_validation_score(const Matrix& Omega, const Matrix& Sigma_val) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(Omega));
  const Vector ev = es.eigenvalues().cwiseMax(1e-8);
  const Matrix Omega_pd =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  double logdet = 0.0;
  for (Index i = 0; i < ev.size(); ++i) logdet += std::log(ev(i));
  return (Sigma_val * Omega_pd).trace() - logdet;
}

/// Grid search for lambda by the validation criterion; smallest minimizing
/// lambda wins on ties.
inline double select_lambda(const Matrix& Sigma, const std::vector<double>& grid,
                            const Matrix& Sigma_val, int threads = 1) {
  if (grid.empty()) throw Error("select_lambda: empty grid");
  double best_lambda = 0.0, best_score = 0.0;
  bool any = false;
  std::string last_error;
  for (double lambda : grid) {
    try {
      const auto sol = clime_solve(Sigma, lambda, threads);
      const double score = clime_validation_score(sol.Omega, Sigma_val);
      if (!any || score < best_score ||
          (score == best_score && lambda < best_lambda)) {
        any = true;
        best_score = score;
        best_lambda = lambda;
      }
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  if (!any) throw NumericError("select_lambda: all grid points failed: " + last_error);
  return best_lambda;
}

}  // namespace alpha
