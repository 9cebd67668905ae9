#pragma once

// Pooling of adjusted residuals: Sigma-hat = (N - sum K_i)^{-1} sum_i U_i U_i'.

#include <string>
#include <vector>

#include "alpha/factor.hpp"
#include "alpha/matrix.hpp"
#include "alpha/selection.hpp"

namespace alpha {

struct BatchContribution {
  std::string batch_id;
  Index n = 0;
  Index K = 0;
  Regime regime = Regime::M1;
  Matrix U;  // p x n adjusted residuals
};

struct AggregateEntry {
  std::string batch_id;
  Index n = 0;
  Index K = 0;
  Regime regime = Regime::M1;
};

struct AggregateEstimate {
  Matrix Sigma_hat;  // p x p, symmetric
  Index N = 0;
  Index K_total = 0;
  std::vector<AggregateEntry> per_batch;
};

inline AggregateEstimate aggregate_sigma(const std::vector<BatchContribution>& batches) {
  if (batches.empty()) throw Error("aggregate_sigma: no batches");
  const Index p = batches.front().U.rows();
  AggregateEstimate agg;
  Matrix sum = Matrix::Zero(p, p);
  for (const auto& b : batches) {
    if (b.U.rows() != p)
      throw DimensionError("aggregate_sigma: batch " + b.batch_id + " has p=" +
                           std::to_string(b.U.rows()) + ", expected " + std::to_string(p));
    sum.noalias() += b.U * b.U.transpose();
    agg.N += b.n;
    agg.K_total += b.K;
    agg.per_batch.push_back({b.batch_id, b.n, b.K, b.regime});
  }
  const Index divisor = agg.N - agg.K_total;
  if (divisor <= 0)
    throw NumericError("aggregate_sigma: degrees of freedom N - K_total = " +
                       std::to_string(divisor) + " is not positive");
  agg.Sigma_hat = symmetrize(sum) / static_cast<double>(divisor);
  return agg;
}

}  // namespace alpha
