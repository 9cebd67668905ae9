#pragma once

// Dense two-phase primal simplex for
//     min c'x  subject to  A x <= b,  x >= 0.
// Dantzig pricing with a Bland fallback after a run of degenerate pivots.

#include <string>
#include <vector>

#include "alpha/matrix.hpp"

namespace alpha {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::iteration_limit;
  Vector x;
  double objective = 0.0;
  long iterations = 0;
};

class SimplexSolver {
 public:
  explicit SimplexSolver(long max_iterations = 200000) : max_iter_(max_iterations) {}

  LpResult solve(const Matrix& A, const Vector& b, const Vector& c) {
    const Index m = A.rows(), n = A.cols();
    if (b.size() != m || c.size() != n)
      throw DimensionError("SimplexSolver: inconsistent LP dimensions");

    // Columns: [structural n | slack m | artificial n_art], RHS kept separately.
    std::vector<Index> art_rows;
    for (Index i = 0; i < m; ++i)
      if (b(i) < 0.0) art_rows.push_back(i);
    const Index n_art = static_cast<Index>(art_rows.size());
    const Index total = n + m + n_art;

    Matrix T(m, total);
    T.setZero();
    Vector rhs(m);
    basis_.assign(static_cast<std::size_t>(m), 0);
    for (Index i = 0; i < m; ++i) {
      if (b(i) >= 0.0) {
        T.row(i).head(n) = A.row(i);
        T(i, n + i) = 1.0;
        rhs(i) = b(i);
        basis_[static_cast<std::size_t>(i)] = n + i;
      } else {
        T.row(i).head(n) = -A.row(i);
        T(i, n + i) = -1.0;
        rhs(i) = -b(i);
      }
    }
    for (Index k = 0; k < n_art; ++k) {
      T(art_rows[static_cast<std::size_t>(k)], n + m + k) = 1.0;
      basis_[static_cast<std::size_t>(art_rows[static_cast<std::size_t>(k)])] = n + m + k;
    }

    LpResult res;

    if (n_art > 0) {
      // Phase 1: minimize the sum of artificials.
      Vector cost = Vector::Zero(total);
      cost.tail(n_art).setOnes();
      Vector red = cost;
      double obj = 0.0;
      for (Index i = 0; i < m; ++i) {
        const Index bi = basis_[static_cast<std::size_t>(i)];
        if (cost(bi) != 0.0) {
          red -= cost(bi) * T.row(i).transpose();
          obj -= cost(bi) * rhs(i);
        }
      }
      const LpStatus st = iterate(T, rhs, red, obj, total, res.iterations);
      if (st != LpStatus::optimal) {
        res.status = st;
        return res;
      }
      if (-obj > 1e-7) {  // leftover infeasibility
        res.status = LpStatus::infeasible;
        return res;
      }
      // Pivot any artificial still in the basis out to a non-artificial column.
      for (Index i = 0; i < m; ++i) {
        if (basis_[static_cast<std::size_t>(i)] < n + m) continue;
        Index enter = -1;
        for (Index j = 0; j < n + m; ++j)
          if (std::abs(T(i, j)) > kEps) { enter = j; break; }
        if (enter >= 0)
          pivot(T, rhs, i, enter);
        // else: row is entirely zero over real columns, redundant constraint.
      }
    }

    // Phase 2: original objective over structural + slack columns only.
    Vector cost = Vector::Zero(total);
    cost.head(n) = c;
    Vector red = cost;
    double obj = 0.0;
    for (Index i = 0; i < m; ++i) {
      const Index bi = basis_[static_cast<std::size_t>(i)];
      if (bi >= n + m) continue;  // redundant row parked on an artificial
      if (cost(bi) != 0.0) {
        red -= cost(bi) * T.row(i).transpose();
        obj -= cost(bi) * rhs(i);
      }
    }
    // Block artificial columns from re-entering.
    blocked_from_ = n + m;
    res.status = iterate(T, rhs, red, obj, total, res.iterations);
    blocked_from_ = -1;
    if (res.status != LpStatus::optimal) return res;

    res.x = Vector::Zero(n);
    for (Index i = 0; i < m; ++i) {
      const Index bi = basis_[static_cast<std::size_t>(i)];
      if (bi < n) res.x(bi) = rhs(i);
    }
    res.objective = c.dot(res.x);
    return res;
  }

 private:
  static constexpr double kEps = 1e-9;

  long max_iter_;
  Index blocked_from_ = -1;
  std::vector<Index> basis_;

  void pivot(Matrix& T, Vector& rhs, Index row, Index col) {
    const double piv = T(row, col);
    T.row(row) /= piv;
    rhs(row) /= piv;
    for (Index i = 0; i < T.rows(); ++i) {
      if (i == row) continue;
      const double f = T(i, col);
      if (f != 0.0) {
        T.row(i) -= f * T.row(row);
        rhs(i) -= f * rhs(row);
        T(i, col) = 0.0;
      }
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  LpStatus iterate(Matrix& T, Vector& rhs, Vector& red, double& obj, Index total,
                   long& iterations) {
    const Index m = T.rows();
    int degenerate_streak = 0;
    for (long it = 0; it < max_iter_; ++it, ++iterations) {
      const bool bland = degenerate_streak > 40;
      Index enter = -1;
      double best = -kEps;
      for (Index j = 0; j < total; ++j) {
        if (blocked_from_ >= 0 && j >= blocked_from_) break;
        if (red(j) < best) {
          enter = j;
          if (bland) break;  // first improving column
          best = red(j);
        }
      }
      if (enter < 0) return LpStatus::optimal;

      Index leave = -1;
      double min_ratio = 0.0;
      for (Index i = 0; i < m; ++i) {
        const double a = T(i, enter);
        if (a > kEps) {
          const double ratio = rhs(i) / a;
          if (leave < 0 || ratio < min_ratio - 1e-12 ||
              (ratio < min_ratio + 1e-12 &&
               basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
            leave = i;
            min_ratio = ratio;
          }
        }
      }
      if (leave < 0) return LpStatus::unbounded;

      degenerate_streak = min_ratio < 1e-12 ? degenerate_streak + 1 : 0;
      pivot(T, rhs, leave, enter);
      const double f = red(enter);
      if (f != 0.0) {
        red -= f * T.row(leave).transpose();
        obj -= f * rhs(leave);  // obj tracks -z
        red(enter) = 0.0;
      }
    }
    return LpStatus::iteration_limit;
  }
};

}  // namespace alpha
