#pragma once

// Dense two-phase primal simplex with Bland's anti-cycling rule, plus a
// lexicographic third phase that optimizes a secondary objective over the
// optimal face of the primary one.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "occ/model.hpp"

namespace occ::lp {

struct Options {
  double pivot_tol = 1e-12;
  double cost_tol = 1e-12;
  double feasibility_tol = 1e-9;
  // Nonbasic columns whose primary reduced cost is below -tie_tol are
  // excluded before the secondary objective is optimized.
  double tie_tol = 1e-10;
  std::size_t max_pivots = 1000000;
};

struct Solution {
  std::vector<double> x;
  double primary = 0.0;
  double secondary = 0.0;
  std::vector<std::size_t> basis;
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * (cols + 1), 0.0), basis_(rows) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t i, std::size_t j) { return data_[i * (cols_ + 1) + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * (cols_ + 1) + j]; }
  double& rhs(std::size_t i) { return at(i, cols_); }
  double rhs(std::size_t i) const { return at(i, cols_); }
  std::vector<std::size_t>& basis() { return basis_; }
  const std::vector<std::size_t>& basis() const { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    const double p = at(r, c);
    for (std::size_t j = 0; j <= cols_; ++j) at(r, j) /= p;
    for (std::size_t i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double factor = at(i, c);
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) at(i, j) -= factor * at(r, j);
      at(i, c) = 0.0;
    }
    basis_[r] = c;
  }

  void drop_row(std::size_t r) {
    data_.erase(data_.begin() + static_cast<std::ptrdiff_t>(r * (cols_ + 1)),
                data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * (cols_ + 1)));
    basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
    --rows_;
  }

  double reduced_cost(std::span<const double> cost, std::size_t j) const {
    double z = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) z += cost[basis_[i]] * at(i, j);
    return cost[j] - z;
  }

  double objective(std::span<const double> cost) const {
    double z = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) z += cost[basis_[i]] * rhs(i);
    return z;
  }

  bool is_basic(std::size_t j) const {
    for (auto b : basis_)
      if (b == j) return true;
    return false;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
  std::vector<std::size_t> basis_;
};

// Maximizes cost over the columns flagged in `allowed` from the current basis.
inline void run(Tableau& t, std::span<const double> cost, const std::vector<bool>& allowed, const Options& opts) {
  for (std::size_t iter = 0; iter < opts.max_pivots; ++iter) {
    std::optional<std::size_t> entering;
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (!allowed[j] || t.is_basic(j)) continue;
      if (t.reduced_cost(cost, j) > opts.cost_tol) {
        entering = j;
        break;
      }
    }
    if (!entering) return;
    const std::size_t c = *entering;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.rows(); ++i)
      if (t.at(i, c) > opts.pivot_tol) best_ratio = std::min(best_ratio, t.rhs(i) / t.at(i, c));
    // Bland: among minimum-ratio rows, the smallest basic index leaves.
    std::optional<std::size_t> leaving;
    for (std::size_t i = 0; i < t.rows(); ++i) {
      if (t.at(i, c) <= opts.pivot_tol || t.rhs(i) / t.at(i, c) > best_ratio + 1e-15) continue;
      if (!leaving || t.basis()[i] < t.basis()[*leaving]) leaving = i;
    }
    if (!leaving) throw NumericError("linear program is unbounded");
    t.pivot(*leaving, c);
  }
  throw NumericError("simplex pivot limit reached");
}

}  // namespace detail

/// Maximizes primary.x, then secondary.x over the primary-optimal face,
/// subject to A x = b and x >= 0. A is given row-major as rows of length n.
inline Solution lexicographic_max(const std::vector<std::vector<double>>& a, std::span<const double> b,
                                  std::span<const double> primary, std::span<const double> secondary = {},
                                  const Options& opts = {}) {
  const std::size_t m = a.size();
  if (m == 0 || b.size() != m) throw InputError("LP needs at least one constraint and matching rhs");
  const std::size_t n = a.front().size();
  if (primary.size() != n || (!secondary.empty() && secondary.size() != n))
    throw InputError("LP objective length mismatch");

  detail::Tableau t(m, n + m);
  for (std::size_t i = 0; i < m; ++i) {
    if (a[i].size() != n) throw InputError("LP constraint rows must have equal length");
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = sign * a[i][j];
    t.at(i, n + i) = 1.0;
    t.rhs(i) = sign * b[i];
    t.basis()[i] = n + i;
  }

  // Phase 1: minimize the sum of artificials.
  std::vector<double> cost(n + m, 0.0);
  for (std::size_t i = 0; i < m; ++i) cost[n + i] = -1.0;
  std::vector<bool> allowed(n + m, true);
  detail::run(t, cost, allowed, opts);
  if (-t.objective(cost) > opts.feasibility_tol) throw NumericError("LP is infeasible");

  // Pivot degenerate artificials out of the basis; drop redundant rows.
  for (std::size_t i = 0; i < t.rows();) {
    if (t.basis()[i] < n) {
      ++i;
      continue;
    }
    std::optional<std::size_t> col;
    for (std::size_t j = 0; j < n && !col; ++j)
      if (!t.is_basic(j) && std::abs(t.at(i, j)) > 1e-9) col = j;
    if (col) {
      t.pivot(i, *col);
      ++i;
    } else {
      t.drop_row(i);
    }
  }

  // Phase 2.
  for (std::size_t j = 0; j < n + m; ++j) {
    allowed[j] = j < n;
    cost[j] = j < n ? primary[j] : 0.0;
  }
  detail::run(t, cost, allowed, opts);

  // Phase 3 over the optimal face.
  if (!secondary.empty()) {
    std::vector<double> cost2(n + m, 0.0);
    for (std::size_t j = 0; j < n; ++j) cost2[j] = secondary[j];
    for (std::size_t j = 0; j < n; ++j)
      allowed[j] = t.is_basic(j) || t.reduced_cost(cost, j) >= -opts.tie_tol;
    detail::run(t, cost2, allowed, opts);
  }

  Solution sol;
  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const std::size_t j = t.basis()[i];
    if (j < n) sol.x[j] = std::max(0.0, t.rhs(i));
    sol.basis.push_back(j);
  }
  for (std::size_t j = 0; j < n; ++j) {
    sol.primary += primary[j] * sol.x[j];
    if (!secondary.empty()) sol.secondary += secondary[j] * sol.x[j];
  }
  return sol;
}

}  // namespace occ::lp
