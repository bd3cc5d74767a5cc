#pragma once

// Tabulation of V and U over the simplex, and their closures:
//   concave closure  V-bar (optimal described contract value),
//   extremal closure V^T   (optimal transparent contract value),
//   implied agent value U~ (welfare at the welfare-selected optimum).

#include <algorithm>
#include <cstddef>
#include <optional>
#include <thread>
#include <vector>

#include "occ/coarse_solver.hpp"
#include "occ/lp.hpp"
#include "occ/model.hpp"
#include "occ/simplex_grid.hpp"

namespace occ {

struct TabulatedFunction {
  SimplexGrid grid;
  std::vector<double> principal_values;
  std::vector<double> agent_values;
  std::vector<CoarseSolution> solutions;  // empty when loaded from a cache

  std::size_t size() const { return grid.size(); }
  std::size_t num_states() const { return grid.num_states(); }
};

struct Decomposition {
  struct Entry {
    double weight = 0.0;
    Composition composition;
    std::size_t grid_index = 0;
  };
  std::vector<Entry> entries;

  std::size_t size() const { return entries.size(); }
};

struct ClosureValue {
  double value = 0.0;        // sum_k lambda_k V(d_k)
  double agent_value = 0.0;  // sum_k lambda_k U(d_k)
  Decomposition decomposition;
};

enum class ClosureMethod { automatic, envelope, lp };

/// Default grid resolution: 201 points for two states, 41 per edge otherwise.
inline std::size_t default_resolution(std::size_t num_states) { return num_states <= 2 ? 201 : 41; }

/// Runs body(i) for i in [0, n) across hardware threads.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  for (auto& t : pool) t.join();
}

inline TabulatedFunction tabulate(const Problem& problem, std::size_t resolution,
                                  const CoarseSolverOptions& opts = {}) {
  TabulatedFunction tab;
  tab.grid = SimplexGrid(problem.num_states(), resolution);
  const std::size_t n = tab.grid.size();
  tab.principal_values.resize(n);
  tab.agent_values.resize(n);
  tab.solutions.resize(n);
  parallel_for(n, [&](std::size_t i) {
    tab.solutions[i] = solve_coarse(problem, tab.grid.point(i), opts);
    tab.principal_values[i] = tab.solutions[i].principal_value;
    tab.agent_values[i] = tab.solutions[i].agent_value;
  });
  return tab;
}

namespace detail {

inline void check_query(const TabulatedFunction& tab, const Composition& f) {
  if (f.size() != tab.num_states()) throw InputError("composition length does not match the tabulation");
  if (tab.principal_values.size() != tab.size() || tab.agent_values.size() != tab.size())
    throw InputError("tabulation is incomplete");
}

inline ClosureValue make_closure(const TabulatedFunction& tab, std::vector<std::pair<std::size_t, double>> support) {
  ClosureValue out;
  std::sort(support.begin(), support.end());
  for (auto [idx, w] : support) {
    if (!(w > 0.0)) continue;
    out.decomposition.entries.push_back({w, tab.grid.point(idx), idx});
    out.value += w * tab.principal_values[idx];
    out.agent_value += w * tab.agent_values[idx];
  }
  return out;
}

// Indices (into `order`) of the upper hull of points (t[order[i]], y[order[i]]),
// with t increasing. Points within `tol` of a chord are not hull vertices.
inline std::vector<std::size_t> upper_hull(const std::vector<double>& t, const std::vector<double>& y,
                                           const std::vector<std::size_t>& order, double tol) {
  std::vector<std::size_t> hull;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t j = order[k];
    while (hull.size() >= 2) {
      const std::size_t a = order[hull[hull.size() - 2]], b = order[hull.back()];
      const double chord = y[a] + (y[j] - y[a]) * (t[b] - t[a]) / (t[j] - t[a]);
      if (y[b] <= chord + tol)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(k);
  }
  return hull;
}

// Evaluates the upper envelope of (t, y) over `order` at tq, returning the
// supporting pair as (index, weight) entries.
inline std::vector<std::pair<std::size_t, double>> envelope_support(const std::vector<double>& t,
                                                                    const std::vector<double>& y,
                                                                    const std::vector<std::size_t>& order, double tq,
                                                                    double tol) {
  const auto hull = upper_hull(t, y, order, tol);
  for (std::size_t h = 0; h < hull.size(); ++h) {
    const std::size_t j = order[hull[h]];
    if (std::abs(t[j] - tq) <= 1e-14) return {{j, 1.0}};
    if (h + 1 < hull.size()) {
      const std::size_t r = order[hull[h + 1]];
      if (t[j] < tq && tq < t[r]) {
        const double wr = (tq - t[j]) / (t[r] - t[j]);
        return {{j, 1.0 - wr}, {r, wr}};
      }
    }
  }
  throw NumericError("query composition lies outside the tabulated grid");
}

inline constexpr double kFaceTol = 1e-10;

inline ClosureValue closure_envelope(const TabulatedFunction& tab, const Composition& f) {
  const std::size_t n = tab.size();
  std::vector<double> t(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = tab.grid.point(i)[1];
    order[i] = i;
  }
  const double tq = f[1];
  auto support = envelope_support(t, tab.principal_values, order, tq, kFaceTol);
  if (support.size() == 1) return make_closure(tab, support);

  // Welfare selection on the optimal face: grid points on the supporting
  // chord, then the upper envelope of U over them.
  const std::size_t l = support[0].first, r = support[1].first;
  const auto& v = tab.principal_values;
  std::vector<std::size_t> face;
  for (std::size_t i = l; i <= r; ++i) {
    const double chord = v[l] + (v[r] - v[l]) * (t[i] - t[l]) / (t[r] - t[l]);
    if (v[i] >= chord - kFaceTol) face.push_back(i);
  }
  return make_closure(tab, envelope_support(t, tab.agent_values, face, tq, 0.0));
}

inline ClosureValue closure_lp(const TabulatedFunction& tab, const Composition& f) {
  const std::size_t n = tab.size(), m = tab.num_states();
  std::vector<std::vector<double>> a(m, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t s = 0; s < m; ++s) a[s][j] = tab.grid.point(j)[s];
  std::vector<double> b(f.weights().begin(), f.weights().end());
  lp::Options opts;
  opts.tie_tol = kFaceTol;
  lp::Solution sol;
  try {
    sol = lp::lexicographic_max(a, b, tab.principal_values, tab.agent_values, opts);
  } catch (const NumericError&) {
    throw NumericError("query composition lies outside the hull of the grid");
  }
  std::vector<std::pair<std::size_t, double>> support;
  for (std::size_t j = 0; j < n; ++j)
    if (sol.x[j] > 1e-14) support.emplace_back(j, sol.x[j]);
  return make_closure(tab, std::move(support));
}

}  // namespace detail

/// Concave closure of the tabulated V at f with its Caratheodory support.
/// Among decompositions attaining the closure, the one maximizing agent
/// welfare is returned.
inline ClosureValue concave_closure(const TabulatedFunction& tab, const Composition& f,
                                    ClosureMethod method = ClosureMethod::automatic) {
  detail::check_query(tab, f);
  if (tab.num_states() == 1) return detail::make_closure(tab, {{0, 1.0}});
  if (method == ClosureMethod::automatic)
    method = tab.num_states() == 2 ? ClosureMethod::envelope : ClosureMethod::lp;
  if (method == ClosureMethod::envelope) {
    if (tab.num_states() != 2) throw InputError("exact envelope path requires two states");
    return detail::closure_envelope(tab, f);
  }
  return detail::closure_lp(tab, f);
}

struct ExtremalValue {
  double principal = 0.0;
  double agent = 0.0;
};

/// Vertex closure: sum_s f(s) V(delta_s) and sum_s f(s) U(delta_s).
inline ExtremalValue extremal_closure(const TabulatedFunction& tab, const Composition& f) {
  detail::check_query(tab, f);
  ExtremalValue out;
  for (std::size_t s = 0; s < f.size(); ++s) {
    const std::size_t v = tab.grid.vertex(s);
    out.principal += f[s] * tab.principal_values[v];
    out.agent += f[s] * tab.agent_values[v];
  }
  return out;
}

inline double implied_agent_value(const TabulatedFunction& tab, const Composition& f,
                                  ClosureMethod method = ClosureMethod::automatic) {
  return concave_closure(tab, f, method).agent_value;
}

}  // namespace occ
