#pragma once

// Opacity metrics, convexity tests on the tabulated value function, the
// risk-aversion sweep, and the orthogonal closure for contracts that treat
// same-state agents identically.

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "occ/coarse_solver.hpp"
#include "occ/concavify.hpp"
#include "occ/model.hpp"
#include "occ/partitions.hpp"

namespace occ {

struct ClosureReport {
  Composition f;
  double V = 0.0;
  double Vbar = 0.0;
  double VT = 0.0;
  double U = 0.0;
  double Utilde = 0.0;
  double UT = 0.0;
  double value_of_opacity = 0.0;
  double welfare_increase = 0.0;
  ContractClass verdict = ContractClass::fully_coarse;
  Decomposition decomposition;
};

/// Shape of the optimal described contract implied by a decomposition.
inline ContractClass decomposition_class(const Decomposition& dec) {
  const bool all_vertices = std::all_of(dec.entries.begin(), dec.entries.end(),
                                        [](const auto& e) { return e.composition.vertex_index(1e-12).has_value(); });
  if (all_vertices) return ContractClass::transparent;
  if (dec.size() == 1) return ContractClass::fully_coarse;
  return ContractClass::opaque_non_coarse;
}

namespace detail {

inline ClosureReport build_report(const TabulatedFunction& tab, const Composition& f, double v, double u) {
  ClosureReport r;
  r.f = f;
  r.V = v;
  r.U = u;
  const auto closure = concave_closure(tab, f);
  const auto extremal = extremal_closure(tab, f);
  r.Vbar = closure.value;
  r.Utilde = closure.agent_value;
  r.VT = extremal.principal;
  r.UT = extremal.agent;
  r.value_of_opacity = r.Vbar - r.VT;
  r.welfare_increase = r.Utilde - r.UT;
  r.decomposition = closure.decomposition;
  r.verdict = decomposition_class(closure.decomposition);
  return r;
}

}  // namespace detail

/// Report at a grid composition.
inline ClosureReport closure_report(const TabulatedFunction& tab, const Composition& f) {
  const auto idx = tab.grid.find(f);
  if (!idx) throw InputError("composition is not a grid point; pass the problem to evaluate V(f) directly");
  return detail::build_report(tab, f, tab.principal_values[*idx], tab.agent_values[*idx]);
}

/// Report at any composition; V(f) and U(f) are solved directly when f is off the grid.
inline ClosureReport closure_report(const Problem& problem, const TabulatedFunction& tab, const Composition& f) {
  if (tab.grid.find(f)) return closure_report(tab, f);
  const auto sol = solve_coarse(problem, f);
  return detail::build_report(tab, f, sol.principal_value, sol.agent_value);
}

enum class ConvexityVerdict { coarse_optimal, transparent_optimal, inconclusive };

inline const char* to_string(ConvexityVerdict v) {
  switch (v) {
    case ConvexityVerdict::coarse_optimal: return "coarse_optimal";
    case ConvexityVerdict::transparent_optimal: return "transparent_optimal";
    case ConvexityVerdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct CurvatureWitness {
  std::size_t grid_index = 0;
  std::size_t plus_state = 0;   // grid line direction e_plus - e_minus
  std::size_t minus_state = 0;
  double second_difference = 0.0;
};

struct ConvexityClassification {
  ConvexityVerdict verdict = ConvexityVerdict::inconclusive;
  std::optional<CurvatureWitness> concave_witness;  // most negative second difference
  std::optional<CurvatureWitness> convex_witness;   // most positive second difference
  std::size_t lines_checked = 0;
};

inline constexpr double kCurvatureTol = 1e-8;

/// Second differences of V along every grid line. All <= tol: an optimal
/// described contract is fully coarse. All >= -tol: it is transparent.
inline ConvexityClassification convexity_classification(const TabulatedFunction& tab, double tol = kCurvatureTol) {
  if (tab.grid.num_states() > 1 && tab.grid.resolution() < 3)
    throw InputError("convexity classification needs grid resolution >= 3");
  ConvexityClassification out;
  const std::size_t n = tab.num_states();
  const auto& v = tab.principal_values;
  for (std::size_t i = 0; i < tab.size(); ++i) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t m = p + 1; m < n; ++m) {
        const auto nb = tab.grid.line_neighbors(i, p, m);
        if (!nb) continue;
        ++out.lines_checked;
        const double d2 = v[nb->first] - 2.0 * v[i] + v[nb->second];
        const CurvatureWitness w{i, p, m, d2};
        if (!out.concave_witness || d2 < out.concave_witness->second_difference) out.concave_witness = w;
        if (!out.convex_witness || d2 > out.convex_witness->second_difference) out.convex_witness = w;
      }
    }
  }
  const double lo = out.concave_witness ? out.concave_witness->second_difference : 0.0;
  const double hi = out.convex_witness ? out.convex_witness->second_difference : 0.0;
  if (hi <= tol)
    out.verdict = ConvexityVerdict::coarse_optimal;
  else if (lo >= -tol)
    out.verdict = ConvexityVerdict::transparent_optimal;
  else
    out.verdict = ConvexityVerdict::inconclusive;
  // Witnesses are only meaningful where they rule something out.
  if (out.concave_witness && out.concave_witness->second_difference >= -tol) out.concave_witness.reset();
  if (out.convex_witness && out.convex_witness->second_difference <= tol) out.convex_witness.reset();
  return out;
}

struct SweepPoint {
  double rho = 0.0;
  double Vbar = 0.0;
  double VT = 0.0;
  double value_of_opacity = 0.0;
};

/// Value of opacity at the template's population as risk aversion grows.
inline std::vector<SweepPoint> risk_aversion_sweep(const Problem& templ, const std::vector<double>& rho_values,
                                                   std::size_t resolution = 0) {
  const auto kind = templ.utility.money.kind;
  if (kind != MoneyUtility::Kind::cara && kind != MoneyUtility::Kind::scaled)
    throw InputError("risk-aversion sweep needs a CARA or scaled utility template");
  for (std::size_t i = 0; i < rho_values.size(); ++i) {
    if (!(rho_values[i] > 0.0)) throw InputError("rho values must be positive");
    if (i > 0 && !(rho_values[i] > rho_values[i - 1])) throw InputError("rho values must be ascending");
  }
  if (resolution == 0) resolution = default_resolution(templ.num_states());
  std::vector<SweepPoint> out;
  for (double rho : rho_values) {
    Problem p = templ;
    p.utility.money.rho = rho;
    p.validate();
    const auto tab = tabulate(p, resolution);
    const double vbar = concave_closure(tab, p.population).value;
    const double vt = extremal_closure(tab, p.population).principal;
    out.push_back({rho, vbar, vt, vbar - vt});
  }
  return out;
}

struct PartitionValue {
  Blocks blocks;
  double value = 0.0;
};

struct OrthogonalClosure {
  double value = 0.0;
  PartitionValue best;
  std::vector<PartitionValue> partitions;  // every partition, enumeration order
};

inline constexpr std::size_t kMaxOrthogonalStates = 10;

/// Optimal value when same-state agents must share a contract: the best
/// split of supp(f) into blocks, each served by the optimal pooled contract
/// for f conditioned on that block.
inline OrthogonalClosure orthogonal_closure(const Problem& problem, const Composition& f,
                                            const CoarseSolverOptions& opts = {}) {
  if (f.size() != problem.num_states()) throw InputError("composition length must equal the number of states");
  if (problem.num_states() > kMaxOrthogonalStates) throw InputError("orthogonal closure supports at most 10 states");
  std::vector<std::size_t> support;
  for (std::size_t s = 0; s < f.size(); ++s)
    if (f[s] > 0.0) support.push_back(s);

  std::map<std::vector<std::size_t>, double> block_value;
  auto value_of = [&](const std::vector<std::size_t>& block, double mass) {
    auto it = block_value.find(block);
    if (it != block_value.end()) return it->second;
    std::vector<double> w(f.size(), 0.0);
    for (auto s : block) w[s] = f[s] / mass;
    const double v = solve_coarse(problem, Composition::normalized(std::move(w)), opts).principal_value;
    block_value.emplace(block, v);
    return v;
  };

  OrthogonalClosure out;
  out.value = -std::numeric_limits<double>::infinity();
  for_each_set_partition(support, [&](const Blocks& blocks) {
    PartitionValue pv{blocks, 0.0};
    for (const auto& block : blocks) {
      double mass = 0.0;
      for (auto s : block) mass += f[s];
      pv.value += mass * value_of(block, mass);
    }
    if (pv.value > out.value) {
      out.value = pv.value;
      out.best = pv;
    }
    out.partitions.push_back(std::move(pv));
  });
  return out;
}

}  // namespace occ
