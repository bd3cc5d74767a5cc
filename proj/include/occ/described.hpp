#pragma once

// Turns a closure decomposition into a described contract: one pooled
// contract per support composition, with agents sorted into groups so that
// group k has composition d_k.

#include <cmath>
#include <cstddef>
#include <vector>

#include "occ/coarse_solver.hpp"
#include "occ/concavify.hpp"
#include "occ/model.hpp"

namespace occ {

/// Merges decomposition entries with identical compositions.
inline Decomposition merge_duplicates(const Decomposition& dec, double tol = 1e-12) {
  Decomposition out;
  for (const auto& e : dec.entries) {
    auto it = std::find_if(out.entries.begin(), out.entries.end(),
                           [&](const Decomposition::Entry& o) { return o.composition.distance(e.composition) <= tol; });
    if (it == out.entries.end())
      out.entries.push_back(e);
    else
      it->weight += e.weight;
  }
  return out;
}

/// mu_s(k) = lambda_k d_k(s) / f(s). States with f(s) = 0 get a degenerate
/// row on the first contract and are reported in `unassigned`.
inline SortingFunction build_sorting(const Composition& f, const Decomposition& dec,
                                     std::vector<std::size_t>* unassigned = nullptr) {
  if (dec.entries.empty()) throw InputError("decomposition is empty");
  const std::size_t n = f.size(), k = dec.size();
  std::vector<std::vector<double>> rows(n, std::vector<double>(k, 0.0));
  if (unassigned) unassigned->clear();
  for (std::size_t s = 0; s < n; ++s) {
    if (f[s] <= 0.0) {
      for (const auto& e : dec.entries)
        if (e.composition.size() != n || e.composition[s] > 0.0)
          throw InputError("decomposition puts mass on state " + std::to_string(s) + " which has none in f");
      rows[s][0] = 1.0;
      if (unassigned) unassigned->push_back(s);
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (dec.entries[j].composition.size() != n) throw InputError("decomposition composition has wrong length");
      rows[s][j] = dec.entries[j].weight * dec.entries[j].composition[s] / f[s];
      sum += rows[s][j];
    }
    if (std::abs(sum - 1.0) > 1e-6) throw InputError("decomposition does not average to f");
    for (double& m : rows[s]) m /= sum;
  }
  return SortingFunction(std::move(rows));
}

/// Composition of the agents assigned to contract k.
inline Composition group_composition(const Composition& f, const SortingFunction& sorting, std::size_t k) {
  if (k >= sorting.num_contracts()) throw InputError("contract index out of range");
  const double mass = sorting.mass(f, k);
  if (!(mass > 0.0)) throw InputError("contract " + std::to_string(k) + " receives zero mass");
  std::vector<double> w(f.size());
  for (std::size_t s = 0; s < f.size(); ++s) w[s] = f[s] * sorting(s, k) / mass;
  return Composition::normalized(std::move(w), 1e-9);
}

/// Builds the described contract realizing sum_k lambda_k V(d_k), given the
/// optimal coarse solution at each support composition.
inline DescribedContract assemble_described(const Problem& problem, const Composition& f, const Decomposition& dec,
                                            const std::vector<CoarseSolution>& solutions) {
  if (solutions.size() != dec.size()) throw InputError("need one coarse solution per decomposition entry");
  DescribedContract dc;
  const std::size_t nq = problem.num_outputs(), ns = problem.num_states();
  for (std::size_t k = 0; k < dec.size(); ++k) {
    const auto& comp = dec.entries[k].composition;
    const auto& sol = solutions[k];
    if (sol.payments.size() != nq) throw InputError("coarse solution has wrong output count");
    CommunicatedContract comm{k, {}};
    for (std::size_t q = 0; q < nq; ++q) {
      std::vector<LotteryAtom> atoms;
      for (std::size_t s = 0; s < ns; ++s)
        if (comp[s] > 0.0) atoms.push_back({sol.payments[q][s], comp[s]});
      comm.lotteries.emplace_back(std::move(atoms));
    }
    dc.communicated.push_back(std::move(comm));
    dc.realized.push_back({k, sol.payments});
  }
  dc.sorting = build_sorting(f, dec);
  dc.validate(f, nq);
  return dc;
}

/// Solves the coarse problem at each support composition and assembles.
inline DescribedContract assemble_described(const Problem& problem, const Composition& f, const Decomposition& dec) {
  std::vector<CoarseSolution> solutions;
  for (const auto& e : dec.entries) solutions.push_back(solve_coarse(problem, e.composition));
  return assemble_described(problem, f, dec, solutions);
}

struct DescribedValue {
  double principal = 0.0;
  double welfare = 0.0;
  std::vector<double> actions;  // best response per contract
};

namespace detail {

inline double realized_agent_utility(const Problem& p, const RealizedContract& g, std::size_t s, double a) {
  const auto& u = p.utility;
  if (p.output.is_binary()) return u.h(a) * u.money(g.payment(1, s)) - u.cost(a);
  const auto pi = p.output.probabilities(a);
  double e = 0.0;
  for (std::size_t q = 0; q < pi.size(); ++q) e += pi[q] * u.money(g.payment(q, s));
  return u.h(a) * e - u.cost(a);
}

}  // namespace detail

/// Principal payoff and agent welfare of a consistent described contract.
/// Each group best-responds to its communicated contract.
inline DescribedValue evaluate_described(const Problem& problem, const DescribedContract& dc, const Composition& f) {
  dc.validate(f, problem.num_outputs());
  if (!check_consistency(dc, f).consistent) throw InputError("described contract is inconsistent");
  DescribedValue out;
  for (std::size_t k = 0; k < dc.size(); ++k) {
    const Composition group = group_composition(f, dc.sorting, k);
    const double mass = dc.sorting.mass(f, k);
    const CoarseEvaluator eval(problem, group);
    const auto flat = flatten_payments(dc.realized[k].payments);
    const auto choice = agent_best_response(problem, dc.communicated[k].lotteries,
                                            [&](double a) { return eval.principal_at(flat, a); });
    out.actions.push_back(choice.action);
    out.principal += mass * eval.principal_at(flat, choice.action);
    for (std::size_t s = 0; s < f.size(); ++s) {
      const double w = dc.sorting(s, k) * f[s];
      if (w > 0.0) out.welfare += w * detail::realized_agent_utility(problem, dc.realized[k], s, choice.action);
    }
  }
  return out;
}

}  // namespace occ
