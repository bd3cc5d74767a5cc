#pragma once

// Inner problem: the principal's optimal fully coarse contract for a group
// of composition rho, which yields the value functions V(rho) and U(rho).

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "occ/golden.hpp"
#include "occ/model.hpp"

namespace occ {

struct CoarseSolution {
  std::vector<std::vector<double>> payments;  // [output][state]
  double action = 0.0;
  double principal_value = 0.0;
  double agent_value = 0.0;
  double ir_slack = 0.0;
  bool feasible = true;
};

struct ActionChoice {
  double action = 0.0;
  double utility = 0.0;
};

/// Optional principal payoff as a function of the agent's action; used
/// only to break exact ties in the agent's best response.
using PrincipalAtAction = std::function<double(double)>;

namespace detail {

// Agent objective given expected money utility per output.
inline double agent_objective(const Problem& p, std::span<const double> money, double a) {
  const auto& u = p.utility;
  if (p.output.is_binary()) return u.h(a) * money[1] - u.cost(a);
  const auto pi = p.output.probabilities(a);
  double e = 0.0;
  for (std::size_t q = 0; q < money.size(); ++q) e += pi[q] * money[q];
  return u.h(a) * e - u.cost(a);
}

inline bool has_closed_form_response(const Problem& p) {
  return p.output.is_binary() && p.utility.identity_multiplier();
}

inline ActionChoice best_response(const Problem& p, std::span<const double> money, const PrincipalAtAction& tie_break) {
  const double a_max = p.actions.upper;
  if (a_max <= 0.0) return {0.0, agent_objective(p, money, 0.0)};

  if (has_closed_form_response(p)) {
    // a * m - coef * a^2 is concave; the stationary point clipped to the box is the argmax.
    const double m = money[1], coef = p.utility.cost.coef;
    double a;
    if (coef > 0.0) {
      a = std::clamp(m / (2.0 * coef), 0.0, a_max);
    } else if (m > 0.0) {
      a = a_max;
    } else if (m < 0.0) {
      a = 0.0;
    } else {
      a = (tie_break && tie_break(a_max) > tie_break(0.0)) ? a_max : 0.0;
    }
    return {a, agent_objective(p, money, a)};
  }

  // Dense grid, principal-favoring tie-break, then local golden refinement.
  constexpr int n = 10001;
  const double step = a_max / (n - 1);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> values(n);
  for (int i = 0; i < n; ++i) {
    values[i] = agent_objective(p, money, i * step);
    best = std::max(best, values[i]);
  }
  const double tie_tol = 1e-12 * std::max(1.0, std::abs(best));
  int chosen = -1, ties = 0;
  double chosen_principal = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (values[i] < best - tie_tol) continue;
    ++ties;
    const double pv = tie_break ? tie_break(i * step) : 0.0;
    if (chosen < 0 || pv > chosen_principal) {
      chosen = i;
      chosen_principal = pv;
    }
  }
  if (ties > 1) return {chosen * step, values[chosen]};
  const double lo = std::max(0.0, (chosen - 1) * step), hi = std::min(a_max, (chosen + 1) * step);
  const auto refined = golden_maximize([&](double a) { return agent_objective(p, money, a); }, lo, hi, 1e-12);
  if (refined.value >= values[chosen]) return {refined.x, refined.value};
  return {chosen * step, values[chosen]};
}

inline std::vector<double> expected_money(const Problem& p, std::span<const PaymentLottery> lotteries) {
  std::vector<double> money(lotteries.size());
  for (std::size_t q = 0; q < lotteries.size(); ++q) money[q] = lotteries[q].expect(p.utility.money);
  return money;
}

}  // namespace detail

/// Expected utility of an agent who takes the lotteries at face value and
/// plays action a. Under `binary_rate` the q=0 lottery is ignored since
/// that payment is pinned to zero.
inline double agent_expected_utility(const Problem& problem, std::span<const PaymentLottery> lotteries, double a) {
  if (lotteries.size() != problem.num_outputs()) throw InputError("need one lottery per output");
  const auto money = detail::expected_money(problem, lotteries);
  return detail::agent_objective(problem, money, a);
}

inline ActionChoice agent_best_response(const Problem& problem, std::span<const PaymentLottery> lotteries,
                                        const PrincipalAtAction& tie_break = {}) {
  if (lotteries.size() != problem.num_outputs()) throw InputError("need one lottery per output");
  const auto money = detail::expected_money(problem, lotteries);
  return detail::best_response(problem, money, tie_break);
}

/// Evaluates fully coarse payment schemes for a fixed group composition.
/// Payments are laid out flat as [output * num_states + state].
class CoarseEvaluator {
 public:
  struct Result {
    double action = 0.0;
    double principal = 0.0;
    double agent = 0.0;
    double ir_slack = 0.0;
    bool feasible = true;
  };

  CoarseEvaluator(const Problem& problem, const Composition& rho)
      : problem_(problem), rho_(rho), money_(problem.num_outputs(), 0.0) {
    if (rho.size() != problem.num_states()) throw InputError("composition length must equal the number of states");
  }

  const Problem& problem() const { return problem_; }
  const Composition& rho() const { return rho_; }
  std::size_t num_states() const { return problem_.num_states(); }
  std::size_t num_outputs() const { return problem_.num_outputs(); }

  Result operator()(std::span<const double> payments) const {
    const std::size_t n = num_states(), nq = num_outputs();
    const auto& u = problem_.utility.money;
    for (std::size_t q = 0; q < nq; ++q) {
      double m = 0.0;
      for (std::size_t s = 0; s < n; ++s)
        if (rho_[s] > 0.0) m += rho_[s] * u(payments[q * n + s]);
      money_[q] = m;
    }
    ActionChoice choice;
    if (detail::has_closed_form_response(problem_) && problem_.utility.cost.coef > 0.0) {
      choice = detail::best_response(problem_, money_, {});
    } else {
      choice = detail::best_response(problem_, money_, [&](double a) { return principal_at(payments, a); });
    }
    Result r;
    r.action = choice.action;
    r.principal = principal_at(payments, choice.action);
    // Ex-post welfare averages h(a) u~(x) - c(a) over the realized payments;
    // for a single pooled group it coincides with the announced utility.
    r.agent = choice.utility;
    r.ir_slack = choice.utility - problem_.reservation_utility;
    r.feasible = r.ir_slack >= -1e-9;
    return r;
  }

  double principal_at(std::span<const double> payments, double a) const {
    const std::size_t n = num_states(), nq = num_outputs();
    const auto& v = problem_.payoff;
    double total = 0.0;
    if (problem_.output.is_binary()) {
      for (std::size_t s = 0; s < n; ++s)
        if (rho_[s] > 0.0) total += rho_[s] * a * v(a, 1, payments[n + s], s);
      return total;
    }
    const auto pi = problem_.output.probabilities(a);
    for (std::size_t s = 0; s < n; ++s) {
      if (rho_[s] <= 0.0) continue;
      double e = 0.0;
      for (std::size_t q = 0; q < nq; ++q) e += pi[q] * v(a, q, payments[q * n + s], s);
      total += rho_[s] * e;
    }
    return total;
  }

  /// Coordinates the optimizer may move: payments for states with positive
  /// weight, excluding the pinned q=0 row under binary_rate.
  std::vector<std::size_t> free_coordinates() const {
    std::vector<std::size_t> idx;
    const std::size_t n = num_states();
    for (std::size_t q = problem_.output.is_binary() ? 1 : 0; q < num_outputs(); ++q)
      for (std::size_t s = 0; s < n; ++s)
        if (rho_[s] > 0.0) idx.push_back(q * n + s);
    return idx;
  }

 private:
  const Problem& problem_;
  Composition rho_;
  mutable std::vector<double> money_;
};

namespace detail {

inline CoarseSolution to_solution(const CoarseEvaluator& eval, std::span<const double> flat) {
  const auto r = eval(flat);
  CoarseSolution sol;
  const std::size_t n = eval.num_states();
  sol.payments.assign(eval.num_outputs(), std::vector<double>(n, 0.0));
  for (std::size_t q = 0; q < eval.num_outputs(); ++q)
    for (std::size_t s = 0; s < n; ++s) sol.payments[q][s] = flat[q * n + s];
  sol.action = r.action;
  sol.principal_value = r.principal;
  sol.agent_value = r.agent;
  sol.ir_slack = r.ir_slack;
  sol.feasible = r.feasible;
  return sol;
}

inline CoarseSolution null_contract(const CoarseEvaluator& eval) {
  const std::vector<double> zeros(eval.num_outputs() * eval.num_states(), 0.0);
  const auto& p = eval.problem();
  CoarseSolution sol;
  sol.payments.assign(eval.num_outputs(), std::vector<double>(eval.num_states(), 0.0));
  sol.action = 0.0;
  sol.principal_value = eval.principal_at(zeros, 0.0);
  sol.agent_value = -p.utility.cost(0.0);
  sol.ir_slack = sol.agent_value - p.reservation_utility;
  sol.feasible = false;
  return sol;
}

inline double radical_inverse(std::size_t index, std::size_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

inline std::size_t nth_prime(std::size_t i) {
  static constexpr std::array<std::size_t, 16> primes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  return primes[i % primes.size()];
}

}  // namespace detail

/// Flattens a [output][state] payment matrix.
inline std::vector<double> flatten_payments(const std::vector<std::vector<double>>& payments) {
  std::vector<double> flat;
  for (const auto& row : payments) flat.insert(flat.end(), row.begin(), row.end());
  return flat;
}

/// Evaluates the coarse contract that pays payments[q][s] to state-s agents
/// at output q, while announcing the rho-mixture of those payments.
inline CoarseSolution evaluate_fixed_coarse(const Problem& problem, const std::vector<std::vector<double>>& payments,
                                            const Composition& rho) {
  if (payments.size() != problem.num_outputs()) throw InputError("need one payment row per output");
  for (const auto& row : payments) {
    if (row.size() != problem.num_states()) throw InputError("need one payment per state");
    for (double x : row)
      if (!(x >= 0.0 && x <= problem.x_max)) throw InputError("payment outside [0, x_max]");
  }
  CoarseEvaluator eval(problem, rho);
  return detail::to_solution(eval, flatten_payments(payments));
}

struct CoarseSolverOptions {
  std::size_t starts = 8;
  double payment_tol = 1e-8;
  double line_tol = 1e-10;
  std::size_t max_sweeps = 20000;
  double tie_tol = 1e-9;
};

/// Optimal fully coarse contract at composition rho: multi-start coordinate
/// ascent with a golden-section line search per payment coordinate.
inline CoarseSolution solve_coarse(const Problem& problem, const Composition& rho,
                                   const CoarseSolverOptions& opts = {}) {
  CoarseEvaluator eval(problem, rho);
  const auto coords = eval.free_coordinates();
  const std::size_t dim = eval.num_outputs() * eval.num_states();
  const double x_max = problem.x_max;

  auto score = [&](std::span<const double> x) {
    const auto r = eval(x);
    return r.feasible ? r.principal : -std::numeric_limits<double>::infinity();
  };

  std::vector<double> best_x;
  CoarseEvaluator::Result best_r;
  bool have_best = false;

  const std::size_t starts = coords.empty() ? 1 : opts.starts;
  for (std::size_t j = 0; j < starts; ++j) {
    std::vector<double> x(dim, 0.0);
    for (std::size_t i = 0; i < coords.size(); ++i)
      x[coords[i]] = x_max * detail::radical_inverse(j + 1, detail::nth_prime(i));
    double current = score(x);
    for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      double moved = 0.0;
      for (std::size_t c : coords) {
        const double old = x[c];
        auto line = golden_maximize(
            [&](double t) {
              x[c] = t;
              return score(x);
            },
            0.0, x_max, opts.line_tol);
        if (line.value > current) {
          x[c] = line.x;
          current = line.value;
        } else {
          x[c] = old;
        }
        moved = std::max(moved, std::abs(x[c] - old));
      }
      if (moved < opts.payment_tol) break;
    }
    const auto r = eval(x);
    if (!r.feasible) continue;
    const bool better = !have_best || r.principal > best_r.principal + opts.tie_tol ||
                        (r.principal >= best_r.principal - opts.tie_tol && r.agent > best_r.agent + opts.tie_tol);
    if (better) {
      best_x = x;
      best_r = r;
      have_best = true;
    }
  }
  if (!have_best) return detail::null_contract(eval);
  return detail::to_solution(eval, best_x);
}

struct OracleOptions {
  std::size_t grid_steps = 2001;
  std::size_t refine_levels = 0;  // each level re-grids around the incumbent
  // Half-width of the refinement window in cells of the previous level. Two
  // cells is too tight when the optimum sits inside the first cell of a
  // steep coordinate (sqrt utility near zero pay).
  double zoom_cells = 8.0;
};

/// Exhaustive grid maximum of the fixed-scheme objective. Test oracle only;
/// supports at most three free payment coordinates.
inline double brute_force_oracle(const Problem& problem, const Composition& rho, const OracleOptions& opts = {}) {
  CoarseEvaluator eval(problem, rho);
  const auto coords = eval.free_coordinates();
  if (coords.size() > 3) throw InputError("brute-force oracle supports at most 3 free payments");
  if (opts.grid_steps < 2) throw InputError("brute-force oracle needs at least 2 grid steps");
  if (!(opts.zoom_cells > 0.0)) throw InputError("oracle zoom window must be positive");
  const std::size_t dim = eval.num_outputs() * eval.num_states();
  const std::size_t d = coords.size();
  const std::size_t steps = opts.grid_steps;

  std::vector<double> lo(d, 0.0), hi(d, problem.x_max);
  std::vector<double> x(dim, 0.0), best_x(dim, 0.0);
  double best = -std::numeric_limits<double>::infinity();

  for (std::size_t level = 0; level <= opts.refine_levels; ++level) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= steps;
    std::vector<double> h(d);
    for (std::size_t i = 0; i < d; ++i) h[i] = (hi[i] - lo[i]) / static_cast<double>(steps - 1);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      for (std::size_t i = 0; i < d; ++i) {
        x[coords[i]] = lo[i] + h[i] * static_cast<double>(rem % steps);
        rem /= steps;
      }
      const auto r = eval(x);
      if (r.feasible && r.principal > best) {
        best = r.principal;
        best_x = x;
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      const double c = best_x[coords[i]];
      lo[i] = std::max(0.0, c - opts.zoom_cells * h[i]);
      hi[i] = std::min(problem.x_max, c + opts.zoom_cells * h[i]);
    }
  }
  if (best == -std::numeric_limits<double>::infinity()) return detail::null_contract(eval).principal_value;
  return best;
}

}  // namespace occ
