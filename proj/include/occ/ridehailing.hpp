#pragma once

// Two-state ride-hailing family: square-root driver utility, quadratic
// effort cost, per-ride platform revenue b_s and payment cost factor tau_s.
// State 0 is the low-demand state (weight alpha), state 1 the high-demand one.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "occ/analysis.hpp"
#include "occ/coarse_solver.hpp"
#include "occ/concavify.hpp"
#include "occ/model.hpp"

namespace occ::ridehailing {

struct Params {
  double b_low = 1.0;
  double b_high = 1.0;
  double tau_low = 1.0;
  double tau_high = 1.0;
  double alpha = 0.5;

  void validate() const {
    if (!(b_low > 0 && b_high > 0 && tau_low > 0 && tau_high > 0)) throw InputError("b and tau must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
  }
};

inline constexpr double kDefaultActionMax = 4.0;
inline constexpr double kDefaultPaymentMax = 16.0;

inline Problem make_problem(const Params& p, MoneyUtility money = MoneyUtility::square_root()) {
  p.validate();
  Problem prob;
  prob.states = StateSpace({"l", "h"});
  prob.population = Composition::normalized({p.alpha, 1.0 - p.alpha});
  prob.utility.money = money;
  prob.utility.cost = QuadraticCost{0.5};
  prob.payoff = PrincipalPayoff::ride_hailing({p.b_low, p.b_high}, {p.tau_low, p.tau_high});
  prob.output = OutputModel::binary_rate();
  prob.actions.upper = kDefaultActionMax;
  prob.x_max = kDefaultPaymentMax;
  prob.validate();
  return prob;
}

namespace presets {
/// Two divisions of equal size; paying division 0 costs four times as much per dollar.
inline Params intro() { return {1.0, 1.0, 1.0, 0.25, 0.5}; }
inline Params unequal_revenue() { return {1.0, 5.0, 1.0, 1.0, 0.5}; }
inline Params unequal_cost() { return {1.0, 1.0, 5.0, 1.0, 0.5}; }
// The low state earns more per ride and costs more per dollar, so V is convex
// near alpha = 0 and concave near alpha = 1.
inline Params mixed() { return {5.0, 1.0, 5.0, 1.0, 0.5}; }
inline Problem intro_problem() { return make_problem(intro()); }
inline Problem risk_neutral_problem() { return make_problem(intro(), MoneyUtility::linear()); }
}  // namespace presets

struct ClosedForm {
  double V = 0.0;
  double U = 0.0;
  std::vector<double> payments;  // per state, output-1 payment
  double action = 0.0;
  bool numeric_fallback = false;  // interior optimum left the action/payment box
};

/// Optimal pooled contract for composition rho. With B = sum rho b and
/// T = sum rho / tau, the first-order conditions of
///   max (sum rho sqrt x)(sum rho (b - tau x))
/// give x_s = B / (3 T tau_s^2), a = sqrt(B T / 3), V = 2/(3 sqrt 3) B^{3/2} T^{1/2}
/// and U = B T / 6.
inline ClosedForm closed_form_coarse(const Params& p, const Composition& rho) {
  p.validate();
  if (rho.size() != 2) throw InputError("ride-hailing compositions have two states");
  const double b[2] = {p.b_low, p.b_high}, tau[2] = {p.tau_low, p.tau_high};
  double B = 0.0, T = 0.0;
  for (int s = 0; s < 2; ++s) {
    B += rho[s] * b[s];
    T += rho[s] / tau[s];
  }
  ClosedForm out;
  out.action = std::sqrt(B * T / 3.0);
  out.V = 2.0 / (3.0 * std::sqrt(3.0)) * std::pow(B, 1.5) * std::sqrt(T);
  out.U = B * T / 6.0;
  bool clipped = out.action > kDefaultActionMax;
  for (int s = 0; s < 2; ++s) {
    // States without mass are paid nothing, as in the numeric solver.
    const double x = rho[s] > 0.0 ? B / (3.0 * T * tau[s] * tau[s]) : 0.0;
    clipped = clipped || x > kDefaultPaymentMax;
    out.payments.push_back(x);
  }
  if (clipped) {
    const auto sol = solve_coarse(make_problem(p), rho);
    out.V = sol.principal_value;
    out.U = sol.agent_value;
    out.action = sol.action;
    out.payments = {sol.payments[1][0], sol.payments[1][1]};
    out.numeric_fallback = true;
  }
  return out;
}

enum class FigureSweep { b_high_unit_tau, tau_low_unit_b };

struct FigureSpec {
  FigureSweep sweep = FigureSweep::b_high_unit_tau;
  std::vector<double> values{1.0, 5.0, 10.0};
  std::size_t resolution = 201;
  bool vary_other_state = false;  // vary b_low / tau_high instead

  static FigureSpec left() { return {FigureSweep::b_high_unit_tau, {1.0, 5.0, 10.0}, 201, false}; }
  static FigureSpec right() { return {FigureSweep::tau_low_unit_b, {1.0, 5.0, 10.0}, 201, false}; }
};

struct FigureTable {
  std::vector<double> alpha;
  std::vector<std::vector<double>> columns;  // one per parameter value

  std::string to_csv() const {
    std::string out = "alpha";
    for (std::size_t c = 0; c < columns.size(); ++c) out += ",V_p" + std::to_string(c + 1);
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", alpha[i]);
      out += buf;
      for (const auto& col : columns) {
        std::snprintf(buf, sizeof buf, ",%.9g", col[i]);
        out += buf;
      }
      out += '\n';
    }
    return out;
  }
};

inline Params figure_params(const FigureSpec& spec, double value) {
  Params p;
  if (spec.sweep == FigureSweep::b_high_unit_tau)
    (spec.vary_other_state ? p.b_low : p.b_high) = value;
  else
    (spec.vary_other_state ? p.tau_high : p.tau_low) = value;
  return p;
}

/// V(alpha) columns with alpha = f(low) on an even grid over [0, 1].
inline FigureTable figure_data(const FigureSpec& spec) {
  if (spec.resolution < 2) throw InputError("figure resolution must be >= 2");
  if (spec.values.empty()) throw InputError("figure needs at least one parameter value");
  FigureTable t;
  for (std::size_t i = 0; i < spec.resolution; ++i)
    t.alpha.push_back(static_cast<double>(i) / static_cast<double>(spec.resolution - 1));
  for (double value : spec.values) {
    const Params p = figure_params(spec, value);
    std::vector<double> col;
    for (double a : t.alpha) col.push_back(closed_form_coarse(p, Composition::normalized({a, 1.0 - a})).V);
    t.columns.push_back(std::move(col));
  }
  return t;
}

struct Check {
  std::string name;
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;
  bool passed() const { return std::abs(actual - expected) <= tolerance; }
};

/// Published numbers for the two-division bonus example (risk-averse and
/// risk-neutral employees).
inline std::vector<Check> verify_published_examples() {
  std::vector<Check> checks;
  const auto half = Composition::uniform(2);
  const auto lo = Composition::vertex(2, 0), hi = Composition::vertex(2, 1);
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);

  const auto intro = presets::intro_problem();
  const auto cf_lo = closed_form_coarse(presets::intro(), lo), cf_hi = closed_form_coarse(presets::intro(), hi);
  checks.push_back({"intro transparent value (closed form)", inv_sqrt3, 0.5 * cf_lo.V + 0.5 * cf_hi.V, 1e-9});
  const auto s_lo = solve_coarse(intro, lo), s_hi = solve_coarse(intro, hi);
  checks.push_back({"intro transparent value (numeric)", inv_sqrt3,
                    0.5 * s_lo.principal_value + 0.5 * s_hi.principal_value, 1e-4});
  checks.push_back({"intro division 0 bonus", 1.0 / 3.0, s_lo.payments[1][0], 1e-6});
  checks.push_back({"intro division 1 bonus", 4.0 / 3.0, s_hi.payments[1][1], 1e-6});
  checks.push_back({"intro division 0 action", inv_sqrt3, s_lo.action, 1e-6});
  checks.push_back({"intro division 1 action", 2.0 * inv_sqrt3, s_hi.action, 1e-6});

  const auto fixed = evaluate_fixed_coarse(intro, {{0.0, 0.0}, {0.25, 2.0}}, half);
  checks.push_back({"intro fixed opaque scheme value", 0.625 * (0.25 + 1.0 / std::sqrt(2.0)), fixed.principal_value,
                    1e-6});
  checks.push_back({"intro fixed opaque scheme action", 0.5 * 0.5 + 0.5 * std::sqrt(2.0), fixed.action, 1e-9});

  const auto tab = tabulate(intro, 201);
  OracleOptions oracle;
  oracle.grid_steps = 201;
  oracle.refine_levels = 3;
  checks.push_back({"intro optimal described value vs brute-force oracle", brute_force_oracle(intro, half, oracle),
                    concave_closure(tab, half).value, 1e-3});

  const auto neutral = presets::risk_neutral_problem();
  const auto n_lo = solve_coarse(neutral, lo), n_hi = solve_coarse(neutral, hi);
  checks.push_back({"risk-neutral transparent value", 0.625,
                    0.5 * n_lo.principal_value + 0.5 * n_hi.principal_value, 1e-4});
  const auto n_tab = tabulate(neutral, 201);
  checks.push_back({"risk-neutral described value", 1.0, concave_closure(n_tab, half).value, 1e-4});
  const auto n_fixed = evaluate_fixed_coarse(neutral, {{0.0, 0.0}, {0.0, 4.0}}, half);
  checks.push_back({"risk-neutral fixed scheme value", 1.0, n_fixed.principal_value, 1e-9});
  checks.push_back({"risk-neutral fixed scheme action", 2.0, n_fixed.action, 1e-9});
  return checks;
}

}  // namespace occ::ridehailing
