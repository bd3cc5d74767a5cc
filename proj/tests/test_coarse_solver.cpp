#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "occ/coarse_solver.hpp"
#include "occ/ridehailing.hpp"

using namespace occ;

namespace {

const double kInvSqrt3 = 1.0 / std::sqrt(3.0);

Problem single_state(double b = 1.0, double tau = 1.0) {
  Problem p;
  p.states = StateSpace({"only"});
  p.population = Composition({1.0});
  p.payoff = PrincipalPayoff::ride_hailing({b}, {tau});
  p.validate();
  return p;
}

}  // namespace

TEST(AgentUtility, IntroDegenerateLottery) {
  const auto p = ridehailing::presets::intro_problem();
  const std::vector<PaymentLottery> l{PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(1.0 / 3.0)};
  EXPECT_NEAR(agent_expected_utility(p, l, kInvSqrt3), 1.0 / 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(agent_expected_utility(p, l, 0.0), 0.0);
}

TEST(AgentUtility, IntroOpaqueLottery) {
  const auto p = ridehailing::presets::intro_problem();
  const std::vector<PaymentLottery> l{PaymentLottery::degenerate(0.0), PaymentLottery({{0.25, 0.5}, {2.0, 0.5}})};
  const double a = 0.5 * 0.5 + 0.5 * std::sqrt(2.0);
  EXPECT_NEAR(agent_expected_utility(p, l, a), 0.5 * a * a, 1e-12);
  EXPECT_NEAR(0.5 * 0.9571 * 0.9571, 0.45803, 1e-5);
}

TEST(BestResponse, PublishedActions) {
  const auto p = ridehailing::presets::intro_problem();
  const std::vector<PaymentLottery> transparent{PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(1.0 / 3.0)};
  EXPECT_NEAR(agent_best_response(p, transparent).action, kInvSqrt3, 1e-12);
  const std::vector<PaymentLottery> opaque{PaymentLottery::degenerate(0.0), PaymentLottery({{0.25, 0.5}, {2.0, 0.5}})};
  EXPECT_NEAR(agent_best_response(p, opaque).action, 0.957106781, 1e-9);
  const auto neutral = ridehailing::presets::risk_neutral_problem();
  const std::vector<PaymentLottery> mean2{PaymentLottery::degenerate(0.0), PaymentLottery({{0.0, 0.5}, {4.0, 0.5}})};
  EXPECT_NEAR(agent_best_response(neutral, mean2).action, 2.0, 1e-12);
}

TEST(BestResponse, ClipsAtActionBound) {
  auto p = ridehailing::presets::risk_neutral_problem();
  p.actions.upper = 1.0;
  const std::vector<PaymentLottery> l{PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(3.0)};
  EXPECT_DOUBLE_EQ(agent_best_response(p, l).action, 1.0);
}

TEST(BestResponse, GridPathMatchesClosedFormForNonlinearMultiplier) {
  // h(a) = a written as a function forces the grid + golden path.
  auto p = ridehailing::presets::intro_problem();
  p.utility.multiplier = [](double a) { return a; };
  const std::vector<PaymentLottery> l{PaymentLottery::degenerate(0.0), PaymentLottery({{0.25, 0.5}, {2.0, 0.5}})};
  EXPECT_NEAR(agent_best_response(p, l).action, 0.957106781, 1e-7);
}

TEST(FixedCoarse, PublishedValues) {
  const auto half = Composition::uniform(2);
  const auto opaque = evaluate_fixed_coarse(ridehailing::presets::intro_problem(), {{0, 0}, {0.25, 2.0}}, half);
  EXPECT_NEAR(opaque.principal_value, 0.625 * (0.25 + 1.0 / std::sqrt(2.0)), 1e-9);
  const auto neutral = evaluate_fixed_coarse(ridehailing::presets::risk_neutral_problem(), {{0, 0}, {0, 4}}, half);
  EXPECT_NEAR(neutral.principal_value, 1.0, 1e-12);
  EXPECT_THROW(evaluate_fixed_coarse(ridehailing::presets::intro_problem(), {{0, 0}, {0.25, 99}}, half), InputError);
}

TEST(FixedCoarse, StateIndependentPaymentsMatchSingleState) {
  // b and tau equal across states, so a state-independent scheme is a one-state problem.
  const auto two = ridehailing::make_problem({1.0, 1.0, 1.0, 1.0, 0.5});
  const auto one = single_state();
  for (double x : {0.0, 0.1, 0.7, 2.5}) {
    const auto a = evaluate_fixed_coarse(two, {{0, 0}, {x, x}}, Composition({0.3, 0.7}));
    const auto b = evaluate_fixed_coarse(one, {{0}, {x}}, Composition({1.0}));
    EXPECT_NEAR(a.principal_value, b.principal_value, 1e-12);
    EXPECT_NEAR(a.action, b.action, 1e-12);
  }
}

TEST(SolveCoarse, VertexMatchesCalculus) {
  const auto sol = solve_coarse(ridehailing::presets::intro_problem(), Composition::vertex(2, 0));
  EXPECT_NEAR(sol.payments[1][0], 1.0 / 3.0, 1e-6);
  EXPECT_DOUBLE_EQ(sol.payments[1][1], 0.0);
  EXPECT_NEAR(sol.principal_value, 2.0 / (3.0 * std::sqrt(3.0)), 1e-10);
  EXPECT_NEAR(sol.action, kInvSqrt3, 1e-6);
}

TEST(SolveCoarse, IntroPooledOptimum) {
  const auto sol = solve_coarse(ridehailing::presets::intro_problem(), Composition::uniform(2));
  EXPECT_NEAR(sol.payments[1][0], 2.0 / 15.0, 1e-6);
  EXPECT_NEAR(sol.payments[1][1], 32.0 / 15.0, 1e-6);
  EXPECT_NEAR(sol.principal_value, 0.608580619, 1e-8);
  EXPECT_NEAR(sol.agent_value, 2.5 / 6.0, 1e-7);
  EXPECT_TRUE(sol.feasible);
}

TEST(SolveCoarse, RiskNeutralPooledOptimum) {
  const auto sol = solve_coarse(ridehailing::presets::risk_neutral_problem(), Composition::uniform(2));
  EXPECT_NEAR(sol.payments[1][0], 0.0, 1e-6);
  EXPECT_NEAR(sol.payments[1][1], 4.0, 1e-6);
  EXPECT_NEAR(sol.principal_value, 1.0, 1e-10);
  EXPECT_NEAR(sol.action, 2.0, 1e-6);
}

TEST(SolveCoarse, ZeroPaymentBoundGivesZero) {
  auto p = ridehailing::presets::intro_problem();
  p.x_max = 0.0;
  const auto sol = solve_coarse(p, Composition::uniform(2));
  EXPECT_DOUBLE_EQ(sol.principal_value, 0.0);
  EXPECT_DOUBLE_EQ(sol.action, 0.0);
  EXPECT_DOUBLE_EQ(brute_force_oracle(p, Composition::uniform(2)), 0.0);
}

TEST(SolveCoarse, InfeasibleReservationFallsBackToNullContract) {
  auto p = ridehailing::presets::intro_problem();
  p.reservation_utility = 100.0;
  const auto sol = solve_coarse(p, Composition::uniform(2));
  EXPECT_FALSE(sol.feasible);
  EXPECT_DOUBLE_EQ(sol.action, 0.0);
}

TEST(SolveCoarse, ReservationUtilityBinds) {
  // The unconstrained optimum at delta_0 gives the agent 1/6; demand more.
  auto p = ridehailing::presets::intro_problem();
  p.reservation_utility = 0.25;
  const auto sol = solve_coarse(p, Composition::vertex(2, 0));
  EXPECT_TRUE(sol.feasible);
  EXPECT_GE(sol.agent_value, 0.25 - 1e-9);
  // Utility x/2 at action sqrt(x): the constraint forces x = 1/2.
  EXPECT_NEAR(sol.payments[1][0], 0.5, 1e-6);
  EXPECT_NEAR(sol.principal_value, std::sqrt(0.5) * 0.5, 1e-6);
}

TEST(Oracle, AgreesWithSolver) {
  const auto p = ridehailing::presets::intro_problem();
  const auto half = Composition::uniform(2);
  const double oracle = brute_force_oracle(p, half);
  EXPECT_NEAR(oracle, 0.6086, 1e-4);
  EXPECT_NEAR(oracle, solve_coarse(p, half).principal_value, 1e-3);
  OracleOptions one_d;
  one_d.grid_steps = 400001;  // step 1e-5 on [0, 4]
  auto p4 = p;
  p4.x_max = 4.0;
  EXPECT_NEAR(brute_force_oracle(p4, Composition::vertex(2, 0), one_d), 2.0 / (3.0 * std::sqrt(3.0)), 1e-9);
}

TEST(Oracle, RejectsHighDimension) {
  Problem p;
  p.states = StateSpace({"a", "b", "c", "d"});
  p.population = Composition::uniform(4);
  p.payoff = PrincipalPayoff::ride_hailing({1, 1, 1, 1}, {1, 1, 1, 1});
  EXPECT_THROW(brute_force_oracle(p, Composition::uniform(4)), InputError);
}

// Property: solve_coarse is never beaten by random fixed schemes and never
// loses to the oracle by more than the oracle's grid error.
TEST(SolveCoarseProperty, DominatesRandomSchemes) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> param(0.5, 4.0), unit(0.05, 0.95), pay(0.0, 6.0);
  for (int trial = 0; trial < 20; ++trial) {
    const ridehailing::Params rp{param(rng), param(rng), param(rng), param(rng), unit(rng)};
    const auto p = ridehailing::make_problem(rp);
    const double r0 = unit(rng);
    const Composition rho({r0, 1.0 - r0});
    const auto sol = solve_coarse(p, rho);
    for (int k = 0; k < 50; ++k) {
      const auto fixed = evaluate_fixed_coarse(p, {{0, 0}, {pay(rng), pay(rng)}}, rho);
      EXPECT_GE(sol.principal_value, fixed.principal_value - 1e-12);
    }
    OracleOptions o;
    o.grid_steps = 201;
    o.refine_levels = 3;
    EXPECT_NEAR(sol.principal_value, brute_force_oracle(p, rho, o), 1e-4) << "trial " << trial;
  }
}

TEST(SolveCoarse, Deterministic) {
  const auto p = ridehailing::presets::intro_problem();
  const Composition rho({0.37, 0.63});
  const auto a = solve_coarse(p, rho), b = solve_coarse(p, rho);
  EXPECT_EQ(a.principal_value, b.principal_value);
  EXPECT_EQ(a.payments, b.payments);
}
