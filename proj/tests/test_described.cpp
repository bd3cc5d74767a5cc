#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "occ/described.hpp"
#include "occ/ridehailing.hpp"

using namespace occ;

namespace {

Decomposition dec_of(std::vector<std::pair<double, std::vector<double>>> parts) {
  Decomposition d;
  for (auto& [w, c] : parts) d.entries.push_back({w, Composition(c, 1e-12), 0});
  return d;
}

}  // namespace

TEST(BuildSorting, SingleEntryIsPooled) {
  const Composition f({0.3, 0.7});
  const auto mu = build_sorting(f, dec_of({{1.0, {0.3, 0.7}}}));
  EXPECT_EQ(mu.num_contracts(), 1u);
  EXPECT_DOUBLE_EQ(mu(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(mu(1, 0), 1.0);
}

TEST(BuildSorting, VertexDecompositionIsIdentity) {
  const Composition f({0.3, 0.7});
  const auto mu = build_sorting(f, dec_of({{0.3, {1, 0}}, {0.7, {0, 1}}}));
  EXPECT_DOUBLE_EQ(mu(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(mu(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(mu(1, 1), 1.0);
}

TEST(BuildSorting, HandArithmetic) {
  const Composition f({0.5, 0.5});
  const auto dec = dec_of({{0.25, {1, 0}}, {0.75, {1.0 / 3.0, 2.0 / 3.0}}});
  const auto mu = build_sorting(f, dec);
  EXPECT_NEAR(mu(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(mu(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(mu(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(mu(1, 1), 1.0, 1e-12);
  const auto g1 = group_composition(f, mu, 1);
  EXPECT_NEAR(g1[0], 1.0 / 3.0, 1e-12);
  const auto g0 = group_composition(f, mu, 0);
  EXPECT_NEAR(g0[0], 1.0, 1e-12);
}

TEST(BuildSorting, RejectsNonAveragingDecomposition) {
  EXPECT_THROW(build_sorting(Composition::uniform(2), dec_of({{1.0, {1, 0}}})), InputError);
}

TEST(BuildSorting, ZeroMassStatesAreReported) {
  std::vector<std::size_t> unassigned;
  const auto mu = build_sorting(Composition({1.0, 0.0}), dec_of({{1.0, {1, 0}}}), &unassigned);
  EXPECT_EQ(unassigned, (std::vector<std::size_t>{1}));
  EXPECT_DOUBLE_EQ(mu(1, 0), 1.0);
}

TEST(GroupComposition, IdentityAndPooled) {
  const Composition f({0.2, 0.3, 0.5});
  for (std::size_t s = 0; s < 3; ++s)
    EXPECT_EQ(group_composition(f, SortingFunction::identity(3), s).vertex_index(), s);
  const auto pooled = group_composition(f, SortingFunction::pooled(3), 0);
  EXPECT_DOUBLE_EQ(pooled.distance(f), 0.0);
}

TEST(Assemble, IntroSingleContract) {
  const auto p = ridehailing::presets::intro_problem();
  const auto f = Composition::uniform(2);
  const auto tab = tabulate(p, 201);
  const auto c = concave_closure(tab, f);
  const auto dc = assemble_described(p, f, c.decomposition);
  ASSERT_EQ(dc.size(), 1u);
  EXPECT_EQ(classify_contract(dc), ContractClass::fully_coarse);
  const auto atoms = dc.communicated[0].lotteries[1].atoms();
  ASSERT_EQ(atoms.size(), 2u);
  EXPECT_NEAR(atoms[0].payment, 2.0 / 15.0, 1e-6);
  EXPECT_NEAR(atoms[1].payment, 32.0 / 15.0, 1e-6);
  EXPECT_NEAR(atoms[0].probability, 0.5, 1e-12);
  EXPECT_TRUE(check_consistency(dc, f).consistent);
  const auto v = evaluate_described(p, dc, f);
  EXPECT_NEAR(v.principal, c.value, 1e-6);
  EXPECT_NEAR(v.welfare, c.agent_value, 1e-6);
}

TEST(Assemble, UnequalRevenueIsTransparent) {
  const auto p = ridehailing::make_problem(ridehailing::presets::unequal_revenue());
  const auto f = Composition::uniform(2);
  const auto c = concave_closure(tabulate(p, 201), f);
  const auto dc = assemble_described(p, f, c.decomposition);
  EXPECT_EQ(classify_contract(dc), ContractClass::transparent);
  for (const auto& comm : dc.communicated) EXPECT_EQ(comm.lotteries[1].size(), 1u);
  EXPECT_NEAR(evaluate_described(p, dc, f).principal, c.value, 1e-6);
}

TEST(Assemble, OneStateProblem) {
  Problem p;
  p.states = StateSpace({"only"});
  p.population = Composition({1.0});
  p.payoff = PrincipalPayoff::ride_hailing({1.0}, {1.0});
  const Composition f({1.0});
  const auto dc = assemble_described(p, f, concave_closure(tabulate(p, 3), f).decomposition);
  EXPECT_EQ(classify_contract(dc), ContractClass::transparent);
}

TEST(EvaluateDescribed, PublishedSchemes) {
  const auto p = ridehailing::presets::intro_problem();
  const auto f = Composition::uniform(2);
  DescribedContract opaque;
  opaque.communicated.push_back({0, {PaymentLottery::degenerate(0.0), PaymentLottery({{0.25, 0.5}, {2.0, 0.5}})}});
  opaque.realized.push_back({0, {{0.0, 0.0}, {0.25, 2.0}}});
  opaque.sorting = SortingFunction::pooled(2);
  EXPECT_NEAR(evaluate_described(p, opaque, f).principal, 0.625 * (0.25 + 1.0 / std::sqrt(2.0)), 1e-9);

  DescribedContract transparent;
  transparent.communicated.push_back({0, {PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(1.0 / 3.0)}});
  transparent.communicated.push_back({1, {PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(4.0 / 3.0)}});
  transparent.realized.push_back({0, {{0.0, 0.0}, {1.0 / 3.0, 0.0}}});
  transparent.realized.push_back({1, {{0.0, 0.0}, {0.0, 4.0 / 3.0}}});
  transparent.sorting = SortingFunction::identity(2);
  const auto v = evaluate_described(p, transparent, f);
  EXPECT_NEAR(v.principal, 1.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(v.welfare, 5.0 / 12.0, 1e-12);

  opaque.realized[0].payments[1][0] = 1.0 / 3.0;
  EXPECT_THROW(evaluate_described(p, opaque, f), InputError);
}

// Property: for random decompositions of random f, sorting rows sum to one
// and group compositions recover the decomposition entries.
TEST(DescribedProperty, SortingRoundTrip) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 3, k = 1 + trial % 4;
    Decomposition dec;
    std::vector<double> lambda(k), fw(n, 0.0);
    double ls = 0;
    for (auto& l : lambda) ls += (l = unit(rng));
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> d(n);
      double ds = 0;
      for (auto& x : d) ds += (x = unit(rng));
      for (auto& x : d) x /= ds;
      lambda[j] /= ls;
      for (std::size_t s = 0; s < n; ++s) fw[s] += lambda[j] * d[s];
      dec.entries.push_back({lambda[j], Composition::normalized(d), 0});
    }
    const auto f = Composition::normalized(fw);
    const auto mu = build_sorting(f, dec);
    for (const auto& row : mu.rows()) {
      double s = 0;
      for (double m : row) s += m;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    for (std::size_t j = 0; j < k; ++j) {
      EXPECT_NEAR(mu.mass(f, j), lambda[j], 1e-12);
      EXPECT_LE(group_composition(f, mu, j).distance(dec.entries[j].composition), 1e-9);
    }
  }
}
