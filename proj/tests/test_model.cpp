#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "occ/model.hpp"
#include "occ/ridehailing.hpp"

using namespace occ;

namespace {

DescribedContract intro_opaque(double low_payment = 0.25) {
  DescribedContract dc;
  dc.communicated.push_back({0, {PaymentLottery::degenerate(0.0), PaymentLottery({{0.25, 0.5}, {2.0, 0.5}})}});
  dc.realized.push_back({0, {{0.0, 0.0}, {low_payment, 2.0}}});
  dc.sorting = SortingFunction::pooled(2);
  return dc;
}

DescribedContract intro_transparent() {
  DescribedContract dc;
  dc.communicated.push_back({0, {PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(1.0 / 3.0)}});
  dc.communicated.push_back({1, {PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(4.0 / 3.0)}});
  dc.realized.push_back({0, {{0.0, 0.0}, {1.0 / 3.0, 0.0}}});
  dc.realized.push_back({1, {{0.0, 0.0}, {0.0, 4.0 / 3.0}}});
  dc.sorting = SortingFunction::identity(2);
  return dc;
}

}  // namespace

TEST(Composition, RejectsBadWeights) {
  EXPECT_THROW(Composition({0.5, 0.6}), InputError);
  EXPECT_THROW(Composition({-0.1, 1.1}), InputError);
  EXPECT_THROW(Composition(std::vector<double>{}), InputError);
  EXPECT_THROW(Composition::normalized({0.5, 0.5 + 1e-6}), InputError);
  EXPECT_NO_THROW(Composition::normalized({0.5, 0.5 + 1e-10}));
}

TEST(Composition, VertexIndex) {
  EXPECT_EQ(Composition::vertex(3, 2).vertex_index(), 2u);
  EXPECT_FALSE(Composition::uniform(3).vertex_index().has_value());
}

TEST(PaymentLottery, MergesAndSorts) {
  PaymentLottery l({{2.0, 0.25}, {1.0, 0.5}, {2.0 + 1e-12, 0.25}, {5.0, 0.0}});
  ASSERT_EQ(l.size(), 2u);
  EXPECT_DOUBLE_EQ(l.atoms()[0].payment, 1.0);
  EXPECT_DOUBLE_EQ(l.atoms()[1].probability, 0.5);
  EXPECT_NO_THROW(l.validate(16.0));
  EXPECT_THROW(PaymentLottery({{1.0, 0.5}}).validate(16.0), InputError);
  EXPECT_THROW(PaymentLottery({{20.0, 1.0}}).validate(16.0), InputError);
}

TEST(ObservedOutcome, IntroMixture) {
  const auto f = Composition::uniform(2);
  const auto lot = observed_outcome_distribution(intro_opaque(), f, 0, 1);
  ASSERT_EQ(lot.size(), 2u);
  EXPECT_DOUBLE_EQ(lot.atoms()[0].payment, 0.25);
  EXPECT_DOUBLE_EQ(lot.atoms()[0].probability, 0.5);
  EXPECT_DOUBLE_EQ(lot.atoms()[1].payment, 2.0);
}

TEST(ObservedOutcome, SingleStateIsDegenerate) {
  DescribedContract dc;
  dc.communicated.push_back({7, {PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(3.0)}});
  dc.realized.push_back({7, {{0.0}, {3.0}}});
  dc.sorting = SortingFunction::pooled(1);
  const auto lot = observed_outcome_distribution(dc, Composition({1.0}), 7, 1);
  ASSERT_EQ(lot.size(), 1u);
  EXPECT_DOUBLE_EQ(lot.atoms()[0].payment, 3.0);
  EXPECT_DOUBLE_EQ(lot.atoms()[0].probability, 1.0);
}

TEST(ObservedOutcome, WeightsFollowPopulation) {
  DescribedContract dc;
  dc.communicated.push_back({0, {PaymentLottery::degenerate(0.0), PaymentLottery({{1.0, 0.25}, {3.0, 0.75}})}});
  dc.realized.push_back({0, {{0.0, 0.0}, {1.0, 3.0}}});
  dc.sorting = SortingFunction::pooled(2);
  const auto lot = observed_outcome_distribution(dc, Composition({0.25, 0.75}), 0, 1);
  EXPECT_DOUBLE_EQ(lot.atoms()[0].probability, 0.25);
  EXPECT_DOUBLE_EQ(lot.atoms()[1].probability, 0.75);
  EXPECT_THROW(observed_outcome_distribution(dc, Composition({0.25, 0.75}), 3, 1), InputError);
}

TEST(Consistency, IntroOpaqueIsConsistent) {
  const auto r = check_consistency(intro_opaque(), Composition::uniform(2));
  EXPECT_TRUE(r.consistent);
  EXPECT_LE(r.max_deviation(), 1e-12);
}

TEST(Consistency, TransparentIsConsistent) {
  EXPECT_TRUE(check_consistency(intro_transparent(), Composition::uniform(2)).consistent);
}

TEST(Consistency, WrongRealizedPaymentIsFlaggedAtBonusOutput) {
  const auto r = check_consistency(intro_opaque(1.0 / 3.0), Composition::uniform(2));
  EXPECT_FALSE(r.consistent);
  EXPECT_LE(r.deviation[0][0], 1e-12);
  EXPECT_NEAR(r.deviation[0][1], 0.5, 1e-12);
}

TEST(Classify, Shapes) {
  EXPECT_EQ(classify_contract(intro_transparent()), ContractClass::transparent);
  EXPECT_EQ(classify_contract(intro_opaque()), ContractClass::fully_coarse);

  DescribedContract dc;
  for (std::size_t k = 0; k < 2; ++k) {
    dc.communicated.push_back({k, {PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(1.0)}});
    dc.realized.push_back({k, {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}});
  }
  dc.sorting = SortingFunction({{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}});
  EXPECT_EQ(classify_contract(dc), ContractClass::opaque_non_coarse);
}

TEST(Classify, PermutedBijectionIsTransparent) {
  auto dc = intro_transparent();
  dc.sorting = SortingFunction({{0.0, 1.0}, {1.0, 0.0}});
  EXPECT_EQ(classify_contract(dc), ContractClass::transparent);
}

TEST(Problem, ValidationCatchesShapeErrors) {
  auto p = ridehailing::presets::intro_problem();
  EXPECT_NO_THROW(p.validate());
  p.payoff.b = {1.0};
  EXPECT_THROW(p.validate(), InputError);
  p = ridehailing::presets::intro_problem();
  p.x_max = -1.0;
  EXPECT_THROW(p.validate(), InputError);
}

TEST(MoneyUtility, CaraIsIncreasingConcaveAndZeroAtZero) {
  const auto u = MoneyUtility::cara(2.0);
  EXPECT_DOUBLE_EQ(u(0.0), 0.0);
  EXPECT_NEAR(u(1.0), 1.0 - std::exp(-2.0), 1e-15);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> x(0.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double a = x(rng), b = x(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    EXPECT_LE(u(lo), u(hi));
    EXPECT_GE(u(0.5 * (lo + hi)), 0.5 * (u(lo) + u(hi)) - 1e-15);
  }
}

// Property: any sorting + realized payments + communicated lotteries built
// from the observed distribution is consistent.
TEST(ConsistencyProperty, ObservedLotteriesAreAlwaysConsistent) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 3, k = 1 + trial % 4;
    std::vector<double> fw(n);
    double sum = 0.0;
    for (auto& w : fw) sum += (w = unit(rng) + 0.05);
    for (auto& w : fw) w /= sum;
    const Composition f = Composition::normalized(fw);
    std::vector<std::vector<double>> rows(n, std::vector<double>(k));
    for (auto& row : rows) {
      double rs = 0.0;
      for (auto& m : row) rs += (m = unit(rng) + 0.01);
      for (auto& m : row) m /= rs;
    }
    DescribedContract dc;
    dc.sorting = SortingFunction(rows, 1e-12);
    for (std::size_t j = 0; j < k; ++j) {
      RealizedContract g{j, {std::vector<double>(n, 0.0), std::vector<double>(n)}};
      for (auto& x : g.payments[1]) x = std::round(unit(rng) * 8.0) / 2.0;
      dc.realized.push_back(g);
      dc.communicated.push_back({j, {PaymentLottery::degenerate(0.0), PaymentLottery::degenerate(0.0)}});
      dc.communicated[j].lotteries[1] = observed_outcome_distribution(dc, f, j, 1);
    }
    EXPECT_TRUE(check_consistency(dc, f).consistent) << "trial " << trial;
  }
}
