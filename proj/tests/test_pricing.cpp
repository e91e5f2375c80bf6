#include <gtest/gtest.h>

#include <sstream>

#include "das/oracle.hpp"
#include "das/pricing.hpp"
#include "das/random.hpp"
#include "fixtures.hpp"

namespace das {
namespace {

using testing::make_model;

std::vector<ClientModel> tiny_pair(Rng& rng) {
  return {random_client_model(rng, tiny_ranges()), random_client_model(rng, tiny_ranges())};
}

TEST(DualValue, ZeroPriceIsSumOfGains) {
  Rng rng(1);
  const auto models = tiny_pair(rng);
  const auto d = dual_value(models, 0.0, 1.0);
  EXPECT_NEAR(d.value, average_cost_solve(models[0], 0.0).gain + average_cost_solve(models[1], 0.0).gain, 1e-12);
}

TEST(DualValue, IdenticalClientsDoubleSingleValue) {
  Rng rng(2);
  const auto m = random_client_model(rng, tiny_ranges());
  for (double price : {0.0, 0.3, 1.7}) {
    const auto d = dual_value({m, m}, price, 0.8);
    EXPECT_NEAR(d.value, 2.0 * average_cost_solve(m, price).gain - price * 0.8, 1e-12);
  }
}

TEST(DualValue, MatchesProductMdp) {
  Rng rng(3);
  for (int trial = 0; trial < 8; ++trial) {
    const auto models = tiny_pair(rng);
    for (double price : {0.0, 0.4, 2.0}) {
      const double budget = 0.5;
      const auto d = dual_value(models, price, budget);
      const auto joint = product_mdp_solve(models, price);
      EXPECT_NEAR(d.value, joint.gain - price * budget, 1e-6);
    }
  }
}

TEST(DualValue, ParallelMatchesSerial) {
  Rng rng(4);
  std::vector<ClientModel> models;
  for (int i = 0; i < 5; ++i) models.push_back(random_client_model(rng));
  PricingOptions par;
  par.threads = 3;
  const auto a = dual_value(models, 0.7, 2.0);
  const auto b = dual_value(models, 0.7, 2.0, par);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.client_power, b.client_power);
  EXPECT_EQ(a.policies, b.policies);
}

TEST(Subgradient, HugePriceLeavesWholeBudget) {
  Rng rng(5);
  const auto models = tiny_pair(rng);
  EXPECT_DOUBLE_EQ(subgradient(models, 1e6, 1.3), 1.3);
}

TEST(Subgradient, ZeroPriceZeroBudgetIsMinusUsage) {
  Rng rng(6);
  const auto models = tiny_pair(rng);
  const auto d = dual_value(models, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(d.subgradient(), -d.total_power());
  EXPECT_LT(d.subgradient(), 0.0);
}

TEST(Subgradient, FiniteDifferencesBracketSupergradient) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto models = tiny_pair(rng);
    const double budget = 0.6;
    for (double price : {0.2, 0.9, 2.5}) {
      const double h = 1e-3;
      const double d0 = dual_value(models, price, budget).value;
      const double up = (dual_value(models, price + h, budget).value - d0) / h;
      const double down = (d0 - dual_value(models, price - h, budget).value) / h;
      const double g = -subgradient(models, price, budget);
      EXPECT_LE(up, g + 1e-6);
      EXPECT_LE(g, down + 1e-6);
    }
  }
}

TEST(DualFunction, ConcaveAndUsageNonincreasing) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto models = tiny_pair(rng);
    std::vector<double> prices, values, usage;
    for (int i = 0; i <= 30; ++i) {
      const auto d = dual_value(models, 0.15 * i, 0.7);
      prices.push_back(d.price);
      values.push_back(d.value);
      usage.push_back(d.total_power());
    }
    for (std::size_t i = 1; i + 1 < prices.size(); ++i) {
      EXPECT_GE(values[i], 0.5 * (values[i - 1] + values[i + 1]) - 1e-8);
      EXPECT_LE(usage[i + 1], usage[i] + 1e-9);
    }
  }
}

TEST(PriceIteration, SlackBudgetGivesZeroPrice) {
  Rng rng(9);
  const auto models = tiny_pair(rng);
  const double usage = dual_value(models, 0.0, 0.0).total_power();
  const auto r = price_iteration(models, usage + 1.0);
  EXPECT_EQ(r.price, 0.0);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.violation, 0.0);
}

TEST(PriceIteration, TinyBudgetDrivesPriceUp) {
  const auto m = make_model(4, 2, {0.2}, {0.0, 1.0}, {0.0, 0.8}, 1.0);
  const double eps = 1e-3;
  const auto r = price_iteration({m, m}, eps);
  EXPECT_GT(r.price, 1.0);
  EXPECT_LE(r.total_power, eps + 1e-9);
}

TEST(PriceIteration, MatchesConstrainedBruteForce) {
  Rng rng(10);
  for (int trial = 0; trial < 6; ++trial) {
    const auto models = tiny_pair(rng);
    const double full = dual_value(models, 0.0, 0.0).total_power();
    if (full <= 0.0) continue;
    const double budget = uniform(rng, 0.2, 0.8) * full;
    const auto r = price_iteration(models, budget);
    const auto opt = constrained_bruteforce(models, budget);
    EXPECT_TRUE(r.report.converged);
    EXPECT_GE(r.dual, opt.randomized - 1e-3);
    EXPECT_LE(r.dual, opt.randomized + 1e-6);  // weak duality
    EXPECT_LE(std::abs(r.report.complementary_slackness), 1e-2);
    EXPECT_LE(r.total_power, budget * (1.0 + 1e-3));
    EXPECT_NEAR(r.primal_cost, opt.randomized, 0.01 * std::max(1.0, opt.randomized));
  }
}

TEST(PriceIteration, PlainSubgradientApproachesDualOptimum) {
  Rng rng(13);
  const auto models = tiny_pair(rng);
  const double budget = 0.5 * dual_value(models, 0.0, 0.0).total_power();
  PriceIterationOptions opt;
  opt.refine = false;
  opt.max_iterations = 3000;
  const auto r = price_iteration(models, budget, opt);
  const auto best = constrained_bruteforce(models, budget);
  EXPECT_GE(r.dual, best.randomized - 1e-2);
  EXPECT_EQ(r.mixing, 1.0);
}

TEST(PriceIteration, HistoryIsProjectedAndLogged) {
  Rng rng(11);
  const auto models = tiny_pair(rng);
  const auto r = price_iteration(models, 0.3);
  ASSERT_FALSE(r.state.history.empty());
  for (std::size_t i = 0; i < r.state.history.size(); ++i) {
    EXPECT_EQ(r.state.history[i].k, i);
    EXPECT_GE(r.state.history[i].price, 0.0);
  }
  std::ostringstream os;
  write_price_history_csv(os, r.state);
  EXPECT_EQ(os.str().rfind("k,price,dual,subgradient,total_power,feasible\n", 0), 0u);
}

TEST(PriceIteration, RejectsNonpositiveBudget) {
  Rng rng(12);
  EXPECT_THROW(price_iteration(tiny_pair(rng), 0.0), ModelError);
}

}  // namespace
}  // namespace das
