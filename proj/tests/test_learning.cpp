#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "das/evaluation.hpp"
#include "das/learning.hpp"
#include "das/oracle.hpp"
#include "das/pricing.hpp"
#include "das/whittle.hpp"
#include "fixtures.hpp"

namespace das {
namespace {

using testing::make_model;

ClientModel small_model() { return make_model(4, 2, {0.1, 0.5}, {0.0, 1.0}, {0.0, 0.5, 0.0, 0.8}, 1.0); }

TEST(QUpdate, FullOverwriteAndNoOp) {
  QTable t(3, 2);
  q_update(t, 1, 1, 2.0, 0, 1.0);
  EXPECT_DOUBLE_EQ(t.q(1, 1), 2.0);
  const auto before = t.values();
  q_update(t, 2, 0, 5.0, 1, 0.0);
  EXPECT_EQ(t.values(), before);
  EXPECT_EQ(t.visits(2, 0), 1u);
}

TEST(QUpdate, TouchesExactlyOneEntry) {
  Rng rng(4);
  QTable t(5, 3);
  for (int k = 0; k < 200; ++k) {
    const auto before = t.values();
    const int l = uniform_int(rng, 0, 4), a = uniform_int(rng, 0, 2);
    q_update(t, l, a, uniform(rng, 0.0, 3.0), uniform_int(rng, 0, 4), uniform(rng, 0.1, 1.0), 0.9,
             uniform(rng, -1.0, 1.0));
    int changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) changed += before[i] != t.values()[i];
    EXPECT_LE(changed, 1);
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (i != static_cast<std::size_t>(l * 3 + a)) {
        EXPECT_EQ(before[i], t.values()[i]);
      }
    }
  }
}

TEST(QUpdate, RelativeTargetSubtractsOffset) {
  QTable t(2, 1);
  t.q(1, 0) = 4.0;
  q_update(t, 0, 0, 1.0, 1, 0.5, 1.0, 3.0);
  EXPECT_DOUBLE_EQ(t.q(0, 0), 0.5 * (1.0 + 4.0 - 3.0));
}

TEST(Softmax, Examples) {
  QTable t(1, 3);
  t.q(0, 0) = 1.0;
  t.q(0, 1) = 0.2;
  t.q(0, 2) = 3.0;
  for (double p : softmax_probabilities(t, 0, 0.0)) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
  EXPECT_NEAR(softmax_probabilities(t, 0, 200.0)[1], 1.0, 1e-12);
  EXPECT_NEAR(softmax_probabilities(t, 0, 200.0, true)[2], 1.0, 1e-12);

  QTable eq(1, 2);
  eq.q(0, 0) = eq.q(0, 1) = 0.7;
  for (double tau : {0.0, 1.0, 1e6}) {
    const auto p = softmax_probabilities(eq, 0, tau);
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
  }
  EXPECT_THROW(softmax_probabilities(t, 0, std::nan("")), ModelError);
}

TEST(Softmax, NormalizedAndShiftInvariant) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    QTable a(1, 5), b(1, 5);
    const double shift = uniform(rng, -50.0, 50.0);
    for (int u = 0; u < 5; ++u) {
      a.q(0, u) = uniform(rng, -10.0, 10.0);
      b.q(0, u) = a.q(0, u) + shift;
    }
    const double tau = uniform(rng, 0.0, 30.0);
    const auto pa = softmax_probabilities(a, 0, tau);
    const auto pb = softmax_probabilities(b, 0, tau);
    double sum = 0.0;
    for (int u = 0; u < 5; ++u) {
      sum += pa[static_cast<std::size_t>(u)];
      EXPECT_NEAR(pa[static_cast<std::size_t>(u)], pb[static_cast<std::size_t>(u)], 1e-12);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Softmax, SampledFrequenciesMatchWeights) {
  QTable t(1, 3);
  t.q(0, 0) = 0.0;
  t.q(0, 1) = 0.5;
  t.q(0, 2) = 1.0;
  const auto p = softmax_probabilities(t, 0, 2.0);
  Rng rng(1);
  std::vector<int> hits(3, 0);
  const int n = 200000;
  for (int k = 0; k < n; ++k) ++hits[static_cast<std::size_t>(softmax_action(t, 0, 2.0, rng))];
  for (int u = 0; u < 3; ++u) {
    const double pu = p[static_cast<std::size_t>(u)];
    EXPECT_NEAR(hits[static_cast<std::size_t>(u)] / double(n), pu, 5.0 * std::sqrt(pu * (1 - pu) / n));
  }
}

TEST(IndexSchedule, SingleClientReducesToSoftmaxOverAdvantages) {
  const auto m = small_model();
  QTable t(m);
  for (int a = 0; a < m.num_actions(); ++a) t.q(2, a) = 0.3 * a;
  t.q(2, 3) = -0.4;
  // Action 1 is idle at the other quality and duplicates action 0, so the
  // law is softmin over {0, 2, 3}.
  QTable reduced(1, 3);
  reduced.q(0, 0) = t.q(2, 0);
  reduced.q(0, 1) = t.q(2, 2);
  reduced.q(0, 2) = t.q(2, 3);
  const auto p = softmax_probabilities(reduced, 0, 1.5);
  Rng rng(5);
  std::map<int, int> hits;
  const int n = 100000;
  for (int k = 0; k < n; ++k) ++hits[q_index_schedule({t}, {2}, 1, 1.5, rng, {m})[0]];
  EXPECT_EQ(hits.count(1), 0u);
  EXPECT_NEAR(hits[0] / double(n), p[0], 0.01);
  EXPECT_NEAR(hits[2] / double(n), p[1], 0.01);
  EXPECT_NEAR(hits[3] / double(n), p[2], 0.01);
}

TEST(IndexSchedule, ZeroTemperatureIsUniformOverPairs) {
  const auto a = make_model(3, 1, {0.1}, {0.0, 1.0}, {0.0, 0.5}, 1.0);
  std::vector<ClientModel> models{a, a};
  std::vector<QTable> tables{QTable(a), QTable(a)};
  tables[0].q(1, 1) = -5.0;
  Rng rng(2);
  // Four pairs, uniform first draw: a client is served with probability 1/4
  // directly, or 1/4 * 1/2 after the other client drew idle.
  int served0 = 0, served1 = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const auto acts = q_index_schedule(tables, {1, 1}, 1, 0.0, rng, models);
    EXPECT_LE((acts[0] != 0) + (acts[1] != 0), 1);
    served0 += acts[0] != 0;
    served1 += acts[1] != 0;
  }
  EXPECT_NEAR(served0 / double(n), 0.375, 0.01);
  EXPECT_NEAR(served1 / double(n), 0.375, 0.01);
}

TEST(IndexSchedule, RespectsChannelCount) {
  Rng rng(3);
  std::vector<ClientModel> models;
  std::vector<QTable> tables;
  std::vector<int> levels;
  for (int i = 0; i < 5; ++i) {
    models.push_back(random_client_model(rng, tiny_ranges()));
    tables.emplace_back(models.back());
    levels.push_back(0);
  }
  for (int m = 1; m <= 5; ++m) {
    for (int k = 0; k < 200; ++k) {
      int used = 0;
      for (int a : q_index_schedule(tables, levels, m, 0.5, rng, models)) used += a != 0;
      EXPECT_LE(used, m);
    }
  }
  EXPECT_THROW(q_index_schedule(tables, levels, 0, 1.0, rng, models), ModelError);
}

TEST(IndexSchedule, GreedyLimitPicksLargestAdvantage) {
  const auto a = make_model(3, 1, {0.1}, {0.0, 1.0}, {0.0, 0.5}, 1.0);
  std::vector<ClientModel> models{a, a, a};
  std::vector<QTable> tables(3, QTable(a));
  tables[0].q(0, 1) = -1.0;
  tables[1].q(0, 1) = -2.0;
  tables[2].q(0, 1) = 0.5;
  EXPECT_EQ(q_index_greedy(tables, {0, 0, 0}, 1, models), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(q_index_greedy(tables, {0, 0, 0}, 3, models), (std::vector<int>{1, 1, 0}));
  Rng rng(8);
  for (int k = 0; k < 100; ++k) {
    EXPECT_EQ(q_index_schedule(tables, {0, 0, 0}, 1, 1e4, rng, models), (std::vector<int>{0, 1, 0}));
  }
}

TEST(Schedules, ValidationAndShape) {
  Schedules s;
  EXPECT_NO_THROW(s.validate(true));
  EXPECT_DOUBLE_EQ(s.learning_rate(0), 1.0);
  EXPECT_LT(s.price_step(1000), s.learning_rate(1000));
  EXPECT_DOUBLE_EQ(s.temperature(0), 0.0);
  EXPECT_NEAR(s.temperature(99), std::log(100.0), 1e-12);
  auto bad = s;
  bad.learning_exponent = 0.5;
  EXPECT_THROW(bad.validate(), ModelError);
  bad = s;
  bad.price_exponent = 0.6;
  EXPECT_NO_THROW(bad.validate());
  EXPECT_THROW(bad.validate(true), ModelError);
  bad = s;
  bad.epsilon_exponent = 1.5;
  EXPECT_THROW(bad.validate(), ModelError);
  TwoTimescaleOptions o;
  o.schedules.price_exponent = 0.7;
  EXPECT_THROW(two_timescale_run({small_model()}, 0.3, 10, 1, o), ModelError);
}

TEST(QLearning, RelativeGainWithinFivePercent) {
  const auto m = small_model();
  const double price = 0.5;
  const double exact = average_cost_solve(m, price).gain;
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = q_learning(m, price, 300000, seed);
    ok += std::abs(r.gain_estimate - exact) <= 0.05 * exact;
    EXPECT_GT(r.table.min_visits(), 50u);
  }
  EXPECT_GE(ok, 9);
}

TEST(QLearning, DiscountedConvergesAtModerateDiscount) {
  const auto m = small_model();
  QLearningOptions o;
  o.variant = QVariant::discounted;
  o.discount = 0.9;
  const auto exact = exact_q_table(m, 0.5, 0.9);
  double lo = exact.values()[0], hi = lo;
  for (double v : exact.values()) lo = std::min(lo, v), hi = std::max(hi, v);
  const auto r = q_learning(m, 0.5, 1000000, 3, o);
  double err = 0.0;
  for (std::size_t i = 0; i < exact.values().size(); ++i) {
    err = std::max(err, std::abs(exact.values()[i] - r.table.values()[i]));
  }
  EXPECT_LE(err, 0.1 * (hi - lo));
}

TEST(QLearning, MinVisitCountGrows) {
  const auto m = small_model();
  const auto a = q_learning(m, 0.5, 20000, 1);
  QLearningResult resume = a;
  const auto b = q_learning(m, 0.5, 80000, 1, {}, &resume);
  EXPECT_GT(a.table.min_visits(), 0u);
  EXPECT_GT(b.table.min_visits(), a.table.min_visits());
  EXPECT_EQ(b.steps, 100000u);
}

TEST(QLearning, DeterministicPerSeed) {
  const auto m = small_model();
  const auto a = q_learning(m, 0.5, 20000, 42, {}, nullptr, 1000);
  const auto b = q_learning(m, 0.5, 20000, 42, {}, nullptr, 1000);
  const auto c = q_learning(m, 0.5, 20000, 43);
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.curve.size(), 20u);
  for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].average_cost, b.curve[i].average_cost);
  EXPECT_NE(a.table, c.table);
}

TEST(QLearning, NoExplorationFromMisinitializedTableStaysSuboptimal) {
  const auto m = small_model();
  QLearningResult start;
  start.table = QTable(m);
  start.level = m.buffer_capacity;
  for (int l = 0; l < m.levels(); ++l) {
    for (int a = 1; a < m.num_actions(); ++a) start.table.q(l, a) = 100.0;
  }
  QLearningOptions greedy;
  greedy.schedules.epsilon_scale = 0.0;
  const auto stuck = q_learning(m, 0.0, 100000, 1, greedy, &start);
  const auto explored = q_learning(m, 0.0, 100000, 1, {}, &start);
  const double opt = average_cost_solve(m, 0.0).gain;
  EXPECT_GT(stuck.average_cost, 0.9);  // idles in outage forever
  EXPECT_LT(explored.average_cost, 0.5 * stuck.average_cost);
  EXPECT_GT(opt, 0.0);
  EXPECT_LT(opt, 0.5);
}

TEST(Checkpoint, RoundTripAndResume) {
  const auto m = small_model();
  const auto r = q_learning(m, 0.5, 5000, 7);
  const auto j = checkpoint_json({r.table}, Schedules{}, r.steps, 0.5, {r.level});
  const auto back = checkpoint_from_json(nlohmann::json::parse(j.dump()));
  ASSERT_EQ(back.tables.size(), 1u);
  EXPECT_EQ(back.tables[0], r.table);
  EXPECT_EQ(back.steps, 5000u);
  EXPECT_EQ(back.levels, std::vector<int>{r.level});
  EXPECT_DOUBLE_EQ(back.schedules.learning_exponent, 0.7);

  QLearningResult resume;
  resume.table = back.tables[0];
  resume.steps = back.steps;
  resume.level = back.levels[0];
  const auto more = q_learning(m, 0.5, 1000, 8, {}, &resume);
  EXPECT_EQ(more.steps, 6000u);
  std::uint64_t visits = 0;
  for (int l = 0; l < m.levels(); ++l) {
    for (int a = 0; a < m.num_actions(); ++a) visits += more.table.visits(l, a);
  }
  EXPECT_EQ(visits, 6000u);

  auto bad = j;
  bad["version"] = 2;
  EXPECT_THROW(checkpoint_from_json(bad), ModelError);
  bad = j;
  bad["tables"][0]["q"].erase(0);
  EXPECT_THROW(checkpoint_from_json(bad), ModelError);
}

TEST(IndexLearning, NearExactIndexOracleOnTwoClients) {
  const std::vector<ClientModel> models{make_model(4, 2, {0.2, 0.6}, {0.0, 1.0}, {0.0, 0.5, 0.0, 0.8}, 1.0),
                                        make_model(3, 1, {0.1}, {0.0, 1.0, 2.0}, {0.0, 0.4, 0.9}, 0.5)};
  std::vector<TabularMdp> parts;
  std::vector<std::size_t> radix, start;
  for (const auto& m : models) {
    parts.push_back(build_client_mdp(m));
    radix.push_back(static_cast<std::size_t>(m.levels()));
    start.push_back(static_cast<std::size_t>(m.buffer_capacity));
  }
  const auto joint = build_product_mdp(parts, 1);
  auto greedy_cost = [&](const std::vector<QTable>& tables) {
    const auto pol = joint_policy(models, [&](const std::vector<int>& l) {
      const auto acts = q_index_greedy(tables, l, 1, models);
      std::vector<Action> u;
      for (std::size_t i = 0; i < acts.size(); ++i) u.push_back(models[i].action_at(acts[i]));
      return u;
    });
    return evaluate_policy(joint, pol, encode_product(start, radix)).average_cost;
  };
  const double oracle = greedy_cost({exact_q_table(models[0], 0.0), exact_q_table(models[1], 0.0)});
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = q_index_learning(models, 1000000, seed);
    ok += std::abs(r.average_cost - oracle) <= 0.1 * oracle;
  }
  EXPECT_GE(ok, 7);
}

TEST(TwoTimescale, UnboundedBudgetKeepsPriceAtZero) {
  const auto m = small_model();
  const auto r = two_timescale_run({m, m}, 1e9, 20000, 1);
  for (double p : r.price_trace) EXPECT_EQ(p, 0.0);
  EXPECT_EQ(r.price, 0.0);
}

TEST(TwoTimescale, PriceNearDualOptimumOnTinyInstance) {
  const auto m = small_model();
  const double full = dual_value({m}, 0.0, 0.0).total_power();
  const double budget = 0.5 * full;
  const double star = price_iteration({m}, budget).price;
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto r = two_timescale_run({m}, budget, 1000000, seed);
    ok += std::abs(r.price - star) <= 0.2 * star && std::abs(r.average_power - budget) <= 0.1 * budget;
  }
  EXPECT_GE(ok, 3);
}

TEST(TwoTimescale, DeterministicPerSeed) {
  const auto m = small_model();
  const auto a = two_timescale_run({m, m}, 0.5, 30000, 5);
  const auto b = two_timescale_run({m, m}, 0.5, 30000, 5);
  EXPECT_EQ(a.price_trace, b.price_trace);
  EXPECT_EQ(a.tables, b.tables);
}

}  // namespace
}  // namespace das
