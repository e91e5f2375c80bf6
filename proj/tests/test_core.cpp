#include <gtest/gtest.h>

#include "das/core.hpp"
#include "das/random.hpp"
#include "das/tabular.hpp"
#include "fixtures.hpp"

namespace das {
namespace {

using testing::make_model;

ClientModel b10_t4() {
  return make_model(10, 4, {0.5, 1.0}, {0.0, 2.0}, {0.0, 0.7, 0.0, 0.9}, 3.0);
}

TEST(Successor, SuccessExamples) {
  const auto m = b10_t4();
  EXPECT_EQ(successor_success(5, m), 8);
  EXPECT_EQ(successor_success(0, m), 4);
  EXPECT_EQ(successor_success(8, m), 7);
  EXPECT_EQ(successor_success(7, m), 10);
}

TEST(Successor, FailureExamples) {
  const auto m = b10_t4();
  EXPECT_EQ(successor_failure(0, m), 0);
  EXPECT_EQ(successor_failure(1, m), 0);
  EXPECT_EQ(successor_failure(5, m), 4);
}

TEST(Successor, RejectsOutOfRange) {
  const auto m = b10_t4();
  EXPECT_THROW(successor_success(-1, m), ModelError);
  EXPECT_THROW(successor_success(11, m), ModelError);
  EXPECT_THROW(successor_failure(11, m), ModelError);
}

TEST(TransitionDistribution, Examples) {
  const auto m = b10_t4();
  const Action send{0, 1};  // P = 0.7
  EXPECT_EQ(transition_distribution(5, send, m), (std::vector<Outcome>{{8, 0.7}, {4, 1.0 - 0.7}}));
  EXPECT_EQ(transition_distribution(8, send, m), (std::vector<Outcome>{{7, 1.0}}));
  EXPECT_EQ(transition_distribution(3, Action{1, 0}, m), (std::vector<Outcome>{{2, 1.0}}));
}

TEST(TransitionDistribution, SumsToOneExactlyOverRandomModels) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_client_model(rng);
    for (int l = 0; l <= m.buffer_capacity; ++l) {
      for (int a = 0; a < m.num_actions(); ++a) {
        double sum = 0.0;
        for (const auto& o : transition_distribution(l, m.action_at(a), m)) {
          EXPECT_GT(o.prob, 0.0);
          EXPECT_GE(o.level, 0);
          EXPECT_LE(o.level, m.buffer_capacity);
          sum += o.prob;
        }
        EXPECT_EQ(sum, 1.0);
      }
    }
  }
}

TEST(StepCost, Examples) {
  // P(u) = 0.6, E = 2, lambda_q = 0.5, lambda_O = 3.
  const auto m = make_model(10, 4, {0.5}, {0.0, 2.0}, {0.0, 0.6}, 3.0);
  EXPECT_DOUBLE_EQ(step_cost(0, Action{0, 0}, 1.0, m), 1.0);
  EXPECT_DOUBLE_EQ(step_cost(1, Action{0, 1}, 1.0, m), 3.5);
  EXPECT_DOUBLE_EQ(step_cost(5, Action{0, 0}, 1.0, m), 0.0);
  EXPECT_THROW(step_cost(5, Action{0, 0}, -1.0, m), ModelError);
}

TEST(StepCost, AffineInPriceWithSlopePower) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_client_model(rng);
    for (int l = 0; l <= m.buffer_capacity; ++l) {
      for (int a = 0; a < m.num_actions(); ++a) {
        const Action u = m.action_at(a);
        const double c0 = step_cost(l, u, 0.0, m);
        const double c1 = step_cost(l, u, 1.0, m);
        const double c3 = step_cost(l, u, 3.0, m);
        EXPECT_NEAR(c1 - c0, m.power(u), 1e-12);
        EXPECT_NEAR(c3 - c0, 3.0 * m.power(u), 1e-12);
      }
    }
  }
}

TEST(ClientModelValidation, RejectsViolations) {
  auto ok = b10_t4();
  EXPECT_NO_THROW(ok.validate());

  auto bad = ok;
  bad.playtime_per_packet = 11;
  EXPECT_THROW(bad.validate(), ModelError);

  bad = ok;
  bad.quality_disutilities = {1.0, 1.0};
  EXPECT_THROW(bad.validate(), ModelError);

  bad = ok;
  bad.power_levels = {0.5, 2.0};
  EXPECT_THROW(bad.validate(), ModelError);

  bad = ok;
  bad.success_prob(0, 0) = 0.1;
  EXPECT_THROW(bad.validate(), ModelError);

  bad = ok;  // decreasing in quality index at full power
  bad.success_prob(1, 1) = 0.5;
  EXPECT_THROW(bad.validate(), ModelError);

  bad = ok;
  bad.success_prob(0, 1) = 1.2;
  EXPECT_THROW(bad.validate(), ModelError);

  bad = ok;
  bad.outage_period_weight = -1.0;
  EXPECT_THROW(bad.validate(), ModelError);
}

TEST(ChannelModel, ValidationAndSingleStateReduction) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = random_client_model(rng);
    const auto iid = build_client_mdp(m);
    const auto faded = build_fading_mdp(m, ChannelModel::iid(m));
    ASSERT_EQ(iid.num_states(), faded.num_states());
    for (std::size_t s = 0; s < iid.num_states(); ++s) {
      for (std::size_t a = 0; a < iid.num_actions(); ++a) {
        const auto x = iid.next(s, a);
        const auto y = faded.next(s, a);
        ASSERT_EQ(x.size(), y.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
          EXPECT_EQ(x[k].next, y[k].next);
          EXPECT_EQ(x[k].prob, y[k].prob);
        }
        EXPECT_EQ(iid.cost(s, a, 0.7), faded.cost(s, a, 0.7));
      }
    }
  }

  const auto m = b10_t4();
  ChannelModel bad{{{0.5, 0.4}, {0.5, 0.5}}, {m.success_prob, m.success_prob}};
  EXPECT_THROW(bad.validate(m), ModelError);
}

TEST(ChannelModel, FadingTransitionsFactorize) {
  const auto m = b10_t4();
  SuccessTable bad_state(2, 2, {0.0, 0.2, 0.0, 0.3});
  ChannelModel ch{{{0.9, 0.1}, {0.4, 0.6}}, {m.success_prob, bad_state}};
  ch.validate(m);
  const auto d = transition_distribution(5, Action{0, 1}, m, ch, 1);
  EXPECT_EQ(d, (std::vector<Outcome>{{8, 0.2}, {4, 0.8}}));
  const auto mdp = build_fading_mdp(m, ch);
  double total = 0.0;
  for (const auto& t : mdp.next(fading_state(m, 5, 1), static_cast<std::size_t>(m.action_index({0, 1})))) {
    total += t.prob;
    if (t.next == fading_state(m, 8, 0)) {
      EXPECT_DOUBLE_EQ(t.prob, 0.2 * 0.4);
    }
    if (t.next == fading_state(m, 4, 1)) {
      EXPECT_DOUBLE_EQ(t.prob, 0.8 * 0.6);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(ClientModel, PeakPowerFilterDropsLevels) {
  const auto m = make_model(6, 2, {0.1}, {0.0, 1.0, 2.0, 3.0}, {0.0, 0.3, 0.5, 0.8}, 1.0);
  const auto capped = m.with_peak_power(2.0);
  EXPECT_EQ(capped.powers(), 3);
  EXPECT_DOUBLE_EQ(capped.success_prob(0, 2), 0.5);
  EXPECT_NO_THROW(capped.validate());
}

}  // namespace
}  // namespace das
