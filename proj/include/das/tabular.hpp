#pragma once

// Flattened finite MDP (states x actions, sparse transitions) built from the
// client dynamics. All solvers and evaluators work on this representation.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "das/core.hpp"

namespace das {

struct Transition {
  std::size_t next = 0;
  double prob = 0.0;
};

class TabularMdp {
 public:
  TabularMdp() = default;
  TabularMdp(std::size_t states, std::size_t actions) : states_(states), actions_(actions) {
    offsets_.reserve(states * actions + 1);
    offsets_.push_back(0);
    terms_.reserve(states * actions);
  }

  std::size_t num_states() const { return states_; }
  std::size_t num_actions() const { return actions_; }

  /// Appends the next (state, action) row. Rows must arrive state-major.
  void push(const CostTerms& terms, bool transmits, bool allowed, std::span<const Transition> next) {
    terms_.push_back(terms);
    transmits_.push_back(transmits);
    allowed_.push_back(allowed);
    transitions_.insert(transitions_.end(), next.begin(), next.end());
    offsets_.push_back(transitions_.size());
  }

  /// Removes an action from the allowed set of one state.
  void disallow(std::size_t s, std::size_t a) { allowed_[s * actions_ + a] = false; }

  bool complete() const { return terms_.size() == states_ * actions_; }

  const CostTerms& terms(std::size_t s, std::size_t a) const { return terms_[s * actions_ + a]; }
  double cost(std::size_t s, std::size_t a, double price) const { return terms(s, a).total(price); }
  bool transmits(std::size_t s, std::size_t a) const { return transmits_[s * actions_ + a]; }
  bool allowed(std::size_t s, std::size_t a) const { return allowed_[s * actions_ + a]; }

  std::span<const Transition> next(std::size_t s, std::size_t a) const {
    const std::size_t row = s * actions_ + a;
    return {transitions_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
  }

  double expected(std::size_t s, std::size_t a, const std::vector<double>& v) const {
    double acc = 0.0;
    for (const auto& t : next(s, a)) acc += t.prob * v[t.next];
    return acc;
  }

 private:
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<CostTerms> terms_;
  std::vector<bool> transmits_;
  std::vector<bool> allowed_;
  std::vector<std::size_t> offsets_;
  std::vector<Transition> transitions_;
};

/// State index of (level, channel state) on the augmented space.
inline std::size_t fading_state(const ClientModel& model, int level, int channel_state) {
  return static_cast<std::size_t>(channel_state) * static_cast<std::size_t>(model.levels()) +
         static_cast<std::size_t>(level);
}

/// MDP over buffer levels {0..B}; action index per ClientModel::action_index.
inline TabularMdp build_client_mdp(const ClientModel& model) {
  model.validate();
  TabularMdp mdp(static_cast<std::size_t>(model.levels()), static_cast<std::size_t>(model.num_actions()));
  std::vector<Transition> row;
  for (int l = 0; l <= model.buffer_capacity; ++l) {
    for (int a = 0; a < model.num_actions(); ++a) {
      const Action u = model.action_at(a);
      row.clear();
      for (const auto& o : transition_distribution(l, u, model)) {
        row.push_back({static_cast<std::size_t>(o.level), o.prob});
      }
      mdp.push(cost_terms(l, u, model, model.success(u)), u.power > 0, true, row);
    }
  }
  return mdp;
}

/// MDP over (level, channel state) pairs, indexed by fading_state().
inline TabularMdp build_fading_mdp(const ClientModel& model, const ChannelModel& channel) {
  model.validate();
  channel.validate(model);
  const int c_count = channel.states();
  TabularMdp mdp(static_cast<std::size_t>(model.levels() * c_count),
                 static_cast<std::size_t>(model.num_actions()));
  std::vector<Transition> row;
  for (int c = 0; c < c_count; ++c) {
    const auto& pi = channel.transition[static_cast<std::size_t>(c)];
    for (int l = 0; l <= model.buffer_capacity; ++l) {
      for (int a = 0; a < model.num_actions(); ++a) {
        const Action u = model.action_at(a);
        const double p = channel.per_state_success[static_cast<std::size_t>(c)](u.quality, u.power);
        row.clear();
        for (const auto& o : transition_distribution(l, u, model, p)) {
          for (int c2 = 0; c2 < c_count; ++c2) {
            const double w = o.prob * pi[static_cast<std::size_t>(c2)];
            if (w > 0.0) row.push_back({fading_state(model, o.level, c2), w});
          }
        }
        mdp.push(cost_terms(l, u, model, p), u.power > 0, true, row);
      }
    }
  }
  return mdp;
}

/// Copy of `mdp` whose priced term counts channel uses (1 per transmitting
/// action) instead of energy.
inline TabularMdp with_channel_use_price(const TabularMdp& mdp) {
  TabularMdp out(mdp.num_states(), mdp.num_actions());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      CostTerms t = mdp.terms(s, a);
      t.power = mdp.transmits(s, a) ? 1.0 : 0.0;
      out.push(t, mdp.transmits(s, a), mdp.allowed(s, a), mdp.next(s, a));
    }
  }
  return out;
}

inline constexpr std::size_t kMaxProductStates = 1'000'000;

/// Mixed-radix index with digit 0 most significant (product state/action
/// numbering).
inline std::size_t encode_product(const std::vector<std::size_t>& digits, const std::vector<std::size_t>& radix) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) out = out * radix[i] + digits[i];
  return out;
}

inline std::vector<std::size_t> decode_product(std::size_t index, const std::vector<std::size_t>& radix) {
  std::vector<std::size_t> digits(radix.size());
  for (std::size_t i = radix.size(); i-- > 0;) {
    digits[i] = index % radix[i];
    index /= radix[i];
  }
  return digits;
}

/// Joint MDP of independent components. Joint state and action indices are
/// mixed-radix with component 0 most significant. When `max_transmitting`
/// is set, joint actions with more transmitting components are disallowed.
inline TabularMdp build_product_mdp(const std::vector<TabularMdp>& parts,
                                    std::optional<std::size_t> max_transmitting = {}) {
  if (parts.empty()) throw ModelError("product of zero components");
  std::size_t states = 1;
  std::size_t actions = 1;
  for (const auto& p : parts) {
    if (p.num_states() > kMaxProductStates / states) {
      throw ModelError("joint state space exceeds " + std::to_string(kMaxProductStates) + " states");
    }
    states *= p.num_states();
    if (p.num_actions() > std::numeric_limits<std::size_t>::max() / actions) {
      throw ModelError("joint action space too large");
    }
    actions *= p.num_actions();
  }
  if (states * actions > 50'000'000) throw ModelError("joint state-action space too large");

  const std::size_t n = parts.size();
  TabularMdp joint(states, actions);
  std::vector<std::size_t> ls(n), as(n);
  std::vector<Transition> row, scratch;
  for (std::size_t s = 0; s < states; ++s) {
    std::size_t rem = s;
    for (std::size_t i = n; i-- > 0;) {
      ls[i] = rem % parts[i].num_states();
      rem /= parts[i].num_states();
    }
    for (std::size_t a = 0; a < actions; ++a) {
      rem = a;
      for (std::size_t i = n; i-- > 0;) {
        as[i] = rem % parts[i].num_actions();
        rem /= parts[i].num_actions();
      }
      CostTerms terms;
      std::size_t sending = 0;
      bool allowed = true;
      row.assign(1, Transition{0, 1.0});
      for (std::size_t i = 0; i < n; ++i) {
        const auto& t = parts[i].terms(ls[i], as[i]);
        terms.outage += t.outage;
        terms.quality += t.quality;
        terms.period += t.period;
        terms.period_start += t.period_start;
        terms.power += t.power;
        sending += parts[i].transmits(ls[i], as[i]) ? 1 : 0;
        allowed = allowed && parts[i].allowed(ls[i], as[i]);
        scratch.clear();
        for (const auto& head : row) {
          for (const auto& t2 : parts[i].next(ls[i], as[i])) {
            scratch.push_back({head.next * parts[i].num_states() + t2.next, head.prob * t2.prob});
          }
        }
        row.swap(scratch);
      }
      if (max_transmitting && sending > *max_transmitting) allowed = false;
      joint.push(terms, sending > 0, allowed, row);
    }
  }
  return joint;
}

}  // namespace das
