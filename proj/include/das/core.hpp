#pragma once

// Single-client buffer dynamics and one-slot costs shared by the solvers,
// learners and the simulator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace das {

/// Thrown when a model, action or state violates its invariants.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative method exceeds its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A (quality, power) pair, both zero-based. Power index 0 is the
/// "no transmission" level.
struct Action {
  int quality = 0;
  int power = 0;

  friend bool operator==(const Action&, const Action&) = default;
};

/// Dense quality x power table of delivery probabilities.
class SuccessTable {
 public:
  SuccessTable() = default;
  SuccessTable(int qualities, int powers, std::vector<double> row_major)
      : qualities_(qualities), powers_(powers), p_(std::move(row_major)) {
    if (qualities_ < 1 || powers_ < 1 ||
        p_.size() != static_cast<std::size_t>(qualities_ * powers_)) {
      throw ModelError("success table has inconsistent shape");
    }
  }

  int qualities() const { return qualities_; }
  int powers() const { return powers_; }
  double operator()(int q, int m) const { return p_[static_cast<std::size_t>(q * powers_ + m)]; }
  double& operator()(int q, int m) { return p_[static_cast<std::size_t>(q * powers_ + m)]; }
  const std::vector<double>& data() const { return p_; }

  friend bool operator==(const SuccessTable&, const SuccessTable&) = default;

 private:
  int qualities_ = 0;
  int powers_ = 0;
  std::vector<double> p_;
};

namespace detail {

inline void validate_success_table(const SuccessTable& p, const std::string& what) {
  for (int q = 0; q < p.qualities(); ++q) {
    for (int m = 0; m < p.powers(); ++m) {
      const double v = p(q, m);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ModelError(what + ": probability outside [0,1] at (q=" + std::to_string(q + 1) +
                         ", m=" + std::to_string(m + 1) + ")");
      }
      if (m == 0 && v != 0.0) {
        throw ModelError(what + ": no-transmission level must have zero success probability");
      }
      if (q > 0 && v < p(q - 1, m)) {
        throw ModelError(what + ": success probability decreases in quality index at (q=" +
                         std::to_string(q + 1) + ", m=" + std::to_string(m + 1) + ")");
      }
      if (m > 0 && v < p(q, m - 1)) {
        throw ModelError(what + ": success probability decreases in power at (q=" +
                         std::to_string(q + 1) + ", m=" + std::to_string(m + 1) + ")");
      }
    }
  }
}

}  // namespace detail

/// Static parameters of one streaming client.
///
/// The buffer is measured in slots of playtime: a delivered packet adds
/// `playtime_per_packet` slots and playback drains one slot per slot.
/// Quality index 0 is the best picture (lowest disutility); higher indices
/// are cheaper to deliver.
struct ClientModel {
  int buffer_capacity = 1;
  int playtime_per_packet = 1;
  std::vector<double> quality_disutilities{0.0};
  std::vector<double> power_levels{0.0};
  SuccessTable success_prob{1, 1, {0.0}};
  double outage_period_weight = 0.0;

  int qualities() const { return static_cast<int>(quality_disutilities.size()); }
  int powers() const { return static_cast<int>(power_levels.size()); }
  int levels() const { return buffer_capacity + 1; }
  int num_actions() const { return qualities() * powers(); }

  /// Largest level at which a delivered packet still fits.
  int last_fill_level() const { return buffer_capacity - playtime_per_packet + 1; }

  double success(const Action& u) const { return success_prob(u.quality, u.power); }
  double power(const Action& u) const { return power_levels[static_cast<std::size_t>(u.power)]; }
  double disutility(const Action& u) const {
    return quality_disutilities[static_cast<std::size_t>(u.quality)];
  }

  // Actions are ordered lowest power first, then lowest quality index. Solvers
  // break ties by the lowest action index, so this order is the tie-break rule.
  int action_index(const Action& u) const { return u.power * qualities() + u.quality; }
  Action action_at(int index) const { return {index % qualities(), index / qualities()}; }

  void validate() const {
    if (buffer_capacity < 1) throw ModelError("buffer_capacity must be >= 1");
    if (playtime_per_packet < 1) throw ModelError("playtime_per_packet must be >= 1");
    if (playtime_per_packet > buffer_capacity) {
      throw ModelError("playtime_per_packet must not exceed buffer_capacity");
    }
    if (quality_disutilities.empty()) throw ModelError("at least one quality level required");
    if (power_levels.empty()) throw ModelError("at least one power level required");
    for (std::size_t q = 0; q < quality_disutilities.size(); ++q) {
      if (!std::isfinite(quality_disutilities[q]) || quality_disutilities[q] < 0.0) {
        throw ModelError("quality disutilities must be finite and nonnegative");
      }
      if (q > 0 && !(quality_disutilities[q] > quality_disutilities[q - 1])) {
        throw ModelError("quality disutilities must be strictly increasing");
      }
    }
    if (power_levels.front() != 0.0) throw ModelError("first power level must be 0");
    for (std::size_t m = 1; m < power_levels.size(); ++m) {
      if (!std::isfinite(power_levels[m]) || !(power_levels[m] > power_levels[m - 1])) {
        throw ModelError("power levels must be finite and strictly increasing");
      }
    }
    if (!(outage_period_weight >= 0.0) || !std::isfinite(outage_period_weight)) {
      throw ModelError("outage_period_weight must be finite and >= 0");
    }
    if (success_prob.qualities() != qualities() || success_prob.powers() != powers()) {
      throw ModelError("success_prob shape must be qualities x powers");
    }
    detail::validate_success_table(success_prob, "success_prob");
  }

  void check_level(int l) const {
    if (l < 0 || l > buffer_capacity) {
      throw ModelError("buffer level " + std::to_string(l) + " outside [0, " +
                       std::to_string(buffer_capacity) + "]");
    }
  }

  void check_action(const Action& u) const {
    if (u.quality < 0 || u.quality >= qualities() || u.power < 0 || u.power >= powers()) {
      throw ModelError("action index out of range");
    }
  }

  /// Drops power levels above `peak`. Used for the peak-power constraint mode.
  ClientModel with_peak_power(double peak) const {
    ClientModel out = *this;
    int keep = 0;
    while (keep < powers() && power_levels[static_cast<std::size_t>(keep)] <= peak) ++keep;
    if (keep == 0) throw ModelError("peak power below the zero level");
    out.power_levels.resize(static_cast<std::size_t>(keep));
    std::vector<double> p;
    for (int q = 0; q < qualities(); ++q) {
      for (int m = 0; m < keep; ++m) p.push_back(success_prob(q, m));
    }
    out.success_prob = SuccessTable(qualities(), keep, std::move(p));
    return out;
  }

  friend bool operator==(const ClientModel&, const ClientModel&) = default;
};

/// Finite-state Markov channel. State c scales the client's success table to
/// `per_state_success[c]`.
struct ChannelModel {
  std::vector<std::vector<double>> transition;
  std::vector<SuccessTable> per_state_success;

  int states() const { return static_cast<int>(transition.size()); }

  /// The single-state channel reproducing an i.i.d. client.
  static ChannelModel iid(const ClientModel& model) {
    return ChannelModel{{{1.0}}, {model.success_prob}};
  }

  /// Drop the same power columns as ClientModel::with_peak_power.
  ChannelModel with_peak_power(const ClientModel& model, double peak) const {
    const int keep = model.with_peak_power(peak).powers();
    ChannelModel out{transition, {}};
    for (const auto& t : per_state_success) {
      std::vector<double> p;
      for (int q = 0; q < t.qualities(); ++q) {
        for (int m = 0; m < keep; ++m) p.push_back(t(q, m));
      }
      out.per_state_success.emplace_back(t.qualities(), keep, std::move(p));
    }
    return out;
  }

  void validate(const ClientModel& model) const {
    const int c = states();
    if (c < 1) throw ModelError("channel must have at least one state");
    if (per_state_success.size() != transition.size()) {
      throw ModelError("one success table required per channel state");
    }
    for (const auto& row : transition) {
      if (static_cast<int>(row.size()) != c) throw ModelError("channel transition matrix must be square");
      double sum = 0.0;
      for (double v : row) {
        if (!(v >= 0.0 && v <= 1.0)) throw ModelError("channel transition entry outside [0,1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw ModelError("channel transition rows must sum to 1");
    }
    for (int s = 0; s < c; ++s) {
      const auto& p = per_state_success[static_cast<std::size_t>(s)];
      if (p.qualities() != model.qualities() || p.powers() != model.powers()) {
        throw ModelError("channel success table shape must match the client model");
      }
      detail::validate_success_table(p, "channel state " + std::to_string(s + 1));
    }
  }
};

/// Buffer level after a successful delivery.
inline int successor_success(int l, const ClientModel& model) {
  model.check_level(l);
  if (l <= model.last_fill_level()) return std::max(l - 1, 0) + model.playtime_per_packet;
  return l - 1;
}

/// Buffer level after a failed (or absent) delivery.
inline int successor_failure(int l, const ClientModel& model) {
  model.check_level(l);
  return std::max(l - 1, 0);
}

struct Outcome {
  int level = 0;
  double prob = 0.0;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Next-level distribution. Zero-probability outcomes are dropped and equal
/// successors are merged, so the entries always sum to exactly 1.
inline std::vector<Outcome> transition_distribution(int l, const Action& u, const ClientModel& model,
                                                    std::optional<double> success_override = {}) {
  model.check_level(l);
  model.check_action(u);
  const double p = success_override.value_or(model.success(u));
  const int s = successor_success(l, model);
  const int f = successor_failure(l, model);
  if (s == f || p == 0.0) return {{f, 1.0}};
  if (p == 1.0) return {{s, 1.0}};
  return {{s, p}, {f, 1.0 - p}};
}

inline std::vector<Outcome> transition_distribution(int l, const Action& u, const ClientModel& model,
                                                    const ChannelModel& channel, int channel_state) {
  if (channel_state < 0 || channel_state >= channel.states()) {
    throw ModelError("channel state out of range");
  }
  return transition_distribution(
      l, u, model, channel.per_state_success[static_cast<std::size_t>(channel_state)](u.quality, u.power));
}

/// Expected one-slot cost split into its parts. `total(price)` adds the
/// power charge.
struct CostTerms {
  double outage = 0.0;
  double quality = 0.0;
  double period = 0.0;        // expected new-outage-period penalty
  double period_start = 0.0;  // probability that a new outage period starts
  double power = 0.0;

  double qoe() const { return outage + quality + period; }
  double total(double price) const { return qoe() + price * power; }
};

inline CostTerms cost_terms(int l, const Action& u, const ClientModel& model, double success) {
  CostTerms c;
  c.outage = l == 0 ? 1.0 : 0.0;
  c.power = model.power(u);
  // Charged in expectation, also in the overflow region where a delivery is
  // discarded; the optimizer never transmits there at positive price.
  c.quality = success * model.disutility(u);
  // A failure at level 1 starts a new outage period next slot.
  c.period_start = l == 1 ? 1.0 - success : 0.0;
  c.period = c.period_start * model.outage_period_weight;
  return c;
}

inline double step_cost(int l, const Action& u, double price, const ClientModel& model) {
  model.check_level(l);
  model.check_action(u);
  if (!(price >= 0.0)) throw ModelError("price must be nonnegative");
  return cost_terms(l, u, model, model.success(u)).total(price);
}

inline double step_cost(int l, const Action& u, double price, const ClientModel& model,
                        const ChannelModel& channel, int channel_state) {
  model.check_level(l);
  model.check_action(u);
  if (!(price >= 0.0)) throw ModelError("price must be nonnegative");
  if (channel_state < 0 || channel_state >= channel.states()) throw ModelError("channel state out of range");
  const double p = channel.per_state_success[static_cast<std::size_t>(channel_state)](u.quality, u.power);
  return cost_terms(l, u, model, p).total(price);
}

/// One realized slot. Delivery happens when `draw` (uniform on [0,1)) falls
/// below the success probability.
struct SlotOutcome {
  int next = 0;
  bool delivered = false;
  bool outage = false;
  bool period_start = false;  // failure at level 1: an outage period begins
  double qoe = 0.0;
  double power = 0.0;

  double cost(double price) const { return qoe + price * power; }
};

inline SlotOutcome realize_slot(int l, const Action& u, const ClientModel& model, double success, double draw) {
  SlotOutcome o;
  o.delivered = draw < success;
  o.next = o.delivered ? successor_success(l, model) : successor_failure(l, model);
  o.outage = l == 0;
  o.period_start = l == 1 && !o.delivered;
  o.power = model.power(u);
  o.qoe = (o.outage ? 1.0 : 0.0) + (o.delivered ? model.disutility(u) : 0.0) +
          (o.period_start ? model.outage_period_weight : 0.0);
  return o;
}

}  // namespace das
