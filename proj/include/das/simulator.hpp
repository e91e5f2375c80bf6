#pragma once

// Slot-level Monte Carlo of an access point serving N clients, with
// per-slot records, aggregate QoE metrics and statistical cross-checks.

#include <boost/math/distributions/chi_squared.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "das/core.hpp"
#include "das/learning.hpp"
#include "das/random.hpp"
#include "das/solver.hpp"
#include "das/whittle.hpp"

namespace das {

/// A scheduler returned actions that break the scenario's constraint.
class ConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ConstraintMode { none, average_power, channels, peak_power };

inline const char* to_string(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::none: return "none";
    case ConstraintMode::average_power: return "average_power";
    case ConstraintMode::channels: return "channels";
    case ConstraintMode::peak_power: return "peak_power";
  }
  return "?";
}

struct Scenario {
  std::vector<ClientModel> clients;
  /// Optional Markov channel per client; absent means i.i.d. success.
  std::vector<std::optional<ChannelModel>> fading;
  std::vector<int> initial_channel;
  ConstraintMode mode = ConstraintMode::none;
  double power_budget = 0.0;
  int channels = 1;
  double peak_power = 0.0;
  /// Power price for the Lagrangian estimate (QoE + price * power).
  double price = 0.0;
  std::uint64_t horizon = 1000;
  std::uint64_t seed = 1;
  bool record_slots = true;
  int batches = 30;

  void validate() const {
    if (clients.empty()) throw ModelError("scenario needs at least one client");
    if (horizon < 1) throw ModelError("horizon must be at least 1 slot");
    if (batches < 2) throw ModelError("at least two batches are needed for standard errors");
    if (!(price >= 0.0) || !std::isfinite(price)) throw ModelError("price must be finite and nonnegative");
    if (!fading.empty() && fading.size() != clients.size()) throw ModelError("one channel entry per client");
    if (!initial_channel.empty() && initial_channel.size() != clients.size()) {
      throw ModelError("one initial channel state per client");
    }
    for (std::size_t i = 0; i < clients.size(); ++i) {
      clients[i].validate();
      const int c = channel_states(i);
      if (i < fading.size() && fading[i]) fading[i]->validate(clients[i]);
      const int c0 = start_channel(i);
      if (c0 < 0 || c0 >= c) throw ModelError("initial channel state out of range");
    }
    if (mode == ConstraintMode::average_power && !(power_budget >= 0.0)) {
      throw ModelError("power budget must be nonnegative");
    }
    if (mode == ConstraintMode::channels && channels < 1) throw ModelError("number of channels must be at least 1");
    if (mode == ConstraintMode::peak_power && !(peak_power >= 0.0)) throw ModelError("peak power must be nonnegative");
  }

  int channel_states(std::size_t i) const {
    return i < fading.size() && fading[i] ? fading[i]->states() : 1;
  }
  int start_channel(std::size_t i) const { return initial_channel.empty() ? 0 : initial_channel[i]; }

  /// Clients as the scheduler sees them: peak-power mode removes the
  /// power levels above the peak.
  std::vector<ClientModel> effective_clients() const {
    if (mode != ConstraintMode::peak_power) return clients;
    std::vector<ClientModel> out;
    for (const auto& m : clients) out.push_back(m.with_peak_power(peak_power));
    return out;
  }
  std::vector<std::optional<ChannelModel>> effective_fading() const {
    if (mode != ConstraintMode::peak_power) return fading;
    std::vector<std::optional<ChannelModel>> out;
    for (std::size_t i = 0; i < fading.size(); ++i) {
      out.push_back(fading[i] ? std::optional(fading[i]->with_peak_power(clients[i], peak_power)) : std::nullopt);
    }
    return out;
  }
};

/// What a scheduler sees at the start of slot t.
struct SlotContext {
  std::uint64_t t = 0;
  const std::vector<int>& levels;
  const std::vector<int>& channel_states;
  Rng& rng;
};

using Scheduler = std::function<std::vector<Action>(const SlotContext&)>;

struct SlotRecord {
  std::uint64_t t = 0;
  int client = 0;
  int level = 0;
  int channel = 0;
  int action = 0;
  double power = 0.0;
  bool delivered = false;
  bool outage = false;
  bool new_period = false;

  friend bool operator==(const SlotRecord&, const SlotRecord&) = default;
};

struct ClientMetrics {
  std::uint64_t slots = 0;
  std::uint64_t outage_slots = 0;
  std::uint64_t outage_periods = 0;
  std::uint64_t deliveries = 0;
  double quality_sum = 0.0;
  double power_sum = 0.0;
  double outage_period_weight = 0.0;

  double outage_fraction() const { return slots ? static_cast<double>(outage_slots) / static_cast<double>(slots) : 0.0; }
  double period_rate() const { return slots ? static_cast<double>(outage_periods) / static_cast<double>(slots) : 0.0; }
  double mean_quality() const { return slots ? quality_sum / static_cast<double>(slots) : 0.0; }
  double mean_power() const { return slots ? power_sum / static_cast<double>(slots) : 0.0; }
  double objective() const { return outage_fraction() + mean_quality() + outage_period_weight * period_rate(); }

  friend bool operator==(const ClientMetrics&, const ClientMetrics&) = default;
};

/// Mean and batch-means standard error of a per-slot series.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

struct SimTrace {
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  ConstraintMode mode = ConstraintMode::none;
  double power_budget = 0.0;
  int channels = 1;
  std::vector<SlotRecord> slots;  // client-major within each slot
  std::vector<ClientMetrics> clients;
  Estimate objective;  // summed over clients
  Estimate power;
  Estimate lagrangian;  // objective + price * power
  std::uint64_t max_concurrent = 0;

  double total_objective() const {
    double s = 0.0;
    for (const auto& c : clients) s += c.objective();
    return s;
  }
  double total_power() const {
    double s = 0.0;
    for (const auto& c : clients) s += c.mean_power();
    return s;
  }
};

namespace detail {

inline Estimate batch_means(const std::vector<double>& sums, const std::vector<std::uint64_t>& counts) {
  Estimate e;
  double total = 0.0;
  std::uint64_t n = 0;
  std::vector<double> means;
  for (std::size_t b = 0; b < sums.size(); ++b) {
    total += sums[b];
    n += counts[b];
    if (counts[b]) means.push_back(sums[b] / static_cast<double>(counts[b]));
  }
  e.mean = n ? total / static_cast<double>(n) : 0.0;
  if (means.size() >= 2) {
    double m = 0.0, v = 0.0;
    for (double x : means) m += x;
    m /= static_cast<double>(means.size());
    for (double x : means) v += (x - m) * (x - m);
    v /= static_cast<double>(means.size() - 1);
    e.se = std::sqrt(v / static_cast<double>(means.size()));
  }
  return e;
}

}  // namespace detail

/// Simulate the scenario under `scheduler`. Every client starts at l = B
/// with no outage in the slot before; channel states start at
/// scenario.initial_channel (default 0).
inline SimTrace run(const Scenario& sc, const Scheduler& scheduler) {
  sc.validate();
  const auto models = sc.effective_clients();
  const auto fading = sc.effective_fading();
  const std::size_t n = models.size();
  SimTrace tr;
  tr.horizon = sc.horizon;
  tr.seed = sc.seed;
  tr.mode = sc.mode;
  tr.power_budget = sc.power_budget;
  tr.channels = sc.channels;
  tr.clients.resize(n);
  if (sc.record_slots) tr.slots.reserve(static_cast<std::size_t>(sc.horizon) * n);

  // Stream 0 drives the scheduler; client i owns delivery stream 1 + 2i and
  // channel stream 2 + 2i.
  Rng sched_rng = make_stream(sc.seed, 0);
  std::vector<Rng> deliver, channel;
  std::vector<int> levels(n), chan(n);
  std::vector<bool> prev_outage(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    deliver.push_back(make_stream(sc.seed, 1 + 2 * i));
    channel.push_back(make_stream(sc.seed, 2 + 2 * i));
    levels[i] = models[i].buffer_capacity;
    chan[i] = sc.start_channel(i);
    tr.clients[i].outage_period_weight = models[i].outage_period_weight;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto nb = static_cast<std::uint64_t>(sc.batches);
  const std::uint64_t batch_len = std::max<std::uint64_t>(1, sc.horizon / nb);
  std::vector<double> cost_b(static_cast<std::size_t>(nb), 0.0), power_b(static_cast<std::size_t>(nb), 0.0);
  std::vector<double> lag_b(static_cast<std::size_t>(nb), 0.0);
  std::vector<std::uint64_t> count_b(static_cast<std::size_t>(nb), 0);

  for (std::uint64_t t = 0; t < sc.horizon; ++t) {
    const SlotContext ctx{t, levels, chan, sched_rng};
    const auto acts = scheduler(ctx);
    if (acts.size() != n) throw ConstraintError("scheduler returned the wrong number of actions");
    std::uint64_t sending = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Action& u = acts[i];
      if (u.quality < 0 || u.quality >= models[i].qualities() || u.power < 0 || u.power >= models[i].powers()) {
        throw ConstraintError("scheduler chose an action outside client " + std::to_string(i + 1) + "'s action set");
      }
      if (models[i].power(u) > 0.0) ++sending;
    }
    if (sc.mode == ConstraintMode::channels && sending > static_cast<std::uint64_t>(sc.channels)) {
      throw ConstraintError("scheduler used " + std::to_string(sending) + " channels in slot " + std::to_string(t) +
                            " with " + std::to_string(sc.channels) + " available");
    }
    tr.max_concurrent = std::max(tr.max_concurrent, sending);
    const std::size_t b = static_cast<std::size_t>(std::min(t / batch_len, nb - 1));
    double slot_cost = 0.0, slot_power = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = models[i];
      const Action& u = acts[i];
      const int l = levels[i];
      const double p = i < fading.size() && fading[i]
                           ? fading[i]->per_state_success[static_cast<std::size_t>(chan[i])](u.quality, u.power)
                           : m.success(u);
      const bool delivered = unif(deliver[i]) < p;
      const bool outage = l == 0;
      const bool new_period = outage && !prev_outage[i];
      auto& cm = tr.clients[i];
      ++cm.slots;
      cm.outage_slots += outage;
      cm.outage_periods += new_period;
      cm.deliveries += delivered;
      if (delivered) cm.quality_sum += m.disutility(u);
      cm.power_sum += m.power(u);
      slot_cost += (outage ? 1.0 : 0.0) + (delivered ? m.disutility(u) : 0.0) +
                   (new_period ? m.outage_period_weight : 0.0);
      slot_power += m.power(u);
      if (sc.record_slots) {
        tr.slots.push_back({t, static_cast<int>(i), l, chan[i], m.action_index(u), m.power(u), delivered, outage,
                            new_period});
      }
      prev_outage[i] = outage;
      levels[i] = delivered ? successor_success(l, m) : successor_failure(l, m);
      if (i < fading.size() && fading[i] && fading[i]->states() > 1) {
        const auto& row = fading[i]->transition[static_cast<std::size_t>(chan[i])];
        chan[i] = sample_index(row, channel[i]);
      }
    }
    cost_b[b] += slot_cost;
    power_b[b] += slot_power;
    lag_b[b] += slot_cost + sc.price * slot_power;
    ++count_b[b];
  }
  tr.objective = detail::batch_means(cost_b, count_b);
  tr.power = detail::batch_means(power_b, count_b);
  tr.lagrangian = detail::batch_means(lag_b, count_b);
  return tr;
}

/// As run(), requiring a channel model for every client.
inline SimTrace run_fading(const Scenario& sc, const Scheduler& scheduler) {
  if (sc.fading.size() != sc.clients.size()) throw ModelError("run_fading needs a channel model per client");
  for (const auto& f : sc.fading) {
    if (!f) throw ModelError("run_fading needs a channel model per client");
  }
  return run(sc, scheduler);
}

/// Recompute per-client aggregates from the slot records.
inline std::vector<ClientMetrics> recompute_metrics(const SimTrace& tr, const std::vector<ClientModel>& models) {
  std::vector<ClientMetrics> out(tr.clients.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].outage_period_weight = tr.clients[i].outage_period_weight;
  for (const auto& r : tr.slots) {
    auto& c = out[static_cast<std::size_t>(r.client)];
    const auto& m = models[static_cast<std::size_t>(r.client)];
    ++c.slots;
    c.outage_slots += r.outage;
    c.outage_periods += r.new_period;
    c.deliveries += r.delivered;
    if (r.delivered) c.quality_sum += m.disutility(m.action_at(r.action));
    c.power_sum += r.power;
  }
  return out;
}

// Scheduler adapters.

/// Each client follows its own stationary policy (indexed by level and
/// channel state).
inline Scheduler policy_scheduler(std::vector<PolicyTable> policies) {
  return [p = std::move(policies)](const SlotContext& ctx) {
    std::vector<Action> out;
    out.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out.push_back(p[i].at(ctx.levels[i], ctx.channel_states[i]));
    return out;
  };
}

/// Time-sharing between two policy bundles: within every block of `block`
/// slots, `first` runs for round(mixing * block) slots and `second` for
/// the rest.
inline Scheduler time_shared_scheduler(std::vector<PolicyTable> first, std::vector<PolicyTable> second, double mixing,
                                       std::uint64_t block = 10000) {
  if (!(mixing >= 0.0 && mixing <= 1.0)) throw ModelError("mixing fraction must lie in [0,1]");
  if (block < 1) throw ModelError("time-sharing block must be at least one slot");
  const auto split = static_cast<std::uint64_t>(std::llround(mixing * static_cast<double>(block)));
  auto a = policy_scheduler(std::move(first));
  auto b = policy_scheduler(std::move(second));
  return [=](const SlotContext& ctx) { return ctx.t % block < split ? a(ctx) : b(ctx); };
}

/// Top-M Whittle scheduling: serve the M clients with the largest positive
/// index at their current level, each with its designated transmit action.
inline Scheduler whittle_scheduler(std::vector<IndexTable> tables, std::vector<Action> transmit, int m) {
  if (tables.size() != transmit.size()) throw ModelError("one transmit action per client");
  return [tables = std::move(tables), transmit = std::move(transmit), m](const SlotContext& ctx) {
    std::vector<Action> out(tables.size(), Action{0, 0});
    for (auto i : top_m_scheduler(tables, ctx.levels, m)) out[i] = transmit[i];
    return out;
  };
}

inline Scheduler separable_index_scheduler(std::vector<ClientModel> models, std::vector<std::vector<double>> values,
                                           int m, double price = 0.0) {
  return [models = std::move(models), values = std::move(values), m, price](const SlotContext& ctx) {
    return separable_value_index(models, values, ctx.levels, m, price).actions;
  };
}

/// Greedy use of learned Q-tables: per client when `m` is empty, top-M by
/// advantage otherwise.
inline Scheduler q_table_scheduler(std::vector<ClientModel> models, std::vector<QTable> tables,
                                   std::optional<int> m = {}) {
  return [models = std::move(models), tables = std::move(tables), m](const SlotContext& ctx) {
    std::vector<Action> out;
    if (m) {
      for (std::size_t i = 0; const int a : q_index_greedy(tables, ctx.levels, *m, models)) {
        out.push_back(models[i++].action_at(a));
      }
      return out;
    }
    for (std::size_t i = 0; i < models.size(); ++i) out.push_back(models[i].action_at(tables[i].argmin(ctx.levels[i])));
    return out;
  };
}

/// Report of the scenario's constraint against the realized trace.
struct ConstraintReport {
  ConstraintMode mode = ConstraintMode::none;
  double realized_power = 0.0;
  double budget = 0.0;
  std::uint64_t max_concurrent = 0;
  int channels = 0;
  bool satisfied = true;
};

inline ConstraintReport constraint_report(const SimTrace& tr) {
  ConstraintReport r;
  r.mode = tr.mode;
  r.realized_power = tr.total_power();
  r.budget = tr.power_budget;
  r.max_concurrent = tr.max_concurrent;
  r.channels = tr.channels;
  if (tr.mode == ConstraintMode::average_power) {
    r.satisfied = r.realized_power <= tr.power_budget + 3.0 * tr.power.se;
  } else if (tr.mode == ConstraintMode::channels) {
    r.satisfied = tr.max_concurrent <= static_cast<std::uint64_t>(tr.channels);
  }
  return r;
}

inline constexpr int kTraceSchemaVersion = 1;

/// Per-client QoE metrics (outage fraction, outage-period rate, mean
/// quality disutility, mean power), the objective, totals and the
/// constraint status.
inline nlohmann::json metrics_report(const SimTrace& tr) {
  if (tr.clients.empty() || tr.horizon == 0) throw ModelError("empty trace");
  nlohmann::json j;
  j["schema"] = "das-sim-summary";
  j["version"] = kTraceSchemaVersion;
  j["initial_level"] = "B";
  j["seed"] = tr.seed;
  j["horizon"] = tr.horizon;
  j["clients"] = nlohmann::json::array();
  for (std::size_t i = 0; i < tr.clients.size(); ++i) {
    const auto& c = tr.clients[i];
    j["clients"].push_back({{"client", i + 1},
                            {"outage_fraction", c.outage_fraction()},
                            {"outage_periods", c.outage_periods},
                            {"outage_period_rate", c.period_rate()},
                            {"mean_quality_disutility", c.mean_quality()},
                            {"mean_power", c.mean_power()},
                            {"objective", c.objective()}});
  }
  j["total"] = {{"objective", tr.total_objective()},
                {"objective_se", tr.objective.se},
                {"power", tr.total_power()},
                {"power_se", tr.power.se}};
  const auto cr = constraint_report(tr);
  j["constraint"] = {{"mode", to_string(cr.mode)}, {"satisfied", cr.satisfied}};
  if (cr.mode == ConstraintMode::average_power) j["constraint"]["budget"] = cr.budget;
  if (cr.mode == ConstraintMode::channels) {
    j["constraint"]["channels"] = cr.channels;
    j["constraint"]["max_concurrent"] = cr.max_concurrent;
  }
  return j;
}

/// One row per client-slot; clients are 1-based.
inline void write_trace_csv(std::ostream& os, const SimTrace& tr) {
  os << "# das-sim-trace version " << kTraceSchemaVersion << " seed " << tr.seed << " initial_level B\n";
  os << "slot,client,level,channel,action,power,delivered,outage,new_period\n";
  for (const auto& r : tr.slots) {
    os << r.t << ',' << r.client + 1 << ',' << r.level << ',' << r.channel << ',' << r.action << ',' << r.power << ','
       << r.delivered << ',' << r.outage << ',' << r.new_period << '\n';
  }
}

/// Pearson test of the observed next-level counts of one client against
/// transition_distribution, per visited (level, action, channel) triple
/// with at least `min_visits` visits, pooled into one statistic.
struct ChiSquareReport {
  double statistic = 0.0;
  int dof = 0;
  double critical = 0.0;
  std::uint64_t visits = 0;
  bool pass = true;
};

inline ChiSquareReport transition_chi_square(const SimTrace& tr, const ClientModel& model, int client,
                                             const ChannelModel* channel = nullptr, double level = 0.999,
                                             std::uint64_t min_visits = 50) {
  const std::size_t n = tr.clients.size();
  std::map<std::tuple<int, int, int>, std::map<int, std::uint64_t>> counts;
  for (std::size_t k = static_cast<std::size_t>(client); k + n < tr.slots.size(); k += n) {
    const auto& r = tr.slots[k];
    ++counts[{r.level, r.action, r.channel}][tr.slots[k + n].level];
  }
  ChiSquareReport rep;
  for (const auto& [key, obs] : counts) {
    std::uint64_t total = 0;
    for (const auto& kv : obs) total += kv.second;
    if (total < min_visits) continue;
    const auto [l, a, c] = key;
    const auto dist = channel ? transition_distribution(l, model.action_at(a), model, *channel, c)
                              : transition_distribution(l, model.action_at(a), model);
    for (const auto& kv : obs) {
      const bool known = std::any_of(dist.begin(), dist.end(), [&](const Outcome& o) { return o.level == kv.first; });
      if (!known) {
        rep.pass = false;  // transition the model forbids
        return rep;
      }
    }
    if (dist.size() < 2) continue;
    rep.visits += total;
    for (const auto& o : dist) {
      const double expected = o.prob * static_cast<double>(total);
      const auto it = obs.find(o.level);
      const double seen = it == obs.end() ? 0.0 : static_cast<double>(it->second);
      rep.statistic += (seen - expected) * (seen - expected) / expected;
    }
    rep.dof += static_cast<int>(dist.size()) - 1;
  }
  if (rep.dof > 0) {
    rep.critical = boost::math::quantile(boost::math::chi_squared(rep.dof), level);
    rep.pass = rep.statistic <= rep.critical;
  }
  return rep;
}

}  // namespace das
