#pragma once

// Tabular Q-learning for one client, the Boltzmann index policy over many
// clients, and the two-timescale price/Q-value learner.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "das/core.hpp"
#include "das/random.hpp"
#include "das/solver.hpp"
#include "das/tabular.hpp"

namespace das {

class QTable {
 public:
  QTable() = default;
  QTable(int levels, int actions, double init = 0.0)
      : levels_(levels), actions_(actions), q_(static_cast<std::size_t>(levels * actions), init),
        n_(static_cast<std::size_t>(levels * actions), 0) {
    if (levels < 1 || actions < 1) throw ModelError("Q-table needs at least one state and one action");
  }
  explicit QTable(const ClientModel& model, double init = 0.0) : QTable(model.levels(), model.num_actions(), init) {}

  int levels() const { return levels_; }
  int actions() const { return actions_; }
  double& q(int l, int a) { return q_[index(l, a)]; }
  double q(int l, int a) const { return q_[index(l, a)]; }
  std::uint64_t visits(int l, int a) const { return n_[index(l, a)]; }
  void visit(int l, int a) { ++n_[index(l, a)]; }

  double min(int l) const {
    double m = std::numeric_limits<double>::infinity();
    for (int a = 0; a < actions_; ++a) m = std::min(m, q(l, a));
    return m;
  }
  /// Lowest-index minimizer.
  int argmin(int l) const {
    int best = 0;
    for (int a = 1; a < actions_; ++a) {
      if (q(l, a) < q(l, best)) best = a;
    }
    return best;
  }
  std::uint64_t min_visits() const { return n_.empty() ? 0 : *std::min_element(n_.begin(), n_.end()); }
  const std::vector<double>& values() const { return q_; }

  nlohmann::json to_json() const {
    return {{"levels", levels_}, {"actions", actions_}, {"q", q_}, {"visits", n_}};
  }
  static QTable from_json(const nlohmann::json& j) {
    QTable t(j.at("levels").get<int>(), j.at("actions").get<int>());
    auto q = j.at("q").get<std::vector<double>>();
    auto n = j.at("visits").get<std::vector<std::uint64_t>>();
    if (q.size() != t.q_.size() || n.size() != t.n_.size()) throw ModelError("Q-table checkpoint has wrong size");
    for (double v : q) {
      if (!std::isfinite(v)) throw ModelError("Q-table checkpoint has non-finite entries");
    }
    t.q_ = std::move(q);
    t.n_ = std::move(n);
    return t;
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t index(int l, int a) const {
    if (l < 0 || l >= levels_ || a < 0 || a >= actions_) throw ModelError("Q-table index out of range");
    return static_cast<std::size_t>(l * actions_ + a);
  }

  int levels_ = 0;
  int actions_ = 0;
  std::vector<double> q_;
  std::vector<std::uint64_t> n_;
};

/// Q*(l,u) = C(l,u) + sum_l' p(l'|l,u) h(l') from an exact average-cost
/// solve (discount < 1: the discounted fixed point instead).
inline QTable exact_q_table(const ClientModel& model, double price, double discount = 1.0) {
  const auto mdp = build_client_mdp(model);
  const auto sol = discount < 1.0 ? discounted_value_iteration(mdp, price, discount) : solve_average(mdp, price);
  const double g = discount < 1.0 ? discount : 1.0;
  QTable t(model);
  for (int l = 0; l < model.levels(); ++l) {
    for (int a = 0; a < model.num_actions(); ++a) {
      const auto s = static_cast<std::size_t>(l);
      const auto u = static_cast<std::size_t>(a);
      t.q(l, a) = mdp.cost(s, u, price) + g * mdp.expected(s, u, sol.value);
    }
  }
  return t;
}

/// Step sizes and temperature. Defaults: beta = 1/(1+n)^0.7 per visited
/// pair, alpha_t = a/(1+t)^0.85, tau_t = c log(1+t).
struct Schedules {
  double learning_exponent = 0.7;
  double price_exponent = 0.85;
  double price_scale = 1.0;
  double temperature_scale = 1.0;
  double epsilon_scale = 0.1;
  double epsilon_exponent = 0.0;

  double learning_rate(std::uint64_t visits) const {
    return 1.0 / std::pow(1.0 + static_cast<double>(visits), learning_exponent);
  }
  double price_step(std::uint64_t t) const {
    return price_scale / std::pow(1.0 + static_cast<double>(t), price_exponent);
  }
  double temperature(std::uint64_t t) const { return temperature_scale * std::log1p(static_cast<double>(t)); }
  /// Uniform-exploration probability eps_t = min(1, c/(1+t)^p); p = 0 gives
  /// a constant rate.
  double exploration_rate(std::uint64_t t) const {
    if (epsilon_scale <= 0.0) return 0.0;
    return std::min(1.0, epsilon_scale / std::pow(1.0 + static_cast<double>(t), epsilon_exponent));
  }

  /// Robbins-Monro conditions on beta; alpha = o(beta) for two-timescale use.
  void validate(bool two_timescale = false) const {
    if (!(learning_exponent > 0.5 && learning_exponent <= 1.0)) {
      throw ModelError("learning-rate exponent must lie in (0.5, 1]");
    }
    if (!(temperature_scale >= 0.0) || !std::isfinite(temperature_scale)) {
      throw ModelError("temperature scale must be finite and nonnegative");
    }
    if (!(epsilon_scale >= 0.0) || !(epsilon_exponent >= 0.0 && epsilon_exponent <= 1.0)) {
      throw ModelError("exploration rate needs scale >= 0 and exponent in [0, 1]");
    }
    if (two_timescale) {
      if (!(price_scale > 0.0)) throw ModelError("price step scale must be positive");
      if (!(price_exponent > learning_exponent && price_exponent <= 1.0)) {
        throw ModelError("price steps must vanish faster than learning rates (exponent in (beta exponent, 1])");
      }
    }
  }

  nlohmann::json to_json() const {
    return {{"learning_exponent", learning_exponent},
            {"price_exponent", price_exponent},
            {"price_scale", price_scale},
            {"temperature_scale", temperature_scale},
            {"epsilon_scale", epsilon_scale},
            {"epsilon_exponent", epsilon_exponent}};
  }
};

/// Q(l,u) <- (1 - rate) Q(l,u) + rate (cost + discount * min_u' Q(next,u') - offset).
/// Only the visited entry changes. offset = 0 and discount = 1 is the plain
/// update; discount < 1 the discounted one; offset = f(Q) the relative one.
inline void q_update(QTable& table, int l, int a, double cost, int next, double rate, double discount = 1.0,
                     double offset = 0.0) {
  const double target = cost + discount * table.min(next) - offset;
  double& q = table.q(l, a);
  q = (1.0 - rate) * q + rate * target;
  table.visit(l, a);
}

/// Boltzmann weights over negated Q-values, exp(-tau (Q - min Q)).
/// `literal` uses exp(+tau Q) instead (explores toward high cost).
inline std::vector<double> softmax_probabilities(const QTable& table, int l, double tau, bool literal = false) {
  if (!std::isfinite(tau)) throw ModelError("temperature must be finite");
  const int n = table.actions();
  std::vector<double> w(static_cast<std::size_t>(n));
  double ref = literal ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) ref = literal ? std::max(ref, table.q(l, a)) : std::min(ref, table.q(l, a));
  double total = 0.0;
  for (int a = 0; a < n; ++a) {
    const double x = literal ? tau * (table.q(l, a) - ref) : -tau * (table.q(l, a) - ref);
    w[static_cast<std::size_t>(a)] = std::exp(x);
    total += w[static_cast<std::size_t>(a)];
  }
  for (double& v : w) v /= total;
  return w;
}

inline int sample_index(const std::vector<double>& probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

inline int softmax_action(const QTable& table, int l, double tau, Rng& rng, bool literal = false) {
  return sample_index(softmax_probabilities(table, l, tau, literal), rng);
}

/// epsilon_greedy: greedy with uniform exploration at rate eps_t.
/// boltzmann: softmin at temperature tau_t, mixed with uniform exploration
/// at rate eps_t (0 disables the mix).
enum class Exploration { boltzmann, epsilon_greedy };

namespace detail {

inline int reference_level(const ClientModel& model, int level, int action) {
  const int l = level < 0 ? model.buffer_capacity : level;
  model.check_level(l);
  if (action < 0 || action >= model.num_actions()) throw ModelError("reference action out of range");
  return l;
}

}  // namespace detail

enum class QVariant { relative, discounted };

struct QLearningOptions {
  QVariant variant = QVariant::relative;
  double discount = 0.99;
  /// Reference pair for the relative variant: f(Q) = Q(ref_level, ref_action).
  /// ref_level < 0 means the full-buffer state B.
  int ref_level = -1;
  int ref_action = 0;
  Exploration exploration = Exploration::epsilon_greedy;
  bool literal_softmax = false;
  Schedules schedules;
};

inline int explore(const QTable& table, int l, std::uint64_t t, Exploration mode, const Schedules& sch, Rng& rng,
                   bool literal = false) {
  const double eps = sch.exploration_rate(t);
  if (eps > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps) {
    return std::uniform_int_distribution<int>(0, table.actions() - 1)(rng);
  }
  if (mode == Exploration::epsilon_greedy) return table.argmin(l);
  return softmax_action(table, l, sch.temperature(t), rng, literal);
}

struct LearningPoint {
  std::uint64_t t = 0;
  double average_cost = 0.0;  // running mean of realized Lagrangian cost
  double gain_estimate = 0.0;
  double price = 0.0;
  double average_power = 0.0;
};

struct QLearningResult {
  QTable table;
  std::uint64_t steps = 0;
  int level = 0;
  double average_cost = 0.0;
  /// f(Q) for the relative variant; NaN otherwise.
  double gain_estimate = std::numeric_limits<double>::quiet_NaN();
  std::vector<LearningPoint> curve;
};

/// Single-client Q-learning at a fixed power price, driven by sampled slots
/// from level B (or from `resume`).
inline QLearningResult q_learning(const ClientModel& model, double price, std::uint64_t steps, std::uint64_t seed,
                                  const QLearningOptions& opt = {}, const QLearningResult* resume = nullptr,
                                  std::uint64_t log_every = 0) {
  model.validate();
  opt.schedules.validate();
  if (opt.variant == QVariant::discounted && !(opt.discount > 0.0 && opt.discount < 1.0)) {
    throw ModelError("discount must lie in (0,1)");
  }
  QLearningResult r;
  r.table = resume ? resume->table : QTable(model);
  r.level = resume ? resume->level : model.buffer_capacity;
  const std::uint64_t t0 = resume ? resume->steps : 0;
  double total = resume ? resume->average_cost * static_cast<double>(t0) : 0.0;
  const int ref_l = detail::reference_level(model, opt.ref_level, opt.ref_action);
  Rng act_rng = make_stream(seed, 0);
  Rng env_rng = make_stream(seed, 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int l = r.level;
  for (std::uint64_t t = t0; t < t0 + steps; ++t) {
    const int a = explore(r.table, l, t, opt.exploration, opt.schedules, act_rng, opt.literal_softmax);
    const Action u = model.action_at(a);
    const auto o = realize_slot(l, u, model, model.success(u), unif(env_rng));
    const double c = o.cost(price);
    total += c;
    const double rate = opt.schedules.learning_rate(r.table.visits(l, a));
    if (opt.variant == QVariant::relative) {
      q_update(r.table, l, a, c, o.next, rate, 1.0, r.table.q(ref_l, opt.ref_action));
    } else {
      q_update(r.table, l, a, c, o.next, rate, opt.discount);
    }
    l = o.next;
    if (log_every && (t + 1) % log_every == 0) {
      r.curve.push_back({t + 1, total / static_cast<double>(t + 1),
                         opt.variant == QVariant::relative ? r.table.q(ref_l, opt.ref_action) : 0.0, price, 0.0});
    }
  }
  r.steps = t0 + steps;
  r.level = l;
  r.average_cost = r.steps ? total / static_cast<double>(r.steps) : 0.0;
  if (opt.variant == QVariant::relative) r.gain_estimate = r.table.q(ref_l, opt.ref_action);
  return r;
}

/// Index-policy selection: draw (client, action) pairs from the joint
/// Boltzmann law with weights exp(tau * A_n(u)), A_n(u) = Q_n(l_n, idle) - Q_n(l_n, u),
/// removing a client once drawn, until M transmissions are assigned or every
/// client has been drawn. Drawing an idle pair decides that client without
/// using a channel. Returns one action index per client (0 = idle).
inline std::vector<int> q_index_schedule(const std::vector<QTable>& tables, const std::vector<int>& levels, int m,
                                         double tau, Rng& rng, const std::vector<ClientModel>& models) {
  if (m < 1) throw ModelError("number of channels must be at least 1");
  if (!std::isfinite(tau) || tau < 0.0) throw ModelError("temperature must be finite and nonnegative");
  const std::size_t n = tables.size();
  std::vector<int> out(n, 0);
  std::vector<bool> decided(n, false);
  struct Pair {
    std::size_t client;
    int action;
    double score;
  };
  int used = 0;
  std::size_t remaining = n;
  std::vector<Pair> pairs;
  std::vector<double> w;
  while (used < m && remaining > 0) {
    pairs.clear();
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (decided[i]) continue;
      const double idle = tables[i].q(levels[i], 0);
      for (int a = 0; a < tables[i].actions(); ++a) {
        if (a != 0 && models[i].action_at(a).power == 0) continue;  // other idle qualities duplicate action 0
        pairs.push_back({i, a, idle - tables[i].q(levels[i], a)});
        top = std::max(top, pairs.back().score);
      }
    }
    w.resize(pairs.size());
    double total = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) total += (w[k] = std::exp(tau * (pairs[k].score - top)));
    for (double& v : w) v /= total;
    const auto& pick = pairs[static_cast<std::size_t>(sample_index(w, rng))];
    decided[pick.client] = true;
    --remaining;
    out[pick.client] = pick.action;
    if (pick.action != 0) ++used;
  }
  return out;
}

/// The tau -> infinity limit of q_index_schedule: repeatedly take the
/// undecided client with the largest positive advantage (lowest client,
/// then lowest action, on ties) until M channels are used.
inline std::vector<int> q_index_greedy(const std::vector<QTable>& tables, const std::vector<int>& levels, int m,
                                       const std::vector<ClientModel>& models) {
  if (m < 1) throw ModelError("number of channels must be at least 1");
  const std::size_t n = tables.size();
  std::vector<int> out(n, 0);
  std::vector<double> best(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double idle = tables[i].q(levels[i], 0);
    for (int a = 1; a < tables[i].actions(); ++a) {
      if (models[i].action_at(a).power == 0) continue;
      const double adv = idle - tables[i].q(levels[i], a);
      if (adv > best[i]) best[i] = adv, out[i] = a;
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return best[x] > best[y]; });
  for (std::size_t k = static_cast<std::size_t>(m); k < n; ++k) out[order[k]] = 0;
  return out;
}

struct IndexLearningOptions {
  Schedules schedules;
  int channels = 1;
  double price = 0.0;
  /// Reference level (see QLearningOptions). Level 0 with idle keeps being
  /// visited when the learned policy stops transmitting, so f(Q) never goes
  /// stale.
  int ref_level = 0;
  int ref_action = 0;
  std::uint64_t log_every = 0;
};

struct IndexLearningResult {
  std::vector<QTable> tables;
  std::vector<int> levels;
  std::uint64_t steps = 0;
  double average_cost = 0.0;  // realized QoE + price * power, summed over clients
  std::vector<LearningPoint> curve;
};

/// The Q-learning index policy over `steps` slots, with relative Q-learning
/// per client. Every client observes its own transition each slot, so all
/// tables are updated.
inline IndexLearningResult q_index_learning(const std::vector<ClientModel>& models, std::uint64_t steps,
                                            std::uint64_t seed, const IndexLearningOptions& opt = {}) {
  opt.schedules.validate();
  const std::size_t n = models.size();
  IndexLearningResult r;
  std::vector<int> refs;
  for (const auto& m : models) {
    m.validate();
    r.tables.emplace_back(m);
    r.levels.push_back(m.buffer_capacity);
    refs.push_back(detail::reference_level(m, opt.ref_level, opt.ref_action));
  }
  Rng sched = make_stream(seed, 0);
  std::vector<Rng> env;
  for (std::size_t i = 0; i < n; ++i) env.push_back(make_stream(seed, 1 + i));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double total = 0.0;
  for (std::uint64_t t = 0; t < steps; ++t) {
    const auto acts = q_index_schedule(r.tables, r.levels, opt.channels, opt.schedules.temperature(t), sched, models);
    for (std::size_t i = 0; i < n; ++i) {
      const Action u = models[i].action_at(acts[i]);
      const int l = r.levels[i];
      const auto o = realize_slot(l, u, models[i], models[i].success(u), unif(env[i]));
      const double c = o.cost(opt.price);
      total += c;
      auto& tab = r.tables[i];
      q_update(tab, l, acts[i], c, o.next, opt.schedules.learning_rate(tab.visits(l, acts[i])), 1.0,
               tab.q(refs[i], opt.ref_action));
      r.levels[i] = o.next;
    }
    if (opt.log_every && (t + 1) % opt.log_every == 0) {
      r.curve.push_back({t + 1, total / static_cast<double>(t + 1), 0.0, opt.price, 0.0});
    }
  }
  r.steps = steps;
  r.average_cost = steps ? total / static_cast<double>(steps) : 0.0;
  return r;
}

struct TwoTimescaleOptions {
  Schedules schedules = [] {
    Schedules s;
    s.epsilon_scale = 1.0;
    s.epsilon_exponent = 0.3;
    return s;
  }();
  Exploration exploration = Exploration::boltzmann;
  /// Reference pair, as in IndexLearningOptions.
  int ref_level = 0;
  int ref_action = 0;
  double initial_price = 0.0;
  /// Trace thinning: keep every k-th price.
  std::uint64_t trace_every = 1000;
};

struct TwoTimescaleResult {
  std::vector<QTable> tables;
  std::vector<double> price_trace;
  double price = 0.0;
  std::uint64_t steps = 0;
  /// Realized averages over the second half of the run.
  double average_power = 0.0;
  double average_qoe = 0.0;
  std::vector<LearningPoint> curve;
};

/// Relative Q-learning per client on the Lagrangian cost at the current
/// price (fast), with lambda <- (lambda + alpha_t (sum_n E_n(t) - budget))^+
/// driven by realized power (slow).
inline TwoTimescaleResult two_timescale_run(const std::vector<ClientModel>& models, double budget,
                                            std::uint64_t steps, std::uint64_t seed,
                                            const TwoTimescaleOptions& opt = {}) {
  opt.schedules.validate(true);
  if (!(budget >= 0.0)) throw ModelError("power budget must be nonnegative");
  const std::size_t n = models.size();
  TwoTimescaleResult r;
  std::vector<int> levels, refs;
  for (const auto& m : models) {
    m.validate();
    r.tables.emplace_back(m);
    levels.push_back(m.buffer_capacity);
    refs.push_back(detail::reference_level(m, opt.ref_level, opt.ref_action));
  }
  std::vector<Rng> act, env;
  for (std::size_t i = 0; i < n; ++i) {
    act.push_back(make_stream(seed, 2 * i));
    env.push_back(make_stream(seed, 2 * i + 1));
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double price = opt.initial_price;
  double power_sum = 0.0, qoe_sum = 0.0;
  const std::uint64_t half = steps / 2;
  const std::uint64_t every = std::max<std::uint64_t>(1, opt.trace_every);
  for (std::uint64_t t = 0; t < steps; ++t) {
    double used = 0.0, qoe = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& tab = r.tables[i];
      const int l = levels[i];
      const int a = explore(tab, l, t, opt.exploration, opt.schedules, act[i]);
      const Action u = models[i].action_at(a);
      const auto o = realize_slot(l, u, models[i], models[i].success(u), unif(env[i]));
      q_update(tab, l, a, o.cost(price), o.next, opt.schedules.learning_rate(tab.visits(l, a)), 1.0,
               tab.q(refs[i], opt.ref_action));
      levels[i] = o.next;
      used += o.power;
      qoe += o.qoe;
    }
    price = std::max(0.0, price + opt.schedules.price_step(t) * (used - budget));
    if (t >= half) {
      power_sum += used;
      qoe_sum += qoe;
    }
    if ((t + 1) % every == 0) r.price_trace.push_back(price);
  }
  const double tail = static_cast<double>(steps - half);
  r.price = price;
  r.steps = steps;
  r.average_power = tail > 0 ? power_sum / tail : 0.0;
  r.average_qoe = tail > 0 ? qoe_sum / tail : 0.0;
  return r;
}

/// Checkpoint of a set of tables plus schedule state.
inline nlohmann::json checkpoint_json(const std::vector<QTable>& tables, const Schedules& schedules,
                                      std::uint64_t steps, double price, const std::vector<int>& levels) {
  nlohmann::json j;
  j["format"] = "das-qtable";
  j["version"] = 1;
  j["steps"] = steps;
  j["price"] = price;
  j["levels"] = levels;
  j["schedules"] = schedules.to_json();
  j["tables"] = nlohmann::json::array();
  for (const auto& t : tables) j["tables"].push_back(t.to_json());
  return j;
}

struct Checkpoint {
  std::vector<QTable> tables;
  Schedules schedules;
  std::uint64_t steps = 0;
  double price = 0.0;
  std::vector<int> levels;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "das-qtable" || j.value("version", 0) != 1) {
    throw ModelError("not a version-1 Q-table checkpoint");
  }
  Checkpoint c;
  c.steps = j.at("steps").get<std::uint64_t>();
  c.price = j.at("price").get<double>();
  c.levels = j.at("levels").get<std::vector<int>>();
  const auto& s = j.at("schedules");
  c.schedules.learning_exponent = s.at("learning_exponent").get<double>();
  c.schedules.price_exponent = s.at("price_exponent").get<double>();
  c.schedules.price_scale = s.at("price_scale").get<double>();
  c.schedules.temperature_scale = s.at("temperature_scale").get<double>();
  c.schedules.epsilon_scale = s.at("epsilon_scale").get<double>();
  c.schedules.epsilon_exponent = s.at("epsilon_exponent").get<double>();
  for (const auto& t : j.at("tables")) c.tables.push_back(QTable::from_json(t));
  return c;
}

}  // namespace das
