#pragma once

// Client prioritization over M orthogonal channels: passive sets,
// indexability, Whittle indices (bisection and indifference equations),
// and the index schedulers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "das/core.hpp"
#include "das/evaluation.hpp"
#include "das/solver.hpp"
#include "das/tabular.hpp"

namespace das {

struct WhittleOptions {
  SolverOptions solver = [] {
    SolverOptions o;
    o.tol = 1e-11;
    return o;
  }();
  /// Idle wins when its value is within this distance of the active one.
  double idle_tie = 1e-8;
  double tol = 1e-6;
  /// Upper end of the bisection; defaults to B (1 + lambda_O + max lambda_q).
  std::optional<double> price_max;
};

/// Throws unless the model has exactly the actions {idle, transmit}.
inline void require_binary(const ClientModel& model) {
  model.validate();
  if (model.qualities() != 1 || model.powers() != 2) {
    throw ModelError("binary client model needs one quality and two power levels");
  }
  if (!(model.success_prob(0, 1) > 0.0)) throw ModelError("transmit action must succeed with positive probability");
}

/// The binary restriction of `model` to idle and one transmit action; the
/// transmit power is rescaled to 1 so a price is charged per transmission.
inline ClientModel binary_restriction(const ClientModel& model, const Action& transmit) {
  model.check_action(transmit);
  if (transmit.power == 0) throw ModelError("transmit action must use positive power");
  ClientModel b = model;
  b.quality_disutilities = {model.disutility(transmit)};
  b.power_levels = {0.0, 1.0};
  b.success_prob = SuccessTable(1, 2, {0.0, model.success(transmit)});
  require_binary(b);
  return b;
}

inline double default_price_max(const ClientModel& model) {
  const double q = *std::max_element(model.quality_disutilities.begin(), model.quality_disutilities.end());
  return model.buffer_capacity * (1.0 + model.outage_period_weight + q);
}

struct PassiveSet {
  double price = 0.0;
  std::vector<bool> passive;

  bool contains(int l) const { return passive[static_cast<std::size_t>(l)]; }
  bool subset_of(const PassiveSet& other) const {
    for (std::size_t l = 0; l < passive.size(); ++l) {
      if (passive[l] && !other.passive[l]) return false;
    }
    return true;
  }
};

inline PassiveSet passive_set(const ClientModel& model, double price, const WhittleOptions& opt = {}) {
  require_binary(model);
  const auto mdp = build_client_mdp(model);
  const auto r = solve_average(mdp, price, opt.solver);
  PassiveSet ps;
  ps.price = price;
  ps.passive.resize(mdp.num_states());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    const double idle = mdp.cost(s, 0, price) + mdp.expected(s, 0, r.value);
    const double active = mdp.cost(s, 1, price) + mdp.expected(s, 1, r.value);
    ps.passive[s] = idle <= active + opt.idle_tie;
  }
  return ps;
}

struct IndexabilityReport {
  bool pass = true;
  /// Grid positions (i, j), i < j, with S(lambda_i) not inside S(lambda_j).
  std::optional<std::pair<std::size_t, std::size_t>> violation;
  int state = -1;
};

/// Nestedness along a price-sorted sequence of passive sets.
inline IndexabilityReport check_indexability(const std::vector<PassiveSet>& sets) {
  IndexabilityReport rep;
  for (std::size_t i = 1; i < sets.size(); ++i) {
    if (sets[i].price < sets[i - 1].price) throw ModelError("passive sets must be sorted by price");
  }
  for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
    for (std::size_t l = 0; l < sets[i].passive.size(); ++l) {
      if (sets[i].passive[l] && !sets[i + 1].passive[l]) {
        rep.pass = false;
        rep.violation = std::make_pair(i, i + 1);
        rep.state = static_cast<int>(l);
        return rep;
      }
    }
  }
  return rep;
}

inline IndexabilityReport check_indexability(const ClientModel& model, const std::vector<double>& grid,
                                             const WhittleOptions& opt = {}) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw ModelError("price grid must be ascending");
  std::vector<PassiveSet> sets;
  sets.reserve(grid.size());
  for (double p : grid) sets.push_back(passive_set(model, p, opt));
  return check_indexability(sets);
}

/// Smallest price at which idling is optimal in `level`, by bisection.
/// States passive already at price 0 get index 0.
inline double whittle_index(const ClientModel& model, int level, const WhittleOptions& opt = {}) {
  require_binary(model);
  model.check_level(level);
  if (!(opt.tol > 0.0)) throw ModelError("bisection tolerance must be positive");
  const double top = opt.price_max.value_or(default_price_max(model));
  if (passive_set(model, 0.0, opt).contains(level)) return 0.0;
  if (!passive_set(model, top, opt).contains(level)) {
    throw ModelError("state " + std::to_string(level) + " still active at the maximum price " + std::to_string(top));
  }
  double lo = 0.0, hi = top;
  while (hi - lo > opt.tol) {
    const double mid = 0.5 * (lo + hi);
    if (passive_set(model, mid, opt).contains(level)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct IndexTable {
  std::vector<double> index;  // W(l), l = 0..B
  double at(int l) const { return index[static_cast<std::size_t>(l)]; }
};

inline IndexTable index_table(const ClientModel& model, const WhittleOptions& opt = {}) {
  IndexTable t;
  for (int l = 0; l <= model.buffer_capacity; ++l) t.index.push_back(whittle_index(model, l, opt));
  return t;
}

struct IndifferenceSolution {
  double price = 0.0;
  double gain = 0.0;
  std::vector<double> bias;  // V(0) = 0
};

/// Solves the average-cost evaluation equations of the policy that is
/// active on `active` (ignored at k), with both actions satisfying the
/// equation at k. Unknowns: V(1..B), gain, and the price.
inline IndifferenceSolution whittle_linear_solve(const ClientModel& model, int k, const std::vector<bool>& active) {
  require_binary(model);
  model.check_level(k);
  const int b = model.buffer_capacity;
  if (active.size() != static_cast<std::size_t>(b + 1)) throw ModelError("active set size must be B+1");
  const auto mdp = build_client_mdp(model);
  const Eigen::Index n = b + 2;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  const Eigen::Index gain_col = b, price_col = b + 1;
  Eigen::Index row = 0;
  auto add = [&](int x, std::size_t act) {
    if (x > 0) a(row, x - 1) += 1.0;
    a(row, gain_col) = 1.0;
    if (act == 1) a(row, price_col) = -1.0;
    for (const auto& t : mdp.next(static_cast<std::size_t>(x), act)) {
      if (t.next > 0) a(row, static_cast<Eigen::Index>(t.next) - 1) -= t.prob;
    }
    rhs(row) = mdp.cost(static_cast<std::size_t>(x), act, 0.0);
    ++row;
  };
  for (int x = 0; x <= b; ++x) {
    if (x == k) {
      add(x, 0);
      add(x, 1);
    } else {
      add(x, active[static_cast<std::size_t>(x)] ? 1 : 0);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-12);
  if (lu.rank() < n) {
    throw ModelError("indifference system at state " + std::to_string(k) + " is singular");
  }
  const Eigen::VectorXd z = lu.solve(rhs);
  IndifferenceSolution out;
  out.price = z(price_col);
  out.gain = z(gain_col);
  out.bias.assign(static_cast<std::size_t>(b + 1), 0.0);
  for (int x = 1; x <= b; ++x) out.bias[static_cast<std::size_t>(x)] = z(x - 1);
  return out;
}

/// Threshold form: active below k, passive above, indifferent at k.
inline IndifferenceSolution whittle_linear_solve(const ClientModel& model, int k) {
  require_binary(model);
  if (k < 1 || k > model.last_fill_level()) throw ModelError("threshold must lie in 1..B-T+1");
  std::vector<bool> active(static_cast<std::size_t>(model.levels()));
  for (int x = 0; x < k; ++x) active[static_cast<std::size_t>(x)] = true;
  return whittle_linear_solve(model, k, active);
}

/// Bisection indices vs the indifference equations. A state is checked
/// when its index is positive and no other state's index lies within
/// 10 * tol of it; the active set is then {x : W(x) > W(k)}. States whose
/// index is shared by others flip together and are only counted.
struct LinearCheck {
  int checked = 0;
  int tied = 0;
  double max_error = 0.0;
  bool pass = true;
};

inline LinearCheck cross_check_linear(const ClientModel& model, const IndexTable& table,
                                      const WhittleOptions& opt = {}) {
  LinearCheck out;
  const double band = 10.0 * opt.tol;
  for (int k = 0; k <= model.buffer_capacity; ++k) {
    const double w = table.at(k);
    if (w <= 0.0) continue;
    bool tied = false;
    std::vector<bool> active(static_cast<std::size_t>(model.levels()));
    for (int x = 0; x <= model.buffer_capacity; ++x) {
      if (x != k && std::abs(table.at(x) - w) <= band) tied = true;
      active[static_cast<std::size_t>(x)] = table.at(x) > w;
    }
    if (tied) {
      ++out.tied;
      continue;
    }
    const double err = std::abs(whittle_linear_solve(model, k, active).price - w);
    out.max_error = std::max(out.max_error, err);
    if (err > band) out.pass = false;
    ++out.checked;
  }
  return out;
}

/// Up to M clients with the largest positive indices; ties go to the lower
/// client id. Returned ids are ascending.
inline std::vector<std::size_t> top_m(const std::vector<double>& index, int m) {
  if (m < 1) throw ModelError("number of channels must be at least 1");
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return index[a] > index[b]; });
  std::vector<std::size_t> out;
  for (std::size_t i : order) {
    if (out.size() == static_cast<std::size_t>(m) || !(index[i] > 0.0)) break;
    out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::size_t> top_m_scheduler(const std::vector<IndexTable>& tables, const std::vector<int>& levels,
                                                int m) {
  if (tables.size() != levels.size()) throw ModelError("one buffer level per client required");
  std::vector<double> current;
  current.reserve(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i) current.push_back(tables[i].at(levels[i]));
  return top_m(current, m);
}

struct IndexDecision {
  std::vector<std::size_t> clients;
  /// Per client; idle (quality 0, power 0) unless served.
  std::vector<Action> actions;
  std::vector<double> index;
};

/// One-step-lookahead advantage of the best transmitting action over idling,
/// using per-client biases `values` (e.g. from relaxed_values, or from
/// average_cost_solve at power price `price`).
inline IndexDecision separable_value_index(const std::vector<ClientModel>& models,
                                           const std::vector<std::vector<double>>& values,
                                           const std::vector<int>& levels, int m, double price = 0.0,
                                           double tie_tol = 1e-11) {
  if (models.size() != values.size() || models.size() != levels.size()) {
    throw ModelError("models, value functions and levels must have one entry per client");
  }
  IndexDecision d;
  d.actions.assign(models.size(), Action{0, 0});
  d.index.assign(models.size(), 0.0);
  std::vector<Action> best(models.size(), Action{0, 0});
  for (std::size_t n = 0; n < models.size(); ++n) {
    const auto& model = models[n];
    const auto& v = values[n];
    model.check_level(levels[n]);
    if (v.size() != static_cast<std::size_t>(model.levels())) throw ModelError("value function size mismatch");
    auto q = [&](const Action& u) {
      double acc = step_cost(levels[n], u, price, model);
      for (const auto& o : transition_distribution(levels[n], u, model)) acc += o.prob * v[static_cast<std::size_t>(o.level)];
      return acc;
    };
    const double idle = q(Action{0, 0});
    double top = std::numeric_limits<double>::infinity();
    for (int a = model.qualities(); a < model.num_actions(); ++a) {
      const Action u = model.action_at(a);
      const double val = q(u);
      if (val < top - tie_tol * (1.0 + std::abs(val))) {
        top = val;
        best[n] = u;
      }
    }
    const double adv = idle - top;
    d.index[n] = adv > tie_tol * (1.0 + std::abs(idle)) ? adv : 0.0;
  }
  d.clients = top_m(d.index, m);
  for (auto n : d.clients) d.actions[n] = best[n];
  return d;
}

struct RelaxedValues {
  /// Price per channel use at which the relaxed clients use about M
  /// channels on average (0 when they use fewer even for free).
  double price = 0.0;
  double channel_use = 0.0;
  std::vector<std::vector<double>> values;
};

/// Per-client biases of the channel-use relaxation min sum_n C_n + lambda U_n,
/// with lambda set by bisection so that sum_n U_n meets M.
inline RelaxedValues relaxed_values(const std::vector<ClientModel>& models, int m, const SolverOptions& opt = {},
                                    double tol = 1e-6) {
  if (m < 1) throw ModelError("number of channels must be at least 1");
  std::vector<TabularMdp> mdps;
  for (const auto& model : models) mdps.push_back(with_channel_use_price(build_client_mdp(model)));
  auto solve = [&](double price) {
    RelaxedValues r;
    r.price = price;
    for (std::size_t n = 0; n < mdps.size(); ++n) {
      auto sol = solve_average(mdps[n], price, opt);
      r.channel_use += evaluate_policy(mdps[n], sol.policy, static_cast<std::size_t>(models[n].buffer_capacity))
                           .average_power;
      r.values.push_back(std::move(sol.value));
    }
    return r;
  };
  auto at_zero = solve(0.0);
  if (at_zero.channel_use <= m) return at_zero;
  double lo = 0.0, hi = 1.0;
  auto top = solve(hi);
  while (top.channel_use > m) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw ConvergenceError("no channel price meets the channel count");
    top = solve(hi);
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    auto r = solve(mid);
    if (r.channel_use > m) {
      lo = mid;
    } else {
      hi = mid;
      top = std::move(r);
    }
  }
  return top;
}

/// Joint policy on the product chain induced by a per-slot rule mapping
/// buffer levels to per-client actions.
inline std::vector<std::size_t> joint_policy(const std::vector<ClientModel>& models,
                                             const std::function<std::vector<Action>(const std::vector<int>&)>& rule) {
  std::vector<std::size_t> radix_s, radix_a;
  std::size_t states = 1;
  for (const auto& m : models) {
    radix_s.push_back(static_cast<std::size_t>(m.levels()));
    radix_a.push_back(static_cast<std::size_t>(m.num_actions()));
    states *= radix_s.back();
  }
  std::vector<std::size_t> policy(states);
  std::vector<int> levels(models.size());
  for (std::size_t s = 0; s < states; ++s) {
    const auto digits = decode_product(s, radix_s);
    for (std::size_t i = 0; i < digits.size(); ++i) levels[i] = static_cast<int>(digits[i]);
    const auto acts = rule(levels);
    std::vector<std::size_t> ad(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) ad[i] = static_cast<std::size_t>(models[i].action_index(acts[i]));
    policy[s] = encode_product(ad, radix_a);
  }
  return policy;
}

/// Columns: client (1-based), state (buffer level), index.
inline void write_index_tables_csv(std::ostream& os, const std::vector<IndexTable>& tables) {
  os << "client,state,index\n";
  os.precision(17);
  for (std::size_t n = 0; n < tables.size(); ++n) {
    for (std::size_t l = 0; l < tables[n].index.size(); ++l) os << n + 1 << ',' << l << ',' << tables[n].index[l] << '\n';
  }
}

}  // namespace das
