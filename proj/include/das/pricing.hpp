#pragma once

// Lagrangian decomposition of the power-constrained multi-client problem:
// the dual function, its subgradient, and projected price iteration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "das/core.hpp"
#include "das/evaluation.hpp"
#include "das/parallel.hpp"
#include "das/solver.hpp"
#include "das/tabular.hpp"

namespace das {

struct PricingOptions {
  SolverOptions solver;
  unsigned threads = 1;
};

/// D(lambda) together with the per-client pieces it is assembled from.
struct DualValue {
  double price = 0.0;
  double budget = 0.0;
  double value = 0.0;
  std::vector<double> client_gain;
  std::vector<double> client_power;
  std::vector<double> client_cost;
  std::vector<PolicyTable> policies;
  /// Per-client biases, reusable as RVI warm starts.
  std::vector<std::vector<double>> biases;

  double total_power() const {
    double s = 0.0;
    for (double e : client_power) s += e;
    return s;
  }
  double total_cost() const {
    double s = 0.0;
    for (double c : client_cost) s += c;
    return s;
  }
  /// Budget minus total usage: positive when the constraint is slack.
  double subgradient() const { return budget - total_power(); }
};

namespace detail {

inline void check_budget(double budget) {
  if (!(budget >= 0.0) || !std::isfinite(budget)) throw ModelError("power budget must be finite and nonnegative");
}

inline DualValue dual_value_impl(const std::vector<ClientModel>& models, const std::vector<TabularMdp>& mdps,
                                 double price, double budget, const PricingOptions& opt,
                                 const std::vector<std::vector<double>>* warm) {
  check_price(price);
  check_budget(budget);
  const std::size_t n = models.size();
  DualValue d;
  d.price = price;
  d.budget = budget;
  d.client_gain.resize(n);
  d.client_power.resize(n);
  d.client_cost.resize(n);
  d.policies.resize(n);
  d.biases.resize(n);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    const auto* ws = warm && i < warm->size() ? &(*warm)[i] : nullptr;
    auto r = solve_average(mdps[i], price, opt.solver, ws);
    const auto st = evaluate_policy(mdps[i], r.policy, static_cast<std::size_t>(models[i].buffer_capacity));
    d.client_gain[i] = r.gain;
    d.client_power[i] = st.average_power;
    d.client_cost[i] = st.average_cost;
    d.policies[i] = PolicyTable(models[i], 1, r.policy);
    d.biases[i] = std::move(r.value);
  });
  double total = 0.0;
  for (double g : d.client_gain) total += g;
  d.value = total - price * budget;
  return d;
}

inline std::vector<TabularMdp> client_mdps(const std::vector<ClientModel>& models) {
  if (models.empty()) throw ModelError("at least one client is required");
  std::vector<TabularMdp> out;
  out.reserve(models.size());
  for (const auto& m : models) {
    m.validate();
    out.push_back(build_client_mdp(m));
  }
  return out;
}

}  // namespace detail

/// D(lambda) = sum_n V_n(lambda) - lambda * budget, each V_n the optimal
/// average Lagrangian cost of client n solved on its own.
inline DualValue dual_value(const std::vector<ClientModel>& models, double price, double budget,
                            const PricingOptions& opt = {}) {
  return detail::dual_value_impl(models, detail::client_mdps(models), price, budget, opt, nullptr);
}

/// budget - sum_n E_n(pi_n*(lambda)). The supergradient of D is its
/// negative; stepping lambda against this value is ascent on D.
inline double subgradient(const std::vector<ClientModel>& models, double price, double budget,
                          const PricingOptions& opt = {}) {
  return dual_value(models, price, budget, opt).subgradient();
}

struct PriceSchedule {
  double a = 1.0;
  double b = 10.0;
  double step(std::size_t k) const { return a / (static_cast<double>(k) + b); }
};

struct PriceIterationOptions {
  PriceSchedule schedule;
  std::size_t max_iterations = 5000;
  /// Stop once the best dual value improved by less than this over `window`
  /// iterations.
  double tol = 1e-7;
  std::size_t window = 50;
  /// Allowed violation of the budget; defaults to 1e-3 * budget.
  std::optional<double> feasibility_tol;
  /// Locate the breakpoint around the best iterate by bisection and
  /// time-share between the bundles on either side of it.
  bool refine = true;
  PricingOptions pricing;
};

struct PriceIterate {
  std::size_t k = 0;
  double price = 0.0;
  double dual = 0.0;
  double subgradient = 0.0;
  double total_power = 0.0;
  bool feasible = false;
};

/// Append-only record of the outer loop.
struct PriceState {
  double price = 0.0;
  std::size_t k = 0;
  PriceSchedule schedule;
  std::vector<PriceIterate> history;
};

struct PriceReport {
  bool converged = false;
  std::size_t iterations = 0;
  /// sum_n E_n - budget of the returned (possibly time-shared) bundle.
  double violation = 0.0;
  double complementary_slackness = 0.0;
  /// Same quantities for the deterministic bundle at lambda*.
  double deterministic_violation = 0.0;
};

struct PriceResult {
  double price = 0.0;
  double dual = 0.0;
  /// Per-client optimal policies at lambda* (at the feasible side of the
  /// breakpoint when time-sharing).
  std::vector<PolicyTable> policies;
  /// Time-sharing partner: run `policies` a fraction `mixing` of the time
  /// and `alternate` the rest. mixing == 1 means no time-sharing.
  std::vector<PolicyTable> alternate;
  double mixing = 1.0;
  double total_power = 0.0;
  /// Primal QoE cost of the returned bundle.
  double primal_cost = 0.0;
  PriceReport report;
  PriceState state;
};

/// Projected subgradient ascent on the concave dual,
/// lambda <- (lambda - alpha_k (budget - sum_n E_n))^+, keeping the best
/// iterate. Non-convergence is flagged in the report, not thrown.
inline PriceResult price_iteration(const std::vector<ClientModel>& models, double budget,
                                   const PriceIterationOptions& opt = {}) {
  if (!(budget > 0.0) || !std::isfinite(budget)) throw ModelError("power budget must be positive");
  if (!(opt.schedule.a > 0.0) || !(opt.schedule.b > 0.0)) throw ModelError("step schedule must be positive");
  const auto mdps = detail::client_mdps(models);
  const double feas_tol = opt.feasibility_tol.value_or(1e-3 * budget);

  PriceResult out;
  out.state.schedule = opt.schedule;
  std::optional<DualValue> best;
  std::vector<std::vector<double>> warm;
  auto evaluate = [&](double price) {
    auto d = detail::dual_value_impl(models, mdps, price, budget, opt.pricing, warm.empty() ? nullptr : &warm);
    warm = d.biases;
    if (!best || d.value > best->value) best = d;
    return d;
  };
  auto record = [&](const DualValue& d, std::size_t k) {
    out.state.history.push_back({k, d.price, d.value, d.subgradient(), d.total_power(),
                                 d.total_power() <= budget + 1e-12});
  };

  // Time-sharing pair around the breakpoint: lo uses more power than the
  // budget, hi fits. Usage is nonincreasing in the price, so once the
  // history holds both kinds of iterate the breakpoint can be bisected.
  std::optional<DualValue> lo, hi;
  auto bracket = [&](bool extend) {
    std::optional<double> lo_price, hi_price;
    for (const auto& it : out.state.history) {
      if (!it.feasible && (!lo_price || it.price > *lo_price)) lo_price = it.price;
      if (it.feasible && (!hi_price || it.price < *hi_price)) hi_price = it.price;
    }
    if (!lo_price || (!hi_price && !extend)) return false;
    lo = evaluate(*lo_price);
    hi.reset();
    if (hi_price) hi = evaluate(*hi_price);
    for (double p = std::max(1.0, 2.0 * lo->price); !hi && p < 1e300; p *= 2.0) {
      auto d = evaluate(p);
      if (d.total_power() <= budget + 1e-12) {
        hi = std::move(d);
      } else {
        lo = std::move(d);
      }
    }
    if (!hi || !(lo->price < hi->price)) return false;
    while (hi->price - lo->price > 1e-12 * std::max(1.0, hi->price)) {
      auto d = evaluate(0.5 * (lo->price + hi->price));
      if (d.total_power() > budget + 1e-12) {
        lo = std::move(d);
      } else {
        hi = std::move(d);
      }
    }
    return true;
  };

  double price = 0.0;
  double anchor = -std::numeric_limits<double>::infinity();
  std::size_t anchor_k = 0;
  bool stalled = false;
  bool bracketed = false;
  std::size_t k = 0;
  for (; k < opt.max_iterations; ++k) {
    const auto d = evaluate(price);
    record(d, k);
    if (best->value > anchor + opt.tol) {
      anchor = best->value;
      anchor_k = k;
    } else if (k - anchor_k >= opt.window) {
      stalled = true;
    }
    price = std::max(0.0, price - opt.schedule.step(k) * d.subgradient());
    if (stalled || (opt.refine && (k + 1) % opt.window == 0 && (bracketed = bracket(true)))) {
      ++k;
      break;
    }
  }
  out.state.k = k;
  out.state.price = price;
  if (opt.refine && !bracketed) bracketed = bracket(true);
  if (!bracketed) lo.reset(), hi.reset();

  out.price = best->price;
  out.dual = best->value;
  out.policies = best->policies;
  out.total_power = best->total_power();
  out.primal_cost = best->total_cost();
  out.report.deterministic_violation = best->total_power() - budget;
  if (bracketed) {
    // Run hi's bundle (fits the budget) and spend the slack on lo's.
    const double e_lo = lo->total_power();
    const double e_hi = hi->total_power();
    const double theta = std::clamp((budget - e_hi) / (e_lo - e_hi), 0.0, 1.0);
    out.policies = hi->policies;
    out.alternate = lo->policies;
    out.mixing = 1.0 - theta;
    out.total_power = theta * e_lo + (1.0 - theta) * e_hi;
    out.primal_cost = theta * lo->total_cost() + (1.0 - theta) * hi->total_cost();
  }
  out.report.iterations = k;
  out.report.violation = out.total_power - budget;
  out.report.complementary_slackness = out.price * out.report.violation;
  out.report.converged = (stalled || bracketed) && out.report.violation <= feas_tol;
  return out;
}

/// Iteration log: k, lambda, D(lambda), subgradient, total power, feasible.
inline void write_price_history_csv(std::ostream& os, const PriceState& state) {
  os << "k,price,dual,subgradient,total_power,feasible\n";
  os.precision(17);
  for (const auto& it : state.history) {
    os << it.k << ',' << it.price << ',' << it.dual << ',' << it.subgradient << ',' << it.total_power << ','
       << (it.feasible ? 1 : 0) << '\n';
  }
}

}  // namespace das
