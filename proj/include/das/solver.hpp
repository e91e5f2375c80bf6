#pragma once

// Exact solvers: finite-horizon backward induction, discounted value
// iteration and average-cost relative value iteration.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "das/core.hpp"
#include "das/tabular.hpp"

namespace das {

enum class Objective { discounted, average };

struct SolverOptions {
  double tol = 1e-9;
  std::size_t max_iterations = 1'000'000;
  /// Actions within this (relative) distance of the minimum count as tied.
  double tie_tolerance = 1e-11;
  /// Self-loop weight used by RVI to break periodicity: P' = tau P + (1 - tau) I.
  double aperiodicity = 0.5;
  bool record_residuals = false;
};

/// Value function (discounted) or gain and bias with h(0) = 0 (average
/// cost), plus the greedy policy as action indices per state.
struct SolveResult {
  Objective objective = Objective::discounted;
  std::vector<double> value;
  double gain = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> policy;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
};

/// Action per state of one client. The state space is {0..B} x {channel}.
class PolicyTable {
 public:
  PolicyTable() = default;
  PolicyTable(const ClientModel& model, int channels, const std::vector<std::size_t>& indices)
      : levels_(model.levels()), channels_(channels), qualities_(model.qualities()) {
    if (indices.size() != static_cast<std::size_t>(levels_ * channels_)) {
      throw ModelError("policy size does not match the state space");
    }
    actions_.reserve(indices.size());
    for (auto a : indices) {
      if (a >= static_cast<std::size_t>(model.num_actions())) throw ModelError("policy action out of range");
      actions_.push_back(model.action_at(static_cast<int>(a)));
    }
  }

  /// Same action in every state.
  static PolicyTable constant(const ClientModel& model, const Action& u, int channels = 1) {
    model.check_action(u);
    return PolicyTable(model, channels,
                       std::vector<std::size_t>(static_cast<std::size_t>(model.levels() * channels),
                                                static_cast<std::size_t>(model.action_index(u))));
  }

  int levels() const { return levels_; }
  int channels() const { return channels_; }
  const Action& at(int level, int channel = 0) const {
    return actions_[static_cast<std::size_t>(channel * levels_ + level)];
  }
  Action& at(int level, int channel = 0) { return actions_[static_cast<std::size_t>(channel * levels_ + level)]; }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    out.reserve(actions_.size());
    for (const auto& u : actions_) out.push_back(static_cast<std::size_t>(u.power * qualities_ + u.quality));
    return out;
  }

  friend bool operator==(const PolicyTable&, const PolicyTable&) = default;

 private:
  int levels_ = 0;
  int channels_ = 1;
  int qualities_ = 1;
  std::vector<Action> actions_;
};

namespace detail {

inline void check_discount(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ModelError("discount factor must lie in (0,1)");
}

inline void check_price(double price) {
  if (!(price >= 0.0) || !std::isfinite(price)) throw ModelError("price must be finite and nonnegative");
}

/// First allowed action (lowest index) within the tie tolerance of the
/// minimum of `q(s, a)`.
template <typename QFn>
std::size_t greedy_action(const TabularMdp& mdp, std::size_t s, double tie_tol, QFn&& q,
                          double* best_value = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  thread_local std::vector<double> scratch;
  scratch.assign(mdp.num_actions(), std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
    if (!mdp.allowed(s, a)) continue;
    scratch[a] = q(s, a);
    best = std::min(best, scratch[a]);
  }
  if (!std::isfinite(best)) throw ModelError("state has no allowed action");
  const double slack = tie_tol * (1.0 + std::abs(best));
  for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
    if (scratch[a] <= best + slack) {
      if (best_value) *best_value = best;
      return a;
    }
  }
  return 0;  // unreachable
}

inline double sup_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

}  // namespace detail

/// One Bellman backup for the discounted problem. Returns the greedy policy
/// through `policy` when non-null.
inline std::vector<double> bellman_backup(const TabularMdp& mdp, double price, double beta,
                                          const std::vector<double>& v, double tie_tol = 1e-11,
                                          std::vector<std::size_t>* policy = nullptr) {
  std::vector<double> out(mdp.num_states());
  if (policy) policy->assign(mdp.num_states(), 0);
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    double best = 0.0;
    const std::size_t a = detail::greedy_action(
        mdp, s, tie_tol,
        [&](std::size_t st, std::size_t ac) { return mdp.cost(st, ac, price) + beta * mdp.expected(st, ac, v); },
        &best);
    out[s] = best;
    if (policy) (*policy)[s] = a;
  }
  return out;
}

/// Discounted value iteration from V = 0. Stops once the sup-norm change is
/// at most tol (1 - beta) / (2 beta), which makes the greedy policy's value
/// tol-accurate.
inline SolveResult discounted_value_iteration(const TabularMdp& mdp, double price, double beta,
                                              const SolverOptions& opt = {}) {
  detail::check_discount(beta);
  detail::check_price(price);
  if (!(opt.tol > 0.0)) throw ModelError("tolerance must be positive");
  const double stop = opt.tol * (1.0 - beta) / (2.0 * beta);
  SolveResult r;
  r.objective = Objective::discounted;
  std::vector<double> v(mdp.num_states(), 0.0);
  for (std::size_t k = 1; k <= opt.max_iterations; ++k) {
    auto next = bellman_backup(mdp, price, beta, v, opt.tie_tolerance);
    const double res = detail::sup_norm_diff(next, v);
    v.swap(next);
    if (opt.record_residuals) r.residual_history.push_back(res);
    if (res <= stop) {
      r.iterations = k;
      r.residual = res;
      bellman_backup(mdp, price, beta, v, opt.tie_tolerance, &r.policy);
      r.value = std::move(v);
      return r;
    }
  }
  throw ConvergenceError("discounted value iteration exceeded " + std::to_string(opt.max_iterations) +
                         " sweeps");
}

/// Relative value iteration with reference state 0 and span stopping rule.
/// The returned bias satisfies gain + h = min_a [c + P h] with h(0) = 0.
inline SolveResult average_cost_solve(const TabularMdp& mdp, double price, const SolverOptions& opt = {},
                                      const std::vector<double>* warm_start = nullptr) {
  detail::check_price(price);
  if (!(opt.tol > 0.0)) throw ModelError("tolerance must be positive");
  const double tau = opt.aperiodicity;
  if (!(tau > 0.0 && tau <= 1.0)) throw ModelError("aperiodicity weight must lie in (0,1]");
  const std::size_t n = mdp.num_states();
  SolveResult r;
  r.objective = Objective::average;
  // Iterate on h / tau, the bias of the transformed chain.
  std::vector<double> h(n, 0.0), w(n);
  if (warm_start && warm_start->size() == n) {
    for (std::size_t s = 0; s < n; ++s) h[s] = ((*warm_start)[s] - (*warm_start)[0]) / tau;
  }
  for (std::size_t k = 1; k <= opt.max_iterations; ++k) {
    for (std::size_t s = 0; s < n; ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
        if (!mdp.allowed(s, a)) continue;
        best = std::min(best, mdp.cost(s, a, price) + tau * mdp.expected(s, a, h));
      }
      w[s] = best + (1.0 - tau) * h[s];
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t s = 0; s < n; ++s) {
      lo = std::min(lo, w[s] - h[s]);
      hi = std::max(hi, w[s] - h[s]);
    }
    const double span = hi - lo;
    const double ref = w[0];
    for (std::size_t s = 0; s < n; ++s) h[s] = w[s] - ref;
    if (opt.record_residuals) r.residual_history.push_back(span);
    if (span <= opt.tol) {
      r.iterations = k;
      r.residual = span;
      r.gain = 0.5 * (lo + hi);
      r.value.resize(n);
      for (std::size_t s = 0; s < n; ++s) r.value[s] = tau * h[s];
      r.policy.resize(n);
      for (std::size_t s = 0; s < n; ++s) {
        r.policy[s] = detail::greedy_action(mdp, s, opt.tie_tolerance, [&](std::size_t st, std::size_t ac) {
          return mdp.cost(st, ac, price) + mdp.expected(st, ac, r.value);
        });
      }
      return r;
    }
  }
  throw ConvergenceError("relative value iteration exceeded " + std::to_string(opt.max_iterations) + " sweeps");
}

inline SolveResult discounted_value_iteration(const ClientModel& model, double price, double beta,
                                              const SolverOptions& opt = {}) {
  return discounted_value_iteration(build_client_mdp(model), price, beta, opt);
}

inline SolveResult average_cost_solve(const ClientModel& model, double price, const SolverOptions& opt = {}) {
  return average_cost_solve(build_client_mdp(model), price, opt);
}

/// Howard policy iteration for the average-cost problem. Each evaluation
/// solves gain + h = c + P h with h(0) = 0, which requires every policy met
/// along the way to be unichain; a singular evaluation throws
/// ConvergenceError. Exact where RVI converges slowly (near prices at which
/// optimal policies with different recurrent classes tie).
inline SolveResult average_cost_policy_iteration(const TabularMdp& mdp, double price, const SolverOptions& opt = {},
                                                 std::vector<std::size_t> policy = {}) {
  detail::check_price(price);
  const std::size_t n = mdp.num_states();
  if (policy.size() != n) {
    policy.assign(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
      policy[s] = detail::greedy_action(mdp, s, 0.0, [&](std::size_t st, std::size_t a) { return mdp.cost(st, a, price); });
    }
  }
  const auto dim = static_cast<Eigen::Index>(n);
  SolveResult r;
  r.objective = Objective::average;
  std::vector<double> h(n, 0.0);
  for (std::size_t it = 1; it <= std::min<std::size_t>(opt.max_iterations, 10'000); ++it) {
    // Unknowns: h(1..n-1) in columns 0..n-2, gain in column n-1.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd c(dim);
    for (std::size_t s = 0; s < n; ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      if (s > 0) a(row, row - 1) += 1.0;
      a(row, dim - 1) = 1.0;
      for (const auto& t : mdp.next(s, policy[s])) {
        if (t.next > 0) a(row, static_cast<Eigen::Index>(t.next) - 1) -= t.prob;
      }
      c(row) = mdp.cost(s, policy[s], price);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-13);
    if (lu.rank() < dim) throw ConvergenceError("policy iteration met a multichain policy");
    const Eigen::VectorXd z = lu.solve(c);
    for (std::size_t s = 1; s < n; ++s) h[s] = z(static_cast<Eigen::Index>(s) - 1);
    r.gain = z(dim - 1);
    bool changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      const double cur = mdp.cost(s, policy[s], price) + mdp.expected(s, policy[s], h);
      double best = cur;
      std::size_t arg = policy[s];
      for (std::size_t a2 = 0; a2 < mdp.num_actions(); ++a2) {
        if (!mdp.allowed(s, a2)) continue;
        const double q = mdp.cost(s, a2, price) + mdp.expected(s, a2, h);
        if (q < best - 1e-12 * (1.0 + std::abs(best))) {
          best = q;
          arg = a2;
        }
      }
      if (arg != policy[s]) {
        policy[s] = arg;
        changed = true;
      }
    }
    if (!changed) {
      r.iterations = it;
      r.value = h;
      r.policy.resize(n);
      for (std::size_t s = 0; s < n; ++s) {
        r.policy[s] = detail::greedy_action(mdp, s, opt.tie_tolerance, [&](std::size_t st, std::size_t ac) {
          return mdp.cost(st, ac, price) + mdp.expected(st, ac, h);
        });
      }
      return r;
    }
  }
  throw ConvergenceError("policy iteration did not terminate");
}

/// RVI with a bounded sweep budget, falling back to policy iteration and
/// finally to RVI with the full budget.
inline SolveResult solve_average(const TabularMdp& mdp, double price, const SolverOptions& opt = {},
                                 const std::vector<double>* warm_start = nullptr) {
  SolverOptions quick = opt;
  quick.max_iterations = std::min<std::size_t>(opt.max_iterations, 20'000);
  try {
    return average_cost_solve(mdp, price, quick, warm_start);
  } catch (const ConvergenceError&) {
  }
  try {
    return average_cost_policy_iteration(mdp, price, opt);
  } catch (const ConvergenceError&) {
  }
  return average_cost_solve(mdp, price, opt, warm_start);
}

/// D_s(x) on x = 1..B-T+1; `values[x - 1]` holds D_s(x).
struct DFunction {
  int stage = 0;
  double beta = 0.0;
  std::vector<double> values;

  double at(int x) const { return values[static_cast<std::size_t>(x - 1)]; }
};

/// Finite-horizon backward induction V^s from V^0 = 0, one stage per call
/// to advance(). Also exposes the stage's D function.
class StageRecursion {
 public:
  StageRecursion(const ClientModel& model, double price, double beta, double tie_tol = 1e-11)
      : model_(model), mdp_(build_client_mdp(model)), price_(price), beta_(beta), tie_tol_(tie_tol),
        value_(static_cast<std::size_t>(model.levels()), 0.0) {
    detail::check_discount(beta);
    detail::check_price(price);
  }

  int stage() const { return stage_; }
  const std::vector<double>& value() const { return value_; }
  const std::vector<std::size_t>& policy() const { return policy_; }
  const TabularMdp& mdp() const { return mdp_; }

  /// D function of the next stage, computed from the current value.
  DFunction next_d_function() const {
    DFunction d;
    d.stage = stage_ + 1;
    d.beta = beta_;
    const int top = model_.last_fill_level();
    d.values.reserve(static_cast<std::size_t>(top));
    for (int x = 1; x <= top; ++x) {
      const double vf = value_[static_cast<std::size_t>(successor_failure(x, model_))];
      const double vs = value_[static_cast<std::size_t>(successor_success(x, model_))];
      d.values.push_back((x == 1 ? model_.outage_period_weight : 0.0) + beta_ * (vf - vs));
    }
    return d;
  }

  /// Advances one stage; returns the sup-norm change.
  double advance() {
    auto next = bellman_backup(mdp_, price_, beta_, value_, tie_tol_, &policy_);
    const double res = detail::sup_norm_diff(next, value_);
    value_.swap(next);
    ++stage_;
    return res;
  }

 private:
  ClientModel model_;
  TabularMdp mdp_;
  double price_;
  double beta_;
  double tie_tol_;
  int stage_ = 0;
  std::vector<double> value_;
  std::vector<std::size_t> policy_;
};

struct BackwardInductionResult {
  /// values[t] is V^t for t = 0..horizon.
  std::vector<std::vector<double>> values;
  /// d_functions[t - 1] is D_t for t = 1..horizon.
  std::vector<DFunction> d_functions;
  /// policies[t - 1] is the greedy stage-t policy.
  std::vector<std::vector<std::size_t>> policies;
};

inline BackwardInductionResult backward_induction(const ClientModel& model, double price, double beta,
                                                  int horizon) {
  detail::check_discount(beta);
  if (horizon < 1) throw ModelError("horizon must be >= 1");
  StageRecursion rec(model, price, beta);
  BackwardInductionResult out;
  out.values.push_back(rec.value());
  for (int t = 1; t <= horizon; ++t) {
    out.d_functions.push_back(rec.next_d_function());
    rec.advance();
    out.values.push_back(rec.value());
    out.policies.push_back(rec.policy());
  }
  return out;
}

}  // namespace das
