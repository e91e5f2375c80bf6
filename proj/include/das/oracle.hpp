#pragma once

// Brute-force reference solutions for small instances: exhaustive policy
// enumeration, the joint product MDP, and the constrained optimum over
// pairs of client policies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "das/core.hpp"
#include "das/evaluation.hpp"
#include "das/solver.hpp"
#include "das/tabular.hpp"

namespace das {

inline constexpr double kMaxEnumeratedPolicies = 1e7;

/// Calls `fn(policy)` for every deterministic stationary policy using only
/// allowed actions.
template <typename Fn>
void for_each_policy(const TabularMdp& mdp, Fn&& fn) {
  const std::size_t n = mdp.num_states();
  std::vector<std::vector<std::size_t>> choices(n);
  double count = 1.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      if (mdp.allowed(s, a)) choices[s].push_back(a);
    }
    if (choices[s].empty()) throw ModelError("state has no allowed action");
    count *= static_cast<double>(choices[s].size());
  }
  if (count > kMaxEnumeratedPolicies) {
    throw ModelError("instance too large to enumerate (" + std::to_string(count) + " policies)");
  }
  std::vector<std::size_t> digit(n, 0), policy(n);
  for (std::size_t s = 0; s < n; ++s) policy[s] = choices[s][0];
  while (true) {
    fn(static_cast<const std::vector<std::size_t>&>(policy));
    std::size_t s = 0;
    while (s < n && ++digit[s] == choices[s].size()) {
      digit[s] = 0;
      policy[s] = choices[s][0];
      ++s;
    }
    if (s == n) break;
    policy[s] = choices[s][digit[s]];
  }
}

struct OracleResult {
  /// Discounted: optimal value per state. Average: single entry, the
  /// optimal long-run average cost from the initial state.
  std::vector<double> values;
  std::vector<std::size_t> policy;
  std::size_t policies_evaluated = 0;
};

/// Exact optimum over deterministic stationary policies, each evaluated by
/// a linear solve. Average-cost policies are evaluated from `initial`.
inline OracleResult enumerate_policies_oracle(const TabularMdp& mdp, double price, Objective objective,
                                              double beta = 0.0, std::size_t initial = 0) {
  OracleResult out;
  double best_total = std::numeric_limits<double>::infinity();
  if (objective == Objective::discounted) {
    detail::check_discount(beta);
    out.values.assign(mdp.num_states(), std::numeric_limits<double>::infinity());
    for_each_policy(mdp, [&](const std::vector<std::size_t>& pol) {
      const auto v = evaluate_discounted(mdp, pol, price, beta);
      double total = 0.0;
      for (std::size_t s = 0; s < v.size(); ++s) {
        out.values[s] = std::min(out.values[s], v[s]);
        total += v[s];
      }
      if (total < best_total) {
        best_total = total;
        out.policy = pol;
      }
      ++out.policies_evaluated;
    });
  } else {
    out.values.assign(1, std::numeric_limits<double>::infinity());
    for_each_policy(mdp, [&](const std::vector<std::size_t>& pol) {
      const double g = evaluate_policy(mdp, pol, initial).lagrangian(price);
      if (g < out.values[0]) {
        out.values[0] = g;
        out.policy = pol;
      }
      ++out.policies_evaluated;
    });
  }
  return out;
}

inline OracleResult enumerate_policies_oracle(const ClientModel& model, double price, Objective objective,
                                              double beta = 0.0) {
  return enumerate_policies_oracle(build_client_mdp(model), price, objective, beta,
                                   static_cast<std::size_t>(model.buffer_capacity));
}

/// Joint Lagrangian-relaxed problem on the product chain of the clients.
/// `max_transmitting` restricts the joint action set (M orthogonal
/// channels).
inline SolveResult product_mdp_solve(const std::vector<ClientModel>& models, double price,
                                     Objective objective = Objective::average, double beta = 0.99,
                                     const SolverOptions& opt = {},
                                     std::optional<std::size_t> max_transmitting = {}) {
  std::vector<TabularMdp> parts;
  parts.reserve(models.size());
  for (const auto& m : models) parts.push_back(build_client_mdp(m));
  const auto joint = build_product_mdp(parts, max_transmitting);
  if (objective == Objective::discounted) return discounted_value_iteration(joint, price, beta, opt);
  return average_cost_solve(joint, price, opt);
}

/// Long-run (average power, QoE cost) of one deterministic policy.
struct OperatingPoint {
  double power = 0.0;
  double cost = 0.0;
};

/// Operating points of every deterministic policy of one client, started
/// from a full buffer; duplicates removed.
inline std::vector<OperatingPoint> operating_points(const ClientModel& model) {
  const auto mdp = build_client_mdp(model);
  std::vector<OperatingPoint> pts;
  for_each_policy(mdp, [&](const std::vector<std::size_t>& pol) {
    const auto st = evaluate_policy(mdp, pol, static_cast<std::size_t>(model.buffer_capacity));
    pts.push_back({st.average_power, st.average_cost});
  });
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.power < b.power || (a.power == b.power && a.cost < b.cost);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) {
                          return std::abs(a.power - b.power) < 1e-13 && std::abs(a.cost - b.cost) < 1e-13;
                        }),
            pts.end());
  return pts;
}

struct ConstrainedOptimum {
  /// Best deterministic policy tuple meeting the budget.
  double deterministic = std::numeric_limits<double>::infinity();
  /// Optimum when time-sharing between policy tuples is allowed: the lower
  /// convex envelope of the joint operating points at the budget.
  double randomized = std::numeric_limits<double>::infinity();
};

/// Constrained optimum min sum_n C_n s.t. sum_n E_n <= budget by brute force
/// over tuples of per-client deterministic policies.
inline ConstrainedOptimum constrained_bruteforce(const std::vector<ClientModel>& models, double budget) {
  std::vector<OperatingPoint> joint{{0.0, 0.0}};
  for (const auto& m : models) {
    const auto pts = operating_points(m);
    if (static_cast<double>(joint.size()) * static_cast<double>(pts.size()) > 2e7) {
      throw ModelError("constrained brute force too large");
    }
    std::vector<OperatingPoint> next;
    next.reserve(joint.size() * pts.size());
    for (const auto& a : joint) {
      for (const auto& b : pts) next.push_back({a.power + b.power, a.cost + b.cost});
    }
    joint.swap(next);
  }
  ConstrainedOptimum out;
  for (const auto& p : joint) {
    if (p.power <= budget + 1e-12) out.deterministic = std::min(out.deterministic, p.cost);
  }
  std::sort(joint.begin(), joint.end(), [](const auto& a, const auto& b) {
    return a.power < b.power || (a.power == b.power && a.cost < b.cost);
  });
  // Lower convex hull (monotone chain).
  std::vector<OperatingPoint> hull;
  for (const auto& p : joint) {
    while (hull.size() >= 2) {
      const auto& o = hull[hull.size() - 2];
      const auto& a = hull.back();
      const double cross = (a.power - o.power) * (p.cost - o.cost) - (a.cost - o.cost) * (p.power - o.power);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    if (!hull.empty() && hull.back().power == p.power) continue;
    hull.push_back(p);
  }
  // The envelope is convex; its minimum over power <= budget sits at
  // min(budget, argmin).
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < hull.size(); ++i) {
    if (hull[i].cost < hull[argmin].cost) argmin = i;
  }
  const double x = std::min(budget, hull[argmin].power);
  if (x < hull.front().power) return out;  // infeasible
  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    if (x >= hull[i].power && x <= hull[i + 1].power) {
      const double t = (x - hull[i].power) / (hull[i + 1].power - hull[i].power);
      out.randomized = hull[i].cost + t * (hull[i + 1].cost - hull[i].cost);
      return out;
    }
  }
  out.randomized = hull[argmin].cost;
  return out;
}

}  // namespace das
