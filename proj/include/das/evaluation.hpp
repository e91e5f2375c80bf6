#pragma once

// Exact evaluation of a fixed stationary policy: long-run occupation measure
// from a given initial state and discounted values, both by direct linear
// solves.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "das/core.hpp"
#include "das/solver.hpp"
#include "das/tabular.hpp"

namespace das {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Long-run averages of a policy, all taken against `distribution`.
struct PolicyStats {
  std::vector<double> distribution;
  double average_cost = 0.0;  // QoE cost, excluding the power charge
  double average_power = 0.0;
  double outage_fraction = 0.0;
  double outage_period_rate = 0.0;
  double outage_period_penalty = 0.0;
  double average_quality = 0.0;

  double lagrangian(double price) const { return average_cost + price * average_power; }
};

namespace detail {

inline std::vector<std::vector<std::size_t>> policy_graph(const TabularMdp& mdp,
                                                          const std::vector<std::size_t>& policy) {
  std::vector<std::vector<std::size_t>> adj(mdp.num_states());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    for (const auto& t : mdp.next(s, policy[s])) {
      if (t.prob > 0.0) adj[s].push_back(t.next);
    }
  }
  return adj;
}

// Iterative Tarjan; returns component id per vertex (-1 when not in `keep`).
inline std::vector<int> strongly_connected(const std::vector<std::vector<std::size_t>>& adj,
                                           const std::vector<char>& keep, int& count) {
  const std::size_t n = adj.size();
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;
  int next_index = 0;
  count = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (!keep[root] || index[root] >= 0) continue;
    call.push_back({root, 0});
    while (!call.empty()) {
      auto& [v, edge] = call.back();
      if (edge == 0 && index[v] < 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      if (edge < adj[v].size()) {
        const std::size_t w = adj[v][edge++];
        if (!keep[w]) continue;
        if (index[w] < 0) {
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = count;
        } while (w != v);
        ++count;
      }
      const std::size_t done = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
    }
  }
  return comp;
}

}  // namespace detail

/// Cesaro-limit occupation measure of the chain induced by `policy`,
/// started in `initial`. With a single recurrent class reachable from
/// `initial` this is that class's stationary distribution; otherwise the
/// class distributions are weighted by their absorption probabilities.
inline std::vector<double> limiting_distribution(const TabularMdp& mdp, const std::vector<std::size_t>& policy,
                                                 std::size_t initial) {
  const std::size_t n = mdp.num_states();
  if (policy.size() != n) throw ModelError("policy size does not match the state space");
  if (initial >= n) throw ModelError("initial state out of range");
  const auto adj = detail::policy_graph(mdp, policy);

  std::vector<char> reach(n, 0);
  std::vector<std::size_t> frontier{initial};
  reach[initial] = 1;
  while (!frontier.empty()) {
    const std::size_t v = frontier.back();
    frontier.pop_back();
    for (auto w : adj[v]) {
      if (!reach[w]) {
        reach[w] = 1;
        frontier.push_back(w);
      }
    }
  }

  int ncomp = 0;
  const auto comp = detail::strongly_connected(adj, reach, ncomp);
  std::vector<char> closed(static_cast<std::size_t>(ncomp), 1);
  for (std::size_t v = 0; v < n; ++v) {
    if (!reach[v]) continue;
    for (auto w : adj[v]) {
      if (comp[w] != comp[v]) closed[static_cast<std::size_t>(comp[v])] = 0;
    }
  }

  std::vector<double> dist(n, 0.0);
  std::vector<double> weight(static_cast<std::size_t>(ncomp), 0.0);
  if (closed[static_cast<std::size_t>(comp[initial])]) {
    weight[static_cast<std::size_t>(comp[initial])] = 1.0;
  } else {
    // Absorption probabilities from the transient part into each closed class.
    std::vector<std::size_t> transient;
    std::vector<long> pos(n, -1);
    for (std::size_t v = 0; v < n; ++v) {
      if (reach[v] && !closed[static_cast<std::size_t>(comp[v])]) {
        pos[v] = static_cast<long>(transient.size());
        transient.push_back(v);
      }
    }
    const auto m = static_cast<Eigen::Index>(transient.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, ncomp);
    for (Eigen::Index i = 0; i < m; ++i) {
      const std::size_t v = transient[static_cast<std::size_t>(i)];
      for (const auto& t : mdp.next(v, policy[v])) {
        if (t.prob <= 0.0) continue;
        if (pos[t.next] >= 0) {
          a(i, pos[t.next]) -= t.prob;
        } else {
          b(i, comp[t.next]) += t.prob;
        }
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) throw EvaluationError("transient block is singular; chain has no absorbing class");
    const Eigen::MatrixXd x = lu.solve(b);
    const Eigen::Index row = pos[initial];
    for (int k = 0; k < ncomp; ++k) {
      if (closed[static_cast<std::size_t>(k)]) weight[static_cast<std::size_t>(k)] = std::max(0.0, x(row, k));
    }
  }

  for (int k = 0; k < ncomp; ++k) {
    const double wk = weight[static_cast<std::size_t>(k)];
    if (wk <= 0.0) continue;
    std::vector<std::size_t> members;
    std::vector<long> pos(n, -1);
    for (std::size_t v = 0; v < n; ++v) {
      if (reach[v] && comp[v] == k) {
        pos[v] = static_cast<long>(members.size());
        members.push_back(v);
      }
    }
    const auto m = static_cast<Eigen::Index>(members.size());
    // pi (P - I) = 0 with one balance equation replaced by sum(pi) = 1.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const std::size_t v = members[static_cast<std::size_t>(i)];
      a(i, i) -= 1.0;
      for (const auto& t : mdp.next(v, policy[v])) a(pos[t.next], i) += t.prob;
    }
    a.row(m - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs(m - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) {
      throw EvaluationError("stationary equations singular for recurrent class of size " + std::to_string(m));
    }
    const Eigen::VectorXd pi = lu.solve(rhs);
    for (Eigen::Index i = 0; i < m; ++i) {
      dist[members[static_cast<std::size_t>(i)]] += wk * std::max(0.0, pi(i));
    }
  }
  double total = 0.0;
  for (double d : dist) total += d;
  if (!(total > 0.0)) throw EvaluationError("degenerate limiting distribution");
  for (double& d : dist) d /= total;
  return dist;
}

inline PolicyStats evaluate_policy(const TabularMdp& mdp, const std::vector<std::size_t>& policy,
                                   std::size_t initial) {
  PolicyStats st;
  st.distribution = limiting_distribution(mdp, policy, initial);
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    const double w = st.distribution[s];
    if (w == 0.0) continue;
    const auto& t = mdp.terms(s, policy[s]);
    st.outage_fraction += w * t.outage;
    st.average_quality += w * t.quality;
    st.outage_period_rate += w * t.period_start;
    st.outage_period_penalty += w * t.period;
    st.average_power += w * t.power;
  }
  st.average_cost = st.outage_fraction + st.average_quality + st.outage_period_penalty;
  return st;
}

/// Stats of one client started from a full buffer.
inline PolicyStats evaluate_policy(const ClientModel& model, const PolicyTable& policy) {
  return evaluate_policy(build_client_mdp(model), policy.indices(),
                         static_cast<std::size_t>(model.buffer_capacity));
}

inline PolicyStats evaluate_policy(const ClientModel& model, const ChannelModel& channel, const PolicyTable& policy,
                                   int initial_channel = 0) {
  return evaluate_policy(build_fading_mdp(model, channel), policy.indices(),
                         fading_state(model, model.buffer_capacity, initial_channel));
}

/// V = (I - beta P_pi)^{-1} c_pi.
inline std::vector<double> evaluate_discounted(const TabularMdp& mdp, const std::vector<std::size_t>& policy,
                                               double price, double beta) {
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd c(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto su = static_cast<std::size_t>(s);
    c(s) = mdp.cost(su, policy[su], price);
    for (const auto& t : mdp.next(su, policy[su])) a(s, static_cast<Eigen::Index>(t.next)) -= beta * t.prob;
  }
  const Eigen::VectorXd v = a.partialPivLu().solve(c);
  return {v.data(), v.data() + n};
}

}  // namespace das
