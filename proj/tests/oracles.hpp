#pragma once

// Test-only reference computations, written directly from the model
// definition and independent of the library's tabular/solver code paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "das/core.hpp"

namespace das::testing {

inline int ref_success_level(int x, int b, int t) { return x <= b - t + 1 ? std::max(x - 1, 0) + t : x - 1; }
inline int ref_failure_level(int x) { return std::max(x - 1, 0); }

/// V^s(x) by memoized recursion over the finite-horizon Bellman operator.
class RecursiveStageValue {
 public:
  RecursiveStageValue(const ClientModel& m, double price, double beta) : m_(m), price_(price), beta_(beta) {}

  double operator()(int s, int x) {
    if (s == 0) return 0.0;
    const auto key = std::make_pair(s, x);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const int b = m_.buffer_capacity;
    const int t = m_.playtime_per_packet;
    double best = std::numeric_limits<double>::infinity();
    for (int q = 0; q < m_.qualities(); ++q) {
      for (int e = 0; e < m_.powers(); ++e) {
        const double p = m_.success_prob(q, e);
        const double win = m_.quality_disutilities[static_cast<std::size_t>(q)] +
                           beta_ * (*this)(s - 1, ref_success_level(x, b, t));
        const double lose = (x == 1 ? m_.outage_period_weight : 0.0) + beta_ * (*this)(s - 1, ref_failure_level(x));
        const double v = (x == 0 ? 1.0 : 0.0) + price_ * m_.power_levels[static_cast<std::size_t>(e)] + p * win +
                         (1.0 - p) * lose;
        best = std::min(best, v);
      }
    }
    memo_[key] = best;
    return best;
  }

 private:
  ClientModel m_;
  double price_;
  double beta_;
  std::map<std::pair<int, int>, double> memo_;
};

/// Power-iteration estimate of the stationary law of a row-stochastic
/// matrix (Cesaro average over many steps, so periodic chains work too).
inline std::vector<double> cesaro_average(const std::vector<std::vector<double>>& p, std::size_t start,
                                          int steps) {
  const std::size_t n = p.size();
  std::vector<double> d(n, 0.0), acc(n, 0.0), nd(n);
  d[start] = 1.0;
  for (int k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += d[i];
    std::fill(nd.begin(), nd.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) nd[j] += d[i] * p[i][j];
    }
    d.swap(nd);
  }
  for (double& a : acc) a /= steps;
  return acc;
}

}  // namespace das::testing
