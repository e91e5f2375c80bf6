#pragma once

// Structural verifiers for threshold policies and monotone D functions.

#include <optional>
#include <string>
#include <vector>

#include "das/core.hpp"
#include "das/solver.hpp"

namespace das {

inline constexpr double kStructureSlack = 1e-9;

enum class ThresholdClause { quality, power, success_probability };

inline const char* to_string(ThresholdClause c) {
  switch (c) {
    case ThresholdClause::quality: return "quality";
    case ThresholdClause::power: return "power";
    case ThresholdClause::success_probability: return "success_probability";
  }
  return "?";
}

struct ThresholdViolation {
  ThresholdClause clause;
  int channel = 0;
  int higher = 0;  // x, the larger buffer level
  int lower = 0;   // y < x
};

struct ThresholdReport {
  bool pass = true;
  std::vector<ThresholdViolation> violations;
};

/// Checks the threshold definition on levels 1..B-T+1 (per channel state):
/// if (q, E) is used at x, no (q' < q, E) and no (q, E' < E) is used at any
/// 1 <= y < x. Also checks that the success probability is nonincreasing in
/// the buffer level.
inline ThresholdReport verify_threshold(const PolicyTable& policy, const ClientModel& model,
                                        const ChannelModel* channel = nullptr) {
  ThresholdReport rep;
  const int top = model.last_fill_level();
  for (int c = 0; c < policy.channels(); ++c) {
    const SuccessTable& p =
        channel ? channel->per_state_success[static_cast<std::size_t>(c)] : model.success_prob;
    for (int x = 2; x <= top; ++x) {
      const Action& ux = policy.at(x, c);
      for (int y = 1; y < x; ++y) {
        const Action& uy = policy.at(y, c);
        if (uy.power == ux.power && uy.quality < ux.quality) {
          rep.violations.push_back({ThresholdClause::quality, c, x, y});
        }
        if (uy.quality == ux.quality && uy.power < ux.power) {
          rep.violations.push_back({ThresholdClause::power, c, x, y});
        }
        if (p(ux.quality, ux.power) > p(uy.quality, uy.power) + kStructureSlack) {
          rep.violations.push_back({ThresholdClause::success_probability, c, x, y});
        }
      }
    }
  }
  rep.pass = rep.violations.empty();
  return rep;
}

struct MonotoneReport {
  bool pass = true;
  std::optional<int> first_violation;  // x with D(x) < D(x + 1) - slack
};

inline MonotoneReport verify_D_monotone(const DFunction& d, double slack = kStructureSlack) {
  MonotoneReport rep;
  for (std::size_t i = 0; i + 1 < d.values.size(); ++i) {
    if (d.values[i] < d.values[i + 1] - slack) {
      rep.pass = false;
      rep.first_violation = static_cast<int>(i) + 1;
      break;
    }
  }
  return rep;
}

}  // namespace das
