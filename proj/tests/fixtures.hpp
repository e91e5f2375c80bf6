#pragma once

#include <vector>

#include "das/core.hpp"

namespace das::testing {

inline ClientModel make_model(int buffer, int playtime, std::vector<double> disutilities, std::vector<double> powers,
                              std::vector<double> success_row_major, double outage_weight) {
  ClientModel m;
  m.buffer_capacity = buffer;
  m.playtime_per_packet = playtime;
  const int q = static_cast<int>(disutilities.size());
  const int e = static_cast<int>(powers.size());
  m.quality_disutilities = std::move(disutilities);
  m.power_levels = std::move(powers);
  m.success_prob = SuccessTable(q, e, std::move(success_row_major));
  m.outage_period_weight = outage_weight;
  m.validate();
  return m;
}

/// One quality, powers {0, e}; the transmit action succeeds with `p`.
inline ClientModel single_action_model(int buffer, int playtime, double disutility, double e, double p,
                                       double outage_weight) {
  return make_model(buffer, playtime, {disutility}, {0.0, e}, {0.0, p}, outage_weight);
}

}  // namespace das::testing
