#pragma once

// Seed derivation and random valid models for property tests, the
// acceptance suite and `das-index verify`.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "das/core.hpp"

namespace das {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream `stream` of a run seeded with `seed`. Streams are
/// keyed by a counter so adding a stream never shifts the others.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct ModelRanges {
  int buffer_min = 4, buffer_max = 20;
  int quality_min = 1, quality_max = 3;
  int power_min = 1, power_max = 3;
  int max_actions = 1 << 20;
  double outage_weight_max = 3.0;
};

/// Instances small enough for exhaustive policy enumeration.
inline ModelRanges tiny_ranges() {
  ModelRanges r;
  r.buffer_min = 2;
  r.buffer_max = 4;
  r.quality_max = 2;
  r.max_actions = 4;
  return r;
}

/// Success table with P(q, 0) = 0, nondecreasing in q and in power.
inline SuccessTable random_success_table(Rng& rng, int qualities, int powers) {
  SuccessTable p(qualities, powers, std::vector<double>(static_cast<std::size_t>(qualities * powers), 0.0));
  for (int q = 0; q < qualities; ++q) {
    for (int m = 1; m < powers; ++m) {
      double v = uniform(rng, 0.05, 0.95);
      if (q > 0) v = std::max(v, p(q - 1, m));
      v = std::max(v, p(q, m - 1));
      p(q, m) = v;
    }
  }
  return p;
}

inline ClientModel random_client_model(Rng& rng, const ModelRanges& r = {}) {
  ClientModel m;
  m.buffer_capacity = uniform_int(rng, r.buffer_min, r.buffer_max);
  m.playtime_per_packet = uniform_int(rng, 1, m.buffer_capacity);
  int q = 0, e = 0;
  do {
    q = uniform_int(rng, r.quality_min, r.quality_max);
    e = uniform_int(rng, r.power_min, r.power_max);
  } while (q * e > r.max_actions);
  m.quality_disutilities.assign(1, uniform(rng, 0.0, 0.5));
  for (int i = 1; i < q; ++i) m.quality_disutilities.push_back(m.quality_disutilities.back() + uniform(rng, 0.05, 1.0));
  m.power_levels.assign(1, 0.0);
  for (int i = 1; i < e; ++i) m.power_levels.push_back(m.power_levels.back() + uniform(rng, 0.2, 1.5));
  m.success_prob = random_success_table(rng, q, e);
  m.outage_period_weight = uniform(rng, 0.0, r.outage_weight_max);
  m.validate();
  return m;
}

/// Client with a single transmit option of unit power: actions are
/// {idle, transmit}, so a power price acts as a per-transmission charge.
inline ClientModel binary_client_model(int buffer, int playtime, double disutility, double success,
                                       double outage_weight) {
  ClientModel m;
  m.buffer_capacity = buffer;
  m.playtime_per_packet = playtime;
  m.quality_disutilities = {disutility};
  m.power_levels = {0.0, 1.0};
  m.success_prob = SuccessTable(1, 2, {0.0, success});
  m.outage_period_weight = outage_weight;
  m.validate();
  return m;
}

inline ClientModel random_binary_model(Rng& rng, int buffer_min = 2, int buffer_max = 12) {
  const int b = uniform_int(rng, buffer_min, buffer_max);
  return binary_client_model(b, uniform_int(rng, 1, b), uniform(rng, 0.0, 1.0), uniform(rng, 0.05, 0.95),
                             uniform(rng, 0.0, 3.0));
}

}  // namespace das
