#pragma once

// Acceptance checks: structural, oracle, duality, indexability, simulation,
// learning and fading criteria on seeded random samples.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "das/core.hpp"
#include "das/evaluation.hpp"
#include "das/learning.hpp"
#include "das/oracle.hpp"
#include "das/pricing.hpp"
#include "das/random.hpp"
#include "das/simulator.hpp"
#include "das/solver.hpp"
#include "das/structure.hpp"
#include "das/whittle.hpp"

namespace das {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string summary;
  std::vector<std::string> info;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::uint64_t seed = 2024;
  /// Smaller samples and horizons, for smoke runs.
  bool quick = false;
  unsigned threads = 1;
};

namespace detail {

inline std::string strf(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

template <typename Fn>
CriterionResult timed(int id, std::string name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  fn(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline int scaled(int full, int quick, const AcceptanceOptions& opt) { return opt.quick ? quick : full; }

inline std::uint64_t scaled_steps(std::uint64_t full, const AcceptanceOptions& opt) {
  return opt.quick ? full / 10 : full;
}

/// The B = 4, two qualities, powers {0, 1} instance used by the learning
/// criteria (four actions).
inline ClientModel learning_instance() {
  ClientModel m;
  m.buffer_capacity = 4;
  m.playtime_per_packet = 2;
  m.quality_disutilities = {0.1, 0.5};
  m.power_levels = {0.0, 1.0};
  m.success_prob = SuccessTable(2, 2, {0.0, 0.5, 0.0, 0.8});
  m.outage_period_weight = 1.0;
  m.validate();
  return m;
}

}  // namespace detail

/// Criteria 1 and 2: threshold structure of the discounted optimum and
/// monotonicity of every stage's D function on the same sample.
inline std::vector<CriterionResult> check_structure(const AcceptanceOptions& opt) {
  const int models = detail::scaled(200, 20, opt);
  const double betas[] = {0.9, 0.99};
  const double prices[] = {0.0, 0.5, 2.0};
  int configs = 0, threshold_ok = 0, d_ok = 0, converged_ok = 0, small_weight = 0, small_weight_ok = 0;
  int first_at_one = 0;
  std::uint64_t stages = 0;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_stream(opt.seed, 101);
  for (int i = 0; i < models; ++i) {
    const auto m = random_client_model(rng);
    for (double beta : betas) {
      for (double price : prices) {
        ++configs;
        const auto vi = discounted_value_iteration(m, price, beta);
        threshold_ok += verify_threshold(PolicyTable(m, 1, vi.policy), m).pass;

        StageRecursion rec(m, price, beta);
        bool every = true;
        DFunction last;
        const double stop = 1e-9 * (1.0 - beta) / (2.0 * beta);
        while (true) {
          last = rec.next_d_function();
          const auto rep = verify_D_monotone(last);
          if (!rep.pass && every) {
            every = false;
            first_at_one += *rep.first_violation == 1;
          }
          ++stages;
          if (rec.advance() <= stop) break;
        }
        d_ok += every;
        converged_ok += verify_D_monotone(rec.next_d_function()).pass;
        if (m.outage_period_weight <= 1.0) {
          ++small_weight;
          small_weight_ok += every;
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CriterionResult c1{1, "threshold structure", threshold_ok == configs,
                     detail::strf("%d/%d greedy discounted policies are threshold policies (target 100%%)",
                                  threshold_ok, configs),
                     {},
                     secs};
  CriterionResult c2{2, "D-monotonicity", d_ok == configs,
                     detail::strf("%d/%d configurations monotone at every stage, slack 1e-9 (target 100%%)", d_ok,
                                  configs),
                     {},
                     0.0};
  c2.info.push_back(detail::strf("%llu stages checked; %d/%d failing configurations first break at x=1",
                                 static_cast<unsigned long long>(stages), first_at_one, configs - d_ok));
  c2.info.push_back(detail::strf("converged D monotone in %d/%d configurations", converged_ok, configs));
  c2.info.push_back(detail::strf("outage-period weight <= 1: %d/%d monotone at every stage", small_weight_ok,
                                 small_weight));
  return {c1, c2};
}

/// Criterion 3: solvers against exhaustive policy enumeration.
inline CriterionResult check_oracle(const AcceptanceOptions& opt) {
  return detail::timed(3, "oracle equivalence", [&](CriterionResult& r) {
    const int n = detail::scaled(50, 10, opt);
    Rng rng = make_stream(opt.seed, 103);
    int ok = 0;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto m = random_client_model(rng, tiny_ranges());
      const double price = uniform(rng, 0.0, 2.0);
      const double beta = i % 2 ? 0.99 : 0.9;
      const auto vi = discounted_value_iteration(m, price, beta);
      const auto disc = enumerate_policies_oracle(m, price, Objective::discounted, beta);
      double err = 0.0;
      for (std::size_t s = 0; s < vi.value.size(); ++s) err = std::max(err, std::abs(vi.value[s] - disc.values[s]));
      const auto avg = average_cost_solve(m, price);
      const auto ref = enumerate_policies_oracle(m, price, Objective::average);
      err = std::max(err, std::abs(avg.gain - ref.values[0]));
      worst = std::max(worst, err);
      ok += err <= 1e-6;
    }
    r.pass = ok == n;
    r.summary = detail::strf("%d/%d instances within 1e-6 (max abs error %.2e)", ok, n, worst);
  });
}

/// Criterion 4: D(lambda) against the joint product-MDP optimum.
inline CriterionResult check_decomposition(const AcceptanceOptions& opt) {
  return detail::timed(4, "dual decomposition", [&](CriterionResult& r) {
    const int n = detail::scaled(20, 4, opt);
    const double prices[] = {0.0, 0.25, 0.5, 1.0, 2.0};
    Rng rng = make_stream(opt.seed, 104);
    int ok = 0, total = 0;
    double worst = 0.0;
    PricingOptions po;
    po.threads = opt.threads;
    for (int i = 0; i < n; ++i) {
      const std::vector<ClientModel> models{random_client_model(rng, tiny_ranges()),
                                            random_client_model(rng, tiny_ranges())};
      for (double price : prices) {
        const double d = dual_value(models, price, 0.0, po).value;
        const double joint = product_mdp_solve(models, price).gain;
        const double err = std::abs(d - joint);
        worst = std::max(worst, err);
        ok += err <= 1e-6;
        ++total;
      }
    }
    r.pass = ok == total;
    r.summary = detail::strf("%d/%d (pair, price) cases within 1e-6 (max abs error %.2e)", ok, total, worst);
  });
}

/// Criterion 5: price iteration against the constrained brute-force optimum.
inline CriterionResult check_duality(const AcceptanceOptions& opt) {
  return detail::timed(5, "strong duality", [&](CriterionResult& r) {
    const int n = detail::scaled(10, 3, opt);
    Rng rng = make_stream(opt.seed, 105);
    int ok = 0, done = 0, det_gap = 0;
    double worst_gap = 0.0, worst_cs = 0.0;
    PriceIterationOptions po;
    po.pricing.threads = opt.threads;
    while (done < n) {
      const std::vector<ClientModel> models{random_client_model(rng, tiny_ranges()),
                                            random_client_model(rng, tiny_ranges())};
      const double full = dual_value(models, 0.0, 0.0).total_power();
      if (!(full > 0.0)) continue;  // no power used at all: the budget is never binding
      const double budget = uniform(rng, 0.2, 0.8) * full;
      const auto res = price_iteration(models, budget, po);
      const auto best = constrained_bruteforce(models, budget);
      const double gap = best.randomized - res.dual;
      const double cs = std::abs(res.report.complementary_slackness);
      worst_gap = std::max(worst_gap, gap);
      worst_cs = std::max(worst_cs, cs);
      det_gap += best.deterministic > best.randomized + 1e-9;
      ok += gap <= 1e-3 && cs <= 1e-2;
      ++done;
    }
    r.pass = ok == n;
    r.summary = detail::strf("%d/%d pairs with D(lambda*) >= primal - 1e-3 and |CS| <= 1e-2 "
                             "(max primal - dual %.2e, max |CS| %.2e)",
                             ok, n, worst_gap, worst_cs);
    r.info.push_back(detail::strf("primal optimum allows time-sharing; %d/%d pairs have a strictly worse best "
                                  "deterministic bundle",
                                  det_gap, n));
  });
}

/// Criterion 6: nested passive sets and index vs indifference equations.
inline CriterionResult check_indexability_criterion(const AcceptanceOptions& opt) {
  return detail::timed(6, "indexability", [&](CriterionResult& r) {
    const int n = detail::scaled(100, 10, opt);
    Rng rng = make_stream(opt.seed, 106);
    WhittleOptions wo;
    int nested = 0, linear_ok = 0, checked = 0, tied = 0;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto m = random_binary_model(rng);
      const double top = default_price_max(m);
      std::vector<double> grid;
      for (int k = 0; k < 50; ++k) grid.push_back(top * k / 49.0);
      nested += check_indexability(m, grid, wo).pass;
      const auto lc = cross_check_linear(m, index_table(m, wo), wo);
      linear_ok += lc.pass;
      checked += lc.checked;
      tied += lc.tied;
      worst = std::max(worst, lc.max_error);
    }
    r.pass = nested == n && linear_ok == n;
    r.summary = detail::strf("nested on the 50-point grid %d/%d; index vs linear solve %d/%d models "
                             "(%d thresholds, max error %.2e, bound %.0e)",
                             nested, n, linear_ok, n, checked, worst, 10 * wo.tol);
    r.info.push_back(detail::strf("%d states skipped: their index is shared by another state within 10*tol", tied));
  });
}

/// Criterion 7: simulated averages against exact stationary averages.
inline CriterionResult check_simulation(const AcceptanceOptions& opt) {
  return detail::timed(7, "simulator vs analysis", [&](CriterionResult& r) {
    const int n = detail::scaled(20, 4, opt);
    const std::uint64_t horizon = detail::scaled_steps(1000000, opt);
    Rng rng = make_stream(opt.seed, 107);
    int cost_ok = 0, power_ok = 0, chi_ok = 0;
    double worst_z = 0.0;
    for (int i = 0; i < n; ++i) {
      ModelRanges ranges;
      ranges.buffer_max = 10;
      const auto m = random_client_model(rng, ranges);
      const double price = uniform(rng, 0.0, 1.0);
      const PolicyTable pol(m, 1, solve_average(build_client_mdp(m), price).policy);
      const auto exact = evaluate_policy(m, pol);
      Scenario sc;
      sc.clients = {m};
      sc.horizon = horizon;
      sc.seed = opt.seed + static_cast<std::uint64_t>(i);
      const auto tr = run(sc, policy_scheduler({pol}));
      const double dc = std::abs(tr.objective.mean - exact.average_cost);
      const double dp = std::abs(tr.power.mean - exact.average_power);
      cost_ok += dc <= 3.0 * tr.objective.se;
      power_ok += dp <= 3.0 * tr.power.se;
      if (tr.objective.se > 0) worst_z = std::max(worst_z, dc / tr.objective.se);
      if (tr.power.se > 0) worst_z = std::max(worst_z, dp / tr.power.se);
      chi_ok += transition_chi_square(tr, m, 0).pass;
    }
    r.pass = cost_ok == n && power_ok == n && chi_ok == n;
    r.summary = detail::strf("cost within 3 SE %d/%d, power within 3 SE %d/%d, chi-square at 0.999 %d/%d "
                             "(max |z| %.2f)",
                             cost_ok, n, power_ok, n, chi_ok, n, worst_z);
  });
}

/// Criterion 8: relative and discounted Q-learning against exact solves.
inline CriterionResult check_q_learning(const AcceptanceOptions& opt) {
  return detail::timed(8, "Q-learning convergence", [&](CriterionResult& r) {
    const auto m = detail::learning_instance();
    const double price = 0.5;
    const std::uint64_t steps = detail::scaled_steps(1000000, opt);
    const int seeds = 10;
    const double gain = solve_average(build_client_mdp(m), price).gain;
    int rel_ok = 0;
    double worst_rel = 0.0;
    for (int s = 1; s <= seeds; ++s) {
      const auto q = q_learning(m, price, steps, opt.seed + static_cast<std::uint64_t>(s));
      const double err = std::abs(q.gain_estimate - gain) / gain;
      worst_rel = std::max(worst_rel, err);
      rel_ok += err <= 0.05;
    }
    auto discounted = [&](double gamma, int count, double* worst) {
      const auto exact = exact_q_table(m, price, gamma);
      double lo = exact.values()[0], hi = lo;
      for (double v : exact.values()) lo = std::min(lo, v), hi = std::max(hi, v);
      QLearningOptions qo;
      qo.variant = QVariant::discounted;
      qo.discount = gamma;
      int ok = 0;
      *worst = 0.0;
      for (int s = 1; s <= count; ++s) {
        const auto q = q_learning(m, price, steps, opt.seed + static_cast<std::uint64_t>(s), qo);
        double err = 0.0;
        for (std::size_t k = 0; k < exact.values().size(); ++k) {
          err = std::max(err, std::abs(q.table.values()[k] - exact.values()[k]));
        }
        *worst = std::max(*worst, err / (hi - lo));
        ok += err <= 0.05 * (hi - lo);
      }
      return ok;
    };
    double worst_disc = 0.0, worst_09 = 0.0;
    const int disc_ok = discounted(0.99, seeds, &worst_disc);
    const int ok_09 = discounted(0.9, 3, &worst_09);
    r.pass = rel_ok >= 9 && disc_ok >= 9;
    r.summary = detail::strf("relative: gain within 5%% in %d/%d seeds (max rel error %.2e, need 9); "
                             "discounted 0.99: max-norm error <= 5%% of span in %d/%d seeds (max error/span %.2f)",
                             rel_ok, seeds, worst_rel, disc_ok, seeds, worst_disc);
    r.info.push_back(detail::strf("discount 0.9, same schedule: error <= 5%% of span in %d/3 seeds "
                                  "(max error/span %.3f)",
                                  ok_09, worst_09));
  });
}

/// Criterion 9: two-timescale price learning against price iteration.
inline CriterionResult check_two_timescale(const AcceptanceOptions& opt) {
  return detail::timed(9, "two-timescale price learning", [&](CriterionResult& r) {
    const auto m = detail::learning_instance();
    const std::uint64_t steps = detail::scaled_steps(1000000, opt);
    const double full = dual_value({m}, 0.0, 0.0).total_power();
    auto trial = [&](double fraction, double* lam_star) {
      const double budget = fraction * full;
      const auto pi = price_iteration({m}, budget);
      *lam_star = pi.price;
      int ok = 0;
      for (int s = 1; s <= 10; ++s) {
        const auto tt = two_timescale_run({m}, budget, steps, opt.seed + static_cast<std::uint64_t>(s));
        ok += std::abs(tt.price - pi.price) <= 0.2 * pi.price && std::abs(tt.average_power - budget) <= 0.1 * budget;
      }
      return ok;
    };
    double star = 0.0, star_edge = 0.0;
    const int ok = trial(0.5, &star);
    r.pass = ok >= 8;
    r.summary = detail::strf("lambda within 20%% of lambda* = %.4f and power within 10%% of budget in %d/10 seeds "
                             "(need 8)",
                             star, ok);
    if (!opt.quick) {
      const int edge = trial(0.8, &star_edge);
      r.info.push_back(detail::strf("budget at 0.8 x unconstrained usage (lambda* = %.4f, near a breakpoint edge): "
                                    "%d/10 seeds",
                                    star_edge, edge));
    }
  });
}

/// Criterion 10: degenerate fading reduces to i.i.d.; a two-state channel
/// matches the augmented exact solve.
inline CriterionResult check_fading(const AcceptanceOptions& opt) {
  return detail::timed(10, "fading reduction", [&](CriterionResult& r) {
    Rng rng = make_stream(opt.seed, 110);
    const int seeds = detail::scaled(10, 3, opt);
    int identical = 0;
    for (int s = 0; s < seeds; ++s) {
      const auto m = random_client_model(rng, tiny_ranges());
      const PolicyTable pol(m, 1, solve_average(build_client_mdp(m), 0.3).policy);
      Scenario sc;
      sc.clients = {m};
      sc.horizon = 20000;
      sc.seed = opt.seed + static_cast<std::uint64_t>(s);
      const auto a = run(sc, policy_scheduler({pol}));
      sc.fading = {ChannelModel::iid(m)};
      const auto b = run_fading(sc, policy_scheduler({pol}));
      identical += a.slots == b.slots;
    }

    ClientModel m;
    m.buffer_capacity = 6;
    m.playtime_per_packet = 2;
    m.quality_disutilities = {0.1, 0.4};
    m.power_levels = {0.0, 1.0, 2.0};
    m.success_prob = SuccessTable(2, 3, {0.0, 0.6, 0.8, 0.0, 0.75, 0.9});
    m.outage_period_weight = 1.5;
    m.validate();
    std::vector<double> bad;
    for (double p : m.success_prob.data()) bad.push_back(0.4 * p);
    const ChannelModel ch{{{0.9, 0.1}, {0.3, 0.7}}, {m.success_prob, SuccessTable(2, 3, bad)}};
    const double price = 0.2;
    const auto sol = solve_average(build_fading_mdp(m, ch), price);
    Scenario sc;
    sc.clients = {m};
    sc.fading = {ch};
    sc.price = price;
    sc.horizon = detail::scaled_steps(1000000, opt);
    sc.seed = opt.seed;
    sc.record_slots = false;
    const auto tr = run_fading(sc, policy_scheduler({PolicyTable(m, 2, sol.policy)}));
    const double z = std::abs(tr.lagrangian.mean - sol.gain) / tr.lagrangian.se;
    r.pass = identical == seeds && z <= 3.0;
    r.summary = detail::strf("C=1 traces byte-identical %d/%d seeds; Gilbert-Elliott gain %.6f vs simulated "
                             "%.6f +- %.6f (|z| = %.2f, need <= 3)",
                             identical, seeds, sol.gain, tr.lagrangian.mean, tr.lagrangian.se, z);
  });
}

/// Criteria that fail for documented reasons (docs/acceptance.md): per-stage
/// D-monotonicity breaks for large outage-period weights, and discounted
/// Q-learning at 0.99 does not reach 5% of span in 1e6 steps.
inline const std::vector<int>& known_limitations() {
  static const std::vector<int> ids{2, 8};
  return ids;
}

inline bool is_known_limitation(int id) {
  for (int k : known_limitations()) {
    if (k == id) return true;
  }
  return false;
}

inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt = {},
                                                   const std::function<void(const CriterionResult&)>& on_result = {}) {
  std::vector<CriterionResult> out;
  auto emit = [&](CriterionResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  for (auto& r : check_structure(opt)) emit(std::move(r));
  emit(check_oracle(opt));
  emit(check_decomposition(opt));
  emit(check_duality(opt));
  emit(check_indexability_criterion(opt));
  emit(check_simulation(opt));
  emit(check_q_learning(opt));
  emit(check_two_timescale(opt));
  emit(check_fading(opt));
  return out;
}

inline std::string format_result(const CriterionResult& r) {
  std::string s = detail::strf("[%s] %2d %s: ", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str());
  s += r.summary;
  s += detail::strf(" (%.1fs)", r.seconds);
  for (const auto& line : r.info) s += "\n       info: " + line;
  return s;
}

}  // namespace das
