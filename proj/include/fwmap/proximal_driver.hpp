#pragma once

// Outer proximal loop: MP-BCFW iterations on f_{mu,c}, a dual evaluation
// every few iterations, and periodic moves of the proximal center to the
// best multipliers seen so far.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fwmap/clock.hpp"
#include "fwmap/fw_core.hpp"
#include "fwmap/model.hpp"
#include "fwmap/trace.hpp"

namespace fwmap {

/// c = 1500000 / (|T| + 22)^2
inline double default_prox_weight(std::size_t num_terms) {
  const double denom = static_cast<double>(num_terms) + 22.0;
  return 1500000.0 / (denom * denom);
}

struct GapReport {
  double a = 0.0;  ///< sum_t <y^t, [lambda^t 1]> - h(lambda)
  double b = 0.0;  ///< sum_i (max_{t in T_i} y^t_i - min_{t in T_i} y^t_i)
};

inline GapReport compute_gap(const Decomposition& d, const PrimalIterate& y, const MultiplierVector& lambda,
                             double h_lambda) {
  GapReport g;
  double lin = 0.0;
  for (std::size_t t = 0; t < d.num_terms(); ++t) {
    for (std::size_t k = 0; k < y.star[t].size(); ++k) lin += y.star[t][k] * lambda[t][k];
    lin += y.circ[t];
  }
  g.a = lin - h_lambda;
  for (std::size_t i = 0; i < d.num_vars(); ++i) {
    const auto& ts = d.terms_of(i);
    const auto& ks = d.local_slots(i);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t j = 0; j < ts.size(); ++j) {
      const double v = y.star[ts[j]][ks[j]];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    g.b += hi - lo;
  }
  return g;
}

enum class InitVertex {
  min,  ///< oracle argmin at lambda = 0
  max,  ///< maximum-energy vertex (literal argmax initialization)
};

struct SolveOptions {
  double budget_s = 600.0;
  std::size_t max_iterations = 0;  ///< 0: no cap
  std::optional<double> prox_weight;
  std::uint64_t seed = 0;
  InitVertex init = InitVertex::min;
  ClockMode clock = ClockMode::wall;
  /// Stop once A <= gap_eps_a and B <= gap_eps_b at a dual evaluation.
  bool gap_stop = false;
  double gap_eps_a = 1e-6;
  double gap_eps_b = 1e-6;
  std::size_t eval_every = 5;
  std::size_t center_every = 10;
  std::size_t cache_horizon = PlaneCache::kDefaultHorizon;
  std::size_t max_approx_passes = 1000;
  /// Keep every evaluated lambda (for post-hoc gap-bound checks).
  bool keep_history = false;
  PassObserver pass_observer;
};

enum class StopReason { budget, iteration_cap, gap, optimal };

struct Evaluation {
  std::size_t mp_iteration = 0;
  double h = 0.0;
  GapReport gap;
  MultiplierVector lambda;  ///< filled only with keep_history
};

struct SolveResult {
  double h_best = 0.0;
  MultiplierVector lambda_best;
  std::vector<TraceRecord> trace;
  std::vector<Evaluation> history;
  std::size_t iterations = 0;
  double prox_weight = 0.0;
  GapReport final_gap;
  StopReason reason = StopReason::budget;
  PrimalIterate y;  ///< final primal iterate
};

/// Maximizes h over Lambda with the proximal MP-BCFW scheme.
inline SolveResult solve(const Decomposition& d, const SolveOptions& opts = {}) {
  SolverClock clock(opts.clock);
  std::mt19937_64 rng(opts.seed);

  SolveResult res;
  res.prox_weight = opts.prox_weight.value_or(default_prox_weight(d.num_terms()));
  ProxParams prox{MultiplierVector::zeros(d), res.prox_weight};
  PlaneCache cache(d.num_terms(), opts.cache_horizon);

  auto charge_sweep = [&] {
    for (const Term& t : d.terms()) clock.charge(t.oracle->work_estimate());
  };

  // h(0) doubles as the initialization sweep.
  const MultiplierVector zero = MultiplierVector::zeros(d);
  DualEvaluation h0 = eval_dual(d, zero);
  charge_sweep();
  res.h_best = h0.value;
  res.lambda_best = zero;

  std::vector<OracleResult> seeds;
  if (opts.init == InitVertex::min) {
    seeds = h0.argmins;
  } else {
    for (const Term& t : d.terms()) seeds.push_back(t.oracle->solve_max_energy());
  }
  for (std::size_t t = 0; t < d.num_terms(); ++t) cache.insert(t, seeds[t].labeling, seeds[t].cost, 0);
  for (std::size_t t = 0; t < d.num_terms(); ++t) cache.insert(t, h0.argmins[t].labeling, h0.argmins[t].cost, 0);
  PrimalIterate y = make_iterate(d, seeds, prox);

  auto record = [&](std::size_t iter, double h, const MultiplierVector& lambda) {
    const GapReport gap = compute_gap(d, y, lambda, h);
    res.final_gap = gap;
    res.trace.push_back(TraceRecord{clock.seconds(), iter, h, res.h_best, gap.a, gap.b,
                                    eval_prox_dual(d, y, prox), "fwmap"});
    Evaluation e{iter, h, gap, {}};
    if (opts.keep_history) e.lambda = lambda;
    res.history.push_back(std::move(e));
    return gap;
  };

  auto gap_met = [&](const GapReport& g) { return opts.gap_stop && g.a <= opts.gap_eps_a && g.b <= opts.gap_eps_b; };

  if (gap_met(record(0, h0.value, zero))) {
    res.reason = StopReason::gap;
    res.y = std::move(y);
    return res;
  }

  PassContext ctx{d, prox, cache, rng, clock, 0};
  MpBcfwOptions mp{opts.max_approx_passes, opts.pass_observer};

  // Returns true when the gap criterion is met.
  auto evaluate = [&](std::size_t iter) {
    MultiplierVector lambda = extract_lambda(d, y, prox);
    DualEvaluation h = eval_dual(d, lambda);
    charge_sweep();
    if (h.value > res.h_best) {
      res.h_best = h.value;
      res.lambda_best = lambda;
      for (std::size_t t = 0; t < d.num_terms(); ++t)
        cache.insert(t, h.argmins[t].labeling, h.argmins[t].cost, iter);
    }
    return gap_met(record(iter, h.value, lambda));
  };

  std::size_t iter = 0;
  std::size_t last_eval = 0;
  while (true) {
    if (clock.seconds() >= opts.budget_s) {
      res.reason = StopReason::budget;
      break;
    }
    if (opts.max_iterations != 0 && iter >= opts.max_iterations) {
      res.reason = StopReason::iteration_cap;
      break;
    }
    ++iter;
    ctx.stamp = iter;
    mp_bcfw_iteration(y, ctx, mp);

    if (iter % opts.eval_every == 0) {
      last_eval = iter;
      if (evaluate(iter)) {
        res.reason = StopReason::gap;
        break;
      }
    }
    if (iter % opts.center_every == 0) {
      prox.center = res.lambda_best;
      y.nu = compute_nu(d, y, prox.center, prox.weight);
    }
  }
  // Report the state the run ended in.
  if (last_eval != iter && evaluate(iter)) res.reason = StopReason::gap;
  res.iterations = iter;
  res.y = std::move(y);
  return res;
}

}  // namespace fwmap
