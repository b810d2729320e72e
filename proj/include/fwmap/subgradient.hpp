#pragma once

// Projected supergradient ascent on h over Lambda with a Polyak step and an
// adaptive target level.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fwmap/clock.hpp"
#include "fwmap/model.hpp"
#include "fwmap/proximal_driver.hpp"
#include "fwmap/trace.hpp"

namespace fwmap {

/// Lambda-projection of the stacked oracle argmin indicators.
inline MultiplierVector supergradient(const Decomposition& d, std::span<const OracleResult> argmins) {
  MultiplierVector g = MultiplierVector::zeros(d);
  for (std::size_t t = 0; t < d.num_terms(); ++t) d.term(t).oracle->decode(argmins[t].labeling, g[t]);
  return project_to_lambda_space(d, std::move(g));
}

struct PolyakState {
  MultiplierVector lambda;
  double target = std::numeric_limits<double>::infinity();  ///< U
  double best_h = -std::numeric_limits<double>::infinity();
  double shrink = 0.5;
};

/// Step length (U - h) / ||g||^2; throws ZeroGradient when g = 0.
inline double polyak_step_length(double target, double h, double g_squared_norm) {
  if (!(g_squared_norm > 0.0)) throw ZeroGradient();
  return (target - h) / g_squared_norm;
}

/// lambda <- proj(lambda + alpha g). Returns alpha.
inline double polyak_step(const Decomposition& d, PolyakState& state, const MultiplierVector& g, double h) {
  const double alpha = polyak_step_length(state.target, h, g.squared_norm());
  if (alpha != 0.0) {
    for (std::size_t t = 0; t < d.num_terms(); ++t)
      for (std::size_t k = 0; k < g[t].size(); ++k) state.lambda[t][k] += alpha * g[t][k];
    state.lambda = project_to_lambda_space(d, std::move(state.lambda));
  }
  return alpha;
}

/// Primal energy of the per-coordinate majority vote over the terms'
/// argmins, if every term accepts the resulting assignment.
inline std::optional<double> majority_vote_energy(const Decomposition& d, std::span<const OracleResult> argmins) {
  std::vector<double> votes(d.num_vars(), 0.0);
  std::vector<double> local;
  for (std::size_t t = 0; t < d.num_terms(); ++t) {
    const Term& term = d.term(t);
    local.assign(term.arity(), 0.0);
    term.oracle->decode(argmins[t].labeling, local);
    for (std::size_t k = 0; k < term.arity(); ++k) votes[term.index_map[k]] += local[k];
  }
  for (std::size_t i = 0; i < d.num_vars(); ++i)
    votes[i] = 2.0 * votes[i] > static_cast<double>(d.multiplicity(i)) ? 1.0 : 0.0;
  return evaluate_assignment(d, votes);
}

struct SubgradientOptions {
  double budget_s = 600.0;
  std::size_t max_steps = 0;  ///< 0: no cap
  ClockMode clock = ClockMode::wall;
  std::size_t stall_window = 50;
  double stall_tolerance = 1e-9;
  double shrink = 0.5;
  std::size_t trace_every = 1;
};

inline SolveResult solve_subgradient(const Decomposition& d, const SubgradientOptions& opts = {}) {
  SolverClock clock(opts.clock);
  PolyakState state{MultiplierVector::zeros(d), std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(), opts.shrink};
  SolveResult res;
  res.lambda_best = state.lambda;

  double best_primal = std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::quiet_NaN();  // U - best_h while no primal bound exists
  double stall_ref = -std::numeric_limits<double>::infinity();
  std::size_t stall_count = 0;

  std::size_t step = 0;
  while (true) {
    DualEvaluation h = eval_dual(d, state.lambda);
    for (const Term& t : d.terms()) clock.charge(t.oracle->work_estimate());

    if (h.value > state.best_h) {
      state.best_h = h.value;
      res.lambda_best = state.lambda;
    }
    if (auto e = majority_vote_energy(d, h.argmins); e && *e < best_primal) {
      best_primal = *e;
      state.target = std::min(state.target, best_primal);
    }
    const bool have_primal = std::isfinite(best_primal);
    if (!have_primal && std::isnan(margin)) margin = std::max(1.0, std::abs(state.best_h));

    if (state.best_h > stall_ref + opts.stall_tolerance) {
      stall_ref = state.best_h;
      stall_count = 0;
    } else if (++stall_count >= opts.stall_window) {
      if (have_primal) state.target = state.best_h + state.shrink * (state.target - state.best_h);
      else margin *= state.shrink;
      stall_count = 0;
    }
    if (!have_primal) state.target = state.best_h + margin;
    state.target = std::max(state.target, state.best_h);

    const bool last = clock.seconds() >= opts.budget_s || (opts.max_steps != 0 && step + 1 >= opts.max_steps);
    const MultiplierVector g = supergradient(d, h.argmins);
    const double g2 = g.squared_norm();
    if (step % opts.trace_every == 0 || last || g2 == 0.0)
      res.trace.push_back(TraceRecord{clock.seconds(), step, h.value, state.best_h,
                                      std::numeric_limits<double>::quiet_NaN(),
                                      std::numeric_limits<double>::quiet_NaN(),
                                      std::numeric_limits<double>::quiet_NaN(), "sa"});
    ++step;
    if (g2 == 0.0) {
      res.reason = StopReason::optimal;
      break;
    }
    if (last) {
      res.reason = clock.seconds() >= opts.budget_s ? StopReason::budget : StopReason::iteration_cap;
      break;
    }
    polyak_step(d, state, g, h.value);
  }
  res.h_best = state.best_h;
  res.iterations = step;
  return res;
}

}  // namespace fwmap
