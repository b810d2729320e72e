#pragma once

// Multi-plane block-coordinate Frank-Wolfe on the dual of the proximal
// problem
//
//   max_{lambda in Lambda} h(lambda) - ||lambda - mu||^2 / (2c),
//
// whose dual is min_{y in Y} f_{mu,c}(y) with Y the product of the convex
// hulls of the oracle vertices [x f_t(x)].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fwmap/clock.hpp"
#include "fwmap/model.hpp"

namespace fwmap {

struct ProxParams {
  MultiplierVector center;  ///< mu, a point of Lambda
  double weight = 1.0;      ///< c > 0
};

struct Plane {
  Compact labeling;
  double cost = 0.0;
  std::size_t last_used = 0;
};

/// Per-term working sets of oracle vertices.
class PlaneCache {
 public:
  static constexpr std::size_t kDefaultHorizon = 10;

  explicit PlaneCache(std::size_t num_terms = 0, std::size_t horizon = kDefaultHorizon)
      : planes_(num_terms), horizon_(horizon) {}

  std::size_t num_terms() const { return planes_.size(); }
  std::size_t horizon() const { return horizon_; }
  std::span<const Plane> planes(std::size_t t) const { return planes_[t]; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : planes_) n += p.size();
    return n;
  }

  /// Inserts a plane unless an identical labeling is stored already; in both
  /// cases the stored plane is stamped as used. Returns its position.
  std::size_t insert(std::size_t t, const Compact& labeling, double cost, std::size_t stamp) {
    auto& list = planes_[t];
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (list[k].labeling == labeling) {
        list[k].last_used = std::max(list[k].last_used, stamp);
        return k;
      }
    }
    list.push_back(Plane{labeling, cost, stamp});
    return list.size() - 1;
  }

  void touch(std::size_t t, std::size_t k, std::size_t stamp) {
    planes_[t][k].last_used = std::max(planes_[t][k].last_used, stamp);
  }

  /// Drops planes not used during the last `horizon` iterations.
  std::size_t evict(std::size_t now) {
    std::size_t removed = 0;
    for (auto& list : planes_) {
      const auto old = list.size();
      std::erase_if(list, [&](const Plane& p) { return now >= p.last_used + horizon_; });
      removed += old - list.size();
    }
    return removed;
  }

 private:
  std::vector<std::vector<Plane>> planes_;
  std::size_t horizon_;
};

struct CachedMin {
  std::size_t index = 0;
  double value = 0.0;  ///< approximate h_t(lambda), always >= the exact value
};

/// min over cached planes of cost + <lambda, decode(s)>; first minimizer wins.
inline CachedMin approximate_min(const MinOracle& oracle, std::span<const Plane> planes,
                                 std::span<const double> lambda) {
  if (planes.empty()) throw EmptyCache("approximate oracle called on an empty plane cache");
  CachedMin best{0, planes[0].cost + oracle.inner_product(lambda, planes[0].labeling)};
  for (std::size_t k = 1; k < planes.size(); ++k) {
    const double v = planes[k].cost + oracle.inner_product(lambda, planes[k].labeling);
    if (v < best.value) best = CachedMin{k, v};
  }
  return best;
}

/// f_{mu,c}(y) in closed form. Uses the maintained y.nu.
inline double eval_prox_dual(const Decomposition& d, const PrimalIterate& y, const ProxParams& p) {
  const double c = p.weight;
  double f = 0.0;
  for (std::size_t t = 0; t < d.num_terms(); ++t) {
    const auto& ys = y.star[t];
    const auto& mu = p.center[t];
    double sq = 0.0, lin = 0.0;
    for (std::size_t k = 0; k < ys.size(); ++k) {
      sq += ys[k] * ys[k];
      lin += ys[k] * mu[k];
    }
    f += 0.5 * c * sq + lin + y.circ[t];
  }
  for (std::size_t i = 0; i < d.num_vars(); ++i)
    f -= static_cast<double>(d.multiplicity(i)) / (2.0 * c) * y.nu[i] * y.nu[i];
  return f;
}

/// lambda^t = c y^t_star + mu^t - nu_{A_t} for a single term.
inline void term_lambda(const Decomposition& d, const PrimalIterate& y, const ProxParams& p, std::size_t t,
                        std::span<double> out) {
  const auto& map = d.term(t).index_map;
  for (std::size_t k = 0; k < map.size(); ++k)
    out[k] = p.weight * y.star[t][k] + p.center[t][k] - y.nu[map[k]];
}

/// Maximizer of the inner problem for the given y; also the gradient of
/// f_{mu,c} with respect to y^t_star.
inline MultiplierVector extract_lambda(const Decomposition& d, const PrimalIterate& y, const ProxParams& p) {
  MultiplierVector l = MultiplierVector::zeros(d);
  for (std::size_t t = 0; t < d.num_terms(); ++t) term_lambda(d, y, p, t, l[t]);
  return l;
}

/// Exact minimizer over [0,1] of f_{mu,c} along y^t + gamma (z^t - y^t).
///
/// Along that segment f_{mu,c} is the quadratic
///   slope * gamma + 0.5 * curvature * gamma^2
/// with slope = <[lambda^t 1], z^t - y^t> and
///   curvature = c * sum_k (1 - 1/|T_k|) (z_k - y_k)^2,
/// the second factor accounting for nu moving together with y^t. When the
/// curvature vanishes the objective is linear and the step is 0 or 1.
inline double step_size(std::span<const double> y_star, double y_circ, std::span<const double> z_star,
                        double z_circ, std::span<const double> lambda, std::span<const double> inv_multiplicity,
                        double c) {
  double slope = z_circ - y_circ;
  double curvature = 0.0;
  for (std::size_t k = 0; k < y_star.size(); ++k) {
    const double diff = z_star[k] - y_star[k];
    slope += lambda[k] * diff;
    curvature += (1.0 - inv_multiplicity[k]) * diff * diff;
  }
  curvature *= c;
  if (!(curvature > 0.0)) return slope < 0.0 ? 1.0 : 0.0;
  return std::clamp(-slope / curvature, 0.0, 1.0);
}

enum class PassKind { exact, approximate };

/// Shared state threaded through the passes of one solver run.
struct PassContext {
  const Decomposition& problem;
  const ProxParams& prox;
  PlaneCache& cache;
  std::mt19937_64& rng;
  SolverClock& clock;
  std::size_t stamp = 0;  ///< current MP-BCFW iteration, for plane eviction
};

namespace detail {

/// Lines 4-6 of a BCFW step: interpolate towards z and keep nu in sync.
inline double move_towards(const Decomposition& d, PrimalIterate& y, const ProxParams& p, std::size_t t,
                           std::span<const double> lambda, std::span<const double> z_star, double z_circ) {
  auto& ys = y.star[t];
  const auto inv = d.inverse_multiplicity(t);
  const double gamma = step_size(ys, y.circ[t], z_star, z_circ, lambda, inv, p.weight);
  if (gamma == 0.0) return gamma;
  const auto& map = d.term(t).index_map;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const double delta = gamma * (z_star[k] - ys[k]);
    y.nu[map[k]] += p.weight * inv[k] * delta;
    ys[k] += delta;
  }
  y.circ[t] += gamma * (z_circ - y.circ[t]);
  return gamma;
}

inline std::vector<std::size_t> random_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace detail

/// One pass over all terms in random order using the exact oracles. Every
/// oracle answer is added to the plane cache.
inline void bcfw_exact_pass(PrimalIterate& y, PassContext& ctx) {
  const Decomposition& d = ctx.problem;
  std::vector<double> lambda, z_star;
  for (std::size_t t : detail::random_order(d.num_terms(), ctx.rng)) {
    const MinOracle& oracle = *d.term(t).oracle;
    lambda.resize(d.term(t).arity());
    z_star.resize(d.term(t).arity());
    term_lambda(d, y, ctx.prox, t, lambda);
    OracleResult r = oracle.solve(lambda);
    ctx.clock.charge(oracle.work_estimate());
    ctx.cache.insert(t, r.labeling, r.cost, ctx.stamp);
    oracle.decode(r.labeling, z_star);
    detail::move_towards(d, y, ctx.prox, t, lambda, z_star, r.cost);
  }
}

/// Same as the exact pass, with each oracle replaced by a minimum over the
/// term's cached planes.
inline void bcfw_approx_pass(PrimalIterate& y, PassContext& ctx) {
  const Decomposition& d = ctx.problem;
  std::vector<double> lambda, z_star;
  for (std::size_t t : detail::random_order(d.num_terms(), ctx.rng)) {
    const MinOracle& oracle = *d.term(t).oracle;
    lambda.resize(d.term(t).arity());
    z_star.resize(d.term(t).arity());
    term_lambda(d, y, ctx.prox, t, lambda);
    const auto planes = ctx.cache.planes(t);
    const CachedMin best = approximate_min(oracle, planes, lambda);
    ctx.clock.charge(static_cast<double>(planes.size() * std::max<std::size_t>(1, oracle.compact_size())));
    ctx.cache.touch(t, best.index, ctx.stamp);
    const Plane& plane = planes[best.index];
    oracle.decode(plane.labeling, z_star);
    detail::move_towards(d, y, ctx.prox, t, lambda, z_star, plane.cost);
  }
}

/// Decides when to stop approximate passes: continue while the objective
/// decrease per unit time does not drop below its previous value.
class RateMonitor {
 public:
  /// Records `ratio`; false when it is strictly below the previous one.
  bool accept(double ratio) {
    if (previous_ && ratio < *previous_) return false;
    previous_ = ratio;
    return true;
  }

 private:
  std::optional<double> previous_;
};

struct PassStats {
  double f_start = 0.0;  ///< f_{mu,c}(y) when the iteration began
  double f_end = 0.0;
  double elapsed_s = 0.0;
  std::size_t approx_passes = 0;
  std::size_t evicted = 0;
  std::vector<double> ratios;  ///< after the exact pass, then after each approximate pass
};

using PassObserver = std::function<void(PassKind, double f_before, double f_after)>;

struct MpBcfwOptions {
  std::size_t max_approx_passes = 1000;
  PassObserver observer;
};

/// One MP-BCFW iteration: an exact pass, then approximate passes while the
/// rate (f(y_start) - f(y)) / elapsed keeps up, then plane eviction.
inline PassStats mp_bcfw_iteration(PrimalIterate& y, PassContext& ctx, const MpBcfwOptions& opts = {}) {
  const Decomposition& d = ctx.problem;
  auto objective = [&] {
    ctx.clock.charge(static_cast<double>(d.num_vars() + d.num_terms()));
    return eval_prox_dual(d, y, ctx.prox);
  };

  PassStats stats;
  const double t0 = ctx.clock.seconds();
  stats.f_start = objective();
  double f = stats.f_start;

  auto rate = [&] {
    const double dt = ctx.clock.seconds() - t0;
    return dt > 0.0 ? (stats.f_start - f) / dt : 0.0;
  };

  bcfw_exact_pass(y, ctx);
  double f_new = objective();
  if (opts.observer) opts.observer(PassKind::exact, f, f_new);
  f = f_new;

  RateMonitor monitor;
  stats.ratios.push_back(rate());
  monitor.accept(stats.ratios.back());

  while (stats.approx_passes < opts.max_approx_passes) {
    bcfw_approx_pass(y, ctx);
    ++stats.approx_passes;
    f_new = objective();
    if (opts.observer) opts.observer(PassKind::approximate, f, f_new);
    const bool progressed = f - f_new > 1e-15 * (1.0 + std::abs(f));
    f = f_new;
    stats.ratios.push_back(rate());
    if (!monitor.accept(stats.ratios.back()) || !progressed) break;
  }

  stats.f_end = f;
  stats.elapsed_s = ctx.clock.seconds() - t0;
  stats.evicted = ctx.cache.evict(ctx.stamp);
  return stats;
}

/// Builds y from one vertex per term and computes nu.
inline PrimalIterate make_iterate(const Decomposition& d, std::span<const OracleResult> vertices,
                                  const ProxParams& p) {
  PrimalIterate y;
  y.star.resize(d.num_terms());
  y.circ.resize(d.num_terms());
  for (std::size_t t = 0; t < d.num_terms(); ++t) {
    y.star[t].assign(d.term(t).arity(), 0.0);
    d.term(t).oracle->decode(vertices[t].labeling, y.star[t]);
    y.circ[t] = vertices[t].cost;
  }
  y.nu = compute_nu(d, y, p.center, p.weight);
  return y;
}

}  // namespace fwmap
