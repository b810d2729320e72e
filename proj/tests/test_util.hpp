#pragma once

// Random instance generators and brute-force reference computations shared
// by the unit and acceptance tests. Nothing here calls the solver's own
// oracles or closed forms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "fwmap/fwmap.hpp"

namespace fwmap::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random MRF on the given edges with costs in [-scale, scale].
inline MrfInstance random_mrf(Rng& rng, std::vector<std::size_t> labels,
                              const std::vector<std::pair<std::size_t, std::size_t>>& edges, double scale = 1.0) {
  MrfInstance m;
  m.labels = std::move(labels);
  for (std::size_t l : m.labels) {
    std::vector<double> u(l);
    for (double& x : u) x = uniform(rng, -scale, scale);
    m.unary.push_back(std::move(u));
  }
  for (auto [u, v] : edges) {
    std::vector<double> t(m.labels[u] * m.labels[v]);
    for (double& x : t) x = uniform(rng, -scale, scale);
    m.edges.push_back({u, v, std::move(t)});
  }
  return m;
}

/// Random tree: node k > 0 attaches to a uniformly chosen earlier node.
inline MrfInstance random_tree_mrf(Rng& rng, std::size_t max_nodes, std::size_t max_labels) {
  const std::size_t n = uniform_int(rng, 1, max_nodes);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = uniform_int(rng, 2, max_labels);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t p = uniform_int(rng, 0, k - 1);
    if (uniform_int(rng, 0, 1)) edges.emplace_back(p, k); else edges.emplace_back(k, p);
  }
  return random_mrf(rng, labels, edges);
}

/// Random connected graph containing at least one cycle, with at most
/// `max_indicators` Boolean coordinates in total.
inline MrfInstance random_cyclic_mrf(Rng& rng, std::size_t max_indicators) {
  std::size_t n;
  std::vector<std::size_t> labels;
  while (true) {
    n = uniform_int(rng, 3, 8);
    labels.assign(n, 2);
    for (auto& l : labels) l = uniform_int(rng, 2, 3);
    if (std::accumulate(labels.begin(), labels.end(), std::size_t{0}) <= max_indicators) break;
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<char>> has(n, std::vector<char>(n, 0));
  auto add = [&](std::size_t a, std::size_t b) {
    if (a == b || has[a][b]) return;
    has[a][b] = has[b][a] = 1;
    edges.emplace_back(std::min(a, b), std::max(a, b));
  };
  // Hamiltonian cycle then a few random chords.
  for (std::size_t k = 0; k < n; ++k) add(k, (k + 1) % n);
  const std::size_t chords = uniform_int(rng, 0, n);
  for (std::size_t c = 0; c < chords; ++c) add(uniform_int(rng, 0, n - 1), uniform_int(rng, 0, n - 1));
  return random_mrf(rng, labels, edges);
}

/// Calls f on every labeling of the given label counts.
template <typename F>
void for_each_labeling(const std::vector<std::size_t>& labels, F&& f) {
  std::vector<std::int32_t> x(labels.size(), 0);
  while (true) {
    f(static_cast<const std::vector<std::int32_t>&>(x));
    std::size_t k = 0;
    while (k < x.size()) {
      if (static_cast<std::size_t>(++x[k]) < labels[k]) break;
      x[k] = 0;
      ++k;
    }
    if (k == x.size()) return;
  }
}

inline double brute_force_map(const MrfInstance& m) {
  double best = std::numeric_limits<double>::infinity();
  for_each_labeling(m.labels, [&](const auto& x) { best = std::min(best, m.energy(x)); });
  return best;
}

/// Indicator vector of an MRF labeling.
inline std::vector<double> indicators(const MrfInstance& m, const std::vector<std::int32_t>& x) {
  std::vector<double> out(m.num_indicators(), 0.0);
  const auto off = m.indicator_offsets();
  for (std::size_t v = 0; v < x.size(); ++v) out[off[v] + static_cast<std::size_t>(x[v])] = 1.0;
  return out;
}

/// f_{mu,c}(y) evaluated as sum_t <y^t,[lambda^t 1]> - ||lambda - mu||^2/(2c)
/// at the maximizing lambda, obtained by projecting mu + c y_star onto
/// Lambda. Independent of the closed form and of the stored nu.
inline double prox_dual_reference(const Decomposition& d, const PrimalIterate& y, const MultiplierVector& mu, double c) {
  MultiplierVector raw = mu;
  for (std::size_t t = 0; t < d.num_terms(); ++t)
    for (std::size_t k = 0; k < raw[t].size(); ++k) raw[t][k] += c * y.star[t][k];
  const MultiplierVector lambda = project_to_lambda_space(d, raw);
  double f = 0.0;
  for (std::size_t t = 0; t < d.num_terms(); ++t) {
    for (std::size_t k = 0; k < raw[t].size(); ++k) f += y.star[t][k] * lambda[t][k];
    f += y.circ[t];
  }
  return f - squared_distance(lambda, mu) / (2.0 * c);
}

/// Random point of Y: a convex combination of a few oracle vertices per term
/// obtained from random multipliers.
inline PrimalIterate random_iterate(Rng& rng, const Decomposition& d, const MultiplierVector& mu, double c,
                                    std::size_t vertices = 3) {
  PrimalIterate y;
  y.star.resize(d.num_terms());
  y.circ.assign(d.num_terms(), 0.0);
  for (std::size_t t = 0; t < d.num_terms(); ++t) {
    const MinOracle& o = *d.term(t).oracle;
    y.star[t].assign(o.dimension(), 0.0);
    std::vector<double> w(vertices);
    for (double& x : w) x = uniform(rng, 0.05, 1.0);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<double> lam(o.dimension()), x(o.dimension());
    for (std::size_t k = 0; k < vertices; ++k) {
      for (double& l : lam) l = uniform(rng, -3.0, 3.0);
      const OracleResult r = o.solve(lam);
      o.decode(r.labeling, x);
      for (std::size_t i = 0; i < x.size(); ++i) y.star[t][i] += w[k] / total * x[i];
      y.circ[t] += w[k] / total * r.cost;
    }
  }
  y.nu = compute_nu(d, y, mu, c);
  return y;
}

inline MultiplierVector random_lambda(Rng& rng, const Decomposition& d, double scale = 2.0) {
  MultiplierVector m = MultiplierVector::zeros(d);
  for (auto& b : m.blocks)
    for (double& x : b) x = uniform(rng, -scale, scale);
  return project_to_lambda_space(d, std::move(m));
}

/// Single-Boolean-variable term with f(0) = cost0, f(1) = cost1, compact
/// object = the bit.
class BitOracle final : public MinOracle {
 public:
  BitOracle(double cost0, double cost1) : cost_{cost0, cost1} {}
  std::size_t dimension() const override { return 1; }
  std::size_t compact_size() const override { return 1; }
  OracleResult solve(std::span<const double> lambda) const override {
    const double v1 = cost_[1] + lambda[0];
    return v1 < cost_[0] ? OracleResult{{1}, cost_[1]} : OracleResult{{0}, cost_[0]};
  }
  void decode(const Compact& s, std::span<double> x) const override { x[0] = s[0]; }
  double inner_product(std::span<const double> lambda, const Compact& s) const override { return s[0] ? lambda[0] : 0.0; }
  double energy(const Compact& s) const override { return cost_[static_cast<std::size_t>(s[0])]; }
  std::optional<Compact> encode(std::span<const double> x) const override {
    if (x[0] == 0.0) return Compact{0};
    if (x[0] == 1.0) return Compact{1};
    return std::nullopt;
  }
  OracleResult solve_max_energy() const override {
    return cost_[1] > cost_[0] ? OracleResult{{1}, cost_[1]} : OracleResult{{0}, cost_[0]};
  }

 private:
  double cost_[2];
};

inline Decomposition single_bit_problem(double cost0 = 0.0, double cost1 = -3.0) {
  std::vector<Term> terms;
  terms.push_back(Term{{0}, std::make_shared<BitOracle>(cost0, cost1)});
  return build_decomposition(1, std::move(terms));
}

/// Exhaustive min of sum_i costs[i][x_i] s.t. sum x_i = target.
inline double brute_force_row(std::size_t n, std::size_t k, long long target, const std::vector<double>& costs) {
  double best = std::numeric_limits<double>::infinity();
  for_each_labeling(std::vector<std::size_t>(n, k + 1), [&](const auto& x) {
    long long s = 0;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += x[i];
      v += costs[i * (k + 1) + static_cast<std::size_t>(x[i])];
    }
    if (s == target) best = std::min(best, v);
  });
  return best;
}

/// Exhaustive min over injective maps rows -> columns.
inline double brute_force_assignment(std::size_t n, std::size_t m, const std::vector<double>& cost) {
  std::vector<std::size_t> cols(m);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  // Enumerate permutations of all m columns; the first n entries define the map.
  do {
    double v = 0.0;
    for (std::size_t r = 0; r < n; ++r) v += cost[r * m + cols[r]];
    best = std::min(best, v);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace fwmap::testing
