#pragma once

// Pairwise MRFs as Lagrangean decompositions over trees.
//
// A labeling is encoded through indicators x_{v;a} = [x_v = a], one Boolean
// coordinate per (node, label). The edge set is split into forests; every
// connected component of a forest becomes one term solved exactly by
// dynamic programming.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fwmap/model.hpp"

namespace fwmap {

struct MrfEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  std::vector<double> table;  ///< |X_u| x |X_v|, row-major in the label of u

  friend bool operator==(const MrfEdge&, const MrfEdge&) = default;
};

struct MrfInstance {
  std::vector<std::size_t> labels;          ///< |X_v|
  std::vector<std::vector<double>> unary;   ///< theta_v
  std::vector<MrfEdge> edges;               ///< theta_uv

  std::size_t num_nodes() const { return labels.size(); }

  /// Offset of node v's first indicator in the Boolean encoding.
  std::vector<std::size_t> indicator_offsets() const {
    std::vector<std::size_t> off(labels.size() + 1, 0);
    for (std::size_t v = 0; v < labels.size(); ++v) off[v + 1] = off[v] + labels[v];
    return off;
  }
  std::size_t num_indicators() const { return std::accumulate(labels.begin(), labels.end(), std::size_t{0}); }

  double energy(std::span<const std::int32_t> x) const {
    double e = 0.0;
    for (std::size_t v = 0; v < labels.size(); ++v) e += unary[v][static_cast<std::size_t>(x[v])];
    for (const MrfEdge& ed : edges)
      e += ed.table[static_cast<std::size_t>(x[ed.u]) * labels[ed.v] + static_cast<std::size_t>(x[ed.v])];
    return e;
  }

  /// Checks table shapes, finiteness and that edges are simple.
  void validate() const {
    if (unary.size() != labels.size()) throw Error("unary table count does not match node count");
    for (std::size_t v = 0; v < labels.size(); ++v) {
      if (labels[v] == 0) throw Error("node " + std::to_string(v) + " has no labels");
      if (unary[v].size() != labels[v]) throw Error("unary table of node " + std::to_string(v) + " has wrong size");
      for (double x : unary[v])
        if (!std::isfinite(x)) throw Error("non-finite unary cost at node " + std::to_string(v));
    }
    for (const MrfEdge& e : edges) {
      if (e.u >= labels.size() || e.v >= labels.size() || e.u == e.v)
        throw Error("invalid edge " + std::to_string(e.u) + "-" + std::to_string(e.v));
      if (e.table.size() != labels[e.u] * labels[e.v])
        throw Error("pairwise table of edge " + std::to_string(e.u) + "-" + std::to_string(e.v) + " has wrong size");
      for (double x : e.table)
        if (!std::isfinite(x)) throw Error("non-finite pairwise cost");
    }
  }

  friend bool operator==(const MrfInstance&, const MrfInstance&) = default;
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/// Splits the edges into forests by repeatedly taking a maximal spanning
/// forest of the edges not yet assigned. Returns edge indices per forest.
inline std::vector<std::vector<std::size_t>> forest_partition(std::size_t num_nodes,
                                                              std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<std::vector<std::size_t>> forests;
  std::vector<std::size_t> remaining(edges.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  while (!remaining.empty()) {
    detail::DisjointSets sets(num_nodes);
    std::vector<std::size_t> forest, rest;
    for (std::size_t e : remaining) {
      if (sets.unite(edges[e].first, edges[e].second))
        forest.push_back(e);
      else
        rest.push_back(e);
    }
    forests.push_back(std::move(forest));
    remaining = std::move(rest);
  }
  return forests;
}

inline std::vector<std::vector<std::size_t>> forest_partition(const MrfInstance& mrf) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(mrf.edges.size());
  for (const MrfEdge& e : mrf.edges) pairs.emplace_back(e.u, e.v);
  return forest_partition(mrf.num_nodes(), pairs);
}

struct TreeLabeling {
  Compact labels;
  double value = 0.0;  ///< energy plus <lambda, indicators>
};

/// A tree-structured term with exact dynamic-programming oracle.
class TreeOracle final : public MinOracle {
 public:
  struct LocalEdge {
    std::size_t a = 0;  ///< local node index
    std::size_t b = 0;
    std::vector<double> table;  ///< |X_a| x |X_b|
  };

  /// `edges` must form a tree over the local nodes (no edges for one node).
  TreeOracle(std::vector<std::size_t> labels, std::vector<std::vector<double>> unary, std::vector<LocalEdge> edges)
      : labels_(std::move(labels)), unary_(std::move(unary)) {
    const std::size_t n = labels_.size();
    if (n == 0) throw Error("tree term needs at least one node");
    if (edges.size() + 1 != n) throw Error("tree term edge count must be node count - 1");
    offsets_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) offsets_[v + 1] = offsets_[v] + labels_[v];

    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      adj[edges[e].a].push_back(e);
      adj[edges[e].b].push_back(e);
    }
    // Orient every edge from parent to child by breadth-first search from node 0.
    parent_.assign(n, kNone);
    pairwise_.resize(n);
    order_.reserve(n);
    std::vector<char> seen(n, 0);
    order_.push_back(0);
    seen[0] = 1;
    for (std::size_t head = 0; head < order_.size(); ++head) {
      const std::size_t p = order_[head];
      for (std::size_t e : adj[p]) {
        const LocalEdge& ed = edges[e];
        const std::size_t c = ed.a == p ? ed.b : ed.a;
        if (seen[c]) continue;
        seen[c] = 1;
        parent_[c] = p;
        order_.push_back(c);
        // Store as [parent label][child label].
        auto& tab = pairwise_[c];
        tab.assign(labels_[p] * labels_[c], 0.0);
        for (std::size_t x = 0; x < labels_[p]; ++x)
          for (std::size_t y = 0; y < labels_[c]; ++y)
            tab[x * labels_[c] + y] = ed.a == p ? ed.table[x * labels_[c] + y] : ed.table[y * labels_[p] + x];
      }
    }
    if (order_.size() != n) throw Error("tree term edges do not connect all nodes");
    children_.resize(n);
    for (std::size_t v : order_)
      if (parent_[v] != kNone) children_[parent_[v]].push_back(v);

    work_ = static_cast<double>(offsets_[n]);
    for (std::size_t v = 0; v < n; ++v)
      if (parent_[v] != kNone) work_ += static_cast<double>(labels_[v] * labels_[parent_[v]]);
  }

  std::size_t num_nodes() const { return labels_.size(); }
  std::span<const std::size_t> labels() const { return labels_; }

  std::size_t dimension() const override { return offsets_.back(); }
  std::size_t compact_size() const override { return labels_.size(); }
  double work_estimate() const override { return work_; }

  /// Leaf-to-root min-sum dynamic program; ties go to the lowest label.
  TreeLabeling minimize(std::span<const double> lambda) const { return run(lambda, 1.0); }

  OracleResult solve(std::span<const double> lambda) const override {
    TreeLabeling r = minimize(lambda);
    const double e = energy(r.labels);
    return OracleResult{std::move(r.labels), e};
  }

  OracleResult solve_max_energy() const override {
    TreeLabeling r = run({}, -1.0);
    const double e = energy(r.labels);
    return OracleResult{std::move(r.labels), e};
  }

  void decode(const Compact& s, std::span<double> x) const override {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t v = 0; v < labels_.size(); ++v) x[offsets_[v] + static_cast<std::size_t>(s[v])] = 1.0;
  }

  double inner_product(std::span<const double> lambda, const Compact& s) const override {
    double r = 0.0;
    for (std::size_t v = 0; v < labels_.size(); ++v) r += lambda[offsets_[v] + static_cast<std::size_t>(s[v])];
    return r;
  }

  double energy(const Compact& s) const override {
    double e = 0.0;
    for (std::size_t v = 0; v < labels_.size(); ++v) {
      const auto xv = static_cast<std::size_t>(s[v]);
      e += unary_[v][xv];
      if (parent_[v] != kNone) e += pairwise_[v][static_cast<std::size_t>(s[parent_[v]]) * labels_[v] + xv];
    }
    return e;
  }

  std::optional<Compact> encode(std::span<const double> x) const override {
    Compact s(labels_.size(), -1);
    for (std::size_t v = 0; v < labels_.size(); ++v) {
      for (std::size_t a = 0; a < labels_[v]; ++a) {
        const double xi = x[offsets_[v] + a];
        if (xi == 1.0) {
          if (s[v] >= 0) return std::nullopt;
          s[v] = static_cast<std::int32_t>(a);
        } else if (xi != 0.0) {
          return std::nullopt;
        }
      }
      if (s[v] < 0) return std::nullopt;
    }
    return s;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  // sign = +1 minimizes energy + <lambda, x>; sign = -1 maximizes energy
  // (lambda ignored). Returned value is in the original sign.
  TreeLabeling run(std::span<const double> lambda, double sign) const {
    const std::size_t n = labels_.size();
    std::vector<std::vector<double>> cost(n);
    std::vector<std::vector<std::int32_t>> choice(n);  // best child label per parent label
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      const std::size_t v = *it;
      auto& cv = cost[v];
      cv.resize(labels_[v]);
      for (std::size_t a = 0; a < labels_[v]; ++a)
        cv[a] = sign * unary_[v][a] + (lambda.empty() ? 0.0 : lambda[offsets_[v] + a]);
      for (std::size_t c : children_[v]) {
        const auto& cc = cost[c];
        auto& ch = choice[c];
        ch.resize(labels_[v]);
        const std::size_t lc = labels_[c];
        for (std::size_t a = 0; a < labels_[v]; ++a) {
          double best = sign * pairwise_[c][a * lc] + cc[0];
          std::int32_t arg = 0;
          for (std::size_t b = 1; b < lc; ++b) {
            const double val = sign * pairwise_[c][a * lc + b] + cc[b];
            if (val < best) {
              best = val;
              arg = static_cast<std::int32_t>(b);
            }
          }
          cv[a] += best;
          ch[a] = arg;
        }
      }
    }
    TreeLabeling out;
    out.labels.assign(n, 0);
    const auto& root = cost[order_[0]];
    std::size_t best = 0;
    for (std::size_t a = 1; a < root.size(); ++a)
      if (root[a] < root[best]) best = a;
    out.labels[order_[0]] = static_cast<std::int32_t>(best);
    out.value = sign * root[best];
    for (std::size_t k = 1; k < n; ++k) {
      const std::size_t v = order_[k];
      out.labels[v] = choice[v][static_cast<std::size_t>(out.labels[parent_[v]])];
    }
    return out;
  }

  std::vector<std::size_t> labels_;
  std::vector<std::vector<double>> unary_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> parent_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<double>> pairwise_;  ///< indexed by child, [parent label][child label]
  double work_ = 0.0;
};

/// Tree terms of an MRF for the given edge partition.
///
/// Each forest component becomes a term; pairwise tables go to the term
/// owning the edge and unaries are split evenly over the terms containing
/// the node. Nodes without edges get a single-node term when
/// `cover_isolated` is set, otherwise they are left out.
inline std::vector<Term> mrf_tree_terms(const MrfInstance& mrf, const std::vector<std::vector<std::size_t>>& forests,
                                        bool cover_isolated = true) {
  mrf.validate();
  const std::size_t n = mrf.num_nodes();
  const auto offsets = mrf.indicator_offsets();

  struct Component {
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> edges;
  };
  std::vector<Component> comps;
  for (const auto& forest : forests) {
    detail::DisjointSets sets(n);
    for (std::size_t e : forest) sets.unite(mrf.edges[e].u, mrf.edges[e].v);
    std::vector<std::size_t> comp_of_root(n, std::numeric_limits<std::size_t>::max());
    const std::size_t first = comps.size();
    for (std::size_t e : forest) {
      const std::size_t r = sets.find(mrf.edges[e].u);
      if (comp_of_root[r] == std::numeric_limits<std::size_t>::max()) {
        comp_of_root[r] = comps.size();
        comps.emplace_back();
      }
      comps[comp_of_root[r]].edges.push_back(e);
    }
    for (std::size_t c = first; c < comps.size(); ++c) {
      auto& nodes = comps[c].nodes;
      for (std::size_t e : comps[c].edges) {
        nodes.push_back(mrf.edges[e].u);
        nodes.push_back(mrf.edges[e].v);
      }
      std::sort(nodes.begin(), nodes.end());
      nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    }
  }

  std::vector<std::size_t> containing(n, 0);
  for (const auto& c : comps)
    for (std::size_t v : c.nodes) ++containing[v];

  std::vector<Term> terms;
  std::vector<std::size_t> local(n);
  for (const auto& c : comps) {
    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> unary;
    Term term;
    for (std::size_t k = 0; k < c.nodes.size(); ++k) {
      const std::size_t v = c.nodes[k];
      local[v] = k;
      labels.push_back(mrf.labels[v]);
      auto u = mrf.unary[v];
      for (double& x : u) x /= static_cast<double>(containing[v]);
      unary.push_back(std::move(u));
      for (std::size_t a = 0; a < mrf.labels[v]; ++a) term.index_map.push_back(offsets[v] + a);
    }
    std::vector<TreeOracle::LocalEdge> edges;
    for (std::size_t e : c.edges) {
      const MrfEdge& ed = mrf.edges[e];
      edges.push_back({local[ed.u], local[ed.v], ed.table});
    }
    term.oracle = std::make_shared<TreeOracle>(std::move(labels), std::move(unary), std::move(edges));
    terms.push_back(std::move(term));
  }
  if (cover_isolated) {
    for (std::size_t v = 0; v < n; ++v) {
      if (containing[v] != 0) continue;
      Term term;
      for (std::size_t a = 0; a < mrf.labels[v]; ++a) term.index_map.push_back(offsets[v] + a);
      term.oracle = std::make_shared<TreeOracle>(std::vector<std::size_t>{mrf.labels[v]},
                                                 std::vector<std::vector<double>>{mrf.unary[v]},
                                                 std::vector<TreeOracle::LocalEdge>{});
      terms.push_back(std::move(term));
    }
  }
  return terms;
}

inline Decomposition encode_mrf(const MrfInstance& mrf, const std::vector<std::vector<std::size_t>>& forests) {
  return build_decomposition(mrf.num_indicators(), mrf_tree_terms(mrf, forests));
}

inline Decomposition encode_mrf(const MrfInstance& mrf) { return encode_mrf(mrf, forest_partition(mrf)); }

}  // namespace fwmap
