#pragma once

// Graph matching: an MRF whose labels come from a shared universe, with the
// extra constraint that no two nodes take the same label. The constraint is
// carried by one assignment term over all (node, label) indicators; the
// pairwise costs live in tree terms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fwmap/model.hpp"
#include "fwmap/tomography.hpp"
#include "fwmap/tree_mrf.hpp"

namespace fwmap {

struct Assignment {
  std::vector<std::int32_t> label_of;  ///< label chosen for each row
  double cost = 0.0;
};

namespace detail {

// Kuhn's augmenting path on the tight-edge graph. Rows before `first_row`
// are fixed through col_owner and never re-routed.
inline bool augment(std::size_t row, std::size_t first_row, const std::vector<std::vector<char>>& tight,
                    std::vector<char>& visited, std::vector<std::size_t>& col_owner) {
  for (std::size_t c = 0; c < tight[row].size(); ++c) {
    if (!tight[row][c] || visited[c]) continue;
    if (col_owner[c] != SIZE_MAX && col_owner[c] < first_row) continue;
    visited[c] = 1;
    if (col_owner[c] == SIZE_MAX || augment(col_owner[c], first_row, tight, visited, col_owner)) {
      col_owner[c] = row;
      return true;
    }
  }
  return false;
}

inline bool has_perfect_matching(const std::vector<std::vector<char>>& tight, std::size_t first_row,
                                 std::vector<std::size_t> col_owner) {
  const std::size_t m = tight.size();
  std::vector<char> visited(m);
  for (std::size_t r = first_row; r < m; ++r) {
    std::fill(visited.begin(), visited.end(), 0);
    if (!augment(r, first_row, tight, visited, col_owner)) return false;
  }
  return true;
}

}  // namespace detail

/// Minimum-cost injective map rows -> columns for an n x m matrix, n <= m.
///
/// Shortest augmenting paths with potentials on the square matrix padded
/// by zero-cost dummy rows. Among optimal assignments the lexicographically
/// smallest label vector is returned: every optimal assignment uses only
/// edges that are tight for the final potentials, so labels are fixed row
/// by row to the smallest tight column that still admits a perfect
/// matching of the remaining rows.
inline Assignment solve_assignment(std::size_t n, std::size_t m, std::span<const double> cost) {
  if (n > m) throw InfeasibleMatching("more nodes than labels");
  if (cost.size() != n * m) throw Error("assignment cost matrix has wrong size");
  Assignment out;
  if (n == 0) return out;

  auto at = [&](std::size_t r, std::size_t c) { return r < n ? cost[r * m + c] : 0.0; };
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays as in the classical formulation.
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  double scale = 1.0;
  for (double c : cost)
    if (c < kInfeasibleThreshold) scale = std::max(scale, std::abs(c));
  const double eps = 1e-9 * scale * static_cast<double>(m);

  std::vector<std::vector<char>> tight(m, std::vector<char>(m, 0));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c) tight[r][c] = at(r, c) - u[r + 1] - v[c + 1] <= eps ? 1 : 0;

  std::vector<std::size_t> col_owner(m, SIZE_MAX);
  out.label_of.assign(n, -1);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      if (!tight[r][c] || col_owner[c] != SIZE_MAX) continue;
      col_owner[c] = r;
      if (detail::has_perfect_matching(tight, r + 1, col_owner)) {
        out.label_of[r] = static_cast<std::int32_t>(c);
        break;
      }
      col_owner[c] = SIZE_MAX;
    }
    if (out.label_of[r] < 0) {
      // Numerical trouble with the tolerance; fall back to the solver's own matching.
      for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0 && p[j] <= n) out.label_of[p[j] - 1] = static_cast<std::int32_t>(j - 1);
      break;
    }
  }
  for (std::size_t r = 0; r < n; ++r) out.cost += cost[r * m + static_cast<std::size_t>(out.label_of[r])];
  if (out.cost >= kInfeasibleThreshold) throw InfeasibleMatching("no injective assignment of admissible labels");
  return out;
}

/// The injectivity term. Node v's indicators are laid out over its
/// admissible labels in increasing order; unary assignment costs live here.
class AssignmentOracle final : public MinOracle {
 public:
  /// `admissible[v]` are sorted label ids, `unary[v]` the matching costs.
  AssignmentOracle(std::size_t num_labels, std::vector<std::vector<std::size_t>> admissible,
                   std::vector<std::vector<double>> unary)
      : num_labels_(num_labels), admissible_(std::move(admissible)), unary_(std::move(unary)) {
    offsets_.assign(admissible_.size() + 1, 0);
    for (std::size_t v = 0; v < admissible_.size(); ++v) {
      if (admissible_[v].empty()) throw InfeasibleMatching("node " + std::to_string(v) + " has no admissible label");
      offsets_[v + 1] = offsets_[v] + admissible_[v].size();
    }
  }

  std::size_t num_nodes() const { return admissible_.size(); }
  std::size_t dimension() const override { return offsets_.back(); }
  std::size_t compact_size() const override { return admissible_.size(); }

  double work_estimate() const override {
    const double n = static_cast<double>(num_nodes());
    const double m = static_cast<double>(num_labels_);
    return m * m * m + n * m * m;
  }

  /// Cost matrix from the unaries plus lambda; inadmissible pairs get kSentinel.
  std::vector<double> cost_matrix(std::span<const double> lambda, double sign = 1.0) const {
    std::vector<double> c(num_nodes() * num_labels_, kSentinel);
    for (std::size_t v = 0; v < num_nodes(); ++v)
      for (std::size_t a = 0; a < admissible_[v].size(); ++a)
        c[v * num_labels_ + admissible_[v][a]] =
            sign * unary_[v][a] + (lambda.empty() ? 0.0 : lambda[offsets_[v] + a]);
    return c;
  }

  OracleResult solve(std::span<const double> lambda) const override {
    return from_assignment(solve_assignment(num_nodes(), num_labels_, cost_matrix(lambda)));
  }

  OracleResult solve_max_energy() const override {
    return from_assignment(solve_assignment(num_nodes(), num_labels_, cost_matrix({}, -1.0)));
  }

  void decode(const Compact& s, std::span<double> x) const override {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t v = 0; v < num_nodes(); ++v) x[offsets_[v] + static_cast<std::size_t>(s[v])] = 1.0;
  }

  double inner_product(std::span<const double> lambda, const Compact& s) const override {
    double r = 0.0;
    for (std::size_t v = 0; v < num_nodes(); ++v) r += lambda[offsets_[v] + static_cast<std::size_t>(s[v])];
    return r;
  }

  double energy(const Compact& s) const override {
    double e = 0.0;
    for (std::size_t v = 0; v < num_nodes(); ++v) e += unary_[v][static_cast<std::size_t>(s[v])];
    return e;
  }

  std::optional<Compact> encode(std::span<const double> x) const override {
    Compact s(num_nodes(), -1);
    std::vector<char> taken(num_labels_, 0);
    for (std::size_t v = 0; v < num_nodes(); ++v) {
      for (std::size_t a = 0; a < admissible_[v].size(); ++a) {
        const double xi = x[offsets_[v] + a];
        if (xi == 1.0) {
          if (s[v] >= 0) return std::nullopt;
          s[v] = static_cast<std::int32_t>(a);
        } else if (xi != 0.0) {
          return std::nullopt;
        }
      }
      if (s[v] < 0) return std::nullopt;
      auto& slot = taken[admissible_[v][static_cast<std::size_t>(s[v])]];
      if (slot) return std::nullopt;
      slot = 1;
    }
    return s;
  }

 private:
  // Compact objects store the position within the admissible list.
  OracleResult from_assignment(const Assignment& a) const {
    OracleResult r;
    r.labeling.resize(num_nodes());
    for (std::size_t v = 0; v < num_nodes(); ++v) {
      const auto& adm = admissible_[v];
      const auto it = std::lower_bound(adm.begin(), adm.end(), static_cast<std::size_t>(a.label_of[v]));
      r.labeling[v] = static_cast<std::int32_t>(it - adm.begin());
    }
    r.cost = energy(r.labeling);
    return r;
  }

  std::size_t num_labels_;
  std::vector<std::vector<std::size_t>> admissible_;
  std::vector<std::vector<double>> unary_;
  std::vector<std::size_t> offsets_;
};

struct MatchingAssignment {
  std::size_t node = 0;
  std::size_t label = 0;
  double cost = 0.0;
  friend bool operator==(const MatchingAssignment&, const MatchingAssignment&) = default;
};

struct MatchingEdge {
  std::size_t first = 0;   ///< assignment id
  std::size_t second = 0;  ///< assignment id
  double cost = 0.0;
  friend bool operator==(const MatchingEdge&, const MatchingEdge&) = default;
};

/// Graph matching instance in assignment/edge form: assignment a puts node
/// `node` on label `label`; an edge adds its cost when both of its
/// assignments are chosen.
struct MatchingInstance {
  std::size_t num_nodes = 0;
  std::size_t num_labels = 0;
  std::vector<MatchingAssignment> assignments;
  std::vector<MatchingEdge> edges;

  friend bool operator==(const MatchingInstance&, const MatchingInstance&) = default;

  /// Admissible labels per node, sorted, with the matching assignment ids.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> admissible() const {
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adm(num_nodes);
    for (std::size_t id = 0; id < assignments.size(); ++id) adm[assignments[id].node].emplace_back(assignments[id].label, id);
    for (auto& a : adm) std::sort(a.begin(), a.end());
    return adm;
  }

  void validate() const {
    if (num_nodes > num_labels) throw InfeasibleMatching("more nodes than labels");
    std::vector<std::vector<char>> seen(num_nodes, std::vector<char>(num_labels, 0));
    for (const auto& a : assignments) {
      if (a.node >= num_nodes || a.label >= num_labels) throw Error("assignment out of range");
      if (seen[a.node][a.label]) throw Error("duplicate assignment of node " + std::to_string(a.node));
      seen[a.node][a.label] = 1;
      if (!std::isfinite(a.cost)) throw Error("non-finite assignment cost");
    }
    for (std::size_t v = 0; v < num_nodes; ++v)
      if (std::find(seen[v].begin(), seen[v].end(), 1) == seen[v].end())
        throw InfeasibleMatching("node " + std::to_string(v) + " has no admissible label");
    for (const auto& e : edges) {
      if (e.first >= assignments.size() || e.second >= assignments.size()) throw Error("edge references unknown assignment");
      if (assignments[e.first].node == assignments[e.second].node) throw Error("edge joins two assignments of one node");
      if (!std::isfinite(e.cost)) throw Error("non-finite edge cost");
    }
  }

  /// Objective of a labeling given as label ids; nullopt if not injective
  /// or not admissible.
  std::optional<double> energy(std::span<const std::int32_t> label_of) const {
    std::vector<std::size_t> chosen(num_nodes, SIZE_MAX);
    for (std::size_t id = 0; id < assignments.size(); ++id)
      if (static_cast<std::size_t>(label_of[assignments[id].node]) == assignments[id].label) chosen[assignments[id].node] = id;
    std::vector<char> taken(num_labels, 0);
    double e = 0.0;
    for (std::size_t v = 0; v < num_nodes; ++v) {
      if (chosen[v] == SIZE_MAX || taken[static_cast<std::size_t>(label_of[v])]) return std::nullopt;
      taken[static_cast<std::size_t>(label_of[v])] = 1;
      e += assignments[chosen[v]].cost;
    }
    for (const auto& ed : edges)
      if (chosen[assignments[ed.first].node] == ed.first && chosen[assignments[ed.second].node] == ed.second) e += ed.cost;
    return e;
  }

  /// Pairwise part as an MRF over admissible-label positions, zero unaries.
  MrfInstance pairwise_mrf() const {
    const auto adm = admissible();
    std::vector<std::size_t> pos(assignments.size());
    MrfInstance mrf;
    for (std::size_t v = 0; v < num_nodes; ++v) {
      mrf.labels.push_back(adm[v].size());
      mrf.unary.emplace_back(adm[v].size(), 0.0);
      for (std::size_t a = 0; a < adm[v].size(); ++a) pos[adm[v][a].second] = a;
    }
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_of;
    for (const auto& e : edges) {
      std::size_t ia = e.first, ib = e.second;
      if (assignments[ia].node > assignments[ib].node) std::swap(ia, ib);
      const std::size_t u = assignments[ia].node, v = assignments[ib].node;
      auto [it, fresh] = edge_of.try_emplace({u, v}, mrf.edges.size());
      if (fresh) mrf.edges.push_back({u, v, std::vector<double>(mrf.labels[u] * mrf.labels[v], 0.0)});
      mrf.edges[it->second].table[pos[ia] * mrf.labels[v] + pos[ib]] += e.cost;
    }
    return mrf;
  }
};

/// Tree terms for the pairwise costs plus one assignment term.
inline Decomposition build_matching_decomposition(const MatchingInstance& inst) {
  inst.validate();
  const auto adm = inst.admissible();
  std::vector<std::vector<std::size_t>> labels(inst.num_nodes);
  std::vector<std::vector<double>> unary(inst.num_nodes);
  for (std::size_t v = 0; v < inst.num_nodes; ++v)
    for (const auto& [label, id] : adm[v]) {
      labels[v].push_back(label);
      unary[v].push_back(inst.assignments[id].cost);
    }
  auto oracle = std::make_shared<AssignmentOracle>(inst.num_labels, std::move(labels), std::move(unary));
  oracle->solve(std::vector<double>(oracle->dimension(), 0.0));  // throws InfeasibleMatching

  const MrfInstance mrf = inst.pairwise_mrf();
  std::vector<Term> terms = mrf_tree_terms(mrf, forest_partition(mrf), /*cover_isolated=*/false);
  Term assign;
  assign.index_map.resize(mrf.num_indicators());
  for (std::size_t i = 0; i < assign.index_map.size(); ++i) assign.index_map[i] = i;
  assign.oracle = std::move(oracle);
  terms.push_back(std::move(assign));
  return build_decomposition(mrf.num_indicators(), std::move(terms));
}

}  // namespace fwmap
