#pragma once

// Discrete tomography: a pixel grid with truncated-L1 smoothness plus one
// term per projection row enforcing sum_v x_v = b over integer labels.
//
// A row term is solved by splitting its variables recursively in halves and
// combining per-segment cost tables with (min,+) convolutions, then walking
// back down from the root fixed to the target sum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fwmap/model.hpp"
#include "fwmap/tree_mrf.hpp"

namespace fwmap {

/// Finite stand-in for +infinity in cost tables. Anything at or above
/// kInfeasibleThreshold is treated as infeasible.
inline constexpr double kSentinel = 1e30;
inline constexpr double kInfeasibleThreshold = 1e29;

/// phi(l) = min_{l'} left(l') + right(l - l'), saturated at kSentinel.
inline std::vector<double> min_convolution_naive(std::span<const double> left, std::span<const double> right) {
  if (left.empty() || right.empty()) return {};
  std::vector<double> out(left.size() + right.size() - 1, kSentinel);
  for (std::size_t a = 0; a < left.size(); ++a)
    for (std::size_t b = 0; b < right.size(); ++b) {
      const double v = std::min(left[a] + right[b], kSentinel);
      if (v < out[a + b]) out[a + b] = v;
    }
  return out;
}

/// Exact (min,+) convolution that visits left entries in increasing order
/// of cost and stops once left(l') + min(right) cannot improve the output.
/// Produces the same table as min_convolution_naive.
inline std::vector<double> min_convolution_pruned(std::span<const double> left, std::span<const double> right) {
  if (left.empty() || right.empty()) return {};
  std::vector<std::size_t> by_cost(left.size());
  std::iota(by_cost.begin(), by_cost.end(), std::size_t{0});
  std::stable_sort(by_cost.begin(), by_cost.end(), [&](std::size_t x, std::size_t y) { return left[x] < left[y]; });
  const double right_min = *std::min_element(right.begin(), right.end());

  const std::size_t len = left.size() + right.size() - 1;
  std::vector<double> out(len, kSentinel);
  for (std::size_t l = 0; l < len; ++l) {
    const std::size_t lo = l >= right.size() ? l - right.size() + 1 : 0;
    const std::size_t hi = std::min(l, left.size() - 1);
    double best = kSentinel;
    for (std::size_t a : by_cost) {
      if (std::min(left[a] + right_min, kSentinel) >= best) break;
      if (a < lo || a > hi) continue;
      const double v = std::min(left[a] + right[l - a], kSentinel);
      if (v < best) best = v;
    }
    out[l] = best;
  }
  return out;
}

enum class ConvolutionMode { naive, pruned };

inline std::vector<double> min_convolution(std::span<const double> left, std::span<const double> right,
                                           ConvolutionMode mode = ConvolutionMode::naive) {
  return mode == ConvolutionMode::pruned ? min_convolution_pruned(left, right) : min_convolution_naive(left, right);
}

struct ProjectionRow {
  std::vector<std::size_t> pixels;  ///< variables whose labels are summed
  long long target = 0;             ///< b
  std::size_t max_label = 1;        ///< k; labels are 0..k

  void validate() const {
    const auto cap = static_cast<long long>(pixels.size() * max_label);
    if (target < 0 || target > cap)
      throw InfeasibleRow("row sum " + std::to_string(target) + " outside [0, " + std::to_string(cap) + "]");
  }

  friend bool operator==(const ProjectionRow&, const ProjectionRow&) = default;
};

struct TomographyLabeling {
  Compact labels;
  double value = 0.0;  ///< phi_root(b) = sum_i lambda_i(x_i)
};

/// min sum_i costs[i][x_i] s.t. sum_i x_i = target, x_i in {0..k}.
/// `costs` is row-major n x (k+1). Segments are split at floor((i+j)/2);
/// split ties favour the smaller left sum.
inline TomographyLabeling tomo_min_oracle(std::size_t n, std::size_t k, long long target, std::span<const double> costs,
                                          ConvolutionMode mode = ConvolutionMode::naive) {
  if (n == 0) throw InfeasibleRow("row has no pixels");
  if (target < 0 || target > static_cast<long long>(n * k))
    throw InfeasibleRow("row sum " + std::to_string(target) + " outside [0, " + std::to_string(n * k) + "]");
  if (costs.size() != n * (k + 1)) throw Error("cost table must be n x (k+1)");

  // Partition tree stored explicitly: node = segment [i, j] with its table.
  struct Node {
    std::size_t i, j;
    std::size_t left = 0, right = 0;  // child node ids, valid when i < j
    std::vector<double> phi;
  };
  std::vector<Node> nodes;
  nodes.reserve(2 * n);
  auto build = [&](auto&& self, std::size_t i, std::size_t j) -> std::size_t {
    const std::size_t id = nodes.size();
    nodes.push_back(Node{i, j, 0, 0, {}});
    if (i == j) {
      nodes[id].phi.assign(costs.begin() + static_cast<std::ptrdiff_t>(i * (k + 1)),
                           costs.begin() + static_cast<std::ptrdiff_t>((i + 1) * (k + 1)));
      return id;
    }
    const std::size_t m = (i + j) / 2;
    const std::size_t l = self(self, i, m);
    const std::size_t r = self(self, m + 1, j);
    nodes[id].left = l;
    nodes[id].right = r;
    nodes[id].phi = min_convolution(nodes[l].phi, nodes[r].phi, mode);
    return id;
  };
  const std::size_t root = build(build, 0, n - 1);

  TomographyLabeling out;
  out.value = nodes[root].phi[static_cast<std::size_t>(target)];
  if (out.value >= kInfeasibleThreshold) throw InfeasibleRow("row sum is not attainable");
  out.labels.assign(n, 0);

  auto descend = [&](auto&& self, std::size_t id, std::size_t sum) -> void {
    const Node& node = nodes[id];
    if (node.i == node.j) {
      out.labels[node.i] = static_cast<std::int32_t>(sum);
      return;
    }
    const auto& pl = nodes[node.left].phi;
    const auto& pr = nodes[node.right].phi;
    const std::size_t lo = sum >= pr.size() ? sum - pr.size() + 1 : 0;
    const std::size_t hi = std::min(sum, pl.size() - 1);
    std::size_t best = lo;
    double best_v = pl[lo] + pr[sum - lo];
    for (std::size_t a = lo + 1; a <= hi; ++a) {
      const double v = pl[a] + pr[sum - a];
      if (v < best_v) {
        best_v = v;
        best = a;
      }
    }
    self(self, node.left, best);
    self(self, node.right, sum - best);
  };
  descend(descend, root, static_cast<std::size_t>(target));
  return out;
}

/// Row term: zero energy on every labeling meeting the sum, indicators
/// (pixel, label) laid out pixel-major.
class ProjectionOracle final : public MinOracle {
 public:
  ProjectionOracle(std::size_t num_pixels, std::size_t max_label, long long target,
                   ConvolutionMode mode = ConvolutionMode::naive)
      : n_(num_pixels), k_(max_label), target_(target), mode_(mode) {
    ProjectionRow{std::vector<std::size_t>(n_), target_, k_}.validate();
    if (n_ == 0) throw InfeasibleRow("row has no pixels");
  }

  std::size_t dimension() const override { return n_ * (k_ + 1); }
  std::size_t compact_size() const override { return n_; }

  double work_estimate() const override {
    // Naive convolution cost over a balanced partition tree.
    const double width = static_cast<double>(n_ * k_ + 1);
    return width * width * std::log2(static_cast<double>(n_) + 1.0) + static_cast<double>(dimension());
  }

  OracleResult solve(std::span<const double> lambda) const override {
    return OracleResult{tomo_min_oracle(n_, k_, target_, lambda, mode_).labels, 0.0};
  }

  OracleResult solve_max_energy() const override {
    const std::vector<double> zero(dimension(), 0.0);
    return solve(zero);
  }

  void decode(const Compact& s, std::span<double> x) const override {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t v = 0; v < n_; ++v) x[v * (k_ + 1) + static_cast<std::size_t>(s[v])] = 1.0;
  }

  double inner_product(std::span<const double> lambda, const Compact& s) const override {
    double r = 0.0;
    for (std::size_t v = 0; v < n_; ++v) r += lambda[v * (k_ + 1) + static_cast<std::size_t>(s[v])];
    return r;
  }

  double energy(const Compact&) const override { return 0.0; }

  std::optional<Compact> encode(std::span<const double> x) const override {
    Compact s(n_, -1);
    long long sum = 0;
    for (std::size_t v = 0; v < n_; ++v) {
      for (std::size_t a = 0; a <= k_; ++a) {
        const double xi = x[v * (k_ + 1) + a];
        if (xi == 1.0) {
          if (s[v] >= 0) return std::nullopt;
          s[v] = static_cast<std::int32_t>(a);
        } else if (xi != 0.0) {
          return std::nullopt;
        }
      }
      if (s[v] < 0) return std::nullopt;
      sum += s[v];
    }
    if (sum != target_) return std::nullopt;
    return s;
  }

 private:
  std::size_t n_;
  std::size_t k_;
  long long target_;
  ConvolutionMode mode_;
};

struct TomographyInstance {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t max_label = 1;  ///< k
  double truncation = 1.0;    ///< c in min(|a - b|, c)
  std::vector<ProjectionRow> rows;

  std::size_t num_pixels() const { return height * width; }

  /// Grid MRF with zero unaries and truncated-L1 pairwise costs between
  /// 4-neighbours.
  MrfInstance grid_mrf() const {
    MrfInstance mrf;
    const std::size_t labels = max_label + 1;
    mrf.labels.assign(num_pixels(), labels);
    mrf.unary.assign(num_pixels(), std::vector<double>(labels, 0.0));
    std::vector<double> table(labels * labels);
    for (std::size_t a = 0; a < labels; ++a)
      for (std::size_t b = 0; b < labels; ++b)
        table[a * labels + b] =
            std::min(std::abs(static_cast<double>(a) - static_cast<double>(b)), truncation);
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) {
        const std::size_t v = r * width + c;
        if (c + 1 < width) mrf.edges.push_back({v, v + 1, table});
        if (r + 1 < height) mrf.edges.push_back({v, v + width, table});
      }
    return mrf;
  }

  /// Energy of a labeling; nullopt when it violates a row.
  std::optional<double> energy(std::span<const std::int32_t> x) const {
    for (const ProjectionRow& row : rows) {
      long long s = 0;
      for (std::size_t v : row.pixels) s += x[v];
      if (s != row.target) return std::nullopt;
    }
    return grid_mrf().energy(x);
  }

  void validate() const {
    for (const ProjectionRow& row : rows) {
      if (row.max_label != max_label) throw Error("row label bound differs from the instance");
      for (std::size_t v : row.pixels)
        if (v >= num_pixels()) throw Error("row references pixel " + std::to_string(v) + " outside the grid");
      row.validate();
    }
  }

  friend bool operator==(const TomographyInstance&, const TomographyInstance&) = default;
};

/// Tree terms over the grid plus one term per projection row.
inline Decomposition build_tomography_decomposition(const TomographyInstance& inst,
                                                    ConvolutionMode mode = ConvolutionMode::naive) {
  inst.validate();
  const MrfInstance mrf = inst.grid_mrf();
  std::vector<Term> terms = mrf_tree_terms(mrf, forest_partition(mrf));
  const std::size_t labels = inst.max_label + 1;
  for (const ProjectionRow& row : inst.rows) {
    Term term;
    for (std::size_t v : row.pixels)
      for (std::size_t a = 0; a < labels; ++a) term.index_map.push_back(v * labels + a);
    term.oracle = std::make_shared<ProjectionOracle>(row.pixels.size(), inst.max_label, row.target, mode);
    terms.push_back(std::move(term));
  }
  return build_decomposition(mrf.num_indicators(), std::move(terms));
}

}  // namespace fwmap
