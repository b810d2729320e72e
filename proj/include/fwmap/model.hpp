#pragma once

// Problem representation for Lagrangean decomposition:
//
//   f(x) = sum_t f_t(x_{A_t}),  x in {0,1}^d
//
// Each term t sees its variables through an index map A_t and is accessed
// only through a min-oracle. Multipliers lambda^t live on the coordinates
// of A_t and are constrained to the subspace where, for every variable i,
// the multipliers of all terms containing i sum to zero.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fwmap/errors.hpp"

namespace fwmap {

/// Compact encoding of one element of dom f_t (one integer per node/pixel).
using Compact = std::vector<std::int32_t>;

struct OracleResult {
  Compact labeling;
  double cost = 0.0;  ///< f_t at the decoded labeling, multipliers excluded.
};

/// Access to a single term f_t.
///
/// Implementations enumerate dom f_t only; infinite costs never appear.
/// decode() realizes the bijection from compact objects onto dom f_t, and
/// inner_product() must agree exactly with <lambda, decode(s)>.
class MinOracle {
 public:
  virtual ~MinOracle() = default;

  /// |A_t|, the number of Boolean coordinates of the term.
  virtual std::size_t dimension() const = 0;
  /// Length of a compact object.
  virtual std::size_t compact_size() const = 0;

  /// argmin_{x in dom f_t} f_t(x) + <lambda, x>.
  virtual OracleResult solve(std::span<const double> lambda) const = 0;
  virtual void decode(const Compact& s, std::span<double> x) const = 0;
  virtual double inner_product(std::span<const double> lambda, const Compact& s) const = 0;
  virtual double energy(const Compact& s) const = 0;
  /// Inverse of decode(); nullopt when x is outside dom f_t.
  virtual std::optional<Compact> encode(std::span<const double> x) const = 0;

  /// argmax_{x in dom f_t} f_t(x). Only needed for max-vertex initialization.
  virtual OracleResult solve_max_energy() const {
    throw OracleFailure("oracle does not support maximum-energy queries");
  }

  /// Rough operation count of one solve() call, used by the work clock.
  virtual double work_estimate() const { return static_cast<double>(dimension()); }
};

struct Term {
  std::vector<std::size_t> index_map;  ///< local coordinate -> global variable
  std::shared_ptr<const MinOracle> oracle;

  std::size_t arity() const { return index_map.size(); }
};

class Decomposition {
 public:
  Decomposition() = default;

  std::size_t num_vars() const { return num_vars_; }
  std::size_t num_terms() const { return terms_.size(); }
  const Term& term(std::size_t t) const { return terms_[t]; }
  const std::vector<Term>& terms() const { return terms_; }

  /// T_i: indices of the terms containing variable i.
  const std::vector<std::size_t>& terms_of(std::size_t i) const { return terms_of_[i]; }
  std::size_t multiplicity(std::size_t i) const { return terms_of_[i].size(); }

  /// 1/|T_i| for each local coordinate of term t.
  std::span<const double> inverse_multiplicity(std::size_t t) const { return inv_mult_[t]; }

  /// Position of variable i inside term t's index map, for each t in T_i
  /// (parallel to terms_of(i)).
  const std::vector<std::size_t>& local_slots(std::size_t i) const { return slots_[i]; }

 private:
  friend Decomposition build_decomposition(std::size_t, std::vector<Term>);

  std::size_t num_vars_ = 0;
  std::vector<Term> terms_;
  std::vector<std::vector<std::size_t>> terms_of_;
  std::vector<std::vector<std::size_t>> slots_;
  std::vector<std::vector<double>> inv_mult_;
};

/// Builds the inverted index T_i. Every variable in [0, num_vars) must be
/// covered by at least one term and index maps must be injective.
inline Decomposition build_decomposition(std::size_t num_vars, std::vector<Term> terms) {
  if (terms.empty()) throw Error("a decomposition needs at least one term");
  Decomposition d;
  d.num_vars_ = num_vars;
  d.terms_of_.assign(num_vars, {});
  d.slots_.assign(num_vars, {});
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const Term& term = terms[t];
    if (!term.oracle) throw Error("term " + std::to_string(t) + " has no oracle");
    if (term.oracle->dimension() != term.arity())
      throw Error("term " + std::to_string(t) + ": oracle dimension does not match index map");
    for (std::size_t k = 0; k < term.index_map.size(); ++k) {
      const std::size_t i = term.index_map[k];
      if (i >= num_vars)
        throw Error("term " + std::to_string(t) + " references variable " + std::to_string(i) +
                    " >= " + std::to_string(num_vars));
      if (!d.terms_of_[i].empty() && d.terms_of_[i].back() == t)
        throw DuplicateIndexInTerm("term " + std::to_string(t) + " lists variable " +
                                   std::to_string(i) + " twice");
      d.terms_of_[i].push_back(t);
      d.slots_[i].push_back(k);
    }
  }
  for (std::size_t i = 0; i < num_vars; ++i)
    if (d.terms_of_[i].empty()) throw VariableUncovered(i);

  d.inv_mult_.resize(terms.size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    auto& w = d.inv_mult_[t];
    w.reserve(terms[t].arity());
    for (std::size_t i : terms[t].index_map) w.push_back(1.0 / static_cast<double>(d.terms_of_[i].size()));
  }
  d.terms_ = std::move(terms);
  return d;
}

/// One real vector per term, shaped like the index maps.
struct MultiplierVector {
  std::vector<std::vector<double>> blocks;

  static MultiplierVector zeros(const Decomposition& d) {
    MultiplierVector m;
    m.blocks.reserve(d.num_terms());
    for (const Term& t : d.terms()) m.blocks.emplace_back(t.arity(), 0.0);
    return m;
  }

  std::vector<double>& operator[](std::size_t t) { return blocks[t]; }
  const std::vector<double>& operator[](std::size_t t) const { return blocks[t]; }
  std::size_t size() const { return blocks.size(); }

  double max_abs() const {
    double m = 0.0;
    for (const auto& b : blocks)
      for (double v : b) m = std::max(m, std::abs(v));
    return m;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : blocks)
      for (double v : b) s += v * v;
    return s;
  }

  friend bool operator==(const MultiplierVector&, const MultiplierVector&) = default;
};

inline double squared_distance(const MultiplierVector& a, const MultiplierVector& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t k = 0; k < a[t].size(); ++k) {
      const double diff = a[t][k] - b[t][k];
      s += diff * diff;
    }
  return s;
}

/// max_i sum_{t in T_i} |delta^t_i|
inline double norm_1_inf(const Decomposition& d, const MultiplierVector& delta) {
  double best = 0.0;
  for (std::size_t i = 0; i < d.num_vars(); ++i) {
    double s = 0.0;
    const auto& ts = d.terms_of(i);
    const auto& ks = d.local_slots(i);
    for (std::size_t j = 0; j < ts.size(); ++j) s += std::abs(delta[ts[j]][ks[j]]);
    best = std::max(best, s);
  }
  return best;
}

/// Largest violation of the zero-column-sum constraint.
inline double lambda_space_violation(const Decomposition& d, const MultiplierVector& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < d.num_vars(); ++i) {
    double s = 0.0;
    const auto& ts = d.terms_of(i);
    const auto& ks = d.local_slots(i);
    for (std::size_t j = 0; j < ts.size(); ++j) s += m[ts[j]][ks[j]];
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

inline bool in_lambda_space(const Decomposition& d, const MultiplierVector& m) {
  return lambda_space_violation(d, m) <= 1e-9 * (1.0 + m.max_abs());
}

/// Orthogonal projection onto the multiplier subspace: subtract, for each
/// variable, the mean over the terms that contain it.
inline MultiplierVector project_to_lambda_space(const Decomposition& d, MultiplierVector raw) {
  for (std::size_t i = 0; i < d.num_vars(); ++i) {
    const auto& ts = d.terms_of(i);
    const auto& ks = d.local_slots(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < ts.size(); ++j) mean += raw[ts[j]][ks[j]];
    mean /= static_cast<double>(ts.size());
    for (std::size_t j = 0; j < ts.size(); ++j) raw[ts[j]][ks[j]] -= mean;
  }
  return raw;
}

struct DualEvaluation {
  double value = 0.0;
  std::vector<OracleResult> argmins;
};

/// h(lambda) = sum_t min_{x in dom f_t} f_t(x) + <lambda^t, x>.
inline DualEvaluation eval_dual(const Decomposition& d, const MultiplierVector& lambda) {
  DualEvaluation out;
  out.argmins.reserve(d.num_terms());
  for (std::size_t t = 0; t < d.num_terms(); ++t) {
    const MinOracle& oracle = *d.term(t).oracle;
    OracleResult r = oracle.solve(lambda[t]);
    out.value += r.cost + oracle.inner_product(lambda[t], r.labeling);
    out.argmins.push_back(std::move(r));
  }
  return out;
}

/// h(lambda) - ||lambda - mu||^2 / (2c).
inline double eval_prox_objective(const Decomposition& d, const MultiplierVector& lambda,
                                  const MultiplierVector& center, double c) {
  return eval_dual(d, lambda).value - squared_distance(lambda, center) / (2.0 * c);
}

/// Energy of a global 0/1 assignment; nullopt if some term rejects it.
inline std::optional<double> evaluate_assignment(const Decomposition& d, std::span<const double> x) {
  double total = 0.0;
  std::vector<double> local;
  for (const Term& t : d.terms()) {
    local.resize(t.arity());
    for (std::size_t k = 0; k < t.arity(); ++k) local[k] = x[t.index_map[k]];
    auto s = t.oracle->encode(local);
    if (!s) return std::nullopt;
    total += t.oracle->energy(*s);
  }
  return total;
}

/// Per-term convex-combination point y^t = (y_star^t, y_circ^t) plus the
/// running average nu_i = (1/|T_i|) sum_{t in T_i} (c y^t_i + mu^t_i).
struct PrimalIterate {
  std::vector<std::vector<double>> star;
  std::vector<double> circ;
  std::vector<double> nu;
};

inline std::vector<double> compute_nu(const Decomposition& d, const PrimalIterate& y,
                                      const MultiplierVector& center, double c) {
  std::vector<double> nu(d.num_vars(), 0.0);
  for (std::size_t i = 0; i < d.num_vars(); ++i) {
    const auto& ts = d.terms_of(i);
    const auto& ks = d.local_slots(i);
    double s = 0.0;
    for (std::size_t j = 0; j < ts.size(); ++j) s += c * y.star[ts[j]][ks[j]] + center[ts[j]][ks[j]];
    nu[i] = s / static_cast<double>(ts.size());
  }
  return nu;
}

/// Largest relative deviation between the maintained and recomputed nu.
inline double nu_drift(const Decomposition& d, const PrimalIterate& y, const MultiplierVector& center,
                       double c) {
  const auto fresh = compute_nu(d, y, center, c);
  double worst = 0.0;
  for (std::size_t i = 0; i < fresh.size(); ++i)
    worst = std::max(worst, std::abs(fresh[i] - y.nu[i]) / (1.0 + std::abs(fresh[i])));
  return worst;
}

}  // namespace fwmap
