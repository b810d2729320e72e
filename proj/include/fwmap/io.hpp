#pragma once

// Text formats:
//   MRF      UAI MARKOV layout, factors of arity 1 or 2, raw energies.
//   TOMO     "TOMO H W k c" header, then "ROW b n v_1 ... v_n" lines with
//            row-major pixel indices.
//   GM       "p N0 N1 A E", "a id i j cost", "e id1 id2 cost" lines.
//   Trace    CSV "time_s,iter,h,h_best,A,B,f_prox,solver".

#include <cerrno>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fwmap/errors.hpp"
#include "fwmap/matching.hpp"
#include "fwmap/tomography.hpp"
#include "fwmap/trace.hpp"
#include "fwmap/tree_mrf.hpp"

namespace fwmap {

/// Whitespace tokenizer that remembers line numbers for error messages.
class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  std::size_t line() const { return line_; }

  std::string_view next(const char* what) {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError(std::string("unexpected end of input, expected ") + what, line_);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  std::size_t next_size(const char* what) {
    const auto tok = next(what);
    const std::string s(tok);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size() || v < 0)
      throw ParseError(std::string("expected non-negative integer for ") + what + ", got '" + s + "'", line_);
    return static_cast<std::size_t>(v);
  }

  long long next_int(const char* what) {
    const auto tok = next(what);
    const std::string s(tok);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size())
      throw ParseError(std::string("expected integer for ") + what + ", got '" + s + "'", line_);
    return v;
  }

  double next_real(const char* what) {
    const auto tok = next(what);
    const std::string s(tok);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (errno == ERANGE || end != s.c_str() + s.size() || !std::isfinite(v))
      throw ParseError(std::string("expected finite real for ") + what + ", got '" + s + "'", line_);
    return v;
  }

  void expect_end() {
    if (!at_end()) throw ParseError("trailing garbage '" + std::string(next("token")) + "'", line_);
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Shortest text that reads back to the same double.
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------- MRF

/// Parses a UAI MARKOV file. Pairwise factors over the same node pair are
/// summed; edges are stored with u < v.
inline MrfInstance parse_mrf(std::string_view text) {
  Tokenizer tok(text);
  const auto kind = tok.next("model type");
  if (kind != "MARKOV") throw ParseError("expected MARKOV header, got '" + std::string(kind) + "'", tok.line());
  MrfInstance mrf;
  const std::size_t n = tok.next_size("variable count");
  mrf.labels.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    mrf.labels[v] = tok.next_size("cardinality");
    if (mrf.labels[v] == 0) throw ParseError("zero cardinality", tok.line());
    mrf.unary.emplace_back(mrf.labels[v], 0.0);
  }
  const std::size_t num_factors = tok.next_size("factor count");
  std::vector<std::vector<std::size_t>> scopes(num_factors);
  for (auto& scope : scopes) {
    const std::size_t arity = tok.next_size("factor arity");
    if (arity == 0 || arity > 2) throw ArityError("factor arity " + std::to_string(arity) + " not supported", tok.line());
    for (std::size_t k = 0; k < arity; ++k) {
      const std::size_t v = tok.next_size("scope variable");
      if (v >= n) throw ParseError("scope variable " + std::to_string(v) + " out of range", tok.line());
      scope.push_back(v);
    }
    if (arity == 2 && scope[0] == scope[1]) throw ParseError("pairwise factor over a single variable", tok.line());
  }
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_of;
  for (const auto& scope : scopes) {
    std::size_t expected = 1;
    for (std::size_t v : scope) expected *= mrf.labels[v];
    const std::size_t entries = tok.next_size("table size");
    if (entries != expected)
      throw ParseError("table has " + std::to_string(entries) + " entries, expected " + std::to_string(expected), tok.line());
    std::vector<double> values(entries);
    for (double& x : values) x = tok.next_real("table entry");
    if (scope.size() == 1) {
      for (std::size_t a = 0; a < entries; ++a) mrf.unary[scope[0]][a] += values[a];
      continue;
    }
    const std::size_t u = std::min(scope[0], scope[1]), v = std::max(scope[0], scope[1]);
    auto [it, fresh] = edge_of.try_emplace({u, v}, mrf.edges.size());
    if (fresh) mrf.edges.push_back({u, v, std::vector<double>(mrf.labels[u] * mrf.labels[v], 0.0)});
    auto& table = mrf.edges[it->second].table;
    const std::size_t l0 = mrf.labels[scope[0]], l1 = mrf.labels[scope[1]];
    for (std::size_t a = 0; a < l0; ++a)
      for (std::size_t b = 0; b < l1; ++b) {
        const double x = values[a * l1 + b];
        if (scope[0] == u)
          table[a * l1 + b] += x;
        else
          table[b * l0 + a] += x;
      }
  }
  tok.expect_end();
  return mrf;
}

inline std::string write_mrf(const MrfInstance& mrf) {
  std::ostringstream out;
  out << "MARKOV\n" << mrf.num_nodes() << "\n";
  for (std::size_t v = 0; v < mrf.num_nodes(); ++v) out << (v ? " " : "") << mrf.labels[v];
  out << "\n" << mrf.num_nodes() + mrf.edges.size() << "\n";
  for (std::size_t v = 0; v < mrf.num_nodes(); ++v) out << "1 " << v << "\n";
  for (const auto& e : mrf.edges) out << "2 " << e.u << " " << e.v << "\n";
  auto table = [&](const std::vector<double>& t) {
    out << "\n" << t.size() << "\n";
    for (std::size_t k = 0; k < t.size(); ++k) out << (k ? " " : "") << format_real(t[k]);
    out << "\n";
  };
  for (const auto& u : mrf.unary) table(u);
  for (const auto& e : mrf.edges) table(e.table);
  return out.str();
}

// ---------------------------------------------------------------- tomography

inline TomographyInstance parse_tomography(std::string_view text) {
  Tokenizer tok(text);
  const auto head = tok.next("TOMO header");
  if (head != "TOMO") throw ParseError("expected TOMO header, got '" + std::string(head) + "'", tok.line());
  TomographyInstance inst;
  inst.height = tok.next_size("grid height");
  inst.width = tok.next_size("grid width");
  inst.max_label = tok.next_size("label bound");
  inst.truncation = tok.next_real("truncation");
  if (inst.height == 0 || inst.width == 0) throw ParseError("empty grid", tok.line());
  while (!tok.at_end()) {
    const auto kw = tok.next("ROW");
    const std::size_t line = tok.line();
    if (kw != "ROW") throw ParseError("expected ROW, got '" + std::string(kw) + "'", line);
    ProjectionRow row;
    row.max_label = inst.max_label;
    row.target = tok.next_int("row sum");
    const std::size_t n = tok.next_size("row length");
    if (n == 0) throw ParseError("row without pixels", line);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t v = tok.next_size("pixel index");
      if (v >= inst.num_pixels()) throw ParseError("pixel " + std::to_string(v) + " outside the grid", tok.line());
      row.pixels.push_back(v);
    }
    row.validate();
    inst.rows.push_back(std::move(row));
  }
  return inst;
}

inline std::string write_tomography(const TomographyInstance& inst) {
  std::ostringstream out;
  out << "TOMO " << inst.height << " " << inst.width << " " << inst.max_label << " " << format_real(inst.truncation)
      << "\n";
  for (const auto& row : inst.rows) {
    out << "ROW " << row.target << " " << row.pixels.size();
    for (std::size_t v : row.pixels) out << " " << v;
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------- graph matching

inline MatchingInstance parse_graph_matching(std::string_view text) {
  Tokenizer tok(text);
  MatchingInstance inst;
  if (tok.next("p line") != "p") throw ParseError("expected 'p' line", tok.line());
  inst.num_nodes = tok.next_size("left node count");
  inst.num_labels = tok.next_size("right node count");
  const std::size_t num_assign = tok.next_size("assignment count");
  const std::size_t num_edges = tok.next_size("edge count");
  std::vector<char> defined(num_assign, 0);
  inst.assignments.resize(num_assign);
  std::vector<std::vector<char>> pair_seen(inst.num_nodes, std::vector<char>(inst.num_labels, 0));
  while (!tok.at_end()) {
    const auto kw = tok.next("line type");
    const std::size_t line = tok.line();
    if (kw == "a") {
      const std::size_t id = tok.next_size("assignment id");
      const std::size_t i = tok.next_size("left node");
      const std::size_t j = tok.next_size("right node");
      const double cost = tok.next_real("assignment cost");
      if (id >= num_assign) throw ParseError("assignment id " + std::to_string(id) + " out of range", line);
      if (defined[id]) throw ParseError("assignment " + std::to_string(id) + " defined twice", line);
      if (i >= inst.num_nodes || j >= inst.num_labels) throw ParseError("assignment node out of range", line);
      if (pair_seen[i][j]) throw ParseError("duplicate assignment of node " + std::to_string(i), line);
      pair_seen[i][j] = 1;
      defined[id] = 1;
      inst.assignments[id] = {i, j, cost};
    } else if (kw == "e") {
      const std::size_t a = tok.next_size("assignment id");
      const std::size_t b = tok.next_size("assignment id");
      const double cost = tok.next_real("edge cost");
      if (a >= num_assign || b >= num_assign || !defined[a] || !defined[b])
        throw ParseError("edge references unknown assignment", line);
      if (inst.assignments[a].node == inst.assignments[b].node)
        throw ParseError("edge joins two assignments of the same node", line);
      inst.edges.push_back({a, b, cost});
    } else {
      throw ParseError("unknown line type '" + std::string(kw) + "'", line);
    }
  }
  for (std::size_t id = 0; id < num_assign; ++id)
    if (!defined[id]) throw ParseError("assignment " + std::to_string(id) + " never defined", tok.line());
  if (inst.edges.size() != num_edges)
    throw ParseError("header declares " + std::to_string(num_edges) + " edges, found " +
                         std::to_string(inst.edges.size()),
                     tok.line());
  return inst;
}

inline std::string write_graph_matching(const MatchingInstance& inst) {
  std::ostringstream out;
  out << "p " << inst.num_nodes << " " << inst.num_labels << " " << inst.assignments.size() << " " << inst.edges.size()
      << "\n";
  for (std::size_t id = 0; id < inst.assignments.size(); ++id) {
    const auto& a = inst.assignments[id];
    out << "a " << id << " " << a.node << " " << a.label << " " << format_real(a.cost) << "\n";
  }
  for (const auto& e : inst.edges) out << "e " << e.first << " " << e.second << " " << format_real(e.cost) << "\n";
  return out.str();
}

// ---------------------------------------------------------------- trace

inline constexpr std::string_view kTraceHeader = "time_s,iter,h,h_best,A,B,f_prox,solver";

inline std::string format_trace(const std::vector<TraceRecord>& records) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& r : records) {
    out += format_real(r.wall_time_s) + ',' + std::to_string(r.mp_iteration) + ',' + format_real(r.h_current) + ',' +
           format_real(r.h_best) + ',' + format_real(r.a_gap) + ',' + format_real(r.b_gap) + ',' +
           format_real(r.f_prox) + ',' + r.solver + '\n';
  }
  return out;
}

inline void write_trace(const std::vector<TraceRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << format_trace(records);
  if (!out) throw Error("write failed for " + path);
}

inline std::vector<TraceRecord> parse_trace(std::string_view text) {
  std::vector<TraceRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (header) {
      if (line != kTraceHeader) throw ParseError("unexpected trace header", line_no);
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 8) throw ParseError("trace row needs 8 fields", line_no);
    auto real = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) throw ParseError("bad real '" + s + "'", line_no);
      return v;
    };
    TraceRecord r;
    r.wall_time_s = real(fields[0]);
    char* end = nullptr;
    r.mp_iteration = std::strtoull(fields[1].c_str(), &end, 10);
    if (fields[1].empty() || end != fields[1].c_str() + fields[1].size()) throw ParseError("bad iteration", line_no);
    r.h_current = real(fields[2]);
    r.h_best = real(fields[3]);
    r.a_gap = real(fields[4]);
    r.b_gap = real(fields[5]);
    r.f_prox = real(fields[6]);
    r.solver = fields[7];
    records.push_back(std::move(r));
  }
  if (header) throw ParseError("empty trace", 0);
  return records;
}

}  // namespace fwmap
