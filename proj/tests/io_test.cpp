#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "fwmap/io.hpp"
#include "fwmap/proximal_driver.hpp"
#include "fwmap/subgradient.hpp"

#ifndef FWMAP_FIXTURE_DIR
#error "FWMAP_FIXTURE_DIR must be defined"
#endif

namespace fwmap {
namespace {

std::string fixture(const char* name) { return read_file(std::string(FWMAP_FIXTURE_DIR) + "/" + name); }

TEST(ParseMrf, SingleNode) {
  const auto m = parse_mrf("MARKOV\n1\n2\n1\n1 0\n\n2\n0 -2\n");
  ASSERT_EQ(m.num_nodes(), 1u);
  EXPECT_EQ(m.unary[0], (std::vector<double>{0, -2}));
  EXPECT_DOUBLE_EQ(std::min(m.energy(std::vector<std::int32_t>{0}), m.energy(std::vector<std::int32_t>{1})), -2.0);
}

TEST(ParseMrf, ChainFixtureMatchesOracleExample) {
  const auto m = parse_mrf(fixture("chain2.uai"));
  EXPECT_EQ(m.labels, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(m.unary[0], (std::vector<double>{0, 1}));
  EXPECT_EQ(m.unary[1], (std::vector<double>{0, 0}));
  ASSERT_EQ(m.edges.size(), 1u);
  EXPECT_EQ(m.edges[0].table, (std::vector<double>{0, 1, 1, 0}));
}

TEST(ParseMrf, ReversedPairIsTransposedAndMerged) {
  const auto m = parse_mrf("MARKOV\n2\n2 3\n2\n2 1 0\n2 0 1\n\n6\n1 2 3 4 5 6\n\n6\n10 20 30 40 50 60\n");
  ASSERT_EQ(m.edges.size(), 1u);
  EXPECT_EQ(m.edges[0].u, 0u);
  EXPECT_EQ(m.edges[0].v, 1u);
  // First factor is indexed [x1][x0]: theta(x0=a, x1=b) = table[b*2 + a].
  EXPECT_EQ(m.edges[0].table, (std::vector<double>{11, 23, 35, 42, 54, 66}));
  EXPECT_EQ(m.unary[0], (std::vector<double>{0, 0}));
}

TEST(ParseMrf, Errors) {
  EXPECT_THROW(parse_mrf("MARKOV\n3\n2 2 2\n1\n3 0 1 2\n\n8\n0 0 0 0 0 0 0 0\n"), ArityError);
  EXPECT_THROW(parse_mrf("BAYES\n1\n2\n1\n1 0\n\n2\n0 0\n"), ParseError);
  try {
    parse_mrf("MARKOV\n1\n2\n1\n1 0\n\n2\n0 x\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 8u);
  }
  try {
    parse_mrf("MARKOV\n1\n2\n1\n1 0\n\n2\n0 1\nextra\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 9u);
  }
}

TEST(ParseTomography, Examples) {
  const auto t = parse_tomography("TOMO 2 2 1 1\nROW 2 2 0 1\n");
  EXPECT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].target, 2);
  EXPECT_THROW(parse_tomography("TOMO 2 2 1 1\nROW 9 2 0 1\n"), InfeasibleRow);
  const auto plain = parse_tomography("TOMO 3 3 2 1.5\n");
  EXPECT_TRUE(plain.rows.empty());
  EXPECT_DOUBLE_EQ(plain.truncation, 1.5);
  EXPECT_THROW(parse_tomography("TOMO 2 2 1 1\nROW 1 2 0 4\n"), ParseError);
  EXPECT_THROW(parse_tomography("TOMO 2 2 1 1\nROW 1 2 0 1 junk\n"), ParseError);
}

TEST(ParseGraphMatching, Examples) {
  const auto g = parse_graph_matching("p 2 2 4 0\na 0 0 0 0\na 1 0 1 5\na 2 1 0 5\na 3 1 1 0\n");
  EXPECT_EQ(g.num_nodes, 2u);
  EXPECT_EQ(g.assignments.size(), 4u);
  EXPECT_TRUE(g.edges.empty());
  const auto d = build_matching_decomposition(g);
  EXPECT_EQ(d.num_terms(), 1u);
  const auto r = d.term(0).oracle->solve(std::vector<double>(4, 0.0));
  EXPECT_EQ(r.labeling, (Compact{0, 1}));
  EXPECT_DOUBLE_EQ(r.cost, 0.0);

  EXPECT_THROW(parse_graph_matching("p 2 2 2 1\na 0 0 0 0\na 1 1 1 0\ne 0 7 1\n"), ParseError);
  EXPECT_THROW(parse_graph_matching("p 2 2 2 2\na 0 0 0 0\na 1 1 1 0\ne 0 1 1\n"), ParseError);
  EXPECT_THROW(parse_graph_matching("p 2 2 2 0\na 0 0 0 0\na 1 1 1 0\nz\n"), ParseError);
}

TEST(RoundTrip, Fixtures) {
  for (const char* name : {"chain2.uai", "grid3x3.uai"}) {
    const auto a = parse_mrf(fixture(name));
    EXPECT_EQ(parse_mrf(write_mrf(a)), a) << name;
  }
  const auto t = parse_tomography(fixture("phantom4x4.tomo"));
  EXPECT_EQ(parse_tomography(write_tomography(t)), t);
  const auto g = parse_graph_matching(fixture("springs4x5.gm"));
  EXPECT_EQ(parse_graph_matching(write_graph_matching(g)), g);
}

TEST(Trace, HeaderOnlyAndOrdering) {
  EXPECT_EQ(format_trace({}), std::string(kTraceHeader) + "\n");
  std::vector<TraceRecord> recs{{0.5, 5, -1.25, -1.25, 0.1, 0.2, -1.0, "fwmap"},
                                {1.0 / 3.0, 10, -1.0, -1.0, 1e-17, 0.0, -0.9, "fwmap"}};
  const auto text = format_trace(recs);
  EXPECT_EQ(text.substr(text.find('\n') + 1, 4), "0.5,");
  EXPECT_EQ(parse_trace(text), recs);
}

TEST(Trace, FileRoundTripIsBitExact) {
  const auto d = encode_mrf(parse_mrf(fixture("grid3x3.uai")));
  SolveOptions o;
  o.max_iterations = 20;
  o.clock = ClockMode::work;
  const auto r = solve(d, o);
  const auto path = (std::filesystem::temp_directory_path() / "fwmap_io_test_trace.csv").string();
  write_trace(r.trace, path);
  const auto back = parse_trace(read_file(path));
  std::remove(path.c_str());
  ASSERT_EQ(back.size(), r.trace.size());
  for (std::size_t k = 0; k < back.size(); ++k) EXPECT_EQ(back[k], r.trace[k]);

  SubgradientOptions so;
  so.max_steps = 5;
  so.clock = ClockMode::work;
  const auto sa = solve_subgradient(d, so);
  EXPECT_EQ(format_trace(parse_trace(format_trace(sa.trace))), format_trace(sa.trace));
}

}  // namespace
}  // namespace fwmap
