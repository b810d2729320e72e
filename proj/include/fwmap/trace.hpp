#pragma once

#include <cstddef>
#include <string>

namespace fwmap {

/// One row of the solver trace, written once per dual evaluation.
struct TraceRecord {
  double wall_time_s = 0.0;
  std::size_t mp_iteration = 0;
  double h_current = 0.0;
  double h_best = 0.0;
  double a_gap = 0.0;
  double b_gap = 0.0;
  double f_prox = 0.0;
  std::string solver;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

}  // namespace fwmap
