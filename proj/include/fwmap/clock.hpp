#pragma once

#include <chrono>

namespace fwmap {

enum class ClockMode {
  wall,  ///< monotonic wall-clock time
  work,  ///< deterministic virtual time derived from charged oracle work
};

/// Time source for the solver's rate test, budget and trace timestamps.
///
/// In work mode the clock advances only through charge(); one unit of work
/// counts as one nanosecond, so runs are reproducible bit for bit.
class SolverClock {
 public:
  explicit SolverClock(ClockMode mode = ClockMode::wall)
      : mode_(mode), start_(std::chrono::steady_clock::now()) {}

  ClockMode mode() const { return mode_; }

  double seconds() const {
    if (mode_ == ClockMode::work) return work_ * kSecondsPerUnit;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void charge(double units) { work_ += units; }

 private:
  static constexpr double kSecondsPerUnit = 1e-9;

  ClockMode mode_;
  std::chrono::steady_clock::time_point start_;
  double work_ = 0.0;
};

}  // namespace fwmap
