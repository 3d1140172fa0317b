#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "mvmc/measures.hpp"

namespace mvmc {

// Piecewise-constant control on the dyadic grid with step 2^-level: either a
// fixed action list per grid time, or a feedback table over simplex grid
// nodes (looked up by nearest node for off-grid filter states).
struct ControlSchedule {
  enum class Mode { kOpenLoop, kFeedback };

  int level = 0;
  Mode mode = Mode::kOpenLoop;
  std::vector<int> open_loop;  // action index per dyadic time
  std::vector<int> feedback;   // action index per grid node
  std::shared_ptr<const SimplexGrid> grid;

  double delta() const { return std::ldexp(1.0, -level); }

  static ControlSchedule constant(int level, int action_index, int n_segments) {
    ControlSchedule s;
    s.level = level;
    s.mode = Mode::kOpenLoop;
    s.open_loop.assign(static_cast<std::size_t>(n_segments), action_index);
    return s;
  }
};

}  // namespace mvmc
