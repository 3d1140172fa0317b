#pragma once

#include <string>
#include <vector>

#include "mvmc/config.hpp"

namespace mvmc {

struct InvariantResult {
  std::string name;
  bool pass = false;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string note;
};

// Runs the invariant battery of every module against the configured
// experiment objects. Verdicts are designed to be stable under seed changes
// (statistical checks run at the 4-sigma level).
std::vector<InvariantResult> run_invariant_checks(const ExperimentConfig& cfg, int workers);

}  // namespace mvmc
