#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvmc/actions.hpp"
#include "mvmc/measures.hpp"
#include "mvmc/objective.hpp"

namespace mvmc {

struct SolverParams {
  int level = 2;
  std::vector<int> level_list;
  int resolution = 16;
  int quad = 20;
  int substeps = 8;
  double tol = 1e-8;
  int max_sweeps = 5000;
  std::int64_t node_cap = 2'000'000;
};

struct SimulationParams {
  std::string mode = "closed_loop";  // closed_loop | weak
  int paths = 1000;
  double horizon = 8.0;
  double dt = 0.03125;
  std::uint64_t seed = 0;
  int action_index = 0;
  std::vector<int> open_loop;  // optional explicit per-segment action list
  int save_paths = 1;
};

// Parsed experiment configuration. Structural JSON errors throw ConfigError;
// value-level invariants (e.g. prior mass) are checked when the corresponding
// object is built, so the check command can report them instead of dying.
class ExperimentConfig {
 public:
  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig from_json(nlohmann::json j);

  const nlohmann::json& raw() const { return raw_; }
  std::string config_hash() const;

  std::shared_ptr<const VectorXd> atoms() const;
  VectorXd raw_prior_weights() const;
  AtomicMeasure prior() const;

  ActionGridSpec action_spec() const;
  ActionGrid action_grid() const;

  CostModel cost_model() const;

  SolverParams solver() const;
  SimulationParams simulation() const;

  std::string output_dir() const;

 private:
  nlohmann::json raw_;
};

}  // namespace mvmc
