#include "mvmc/config.hpp"

#include <cmath>
#include <fstream>

#include "mvmc/errors.hpp"
#include "mvmc/io.hpp"

namespace mvmc {

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string("config: missing \"") + key + "\" in " + where);
  return *it;
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return from_json(std::move(j));
}

ExperimentConfig ExperimentConfig::from_json(nlohmann::json j) {
  ExperimentConfig cfg;
  cfg.raw_ = std::move(j);
  if (!cfg.raw_.is_object()) throw ConfigError("config: top level must be an object");
  require(cfg.raw_, "prior", "top level");
  require(cfg.raw_, "actions", "top level");
  require(cfg.raw_, "cost", "top level");
  const auto& sim = require(cfg.raw_, "simulation", "top level");
  if (!sim.contains("seed")) throw ConfigError("config: simulation.seed is required");
  return cfg;
}

std::string ExperimentConfig::config_hash() const { return fnv1a64_hex(raw_.dump()); }

std::shared_ptr<const VectorXd> ExperimentConfig::atoms() const {
  const auto atoms_vec =
      require(raw_.at("prior"), "atoms", "prior").get<std::vector<double>>();
  if (atoms_vec.empty()) throw ConfigError("config: prior.atoms is empty");
  auto atoms = std::make_shared<VectorXd>(Eigen::Map<const VectorXd>(
      atoms_vec.data(), static_cast<Eigen::Index>(atoms_vec.size())));
  for (Eigen::Index i = 1; i < atoms->size(); ++i)
    if (!((*atoms)[i] > (*atoms)[i - 1]))
      throw ConfigError("config: prior.atoms must be strictly increasing");
  const double R = require(raw_.at("actions"), "R", "actions").get<double>();
  for (Eigen::Index i = 0; i < atoms->size(); ++i)
    if (!(std::abs((*atoms)[i]) < R))
      throw ConfigError("config: prior atoms must lie strictly inside (-R, R)");
  return atoms;
}

VectorXd ExperimentConfig::raw_prior_weights() const {
  const auto w = require(raw_.at("prior"), "weights", "prior").get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

AtomicMeasure ExperimentConfig::prior() const {
  try {
    return AtomicMeasure(atoms(), raw_prior_weights());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: invalid prior: ") + e.what());
  }
}

ActionGridSpec ExperimentConfig::action_spec() const {
  const auto& a = raw_.at("actions");
  ActionGridSpec spec;
  spec.R = require(a, "R", "actions").get<double>();
  spec.K = require(a, "K", "actions").get<double>();
  spec.d = a.value("d", 1);
  spec.levels = require(a, "levels", "actions").get<std::vector<std::vector<double>>>();
  if (a.contains("scales")) spec.scales = a.at("scales").get<std::vector<double>>();
  return spec;
}

ActionGrid ExperimentConfig::action_grid() const { return make_action_grid(action_spec()); }

CostModel ExperimentConfig::cost_model() const {
  const auto& c = raw_.at("cost");
  const std::string kind = require(c, "kind", "cost").get<std::string>();
  const double beta = require(c, "beta", "cost").get<double>();
  const nlohmann::json params = c.value("params", nlohmann::json::object());
  const auto& a = raw_.at("actions");
  const double R = require(a, "R", "actions").get<double>();
  const double K = require(a, "K", "actions").get<double>();
  const auto atom_vec = atoms();

  if (kind == "constant") {
    return make_constant_cost(params.value("value", 1.0), beta);
  }
  if (kind == "expected_pointwise") {
    const auto poly = params.value("poly", std::vector<double>{0.0, 1.0});
    const double effort = params.value("effort_weight", 0.0);
    return make_expected_pointwise_cost(
        Eigen::Map<const VectorXd>(poly.data(), static_cast<Eigen::Index>(poly.size())), effort,
        beta, *atom_vec, R, K);
  }
  if (kind == "variance_plus_effort") {
    const double effort = params.value("effort_weight", 0.0);
    return make_variance_plus_effort_cost(effort, beta, *atom_vec, R, K);
  }
  throw ConfigError("config: unknown cost kind \"" + kind + "\"");
}

SolverParams ExperimentConfig::solver() const {
  SolverParams p;
  if (!raw_.contains("solver")) return p;
  const auto& s = raw_.at("solver");
  p.level = s.value("n", p.level);
  if (s.contains("n_list")) p.level_list = s.at("n_list").get<std::vector<int>>();
  p.resolution = s.value("m", p.resolution);
  p.quad = s.value("quad", p.quad);
  p.substeps = s.value("L", p.substeps);
  p.tol = s.value("tol", p.tol);
  p.max_sweeps = s.value("max_sweeps", p.max_sweeps);
  p.node_cap = s.value("node_cap", p.node_cap);
  if (p.level < 0) throw ConfigError("config: solver.n must be >= 0");
  if (p.resolution < 1) throw ConfigError("config: solver.m must be >= 1");
  if (p.quad < 1) throw ConfigError("config: solver.quad must be >= 1");
  if (p.substeps < 1) throw ConfigError("config: solver.L must be >= 1");
  if (!(p.tol > 0.0)) throw ConfigError("config: solver.tol must be positive");
  return p;
}

SimulationParams ExperimentConfig::simulation() const {
  const auto& s = raw_.at("simulation");
  SimulationParams p;
  p.mode = s.value("mode", p.mode);
  if (p.mode != "closed_loop" && p.mode != "weak")
    throw ConfigError("config: simulation.mode must be closed_loop or weak");
  p.paths = s.value("paths", p.paths);
  p.horizon = s.value("horizon", p.horizon);
  p.dt = s.value("dt", p.dt);
  p.seed = s.at("seed").get<std::uint64_t>();
  p.action_index = s.value("action_index", p.action_index);
  if (s.contains("open_loop")) p.open_loop = s.at("open_loop").get<std::vector<int>>();
  p.save_paths = s.value("save_paths", p.save_paths);
  if (p.paths < 1) throw ConfigError("config: simulation.paths must be >= 1");
  if (!(p.horizon > 0.0)) throw ConfigError("config: simulation.horizon must be positive");
  if (!(p.dt > 0.0)) throw ConfigError("config: simulation.dt must be positive");
  return p;
}

std::string ExperimentConfig::output_dir() const { return raw_.value("output_dir", "out"); }

}  // namespace mvmc
