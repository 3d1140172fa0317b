#include "mvmc/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "mvmc/errors.hpp"

namespace mvmc {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path.string());
  out << std::setprecision(17);
  return out;
}

void write_stamp_comment(std::ofstream& out, const OutputStamp& stamp) {
  out << "# mvmc_version=" << stamp.version << " config_hash=" << stamp.config_hash << "\n";
}

}  // namespace

std::string fnv1a64_hex(const std::string& data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

json measure_to_json(const AtomicMeasure& mu) {
  json j;
  j["atoms"] = std::vector<double>(mu.atoms().data(), mu.atoms().data() + mu.size());
  j["weights"] = std::vector<double>(mu.weights().data(), mu.weights().data() + mu.size());
  return j;
}

AtomicMeasure measure_from_json(const json& j) {
  const auto atoms_vec = j.at("atoms").get<std::vector<double>>();
  const auto weights_vec = j.at("weights").get<std::vector<double>>();
  auto atoms = std::make_shared<VectorXd>(Eigen::Map<const VectorXd>(
      atoms_vec.data(), static_cast<Eigen::Index>(atoms_vec.size())));
  VectorXd weights = Eigen::Map<const VectorXd>(weights_vec.data(),
                                                static_cast<Eigen::Index>(weights_vec.size()));
  return AtomicMeasure(std::move(atoms), std::move(weights));
}

json action_grid_to_json(const ActionGrid& grid) {
  json j;
  j["R"] = grid.R();
  j["K"] = grid.K();
  j["d"] = grid.order();
  j["id"] = grid.id();
  json cands = json::array();
  for (const auto& v : grid.candidates())
    cands.push_back(std::vector<double>(v.coeffs().data(), v.coeffs().data() + v.order()));
  j["candidates"] = cands;
  return j;
}

ActionGrid action_grid_from_json(const json& j) {
  const double R = j.at("R").get<double>();
  const double K = j.at("K").get<double>();
  const int d = j.at("d").get<int>();
  std::vector<ActionVec> candidates;
  for (const auto& c : j.at("candidates")) {
    const auto coeffs = c.get<std::vector<double>>();
    if (static_cast<int>(coeffs.size()) != d)
      throw ConfigError("action grid json: candidate order mismatch");
    candidates.emplace_back(
        Eigen::Map<const VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size())), R, K);
  }
  std::string id = j.value("id", std::string{});
  return ActionGrid(std::move(candidates), R, K, d, std::move(id));
}

void write_json_file(const std::filesystem::path& path, json payload, const OutputStamp& stamp) {
  payload["artifact_version"] = stamp.version;
  payload["config_hash"] = stamp.config_hash;
  auto out = open_out(path);
  out << payload.dump(2) << "\n";
}

void write_value_function_csv(const std::filesystem::path& path, const ValueFunction& V,
                              const OutputStamp& stamp) {
  auto out = open_out(path);
  write_stamp_comment(out, stamp);
  const Eigen::Index n = V.grid->atoms().size();
  for (Eigen::Index i = 0; i < n; ++i) out << "theta_" << (i + 1) << ",";
  out << "value,action_index\n";
  for (Eigen::Index r = 0; r < V.grid->node_count(); ++r) {
    for (Eigen::Index i = 0; i < n; ++i) out << V.grid->nodes()(r, i) << ",";
    out << V.values[r] << "," << (V.policy.empty() ? -1 : V.policy[r]) << "\n";
  }
}

void write_policy_csv(const std::filesystem::path& path, const ValueFunction& V,
                      const ActionGrid& actions, const OutputStamp& stamp) {
  if (V.policy.empty()) throw ConfigError("write_policy_csv: value function has no policy");
  auto out = open_out(path);
  write_stamp_comment(out, stamp);
  const Eigen::Index n = V.grid->atoms().size();
  for (Eigen::Index i = 0; i < n; ++i) out << "theta_" << (i + 1) << ",";
  out << "action_index";
  for (int c = 0; c < actions.order(); ++c) out << ",v_" << (c + 1);
  out << "\n";
  for (Eigen::Index r = 0; r < V.grid->node_count(); ++r) {
    for (Eigen::Index i = 0; i < n; ++i) out << V.grid->nodes()(r, i) << ",";
    const int a = V.policy[r];
    out << a;
    for (int c = 0; c < actions.order(); ++c) out << "," << actions[a].coeffs()[c];
    out << "\n";
  }
}

json value_metadata_json(const ValueFunction& V, const ActionGrid& actions, double beta) {
  json j;
  j["atoms"] = std::vector<double>(V.grid->atoms().data(),
                                   V.grid->atoms().data() + V.grid->atoms().size());
  j["resolution"] = V.grid->resolution();
  j["level"] = V.level;
  j["delta"] = V.delta();
  j["quad"] = V.quad;
  j["substeps"] = V.substeps;
  j["tol"] = V.tol;
  j["final_residual"] = V.final_residual;
  j["sweeps"] = V.sweeps;
  j["residual_history"] = V.residual_history;
  j["beta"] = beta;
  j["action_grid"] = action_grid_to_json(actions);
  return j;
}

LoadedValueArtifact read_value_artifact(const std::filesystem::path& csv_path,
                                        const std::filesystem::path& metadata_path) {
  std::ifstream meta_in(metadata_path);
  if (!meta_in) throw ArtifactMismatchError("cannot open value metadata: " + metadata_path.string());
  json meta = json::parse(meta_in);

  const auto atoms_vec = meta.at("atoms").get<std::vector<double>>();
  auto atoms = std::make_shared<VectorXd>(Eigen::Map<const VectorXd>(
      atoms_vec.data(), static_cast<Eigen::Index>(atoms_vec.size())));
  const int m = meta.at("resolution").get<int>();

  LoadedValueArtifact out{ValueFunction{}, action_grid_from_json(meta.at("action_grid")), meta};
  out.V.grid = std::make_shared<SimplexGrid>(make_simplex_grid(atoms, m));
  out.V.level = meta.at("level").get<int>();
  out.V.quad = meta.at("quad").get<int>();
  out.V.substeps = meta.at("substeps").get<int>();
  out.V.tol = meta.at("tol").get<double>();
  out.V.final_residual = meta.at("final_residual").get<double>();
  out.V.sweeps = meta.at("sweeps").get<int>();
  out.V.action_grid_id = out.actions.id();

  std::ifstream csv_in(csv_path);
  if (!csv_in) throw ArtifactMismatchError("cannot open value table: " + csv_path.string());
  const Eigen::Index nodes = out.V.grid->node_count();
  const Eigen::Index n = atoms->size();
  out.V.values.resize(nodes);
  out.V.policy.assign(nodes, -1);
  std::string line;
  Eigen::Index row = 0;
  while (std::getline(csv_in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("theta_", 0) == 0) continue;
    if (row >= nodes) throw ArtifactMismatchError("value table has more rows than grid nodes");
    std::istringstream fields(line);
    std::string field;
    VectorXd theta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::getline(fields, field, ',')) throw ArtifactMismatchError("short value table row");
      theta[i] = std::stod(field);
    }
    if ((theta - out.V.grid->node_weights(row)).cwiseAbs().maxCoeff() > 1e-9)
      throw ArtifactMismatchError("value table rows do not match the grid enumeration");
    if (!std::getline(fields, field, ',')) throw ArtifactMismatchError("short value table row");
    out.V.values[row] = std::stod(field);
    if (std::getline(fields, field, ',')) out.V.policy[row] = std::stoi(field);
    ++row;
  }
  if (row != nodes) throw ArtifactMismatchError("value table has fewer rows than grid nodes");
  return out;
}

void write_path_csv(const std::filesystem::path& path, const PathSample& sample,
                    const OutputStamp& stamp) {
  auto out = open_out(path);
  write_stamp_comment(out, stamp);
  const Eigen::Index n = sample.filter_weights.cols();
  out << "t,Y,u_index";
  for (Eigen::Index i = 0; i < n; ++i) out << ",theta_" << (i + 1);
  out << "\n";
  for (Eigen::Index k = 0; k < sample.times.size(); ++k) {
    const Eigen::Index step = std::min<Eigen::Index>(k, sample.steps() - 1);
    out << sample.times[k] << "," << sample.y[k] << ","
        << sample.segment_action[sample.step_segment[step]];
    for (Eigen::Index i = 0; i < n; ++i) out << "," << sample.filter_weights(k, i);
    out << "\n";
  }
}

json path_to_json(const PathSample& sample) {
  json j;
  j["dt"] = sample.dt;
  if (std::isfinite(sample.hidden_x)) j["hidden_x"] = sample.hidden_x;
  j["times"] = std::vector<double>(sample.times.data(), sample.times.data() + sample.times.size());
  j["y"] = std::vector<double>(sample.y.data(), sample.y.data() + sample.y.size());
  j["segment_action"] = sample.segment_action;
  json weights = json::array();
  for (Eigen::Index k = 0; k < sample.filter_weights.rows(); ++k) {
    weights.push_back(std::vector<double>(sample.filter_weights.row(k).begin(),
                                          sample.filter_weights.row(k).end()));
  }
  j["filter_weights"] = weights;
  return j;
}

json hjb_residual_to_json(const HjbResidualReport& report) {
  json j;
  j["nodes"] = report.interior_nodes.size();
  j["median_absH"] = report.median_abs;
  j["p90_absH"] = report.p90_abs;
  j["vertex_max_absH"] = report.vertex_max_abs;
  j["low_resolution"] = report.low_resolution;
  return j;
}

void write_hjb_residual_csv(const std::filesystem::path& path, const SimplexGrid& grid,
                            const HjbResidualReport& report, const OutputStamp& stamp) {
  auto out = open_out(path);
  write_stamp_comment(out, stamp);
  const Eigen::Index n = grid.atoms().size();
  for (Eigen::Index i = 0; i < n; ++i) out << "theta_" << (i + 1) << ",";
  out << "abs_H\n";
  for (std::size_t r = 0; r < report.interior_nodes.size(); ++r) {
    for (Eigen::Index i = 0; i < n; ++i) out << grid.nodes()(report.interior_nodes[r], i) << ",";
    out << report.residuals[static_cast<Eigen::Index>(r)] << "\n";
  }
}

void write_refine_csv(const std::filesystem::path& path, const std::vector<RefineRow>& rows,
                      const OutputStamp& stamp) {
  auto out = open_out(path);
  write_stamp_comment(out, stamp);
  out << "level,delta,value_at_mu0,gap_to_previous,sweeps,residual\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double gap = i == 0 ? 0.0 : rows[i - 1].value_at_mu0 - rows[i].value_at_mu0;
    out << rows[i].level << "," << rows[i].delta << "," << rows[i].value_at_mu0 << "," << gap << ","
        << rows[i].sweeps << "," << rows[i].residual << "\n";
  }
}

}  // namespace mvmc
