#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvmc/actions.hpp"
#include "mvmc/dp.hpp"
#include "mvmc/filter.hpp"
#include "mvmc/hjb.hpp"
#include "mvmc/measures.hpp"

namespace mvmc {

using nlohmann::json;

inline constexpr const char* kArtifactVersion = "0.1.0";

std::string fnv1a64_hex(const std::string& data);

json measure_to_json(const AtomicMeasure& mu);
AtomicMeasure measure_from_json(const json& j);

json action_grid_to_json(const ActionGrid& grid);
ActionGrid action_grid_from_json(const json& j);

// Provenance stamp embedded in every output file.
struct OutputStamp {
  std::string config_hash;
  std::string version = kArtifactVersion;
};

// JSON payload written with "config_hash" and "artifact_version" fields added.
void write_json_file(const std::filesystem::path& path, json payload, const OutputStamp& stamp);

// CSV files carry the stamp in a leading comment line:
//   # mvmc_version=... config_hash=...
void write_value_function_csv(const std::filesystem::path& path, const ValueFunction& V,
                              const OutputStamp& stamp);
void write_policy_csv(const std::filesystem::path& path, const ValueFunction& V,
                      const ActionGrid& actions, const OutputStamp& stamp);
json value_metadata_json(const ValueFunction& V, const ActionGrid& actions, double beta);

struct LoadedValueArtifact {
  ValueFunction V;
  ActionGrid actions;
  json metadata;
};

LoadedValueArtifact read_value_artifact(const std::filesystem::path& csv_path,
                                        const std::filesystem::path& metadata_path);

// Columns: t, Y, u_index, theta_1..theta_N.
void write_path_csv(const std::filesystem::path& path, const PathSample& sample,
                    const OutputStamp& stamp);
json path_to_json(const PathSample& sample);

void write_refine_csv(const std::filesystem::path& path, const std::vector<RefineRow>& rows,
                      const OutputStamp& stamp);

json hjb_residual_to_json(const HjbResidualReport& report);
void write_hjb_residual_csv(const std::filesystem::path& path, const SimplexGrid& grid,
                            const HjbResidualReport& report, const OutputStamp& stamp);

}  // namespace mvmc
