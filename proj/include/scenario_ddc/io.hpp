#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenario_ddc/data_model.hpp"
#include "scenario_ddc/fleet.hpp"
#include "scenario_ddc/synthesis.hpp"
#include "scenario_ddc/validation.hpp"

namespace scenario_ddc::io {

using nlohmann::json;

/// Trajectories sharing (nx, nu). M is the nominal horizon; individual
/// trajectories may be shorter when a rollout was truncated.
struct Dataset {
  int nx = 0;
  int nu = 0;
  int M = 0;
  std::vector<Trajectory> trajectories;
};

[[nodiscard]] Dataset make_dataset(const GeneratedDataset& g, int nominal_M);

[[nodiscard]] json dataset_to_json(const Dataset& ds);
/// Throws ValidationError naming the offending field.
[[nodiscard]] Dataset dataset_from_json(const json& j);

/// Ground-truth systems of a generated dataset, written only on request.
[[nodiscard]] json ground_truth_to_json(const GeneratedDataset& g);

struct ControllerProvenance {
  std::string dataset_hash;
  std::vector<std::uint64_t> seeds;
  std::string tool_version;
};

struct ControllerFile {
  int nx = 0;
  int nu = 0;
  MatrixXd K, P;
  double a = 0.0, b = 1.0, delta = 1e-6;
  std::vector<double> per_scenario_margins;
  ControllerProvenance provenance;
};

[[nodiscard]] ControllerFile controller_from_certificate(const SynthesisCertificate& cert, ControllerProvenance prov);
[[nodiscard]] json controller_to_json(const ControllerFile& c);
[[nodiscard]] ControllerFile controller_from_json(const json& j);

[[nodiscard]] json validation_report_to_json(const ValidationReport& r);

/// Matrices as arrays of rows.
[[nodiscard]] json matrix_to_json(const MatrixXd& m);
[[nodiscard]] MatrixXd matrix_from_json(const json& j, const std::string& field);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& p);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& p, const std::string& content);

[[nodiscard]] json read_json_file(const std::filesystem::path& p);
void write_json_file(const std::filesystem::path& p, const json& j);

[[nodiscard]] std::string sha256_hex(const std::string& bytes);

/// Shortest decimal that parses back to the same double.
[[nodiscard]] std::string format_double(double v);

void write_raster_csv(const std::filesystem::path& p, const ConsistentSetRaster& r);

}  // namespace scenario_ddc::io
