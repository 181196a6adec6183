#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pfr/acpf.hpp"
#include "pfr/measurement.hpp"
#include "pfr/network.hpp"
#include "pfr/train.hpp"
#include "pfr/wls.hpp"

namespace pfr {

inline constexpr int kFileVersion = 1;

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Layout entries as {"quantity": "Pfr", "branch": 3} / {"quantity": "Vm", "bus": 14},
/// with bus ids and 1-based branch numbers.
std::string layout_to_json(const Network& net, const Layout& layout);
Layout layout_from_json(const Network& net, std::string_view json);

struct WeightFile {
  Layout layout;
  WeightVector weights;
};

void save_weights(const std::filesystem::path& path, const Network& net, const Layout& layout,
                  const WeightVector& w);
WeightFile load_weights(const std::filesystem::path& path, const Network& net);

/// CSV with columns iteration,loss,grad_norm,failures.
std::string trace_to_csv(const TrainTrace& trace);

/// Interchange format for relaxed, approximated or exact solutions.
struct SolutionFile {
  std::string formulation;  // qc | socp | sdp | lpac | ac | synthetic
  std::string network_hash;
  double base_mva = 100.0;
  Eigen::VectorXd vm;
  std::optional<Eigen::VectorXd> va;  // absent for formulations without angles
  Eigen::VectorXd p_inj;
  Eigen::VectorXd q_inj;
  std::vector<BranchFlow> flows;
  std::optional<Eigen::VectorXd> p_g;
  std::optional<Eigen::VectorXd> q_g;
  std::optional<LoadTable> loads;  // scenario demand when it differs from the case
};

/// Serializes with units "pu" and "rad".
std::string solution_to_json(const Network& net, const SolutionFile& sol);
/// Parses and checks the file against `net`: hash, element counts, units.
/// Angles are re-referenced to the network's slack bus. Throws FormatError.
SolutionFile solution_from_json(const Network& net, std::string_view json);
SolutionFile load_solution(const std::filesystem::path& path, const Network& net);

SolutionFile make_solution(const Network& net, const MeasurementSet& z, std::string formulation);
SolutionFile make_solution(const Network& net, const OperatingPoint& op, std::string formulation);

/// Canonical measurements present in the file (Va omitted when absent).
MeasurementSet solution_measurements(const Network& net, const SolutionFile& sol);
/// The voltage state written in the file. Throws FormatError without angles.
StateVector solution_state(const Network& net, const SolutionFile& sol);

struct DatasetManifest {
  std::string network_hash;
  std::string source;  // synthetic | lpac | external
  std::uint64_t seed = 0;
  double sigma = 0.1;
  std::size_t scenario_count = 0;
  Layout layout;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Directory with manifest.json and records/NNNNNN.json.
void save_dataset(const std::filesystem::path& dir, const Network& net,
                  const DatasetManifest& manifest, std::span<const ScenarioRecord> records);

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<ScenarioRecord> records;
};

LoadedDataset load_dataset(const std::filesystem::path& dir, const Network& net);

}  // namespace pfr
