#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace copulahmm {

// One weekly report. Either coordinate may be absent.
struct Observation {
  std::optional<int> pain;
  std::optional<int> disability;

  bool fully_missing() const { return !pain && !disability; }
  friend bool operator==(const Observation&, const Observation&) = default;
};

using Trajectory = std::vector<Observation>;

struct PatientRecord {
  std::string id;
  Eigen::VectorXd x;  // encoded and centered risk factors
  Trajectory y;
};

enum class ColumnKind { numeric, binary, categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  // binary: {reference, indicator} levels ("0","1" by default).
  // categorical: all levels, the first is the dropped reference.
  std::vector<std::string> levels;

  Eigen::Index width() const;
};

// Maps raw baseline columns to the encoded design-matrix columns. Every
// encoded column is centered by the stored mean.
struct RiskFactorEncoding {
  std::vector<ColumnSpec> columns;
  Eigen::VectorXd centering;  // empty until computed

  Eigen::Index width() const;
  std::vector<std::string> encoded_names() const;
  bool has_centering() const { return centering.size() == width(); }

  // Raw (uncentered) encoded values for one baseline row.
  Eigen::VectorXd encode_row(const std::vector<std::string>& raw_values) const;
  // Inverse of encode_row for uncentered encoded values.
  std::vector<std::string> decode_row(const Eigen::VectorXd& raw) const;
};

struct Dataset {
  std::vector<PatientRecord> patients;
  RiskFactorEncoding encoding;
  int T = 52;
  int MP = 10;
  int MD = 7;

  std::size_t size() const { return patients.size(); }
  bool empty() const { return patients.empty(); }
  Eigen::Index P() const { return encoding.width(); }
  // N x P centered design matrix.
  Eigen::MatrixXd design_matrix() const;
  // Checks every record against the dataset-level invariants.
  void validate() const;
};

struct DataConfig {
  int T = 52;
  int MP = 10;
  int MD = 7;
  std::string missing_marker = "NA";
};

// Reads a baseline CSV (id column plus one column per schema entry) and a
// long-format trajectory CSV (id, week, pain, disability). If the schema
// carries a centering vector it is reused; otherwise it is computed from the
// loaded rows.
Dataset load_dataset(const std::filesystem::path& baseline_path,
                     const std::filesystem::path& trajectory_path,
                     const RiskFactorEncoding& schema, const DataConfig& config = {});

// Trajectories only (no risk factors, P = 0); patients appear in the order
// their ids first occur in the file.
Dataset load_trajectories(const std::filesystem::path& trajectory_path, const DataConfig& config = {});

// Writes the two CSV files that load_dataset reads. Fully missing weeks are
// omitted from the trajectory file.
std::pair<std::string, std::string> dataset_csv(const Dataset& ds);
void write_dataset(const Dataset& ds, const std::filesystem::path& baseline_path,
                   const std::filesystem::path& trajectory_path);

// Shifts x to a new centering vector (x_raw is preserved).
Dataset recenter(Dataset ds, const Eigen::VectorXd& centering);
Eigen::VectorXd column_means(const Dataset& ds);

// Random partition into (train, rest). Train gets round(fraction * N)
// patients and is centered on its own means; rest reuses train's centering.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction, std::uint64_t seed);

// Subset by patient index, preserving encoding.
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace copulahmm
