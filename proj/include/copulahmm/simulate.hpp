#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "copulahmm/data.hpp"
#include "copulahmm/inference.hpp"
#include "copulahmm/params.hpp"

namespace copulahmm {

struct SimConfig {
  int N = 400;
  int T = 52;
  int MP = 10;
  int MD = 7;
  ModelParams truth;
  // numeric: N(0,1); binary: Bernoulli(0.5); categorical: uniform over levels.
  std::vector<ColumnSpec> risk_factors;
  double missing_rate = 0.0;  // per symptom coordinate, completely at random
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimResult {
  Dataset data;
  ModelParams truth;
  std::vector<int> subgroups;             // 0-based true subgroup per patient
  std::vector<std::vector<int>> paths;    // true state path per patient
  std::vector<Trajectory> complete;       // trajectories before masking
};

// Population means of the encoded risk factors under the generator; x is
// centered on these before the weights are evaluated.
Eigen::VectorXd population_means(const std::vector<ColumnSpec>& columns);

SimResult simulate(const SimConfig& cfg);

// Draws a parameter set from the priors (rates sorted so state 0 is the most
// severe).
ModelParams sample_truth(const ModelSpec& spec, Eigen::Index P, std::uint64_t seed);

// The frozen recovery benchmark: K=2, S=3, P=4 (two numeric, two binary
// factors), T=52, 5% missingness.
SimConfig benchmark_config(int N = 400, std::uint64_t seed = 1);
ModelSpec benchmark_spec();

// Three-state, single-subgroup benchmark truth used in state-count sweeps.
SimConfig three_state_config(int N, std::uint64_t seed);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct RecoveryEntry {
  std::string name;
  double truth = 0.0;
  double estimate = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
};

struct RecoveryReport {
  std::vector<RecoveryEntry> entries;
  double ari = 0.0;
  std::optional<double> path_agreement;
};

// Component-wise posterior mean in constrained space.
ModelParams posterior_mean(const PosteriorDraws& draws);

// Fit and truth are compared as given (apply relabel to both first). Path
// agreement is the fraction of weeks where the Viterbi path under the fitted
// HMM of the true subgroup matches the true path.
RecoveryReport recovery_report(const ModelParams& fit, const ModelParams& truth, const ModelSpec& spec,
                               const std::vector<int>& true_subgroups, const std::vector<int>& assigned,
                               const Dataset* ds = nullptr, const std::vector<std::vector<int>>* true_paths = nullptr);

}  // namespace copulahmm
