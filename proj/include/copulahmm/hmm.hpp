#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "copulahmm/data.hpp"
#include "copulahmm/emission.hpp"

namespace copulahmm {

struct SubgroupHMM {
  Eigen::VectorXd pi;   // initial state distribution
  Eigen::MatrixXd Phi;  // row-stochastic transitions, Phi(r, s) = P(s_{t+1}=s | s_t=r)
  EmissionParams emissions;

  Eigen::Index S() const { return pi.size(); }
  void validate() const;
};

// Log-domain parameters and emission table, built once per parameter set.
struct CompiledHMM {
  Eigen::VectorXd log_pi;
  Eigen::MatrixXd log_Phi;
  EmissionTable table;

  explicit CompiledHMM(const SubgroupHMM& m);
  Eigen::Index S() const { return log_pi.size(); }
  // Per-state log emission for one observation (0 when fully missing).
  Eigen::VectorXd log_emission(const Observation& o) const;
};

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

// log P(trajectory | m). Fully missing steps contribute no emission term;
// half-missing steps use the margin of the observed coordinate.
double forward_loglik(const CompiledHMM& m, std::span<const Observation> traj);
double forward_loglik(const SubgroupHMM& m, std::span<const Observation> traj);

// Element t is the log-likelihood of the first t steps (element 0 is 0).
std::vector<double> forward_prefix_logliks(const CompiledHMM& m, std::span<const Observation> traj);

// Most probable state path (0-based states). Ties go to the lower state index.
std::vector<int> viterbi_decode(const CompiledHMM& m, std::span<const Observation> traj);
std::vector<int> viterbi_decode(const SubgroupHMM& m, std::span<const Observation> traj);

// log P(trajectory, path | m).
double path_log_score(const CompiledHMM& m, std::span<const Observation> traj,
                      std::span<const int> path);

// Row t holds the fraction of patients in each of the S states at week t+1.
Eigen::MatrixXd state_occupancy(const std::vector<std::vector<int>>& paths, Eigen::Index S);

}  // namespace copulahmm
