#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "copulahmm/data.hpp"
#include "copulahmm/hmm.hpp"
#include "copulahmm/inference.hpp"
#include "copulahmm/mixture.hpp"

namespace copulahmm {

struct AssignmentResult {
  std::string id;
  bool online = false;
  int t = 0;  // weeks of trajectory used; 0 for offline
  Eigen::VectorXd probs;
  Eigen::Index label = 0;  // 0-based argmax, lowest index on ties
  double max_prob = 0.0;
};

// Index of the largest entry, lowest index on ties.
Eigen::Index argmax_first(const Eigen::VectorXd& v);

// Scores patients under a point model or a set of posterior draws; with draws
// the per-draw probabilities are averaged.
class Assigner {
 public:
  explicit Assigner(const ModelParams& m);
  // max_draws > 0 keeps that many evenly spaced draws.
  explicit Assigner(const PosteriorDraws& draws, std::size_t max_draws = 0);

  Eigen::Index K() const { return K_; }
  Eigen::Index P() const { return P_; }
  std::size_t n_members() const { return weights_.size(); }

  AssignmentResult offline(const std::string& id, const Eigen::VectorXd& x) const;
  // An empty prefix gives the offline result.
  AssignmentResult online(const std::string& id, const Eigen::VectorXd& x, std::span<const Observation> prefix) const;
  // Online results for t = 0, 1, ..., T of one patient.
  std::vector<AssignmentResult> online_path(const PatientRecord& p) const;

 private:
  void check_x(const Eigen::VectorXd& x) const;
  void add_members(const ModelParams& m);

  Eigen::Index K_ = 0, P_ = 0;
  std::vector<WeightParams> weights_;
  std::vector<std::vector<CompiledHMM>> hmms_;
};

AssignmentResult assign_offline(const ModelParams& m, const Eigen::VectorXd& x);
AssignmentResult assign_online(const ModelParams& m, const Eigen::VectorXd& x, std::span<const Observation> prefix);

struct AccuracyTable {
  std::vector<double> thresholds;
  int T = 0;
  // Indexed [t][j] for t = 0..T and threshold j.
  std::vector<std::vector<std::size_t>> n_qualifying;
  std::vector<std::vector<std::optional<double>>> agreement;  // nullopt when nobody qualifies
};

// Agreement of the week-t label with the final (t = T) label among patients
// whose max probability at t exceeds each threshold.
AccuracyTable accuracy_over_time(const Assigner& a, const Dataset& ds, const std::vector<double>& thresholds);

// Means over consecutive non-overlapping windows, skipping undefined cells.
std::vector<std::optional<double>> block_means(const std::vector<std::optional<double>>& series, std::size_t window);

}  // namespace copulahmm
