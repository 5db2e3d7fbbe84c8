#pragma once

#include <vector>

#include <Eigen/Dense>

#include "copulahmm/data.hpp"
#include "copulahmm/hmm.hpp"

namespace copulahmm {

// Multinomial-logit subgroup weights. Row/entry 0 is the reference subgroup
// and stays pinned at zero.
struct WeightParams {
  Eigen::VectorXd alpha;  // K intercepts
  Eigen::MatrixXd beta;   // K x P slopes on the centered risk factors

  Eigen::Index K() const { return alpha.size(); }
  Eigen::Index P() const { return beta.cols(); }
  void validate() const;
};

// Thin QR of the centered design matrix, X = Q R, with beta_tilde = R beta.
struct QRTransform {
  Eigen::MatrixXd Q;  // N x P, orthonormal columns
  Eigen::MatrixXd R;  // P x P, upper triangular with positive diagonal

  Eigen::VectorXd recover_beta(const Eigen::VectorXd& beta_tilde) const;
  Eigen::VectorXd to_beta_tilde(const Eigen::VectorXd& beta) const { return R * beta; }
};

QRTransform qr_reparameterize(const Eigen::MatrixXd& X);

struct MixtureModel {
  WeightParams weights;
  std::vector<SubgroupHMM> hmms;

  Eigen::Index K() const { return weights.K(); }
  Eigen::Index S() const { return hmms.empty() ? 0 : hmms.front().S(); }
  void validate() const;
};

// The model parameterization is exactly the mixture model.
using ModelParams = MixtureModel;

// softmax(alpha + beta x), max-shifted.
Eigen::VectorXd subgroup_weights(const WeightParams& w, const Eigen::VectorXd& x);
Eigen::VectorXd log_subgroup_weights(const WeightParams& w, const Eigen::VectorXd& x);

// Per-patient log P(trajectory_i | x_i) = log sum_k w_ik P(traj_i | m_k).
Eigen::VectorXd patient_logliks(const MixtureModel& model, const Dataset& ds);
double mixture_loglik(const MixtureModel& model, const Dataset& ds);

}  // namespace copulahmm
