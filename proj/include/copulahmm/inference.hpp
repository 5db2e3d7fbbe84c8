#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "copulahmm/data.hpp"
#include "copulahmm/mixture.hpp"
#include "copulahmm/params.hpp"

namespace copulahmm {

// R factor of the training design matrix, or the identity when the dataset
// is too small to factor (N < P). scaled divides R by sqrt(N - 1).
Eigen::MatrixXd training_r_factor(const Dataset& ds, bool scaled = false);

// Unnormalized log posterior over the flat unconstrained vector: mixture
// log-likelihood + log prior + log-Jacobian of the constraining transforms.
// Gradients come from a scaled forward-backward pass over every patient and
// subgroup, chained through forward-mode derivatives of the emission tables
// and simplex transforms.
class PosteriorObjective {
 public:
  struct Parts {
    double loglik = 0.0;
    double log_prior = 0.0;
    double log_jacobian = 0.0;
    double total() const { return loglik + log_prior + log_jacobian; }
  };

  PosteriorObjective(const Dataset& ds, ModelSpec spec, Eigen::MatrixXd R);
  static PosteriorObjective for_training(const Dataset& ds, const ModelSpec& spec);

  double value(const Eigen::VectorXd& u) const;
  double value_and_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const;
  Parts parts(const Eigen::VectorXd& u) const;

  const ParameterLayout& layout() const { return layout_; }
  const ModelSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& R() const { return R_; }
  Eigen::Index dim() const { return layout_.size(); }

 private:
  Parts evaluate(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const;

  const Dataset* ds_;
  ModelSpec spec_;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd q_;  // N x P rows R^{-T} x_i
  ParameterLayout layout_;
};

double log_posterior(const Eigen::VectorXd& u, const Dataset& ds, const ModelSpec& spec);

struct MapOptions {
  int restarts = 10;
  int max_iterations = 2000;
  double gradient_tolerance = 1e-4;
  std::uint64_t seed = 1;
  std::optional<ModelParams> init;  // explicit start for the first restart
};

struct MapResult {
  ModelParams params;
  Eigen::MatrixXd R;
  Eigen::VectorXd unconstrained;
  double log_posterior = 0.0;
  double gradient_norm = 0.0;
  int restarts_succeeded = 0;
};

// Multi-start L-BFGS ascent of the log posterior; returns the best restart.
MapResult fit_map(const Dataset& ds, const ModelSpec& spec, const MapOptions& opts = {});

enum class SamplerKind { hmc, random_walk };

struct SamplerOptions {
  SamplerKind kind = SamplerKind::hmc;
  int n_chains = 4;
  int n_warmup = 1000;
  int n_iter = 2000;  // total iterations per chain, warmup included
  int n_leapfrog = 16;
  double target_accept = 0.8;
  double max_divergence_rate = 0.2;
  double init_jitter = 0.05;
  std::uint64_t seed = 1;
  MapOptions map;                   // used when init is unset
  std::optional<ModelParams> init;  // skips the MAP search when set
};

struct ParameterDiagnostics {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double rhat = 1.0;
  double ess = 0.0;
};

struct PosteriorDraws {
  ModelSpec spec;
  Eigen::MatrixXd R;
  std::vector<ModelParams> draws;  // post-warmup only, chain-major order
  std::vector<int> chain_id;
  std::vector<double> log_posterior;
  int warmup = 0;
  int n_chains = 0;
  std::vector<ParameterDiagnostics> diagnostics;
  double divergence_rate = 0.0;
  std::vector<double> step_size;  // per chain, after adaptation
  std::vector<double> accept_rate;

  std::size_t size() const { return draws.size(); }
  double max_rhat() const;
  double min_ess() const;
};

PosteriorDraws sample_posterior(const Dataset& ds, const ModelSpec& spec, const SamplerOptions& opts);

// Split-Rhat over chains (each chain split in halves) and multi-chain
// effective sample size with Geyer's initial monotone sequence.
double split_rhat(const std::vector<std::vector<double>>& chains);
double effective_sample_size(const std::vector<std::vector<double>>& chains);
std::vector<ParameterDiagnostics> compute_diagnostics(const PosteriorDraws& draws);

// Canonical labeling: states by decreasing lambda_P (ties: lambda_D, then
// index), subgroups by decreasing mean lambda_P (same tie rules). The
// reference subgroup is re-pinned so that weights are unchanged.
ModelParams relabel(const ModelParams& m);
PosteriorDraws relabel(const PosteriorDraws& draws);

// New state s of subgroup k is old state perm[s]; likewise for subgroups.
ModelParams permute_states(const ModelParams& m, Eigen::Index k, const std::vector<int>& perm);
ModelParams permute_subgroups(const ModelParams& m, const std::vector<int>& perm);

}  // namespace copulahmm
