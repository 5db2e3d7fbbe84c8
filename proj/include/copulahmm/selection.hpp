#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "copulahmm/data.hpp"
#include "copulahmm/inference.hpp"

namespace copulahmm {

// M x N matrix of per-draw, per-patient mixture log-likelihoods.
Eigen::MatrixXd draw_logliks(const std::vector<ModelParams>& draws, const Dataset& ds);

// Per-patient log of the draw-averaged likelihood (raw scale).
Eigen::VectorXd pointwise_lpd(const Eigen::MatrixXd& logliks);

// Sum over patients of log((1/M) sum_m P(traj_i | theta_m, x_i)); multiplied
// by -2 when deviance is set.
double lpd(const std::vector<ModelParams>& draws, const Dataset& ds, bool deviance = true);
double lpd(const PosteriorDraws& draws, const Dataset& ds, bool deviance = true);

enum class FitMode { mcmc, map };

struct SelectionConfig {
  ModelSpec base;  // K and S are overridden per candidate
  FitMode mode = FitMode::mcmc;
  SamplerOptions sampler;
  MapOptions map;
  bool deviance = true;
};

struct LpdReport {
  int K = 0;
  int S = 0;
  double in_sample = 0.0;
  double out_of_sample = 0.0;
  bool deviance = true;
  std::size_t n_draws = 0;
  std::optional<std::string> error;  // set when the fit failed
};

struct SelectionResult {
  std::vector<LpdReport> reports;
  std::optional<std::size_t> recommended;  // index into reports
};

// Fits every (K, S) candidate on train and scores both splits. A failed fit
// is recorded on its report and the sweep continues.
SelectionResult select_over(const Dataset& train, const Dataset& test, const std::vector<std::pair<int, int>>& specs,
                            const SelectionConfig& config);

}  // namespace copulahmm
