#include "copulahmm/selection.hpp"

#include <cmath>
#include <limits>

#include "copulahmm/error.hpp"
#include "copulahmm/hmm.hpp"

namespace copulahmm {

Eigen::MatrixXd draw_logliks(const std::vector<ModelParams>& draws, const Dataset& ds) {
  if (draws.empty()) throw InputError("lpd needs at least one draw");
  if (ds.empty()) throw InputError("lpd needs a nonempty dataset");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws.size()), static_cast<Eigen::Index>(ds.size()));
  for (std::size_t m = 0; m < draws.size(); ++m)
    out.row(static_cast<Eigen::Index>(m)) = patient_logliks(draws[m], ds).transpose();
  return out;
}

Eigen::VectorXd pointwise_lpd(const Eigen::MatrixXd& logliks) {
  const double log_m = std::log(static_cast<double>(logliks.rows()));
  Eigen::VectorXd out(logliks.cols());
  for (Eigen::Index i = 0; i < logliks.cols(); ++i) out[i] = log_sum_exp(logliks.col(i)) - log_m;
  return out;
}

double lpd(const std::vector<ModelParams>& draws, const Dataset& ds, bool deviance) {
  const double raw = pointwise_lpd(draw_logliks(draws, ds)).sum();
  return deviance ? -2.0 * raw : raw;
}

double lpd(const PosteriorDraws& draws, const Dataset& ds, bool deviance) {
  return lpd(draws.draws, ds, deviance);
}

SelectionResult select_over(const Dataset& train, const Dataset& test, const std::vector<std::pair<int, int>>& specs,
                            const SelectionConfig& config) {
  if (specs.empty()) throw InputError("no candidate specs to select over");
  SelectionResult res;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [K, S] : specs) {
    LpdReport r;
    r.K = K;
    r.S = S;
    r.deviance = config.deviance;
    try {
      ModelSpec spec = config.base;
      spec.K = K;
      spec.S = S;
      std::vector<ModelParams> draws;
      if (config.mode == FitMode::map) {
        draws.push_back(fit_map(train, spec, config.map).params);
      } else {
        draws = sample_posterior(train, spec, config.sampler).draws;
      }
      r.n_draws = draws.size();
      r.in_sample = lpd(draws, train, config.deviance);
      r.out_of_sample = lpd(draws, test, config.deviance);
      // Deviance scale: lower is better. Raw scale: higher is better.
      const double score = config.deviance ? r.out_of_sample : -r.out_of_sample;
      if (score < best) {
        best = score;
        res.recommended = res.reports.size();
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    res.reports.push_back(std::move(r));
  }
  return res;
}

}  // namespace copulahmm
