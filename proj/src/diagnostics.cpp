#include <cmath>
#include <limits>
#include <numeric>

#include "copulahmm/inference.hpp"

namespace copulahmm {

namespace {

double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 2) continue;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
  const auto split = split_halves(chains);
  if (split.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto n = static_cast<double>(split.front().size());
  const auto m = static_cast<double>(split.size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : split) {
    means.push_back(mean(c));
    w += variance(c);
  }
  w /= m;
  const double b = n * variance(means);
  if (w <= 0.0) return b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const auto split = split_halves(chains);
  if (split.empty()) return 0.0;
  const std::size_t n = split.front().size();
  const auto m = static_cast<double>(split.size());
  std::vector<double> means, vars;
  for (const auto& c : split) {
    means.push_back(mean(c));
    vars.push_back(variance(c));
  }
  const double w = mean(vars);
  const double b_over_n = split.size() > 1 ? variance(means) : 0.0;
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b_over_n;
  if (!(var_plus > 0.0)) return m * static_cast<double>(n);
  // Combined autocorrelation at a given lag.
  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t j = 0; j < split.size(); ++j) {
      const auto& c = split[j];
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) s += (c[t] - means[j]) * (c[t + lag] - means[j]);
      acov += s / static_cast<double>(n);
    }
    acov /= m;
    return 1.0 - (w - acov) / var_plus;
  };
  // Geyer's initial monotone positive sequence.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(m * static_cast<double>(n)));
  return m * static_cast<double>(n) / tau;
}

std::vector<ParameterDiagnostics> compute_diagnostics(const PosteriorDraws& draws) {
  std::vector<ParameterDiagnostics> out;
  if (draws.draws.empty()) return out;
  const Eigen::Index P = draws.draws.front().weights.P();
  const auto names = constrained_names(draws.spec, P);
  const auto n_par = names.size();
  std::vector<std::vector<std::vector<double>>> per(n_par,
                                                    std::vector<std::vector<double>>(static_cast<std::size_t>(draws.n_chains)));
  for (std::size_t d = 0; d < draws.draws.size(); ++d) {
    const Eigen::VectorXd v = flatten(draws.draws[d], draws.spec);
    const auto c = static_cast<std::size_t>(draws.chain_id[d]);
    for (std::size_t j = 0; j < n_par; ++j) per[j][c].push_back(v[static_cast<Eigen::Index>(j)]);
  }
  for (std::size_t j = 0; j < n_par; ++j) {
    ParameterDiagnostics pd;
    pd.name = names[j];
    std::vector<double> all;
    for (const auto& c : per[j]) all.insert(all.end(), c.begin(), c.end());
    pd.mean = mean(all);
    pd.sd = all.size() > 1 ? std::sqrt(variance(all)) : 0.0;
    pd.rhat = split_rhat(per[j]);
    pd.ess = effective_sample_size(per[j]);
    out.push_back(std::move(pd));
  }
  return out;
}

}  // namespace copulahmm
