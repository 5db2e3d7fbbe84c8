#include <algorithm>
#include <cmath>
#include <random>

#include "copulahmm/error.hpp"
#include "copulahmm/inference.hpp"
#include "lbfgs.hpp"

namespace copulahmm {

namespace {

std::vector<double> observed(const Dataset& ds, bool pain) {
  std::vector<double> v;
  for (const auto& p : ds.patients)
    for (const auto& o : p.y) {
      if (pain && o.pain) v.push_back(*o.pain);
      if (!pain && o.disability) v.push_back(*o.disability);
    }
  std::sort(v.begin(), v.end());
  return v;
}

double quantile(const std::vector<double>& sorted, double q, double fallback) {
  if (sorted.empty()) return fallback;
  const auto i = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1));
  return sorted[i];
}

// Random but data-informed start: each subgroup takes rates at random
// quantiles of the pooled observations, sorted so state 0 is the most severe.
Eigen::VectorXd random_start(const Dataset& ds, const ModelSpec& spec, const ParameterLayout& L, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  const auto pain = observed(ds, true);
  const auto dis = observed(ds, false);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(L.size());
  for (Eigen::Index k = 1; k < L.K(); ++k) {
    u[L.alpha(k)] = 0.5 * z(rng);
    for (Eigen::Index p = 0; p < L.P(); ++p) u[L.beta(k, p)] = 0.3 * z(rng);
  }
  const Eigen::Index S = L.S();
  for (Eigen::Index k = 0; k < L.K(); ++k) {
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(S, 1.0 / static_cast<double>(S));
    u.segment(L.pi(k), S - 1) = inverse_stick_breaking(pi);
    for (Eigen::Index j = 0; j + 1 < S; ++j) u[L.pi(k) + j] += 0.5 * z(rng);
    for (Eigen::Index r = 0; r < S; ++r) {
      Eigen::VectorXd row = Eigen::VectorXd::Constant(S, S > 1 ? 0.3 / static_cast<double>(S - 1) : 1.0);
      row[r] = S > 1 ? 0.7 : 1.0;
      u.segment(L.phi_row(k, r), S - 1) = inverse_stick_breaking(row);
      for (Eigen::Index j = 0; j + 1 < S; ++j) u[L.phi_row(k, r) + j] += 0.3 * z(rng);
    }
    std::vector<double> qs(static_cast<std::size_t>(S));
    for (auto& q : qs) q = unif(rng);
    std::sort(qs.rbegin(), qs.rend());
    for (Eigen::Index s = 0; s < S; ++s) {
      const double q = qs[static_cast<std::size_t>(s)];
      const double lp = std::max(0.2, quantile(pain, q, 1.0));
      const double ld = std::max(0.2, quantile(dis, q, 1.0));
      u[L.log_lambda_pain(k, s)] = std::log(lp) + 0.1 * z(rng);
      u[L.log_lambda_disability(k, s)] = std::log(ld) + 0.1 * z(rng);
    }
    if (L.has_rho()) u[L.log_rho_tilde(k)] = std::log(0.5) + 0.5 * z(rng);
  }
  (void)spec;
  return u;
}

}  // namespace

MapResult fit_map(const Dataset& ds, const ModelSpec& spec, const MapOptions& opts) {
  if (ds.empty()) throw InputError("cannot fit an empty dataset");
  spec.validate();
  const PosteriorObjective obj = PosteriorObjective::for_training(ds, spec);
  const auto& L = obj.layout();
  auto neg = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    const double v = obj.value_and_gradient(u, g);
    g = -g;
    return -v;
  };
  MapResult best;
  best.log_posterior = -std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, opts.restarts);
  for (int j = 0; j < restarts; ++j) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(j), 0x4d4150u};
    Rng rng(seq);
    Eigen::VectorXd start = (j == 0 && opts.init) ? to_unconstrained(*opts.init, obj.R(), spec)
                                                  : random_start(ds, spec, L, rng);
    try {
      auto r = detail::minimize_lbfgs(neg, start, opts.max_iterations, opts.gradient_tolerance);
      ++best.restarts_succeeded;
      if (-r.value > best.log_posterior) {
        best.log_posterior = -r.value;
        best.unconstrained = r.x;
        best.gradient_norm = r.gradient_norm;
      }
    } catch (const NumericalError&) {
    }
  }
  if (best.restarts_succeeded == 0) throw NumericalError("all MAP restarts diverged");
  best.R = obj.R();
  best.params = from_unconstrained(best.unconstrained, obj.R(), spec);
  return best;
}

}  // namespace copulahmm
