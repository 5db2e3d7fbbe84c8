#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "copulahmm/copula.hpp"
#include "copulahmm/data.hpp"
#include "copulahmm/emission.hpp"
#include "copulahmm/hmm.hpp"
#include "copulahmm/mixture.hpp"

namespace testutil {

using namespace copulahmm;

inline Eigen::VectorXd random_simplex(Eigen::Index n, Rng& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng) + 1e-3;
  return v / v.sum();
}

inline SubgroupHMM random_hmm(int S, int MP, int MD, Rng& rng, bool independent = false) {
  std::uniform_real_distribution<double> lam(0.2, 8.0), rho(1.0, 4.0);
  SubgroupHMM h;
  h.pi = random_simplex(S, rng);
  h.Phi.resize(S, S);
  for (int r = 0; r < S; ++r) h.Phi.row(r) = random_simplex(S, rng).transpose();
  h.emissions.lambda_pain.resize(S);
  h.emissions.lambda_disability.resize(S);
  for (int s = 0; s < S; ++s) {
    h.emissions.lambda_pain[s] = lam(rng);
    h.emissions.lambda_disability[s] = lam(rng);
  }
  h.emissions.copula = independent ? CopulaParam{1.0, CopulaFamily::independence}
                                   : CopulaParam{rho(rng), CopulaFamily::survival_gumbel};
  h.emissions.MP = MP;
  h.emissions.MD = MD;
  return h;
}

inline Trajectory random_trajectory(int T, int MP, int MD, Rng& rng, double missing = 0.2) {
  std::uniform_int_distribution<int> yp(0, MP), yd(0, MD);
  std::bernoulli_distribution drop(missing);
  Trajectory y(static_cast<std::size_t>(T));
  for (auto& o : y) {
    o.pain = yp(rng);
    o.disability = yd(rng);
    if (drop(rng)) o.pain.reset();
    if (drop(rng)) o.disability.reset();
  }
  return y;
}

// Textbook truncated Poisson, computed directly.
inline double tpois(double lambda, int y, int M) {
  double z = 0.0;
  for (int j = 0; j <= M; ++j) z += std::exp(j * std::log(lambda) - lambda - std::lgamma(j + 1.0));
  return std::exp(y * std::log(lambda) - lambda - std::lgamma(y + 1.0)) / z;
}

inline double tpois_cdf(double lambda, int y, int M) {
  double c = 0.0;
  for (int j = 0; j <= y; ++j) c += tpois(lambda, j, M);
  return c;
}

// Closed-form survival Gumbel CDF, written out independently of the library.
inline double gumbel_cdf(double u, double v, double rho) {
  if (u <= 0.0 || v <= 0.0) return 0.0;
  if (u >= 1.0) return v;
  if (v >= 1.0) return u;
  const double a = std::pow(-std::log1p(-u), rho), b = std::pow(-std::log1p(-v), rho);
  return u + v - 1.0 + std::exp(-std::pow(a + b, 1.0 / rho));
}

// Joint pmf by inclusion-exclusion on the CDF grid.
inline double joint_oracle(const EmissionParams& e, int s, int yp, int yd) {
  const double lp = e.lambda_pain[s], ld = e.lambda_disability[s];
  auto F = [&](int y, double l, int M) { return y < 0 ? 0.0 : tpois_cdf(l, y, M); };
  auto C = [&](double u, double v) {
    return e.copula.family == CopulaFamily::independence ? u * v : gumbel_cdf(u, v, e.copula.rho);
  };
  const double a = F(yp, lp, e.MP), a0 = F(yp - 1, lp, e.MP);
  const double b = F(yd, ld, e.MD), b0 = F(yd - 1, ld, e.MD);
  return C(a, b) - C(a0, b) - C(a, b0) + C(a0, b0);
}

inline double emission_oracle(const SubgroupHMM& h, int s, const Observation& o) {
  const auto& e = h.emissions;
  if (o.pain && o.disability) return joint_pmf(e, s, *o.pain, *o.disability);
  if (o.pain) return tpois(e.lambda_pain[s], *o.pain, e.MP);
  if (o.disability) return tpois(e.lambda_disability[s], *o.disability, e.MD);
  return 1.0;
}

// Visits every state path of length T.
inline void for_each_path(int S, int T, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> path(static_cast<std::size_t>(T), 0);
  while (true) {
    f(path);
    int t = T - 1;
    while (t >= 0 && path[static_cast<std::size_t>(t)] == S - 1) path[static_cast<std::size_t>(t--)] = 0;
    if (t < 0) return;
    ++path[static_cast<std::size_t>(t)];
  }
}

inline double path_prob(const SubgroupHMM& h, const Trajectory& y, const std::vector<int>& path) {
  double p = h.pi[path[0]] * emission_oracle(h, path[0], y[0]);
  for (std::size_t t = 1; t < y.size(); ++t) p *= h.Phi(path[t - 1], path[t]) * emission_oracle(h, path[t], y[t]);
  return p;
}

inline double brute_likelihood(const SubgroupHMM& h, const Trajectory& y) {
  double total = 0.0;
  for_each_path(static_cast<int>(h.S()), static_cast<int>(y.size()),
                [&](const std::vector<int>& p) { total += path_prob(h, y, p); });
  return total;
}

inline ModelParams random_model(int K, int S, int P, int MP, int MD, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  ModelParams m;
  m.weights.alpha = Eigen::VectorXd::Zero(K);
  m.weights.beta = Eigen::MatrixXd::Zero(K, P);
  for (int k = 1; k < K; ++k) {
    m.weights.alpha[k] = z(rng);
    for (int p = 0; p < P; ++p) m.weights.beta(k, p) = 0.5 * z(rng);
  }
  for (int k = 0; k < K; ++k) m.hmms.push_back(random_hmm(S, MP, MD, rng));
  for (auto& h : m.hmms) h.emissions.copula.family = CopulaFamily::survival_gumbel;
  return m;
}

inline Dataset random_dataset(int N, int T, int P, int MP, int MD, Rng& rng, double missing = 0.1) {
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset ds;
  ds.T = T;
  ds.MP = MP;
  ds.MD = MD;
  for (int p = 0; p < P; ++p) ds.encoding.columns.push_back({"x" + std::to_string(p + 1), ColumnKind::numeric, {}});
  for (int i = 0; i < N; ++i) {
    PatientRecord r;
    r.id = "p" + std::to_string(i + 1);
    r.x.resize(P);
    for (int p = 0; p < P; ++p) r.x[p] = z(rng);
    r.y = random_trajectory(T, MP, MD, rng, missing);
    ds.patients.push_back(std::move(r));
  }
  ds.encoding.centering = Eigen::VectorXd::Zero(P);
  return ds;
}

}  // namespace testutil
