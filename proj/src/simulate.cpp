#include "copulahmm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "copulahmm/emission.hpp"
#include "copulahmm/error.hpp"
#include "copulahmm/hmm.hpp"
#include "copulahmm/parallel.hpp"

namespace copulahmm {

namespace {

Rng patient_rng(std::uint64_t seed, std::size_t i, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), tag};
  return Rng(seq);
}

int categorical(const Eigen::VectorXd& p, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double c = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    c += p[j];
    if (u < c) return static_cast<int>(j);
  }
  return static_cast<int>(p.size() - 1);
}

std::vector<std::string> default_levels(const ColumnSpec& c) {
  if (!c.levels.empty()) return c.levels;
  if (c.kind == ColumnKind::binary) return {"0", "1"};
  return {};
}

}  // namespace

void SimConfig::validate() const {
  if (N < 1 || T < 1 || MP < 1 || MD < 1) throw ParameterError("simulation sizes must be positive");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ParameterError("missing rate must be in [0, 1)");
  truth.validate();
  RiskFactorEncoding enc{risk_factors, {}};
  if (truth.weights.P() != enc.width()) throw ParameterError("risk factor spec does not match beta's width");
  for (const auto& h : truth.hmms)
    if (h.emissions.MP != MP || h.emissions.MD != MD) throw ParameterError("emission supports disagree with MP/MD");
}

Eigen::VectorXd population_means(const std::vector<ColumnSpec>& columns) {
  std::vector<double> m;
  for (const auto& c : columns) {
    switch (c.kind) {
      case ColumnKind::numeric: m.push_back(0.0); break;
      case ColumnKind::binary: m.push_back(0.5); break;
      case ColumnKind::categorical: {
        const auto L = c.levels.size();
        for (std::size_t l = 1; l < L; ++l) m.push_back(1.0 / static_cast<double>(L));
        break;
      }
    }
  }
  return Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
}

SimResult simulate(const SimConfig& cfg) {
  cfg.validate();
  SimResult out;
  out.truth = cfg.truth;
  out.data.T = cfg.T;
  out.data.MP = cfg.MP;
  out.data.MD = cfg.MD;
  out.data.encoding.columns = cfg.risk_factors;
  for (auto& c : out.data.encoding.columns) c.levels = default_levels(c);
  out.data.encoding.centering = population_means(out.data.encoding.columns);
  const auto N = static_cast<std::size_t>(cfg.N);
  out.data.patients.resize(N);
  out.subgroups.resize(N);
  out.paths.resize(N);
  out.complete.resize(N);
  const Eigen::Index S = cfg.truth.S();

  parallel_chunks(N, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Rng rng = patient_rng(cfg.seed, i, 0x53494d);  // generation stream
      std::normal_distribution<double> z(0.0, 1.0);
      std::bernoulli_distribution coin(0.5);
      Eigen::VectorXd raw(out.data.encoding.width());
      Eigen::Index j = 0;
      for (const auto& c : out.data.encoding.columns) {
        switch (c.kind) {
          case ColumnKind::numeric: raw[j++] = z(rng); break;
          case ColumnKind::binary: raw[j++] = coin(rng) ? 1.0 : 0.0; break;
          case ColumnKind::categorical: {
            const auto L = static_cast<int>(c.levels.size());
            const int lv = std::uniform_int_distribution<int>(0, L - 1)(rng);
            for (int l = 1; l < L; ++l) raw[j++] = (lv == l) ? 1.0 : 0.0;
            break;
          }
        }
      }
      auto& p = out.data.patients[i];
      p.id = "sim" + std::to_string(i + 1);
      p.x = raw - out.data.encoding.centering;
      const int k = categorical(subgroup_weights(cfg.truth.weights, p.x), rng);
      out.subgroups[i] = k;
      const auto& h = cfg.truth.hmms[static_cast<std::size_t>(k)];
      auto& path = out.paths[i];
      auto& y = out.complete[i];
      path.resize(static_cast<std::size_t>(cfg.T));
      y.resize(static_cast<std::size_t>(cfg.T));
      int s = categorical(h.pi, rng);
      for (int t = 0; t < cfg.T; ++t) {
        if (t > 0) s = categorical(h.Phi.row(s).transpose(), rng);
        path[static_cast<std::size_t>(t)] = s;
        const auto [yp, yd] = emission_sample(h.emissions, s, rng);
        y[static_cast<std::size_t>(t)] = Observation{yp, yd};
      }
      // Missingness uses its own stream so masking never shifts the draws above.
      Rng mrng = patient_rng(cfg.seed, i, 0x4d4953);
      std::bernoulli_distribution drop(cfg.missing_rate);
      p.y = y;
      for (auto& o : p.y) {
        const bool dp = drop(mrng);
        const bool dd = drop(mrng);
        if (dp) o.pain.reset();
        if (dd) o.disability.reset();
      }
    }
  });
  (void)S;
  return out;
}

ModelParams sample_truth(const ModelSpec& spec, Eigen::Index P, std::uint64_t seed) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x505249u};
  Rng rng(seq);
  std::normal_distribution<double> z(0.0, 1.0);
  auto dirichlet = [&](const Eigen::VectorXd& a) {
    Eigen::VectorXd g(a.size());
    for (Eigen::Index j = 0; j < a.size(); ++j) g[j] = std::gamma_distribution<double>(a[j], 1.0)(rng);
    return Eigen::VectorXd(g / g.sum());
  };
  ModelParams m;
  m.weights.alpha = Eigen::VectorXd::Zero(spec.K);
  m.weights.beta = Eigen::MatrixXd::Zero(spec.K, P);
  for (int k = 1; k < spec.K; ++k) {
    m.weights.alpha[k] = spec.priors.sd_alpha * z(rng);
    // Unit-scale slopes; the beta_tilde prior is only defined after QR.
    for (Eigen::Index p = 0; p < P; ++p) m.weights.beta(k, p) = spec.priors.sd_beta_tilde * z(rng);
  }
  for (int k = 0; k < spec.K; ++k) {
    SubgroupHMM h;
    h.pi = dirichlet(initial_concentration(spec.S));
    h.Phi.resize(spec.S, spec.S);
    for (int r = 0; r < spec.S; ++r) h.Phi.row(r) = dirichlet(transition_concentration(spec.S, r)).transpose();
    h.emissions.lambda_pain.resize(spec.S);
    h.emissions.lambda_disability.resize(spec.S);
    for (int s = 0; s < spec.S; ++s) {
      h.emissions.lambda_pain[s] = std::max(1e-3, std::abs(spec.priors.sd_lambda * z(rng)));
      h.emissions.lambda_disability[s] = std::max(1e-3, std::abs(spec.priors.sd_lambda * z(rng)));
    }
    std::sort(h.emissions.lambda_pain.data(), h.emissions.lambda_pain.data() + spec.S, std::greater<>());
    std::sort(h.emissions.lambda_disability.data(), h.emissions.lambda_disability.data() + spec.S, std::greater<>());
    h.emissions.copula.family = spec.copula;
    h.emissions.copula.rho = spec.has_rho() ? 1.0 + std::abs(spec.priors.sd_rho_tilde * z(rng)) : 1.0;
    h.emissions.MP = spec.MP;
    h.emissions.MD = spec.MD;
    m.hmms.push_back(std::move(h));
  }
  return m;
}

namespace {

SubgroupHMM bench_hmm(const Eigen::Vector3d& lp, const Eigen::Vector3d& ld, double rho) {
  SubgroupHMM h;
  h.pi = Eigen::Vector3d(0.6, 0.3, 0.1);
  h.Phi = Eigen::Matrix3d::Constant(0.1);
  h.Phi.diagonal().setConstant(0.8);
  h.emissions.lambda_pain = lp;
  h.emissions.lambda_disability = ld;
  h.emissions.copula = {rho, CopulaFamily::survival_gumbel};
  h.emissions.MP = 10;
  h.emissions.MD = 7;
  return h;
}

std::vector<ColumnSpec> bench_columns() {
  return {{"age_z", ColumnKind::numeric, {}},
          {"bmi_z", ColumnKind::numeric, {}},
          {"female", ColumnKind::binary, {"0", "1"}},
          {"smoker", ColumnKind::binary, {"0", "1"}}};
}

}  // namespace

ModelSpec benchmark_spec() {
  ModelSpec s;
  s.K = 2;
  s.S = 3;
  return s;
}

SimConfig benchmark_config(int N, std::uint64_t seed) {
  SimConfig c;
  c.N = N;
  c.seed = seed;
  c.missing_rate = 0.05;
  c.risk_factors = bench_columns();
  c.truth.weights.alpha = Eigen::Vector2d(0.0, 0.5);
  c.truth.weights.beta = Eigen::MatrixXd::Zero(2, 4);
  // Drawn once from N(0, 0.5^2) and frozen.
  c.truth.weights.beta.row(1) << 0.8, -0.5, 0.3, 0.6;
  c.truth.hmms.push_back(bench_hmm({6.0, 3.0, 1.0}, {5.0, 2.0, 0.5}, 2.0));
  c.truth.hmms.push_back(bench_hmm({5.0, 2.0, 0.5}, {4.0, 1.5, 0.3}, 1.5));
  return c;
}

SimConfig three_state_config(int N, std::uint64_t seed) {
  SimConfig c = benchmark_config(N, seed);
  c.truth.weights.alpha = Eigen::VectorXd::Zero(1);
  c.truth.weights.beta = Eigen::MatrixXd::Zero(1, 4);
  c.truth.hmms.resize(1);
  return c;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw InputError("partitions have different sizes");
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double idx = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [_, v] : cells) idx += c2(v);
  for (const auto& [_, v] : ra) sa += c2(v);
  for (const auto& [_, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double max_idx = 0.5 * (sa + sb);
  if (max_idx == expected) return 1.0;  // both partitions trivial
  return (idx - expected) / (max_idx - expected);
}

ModelParams posterior_mean(const PosteriorDraws& draws) {
  if (draws.draws.empty()) throw InputError("no draws to average");
  Eigen::VectorXd acc = flatten(draws.draws.front(), draws.spec);
  for (std::size_t d = 1; d < draws.draws.size(); ++d) acc += flatten(draws.draws[d], draws.spec);
  acc /= static_cast<double>(draws.draws.size());
  return unflatten(acc, draws.spec, draws.draws.front().weights.P());
}

RecoveryReport recovery_report(const ModelParams& fit, const ModelParams& truth, const ModelSpec& spec,
                               const std::vector<int>& true_subgroups, const std::vector<int>& assigned,
                               const Dataset* ds, const std::vector<std::vector<int>>* true_paths) {
  if (fit.K() != truth.K() || fit.hmms.size() != truth.hmms.size() || fit.S() != truth.S() ||
      fit.weights.P() != truth.weights.P())
    throw InputError("fit and truth have different dimensions");
  RecoveryReport r;
  const auto names = constrained_names(spec, truth.weights.P());
  const Eigen::VectorXd f = flatten(fit, spec);
  const Eigen::VectorXd t = flatten(truth, spec);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    RecoveryEntry e{names[i], t[j], f[j], std::abs(f[j] - t[j]), 0.0};
    e.rel_error = t[j] != 0.0 ? e.abs_error / std::abs(t[j]) : (e.abs_error == 0.0 ? 0.0 : INFINITY);
    r.entries.push_back(std::move(e));
  }
  r.ari = adjusted_rand_index(true_subgroups, assigned);
  if (ds && true_paths) {
    if (true_paths->size() != ds->size() || true_subgroups.size() != ds->size())
      throw InputError("true paths do not match the dataset");
    std::size_t match = 0, total = 0;
    for (std::size_t i = 0; i < ds->size(); ++i) {
      const auto path = viterbi_decode(fit.hmms.at(static_cast<std::size_t>(true_subgroups[i])), ds->patients[i].y);
      for (std::size_t w = 0; w < path.size(); ++w, ++total)
        if (path[w] == (*true_paths)[i][w]) ++match;
    }
    if (total) r.path_agreement = static_cast<double>(match) / static_cast<double>(total);
  }
  return r;
}

}  // namespace copulahmm
