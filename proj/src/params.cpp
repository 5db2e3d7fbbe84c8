#include "copulahmm/params.hpp"

#include <cmath>
#include <numbers>

#include "copulahmm/error.hpp"

namespace copulahmm {

void PriorSettings::validate() const {
  if (!(sd_alpha > 0.0) || !(sd_beta_tilde > 0.0) || !(sd_lambda > 0.0) || !(sd_rho_tilde > 0.0))
    throw ParameterError("prior standard deviations must be strictly positive");
  if (lambda_gamma && (!(lambda_gamma->shape > 0.0) || !(lambda_gamma->rate > 0.0)))
    throw ParameterError("gamma prior shape and rate must be positive");
}

void ModelSpec::validate() const {
  if (K < 1 || S < 1 || MP < 1 || MD < 1)
    throw ParameterError("K, S, MP and MD must be positive integers");
  priors.validate();
}

Eigen::VectorXd initial_concentration(int S) {
  Eigen::VectorXd a = Eigen::VectorXd::Ones(S);
  a[0] = S;
  return a;
}

Eigen::VectorXd transition_concentration(int S, int r) {
  Eigen::VectorXd a = Eigen::VectorXd::Ones(S);
  a[r] = S;
  return a;
}

ParameterLayout::ParameterLayout(const ModelSpec& spec, Eigen::Index P)
    : K_(spec.K), S_(spec.S), P_(P), has_rho_(spec.has_rho()) {
  sub_offset_ = (K_ - 1) * (1 + P_);
  block_ = (S_ - 1) * (S_ + 1) + 2 * S_ + (has_rho_ ? 1 : 0);
}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> out(static_cast<std::size_t>(size()));
  auto idx = [](Eigen::Index i) { return std::to_string(i + 1); };
  for (Eigen::Index k = 1; k < K_; ++k) {
    out[static_cast<std::size_t>(alpha(k))] = "alpha[" + idx(k) + "]";
    for (Eigen::Index p = 0; p < P_; ++p)
      out[static_cast<std::size_t>(beta(k, p))] = "beta_tilde[" + idx(k) + "," + idx(p) + "]";
  }
  for (Eigen::Index k = 0; k < K_; ++k) {
    for (Eigen::Index j = 0; j + 1 < S_; ++j)
      out[static_cast<std::size_t>(pi(k) + j)] = "pi_sb[" + idx(k) + "," + idx(j) + "]";
    for (Eigen::Index r = 0; r < S_; ++r)
      for (Eigen::Index j = 0; j + 1 < S_; ++j)
        out[static_cast<std::size_t>(phi_row(k, r) + j)] =
            "Phi_sb[" + idx(k) + "," + idx(r) + "," + idx(j) + "]";
    for (Eigen::Index s = 0; s < S_; ++s) {
      out[static_cast<std::size_t>(log_lambda_pain(k, s))] = "log_lambdaP[" + idx(k) + "," + idx(s) + "]";
      out[static_cast<std::size_t>(log_lambda_disability(k, s))] =
          "log_lambdaD[" + idx(k) + "," + idx(s) + "]";
    }
    if (has_rho_) out[static_cast<std::size_t>(log_rho_tilde(k))] = "log_rho_tilde[" + idx(k) + "]";
  }
  return out;
}

Eigen::VectorXd inverse_stick_breaking(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd y(std::max<Eigen::Index>(0, n - 1));
  double rem = 1.0;
  for (Eigen::Index j = 0; j + 1 < n; ++j) {
    const double z = std::clamp(x[j] / rem, 1e-300, 1.0 - 1e-16);
    y[j] = std::log(z) - std::log1p(-z) + std::log(static_cast<double>(n - 1 - j));
    rem = std::max(rem - x[j], 1e-300);
  }
  return y;
}

Eigen::VectorXd to_unconstrained(const ModelParams& m, const Eigen::MatrixXd& R, const ModelSpec& spec) {
  m.validate();
  const ParameterLayout L(spec, m.weights.P());
  if (m.K() != spec.K || m.S() != spec.S) throw ParameterError("parameters do not match the model spec");
  Eigen::VectorXd u(L.size());
  for (Eigen::Index k = 1; k < L.K(); ++k) {
    u[L.alpha(k)] = m.weights.alpha[k];
    if (L.P() > 0) {
      const Eigen::VectorXd bt = R * m.weights.beta.row(k).transpose();
      u.segment(L.beta(k, 0), L.P()) = bt;
    }
  }
  for (Eigen::Index k = 0; k < L.K(); ++k) {
    const auto& h = m.hmms[static_cast<std::size_t>(k)];
    u.segment(L.pi(k), L.S() - 1) = inverse_stick_breaking(h.pi);
    for (Eigen::Index r = 0; r < L.S(); ++r)
      u.segment(L.phi_row(k, r), L.S() - 1) = inverse_stick_breaking(h.Phi.row(r).transpose());
    u.segment(L.log_lambda_pain(k, 0), L.S()) = h.emissions.lambda_pain.array().log();
    u.segment(L.log_lambda_disability(k, 0), L.S()) = h.emissions.lambda_disability.array().log();
    if (L.has_rho()) {
      const double rt = h.emissions.copula.rho - 1.0;
      u[L.log_rho_tilde(k)] = std::log(std::max(rt, 1e-300));
    }
  }
  return u;
}

ModelParams from_unconstrained(const Eigen::VectorXd& u, const Eigen::MatrixXd& R, const ModelSpec& spec) {
  const Eigen::Index P = R.rows();
  const ParameterLayout L(spec, P);
  if (u.size() != L.size()) throw ParameterError("unconstrained vector has the wrong length");
  ModelParams m;
  m.weights.alpha = Eigen::VectorXd::Zero(L.K());
  m.weights.beta = Eigen::MatrixXd::Zero(L.K(), P);
  for (Eigen::Index k = 1; k < L.K(); ++k) {
    m.weights.alpha[k] = u[L.alpha(k)];
    if (P > 0) {
      const Eigen::VectorXd bt = u.segment(L.beta(k, 0), P);
      m.weights.beta.row(k) = R.triangularView<Eigen::Upper>().solve(bt).transpose();
    }
  }
  for (Eigen::Index k = 0; k < L.K(); ++k) {
    SubgroupHMM h;
    Eigen::VectorXd log_x;
    double lj = 0.0;
    stick_breaking<double>(u.segment(L.pi(k), L.S() - 1), log_x, lj);
    h.pi = log_x.array().exp();
    h.pi /= h.pi.sum();
    h.Phi.resize(L.S(), L.S());
    for (Eigen::Index r = 0; r < L.S(); ++r) {
      stick_breaking<double>(u.segment(L.phi_row(k, r), L.S() - 1), log_x, lj);
      Eigen::VectorXd row = log_x.array().exp();
      h.Phi.row(r) = (row / row.sum()).transpose();
    }
    h.emissions.lambda_pain = u.segment(L.log_lambda_pain(k, 0), L.S()).array().exp();
    h.emissions.lambda_disability = u.segment(L.log_lambda_disability(k, 0), L.S()).array().exp();
    h.emissions.MP = spec.MP;
    h.emissions.MD = spec.MD;
    h.emissions.copula.family = spec.copula;
    h.emissions.copula.rho = L.has_rho() ? 1.0 + std::exp(u[L.log_rho_tilde(k)]) : 1.0;
    m.hmms.push_back(std::move(h));
  }
  return m;
}

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_lpdf(double x, double sd) { return -kLogSqrt2Pi - std::log(sd) - 0.5 * (x / sd) * (x / sd); }
double half_normal_lpdf(double x, double sd) { return std::numbers::ln2 + normal_lpdf(x, sd); }
double gamma_lpdf(double x, const GammaPrior& g) {
  return g.shape * std::log(g.rate) - std::lgamma(g.shape) + (g.shape - 1.0) * std::log(x) - g.rate * x;
}
double dirichlet_lpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
  double lp = std::lgamma(a.sum());
  for (Eigen::Index i = 0; i < a.size(); ++i) lp += (a[i] - 1.0) * std::log(x[i]) - std::lgamma(a[i]);
  return lp;
}
}  // namespace

double log_prior(const ModelParams& m, const PriorSettings& priors, const Eigen::MatrixXd& R) {
  m.validate();
  priors.validate();
  const Eigen::Index K = m.K();
  double lp = 0.0;
  for (Eigen::Index k = 1; k < K; ++k) {
    lp += normal_lpdf(m.weights.alpha[k], priors.sd_alpha);
    if (m.weights.P() > 0) {
      const Eigen::VectorXd bt = R * m.weights.beta.row(k).transpose();
      for (Eigen::Index p = 0; p < bt.size(); ++p) lp += normal_lpdf(bt[p], priors.sd_beta_tilde);
    }
  }
  for (const auto& h : m.hmms) {
    const int S = static_cast<int>(h.S());
    lp += dirichlet_lpdf(h.pi, initial_concentration(S));
    for (int r = 0; r < S; ++r) lp += dirichlet_lpdf(h.Phi.row(r).transpose(), transition_concentration(S, r));
    for (Eigen::Index s = 0; s < S; ++s) {
      for (double lambda : {h.emissions.lambda_pain[s], h.emissions.lambda_disability[s]}) {
        lp += priors.lambda_gamma ? gamma_lpdf(lambda, *priors.lambda_gamma)
                                  : half_normal_lpdf(lambda, priors.sd_lambda);
      }
    }
    if (h.emissions.copula.family == CopulaFamily::survival_gumbel)
      lp += half_normal_lpdf(h.emissions.copula.rho - 1.0, priors.sd_rho_tilde);
  }
  return lp;
}

std::vector<std::string> constrained_names(const ModelSpec& spec, Eigen::Index P) {
  std::vector<std::string> out;
  auto idx = [](Eigen::Index i) { return std::to_string(i + 1); };
  for (Eigen::Index k = 1; k < spec.K; ++k) out.push_back("alpha[" + idx(k) + "]");
  for (Eigen::Index k = 1; k < spec.K; ++k)
    for (Eigen::Index p = 0; p < P; ++p) out.push_back("beta[" + idx(k) + "," + idx(p) + "]");
  for (Eigen::Index k = 0; k < spec.K; ++k) {
    for (Eigen::Index s = 0; s < spec.S; ++s) out.push_back("pi[" + idx(k) + "," + idx(s) + "]");
    for (Eigen::Index r = 0; r < spec.S; ++r)
      for (Eigen::Index s = 0; s < spec.S; ++s)
        out.push_back("Phi[" + idx(k) + "," + idx(r) + "," + idx(s) + "]");
    for (Eigen::Index s = 0; s < spec.S; ++s) out.push_back("lambdaP[" + idx(k) + "," + idx(s) + "]");
    for (Eigen::Index s = 0; s < spec.S; ++s) out.push_back("lambdaD[" + idx(k) + "," + idx(s) + "]");
    if (spec.has_rho()) out.push_back("rho[" + idx(k) + "]");
  }
  return out;
}

Eigen::VectorXd flatten(const ModelParams& m, const ModelSpec& spec) {
  const Eigen::Index P = m.weights.P();
  std::vector<double> v;
  for (Eigen::Index k = 1; k < spec.K; ++k) v.push_back(m.weights.alpha[k]);
  for (Eigen::Index k = 1; k < spec.K; ++k)
    for (Eigen::Index p = 0; p < P; ++p) v.push_back(m.weights.beta(k, p));
  for (const auto& h : m.hmms) {
    for (Eigen::Index s = 0; s < spec.S; ++s) v.push_back(h.pi[s]);
    for (Eigen::Index r = 0; r < spec.S; ++r)
      for (Eigen::Index s = 0; s < spec.S; ++s) v.push_back(h.Phi(r, s));
    for (Eigen::Index s = 0; s < spec.S; ++s) v.push_back(h.emissions.lambda_pain[s]);
    for (Eigen::Index s = 0; s < spec.S; ++s) v.push_back(h.emissions.lambda_disability[s]);
    if (spec.has_rho()) v.push_back(h.emissions.copula.rho);
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ModelParams unflatten(const Eigen::VectorXd& v, const ModelSpec& spec, Eigen::Index P) {
  const auto expected = static_cast<Eigen::Index>(constrained_names(spec, P).size());
  if (v.size() != expected) throw InputError("parameter vector has the wrong length");
  ModelParams m;
  m.weights.alpha = Eigen::VectorXd::Zero(spec.K);
  m.weights.beta = Eigen::MatrixXd::Zero(spec.K, P);
  Eigen::Index i = 0;
  for (Eigen::Index k = 1; k < spec.K; ++k) m.weights.alpha[k] = v[i++];
  for (Eigen::Index k = 1; k < spec.K; ++k)
    for (Eigen::Index p = 0; p < P; ++p) m.weights.beta(k, p) = v[i++];
  for (Eigen::Index k = 0; k < spec.K; ++k) {
    SubgroupHMM h;
    h.pi.resize(spec.S);
    h.Phi.resize(spec.S, spec.S);
    h.emissions.lambda_pain.resize(spec.S);
    h.emissions.lambda_disability.resize(spec.S);
    for (Eigen::Index s = 0; s < spec.S; ++s) h.pi[s] = v[i++];
    for (Eigen::Index r = 0; r < spec.S; ++r)
      for (Eigen::Index s = 0; s < spec.S; ++s) h.Phi(r, s) = v[i++];
    for (Eigen::Index s = 0; s < spec.S; ++s) h.emissions.lambda_pain[s] = v[i++];
    for (Eigen::Index s = 0; s < spec.S; ++s) h.emissions.lambda_disability[s] = v[i++];
    h.emissions.copula.family = spec.copula;
    h.emissions.copula.rho = spec.has_rho() ? v[i++] : 1.0;
    h.emissions.MP = spec.MP;
    h.emissions.MD = spec.MD;
    m.hmms.push_back(std::move(h));
  }
  return m;
}

}  // namespace copulahmm
