#include "copulahmm/emission.hpp"

#include <string>

namespace copulahmm {

void EmissionParams::validate() const {
  if (lambda_pain.size() != lambda_disability.size() || lambda_pain.size() < 1)
    throw ParameterError("emission rates must have one entry per state");
  for (Eigen::Index s = 0; s < S(); ++s) {
    if (!(lambda_pain[s] > 0.0) || !std::isfinite(lambda_pain[s]) ||
        !(lambda_disability[s] > 0.0) || !std::isfinite(lambda_disability[s]))
      throw ParameterError("emission rates must be positive and finite (state " +
                           std::to_string(s) + ")");
  }
  if (MP < 0 || MD < 0) throw ParameterError("emission support maxima must be >= 0");
  copula.validate();
}

Eigen::VectorXd trunc_poisson_pmf(double lambda, int M) {
  return TruncatedPoisson<double>(lambda, M).pmf;
}

double joint_pmf(const EmissionParams& e, Eigen::Index s, int yP, int yD) {
  e.validate();
  if (s < 0 || s >= e.S()) throw ParameterError("state index out of range");
  if (yP < 0 || yP > e.MP || yD < 0 || yD > e.MD)
    throw ParameterError("observation outside the emission support");
  const TruncatedPoisson<double> mp(e.lambda_pain[s], e.MP);
  const TruncatedPoisson<double> md(e.lambda_disability[s], e.MD);
  if (e.copula.independent()) return mp.pmf[yP] * md.pmf[yD];
  const double rho = e.copula.rho;
  auto g = [&](int i, int j) {
    return gumbel_at_survival(mp.survival_at(i), md.survival_at(j), rho);
  };
  const double p = (g(yP - 1, yD - 1) - g(yP, yD - 1)) - (g(yP - 1, yD) - g(yP, yD));
  return std::clamp(p, 0.0, 1.0);
}

EmissionTable joint_log_pmf_table(const EmissionParams& e) {
  e.validate();
  const Eigen::Index S = e.S();
  EmissionTable table;
  table.joint.reserve(static_cast<std::size_t>(S));
  table.pain.resize(S, e.MP + 1);
  table.disability.resize(S, e.MD + 1);
  for (Eigen::Index s = 0; s < S; ++s) {
    auto st = state_log_table<double>(e.lambda_pain[s], e.lambda_disability[s], e.copula.rho,
                                      e.copula.independent(), e.MP, e.MD);
    table.joint.push_back(std::move(st.joint));
    table.pain.row(s) = st.pain.transpose();
    table.disability.row(s) = st.disability.transpose();
  }
  return table;
}

namespace {
// Smallest y with F(y) >= u.
int quantile(const TruncatedPoisson<double>& d, double u) {
  const Eigen::Index n = d.pmf.size();
  for (Eigen::Index y = 0; y < n - 1; ++y)
    if (1.0 - d.survival[y] >= u) return static_cast<int>(y);
  return static_cast<int>(n - 1);
}
}  // namespace

std::pair<int, int> emission_sample(const EmissionParams& e, Eigen::Index s, Rng& rng) {
  if (s < 0 || s >= e.S()) throw ParameterError("state index out of range");
  const auto [u, v] = copula_sample(e.copula, rng);
  const TruncatedPoisson<double> mp(e.lambda_pain[s], e.MP);
  const TruncatedPoisson<double> md(e.lambda_disability[s], e.MD);
  return {quantile(mp, u), quantile(md, v)};
}

}  // namespace copulahmm
