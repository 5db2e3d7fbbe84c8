#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "copulahmm/copula.hpp"
#include "copulahmm/mixture.hpp"
#include "copulahmm/scalar.hpp"

namespace copulahmm {

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

struct PriorSettings {
  double sd_alpha = 5.0;
  double sd_beta_tilde = 1.0;
  double sd_lambda = 5.0;     // half-normal scale on the emission rates
  double sd_rho_tilde = 5.0;  // half-normal scale on rho - 1
  // Replaces the half-normal on the rates when set (conjugate checks).
  std::optional<GammaPrior> lambda_gamma;
  // Use R / sqrt(N - 1) in beta_tilde = R beta. Off by default: the plain R
  // makes the unit prior on beta_tilde shrink beta at rate 1/sqrt(N).
  bool scale_qr = false;

  void validate() const;
};

struct ModelSpec {
  int K = 1;
  int S = 3;
  int MP = 10;
  int MD = 7;
  CopulaFamily copula = CopulaFamily::survival_gumbel;
  PriorSettings priors;

  bool has_rho() const { return copula == CopulaFamily::survival_gumbel; }
  void validate() const;
};

// Dirichlet concentration of the initial distribution: S on the severe state
// (index 0), 1 elsewhere.
Eigen::VectorXd initial_concentration(int S);
// Row r of the transition prior: S on the diagonal, 1 elsewhere.
Eigen::VectorXd transition_concentration(int S, int r);

// Offsets into the flat unconstrained vector:
//   alpha[1..K-1], beta_tilde[1..K-1][0..P-1], then per subgroup k:
//   pi stick-breaking (S-1), Phi rows (S x (S-1)), log lambda_P (S),
//   log lambda_D (S), log(rho - 1) (1, survival Gumbel only).
class ParameterLayout {
 public:
  ParameterLayout(const ModelSpec& spec, Eigen::Index P);

  Eigen::Index K() const { return K_; }
  Eigen::Index S() const { return S_; }
  Eigen::Index P() const { return P_; }
  bool has_rho() const { return has_rho_; }
  Eigen::Index size() const { return sub_offset_ + K_ * block_; }

  Eigen::Index alpha(Eigen::Index k) const { return k - 1; }
  Eigen::Index beta(Eigen::Index k, Eigen::Index p) const { return (K_ - 1) + (k - 1) * P_ + p; }
  Eigen::Index pi(Eigen::Index k) const { return sub_offset_ + k * block_; }
  Eigen::Index phi_row(Eigen::Index k, Eigen::Index r) const {
    return pi(k) + (S_ - 1) + r * (S_ - 1);
  }
  Eigen::Index log_lambda_pain(Eigen::Index k, Eigen::Index s) const {
    return pi(k) + (S_ - 1) * (S_ + 1) + s;
  }
  Eigen::Index log_lambda_disability(Eigen::Index k, Eigen::Index s) const {
    return log_lambda_pain(k, 0) + S_ + s;
  }
  Eigen::Index log_rho_tilde(Eigen::Index k) const { return log_lambda_pain(k, 0) + 2 * S_; }

  // Human-readable name of each unconstrained coordinate.
  std::vector<std::string> names() const;

 private:
  Eigen::Index K_, S_, P_;
  bool has_rho_;
  Eigen::Index sub_offset_, block_;
};

// Stick-breaking map R^{n-1} -> log-simplex in R^n, with the log-Jacobian of
// the map to the simplex (first n-1 coordinates).
template <typename Scalar>
void stick_breaking(const VectorT<Scalar>& y, VectorT<Scalar>& log_x, Scalar& log_jacobian) {
  using std::exp;
  using std::log;
  const Eigen::Index n = y.size() + 1;
  log_x.resize(n);
  auto softplus = [](const Scalar& a) -> Scalar {
    if (value_of(a) > 0.0) return a + log(1.0 + exp(-a));
    return log(1.0 + exp(a));
  };
  Scalar log_rem = y.size() > 0 ? y[0] * 0.0 : Scalar(0.0);
  log_jacobian = log_rem;
  for (Eigen::Index j = 0; j + 1 < n; ++j) {
    const Scalar a = y[j] - std::log(static_cast<double>(n - 1 - j));
    const Scalar log_z = -softplus(-a);
    const Scalar log_1mz = -softplus(a);
    log_x[j] = log_z + log_rem;
    log_jacobian += log_z + log_1mz + log_rem;
    log_rem += log_1mz;
  }
  log_x[n - 1] = log_rem;
}

// Inverse of stick_breaking for a strictly positive simplex vector.
Eigen::VectorXd inverse_stick_breaking(const Eigen::VectorXd& x);

Eigen::VectorXd to_unconstrained(const ModelParams& m, const Eigen::MatrixXd& R, const ModelSpec& spec);
ModelParams from_unconstrained(const Eigen::VectorXd& u, const Eigen::MatrixXd& R, const ModelSpec& spec);

// Log prior density of constrained parameters (no Jacobian terms). beta_tilde
// is formed as R beta.
double log_prior(const ModelParams& m, const PriorSettings& priors, const Eigen::MatrixXd& R);

// Flat, named view of the constrained parameters (pinned entries excluded).
std::vector<std::string> constrained_names(const ModelSpec& spec, Eigen::Index P);
Eigen::VectorXd flatten(const ModelParams& m, const ModelSpec& spec);
ModelParams unflatten(const Eigen::VectorXd& v, const ModelSpec& spec, Eigen::Index P);

}  // namespace copulahmm
