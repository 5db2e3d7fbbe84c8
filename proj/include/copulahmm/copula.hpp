#pragma once

#include <cmath>
#include <random>
#include <utility>

#include "copulahmm/error.hpp"
#include "copulahmm/scalar.hpp"

namespace copulahmm {

using Rng = std::mt19937_64;

enum class CopulaFamily { survival_gumbel, independence };

struct CopulaParam {
  double rho = 1.0;
  CopulaFamily family = CopulaFamily::survival_gumbel;

  void validate() const {
    if (!(rho >= 1.0) || !std::isfinite(rho))
      throw ParameterError("copula parameter rho must be finite and >= 1");
  }
  bool independent() const { return family == CopulaFamily::independence || rho == 1.0; }
};

// Gumbel copula evaluated at survival probabilities (a, b) = (1-u, 1-v):
//   exp(-((-log a)^rho + (-log b)^rho)^(1/rho)).
// The survival Gumbel copula is C(u,v) = u + v - 1 + gumbel_at_survival(1-u, 1-v).
// Working with survival probabilities keeps the upper-tail inclusion-exclusion
// free of the cancelling linear terms.
template <typename Scalar>
Scalar gumbel_at_survival(const Scalar& a, const Scalar& b, const Scalar& rho) {
  using std::exp;
  using std::log;
  if (value_of(a) <= 0.0 || value_of(b) <= 0.0) return a * 0.0;
  if (value_of(a) >= 1.0) return b;
  if (value_of(b) >= 1.0) return a;
  const Scalar la = -log(a);
  const Scalar lb = -log(b);
  // (la^rho + lb^rho)^(1/rho) = hi * (1 + (lo/hi)^rho)^(1/rho)
  const bool a_hi = value_of(la) >= value_of(lb);
  const Scalar& hi = a_hi ? la : lb;
  const Scalar& lo = a_hi ? lb : la;
  const Scalar ratio = lo / hi;
  Scalar norm = hi;
  if (value_of(ratio) > 0.0) {
    const Scalar one_plus = 1.0 + pow_dual(ratio, rho);
    norm = hi * pow_dual(one_plus, Scalar(1.0 / rho));
  }
  return exp(-norm);
}

inline double gumbel_at_survival_independent(double a, double b) { return a * b; }

// C_rho(u, v) of the survival Gumbel copula (independence when rho == 1),
// clamped to the Frechet-Hoeffding bounds.
double copula_cdf(const CopulaParam& c, double u, double v);

// 2 - 2^(1/rho).
double lower_tail_coefficient(const CopulaParam& c);

// One draw from C_rho: Marshall-Olkin sampling of the Gumbel copula with a
// positive-stable frailty, then reflection (u, v) -> (1-u, 1-v).
std::pair<double, double> copula_sample(const CopulaParam& c, Rng& rng);

}  // namespace copulahmm
