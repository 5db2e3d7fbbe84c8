#include "copulahmm/copula.hpp"

#include <algorithm>
#include <numbers>

namespace copulahmm {

double copula_cdf(const CopulaParam& c, double u, double v) {
  c.validate();
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    throw ParameterError("copula arguments must lie in [0, 1]");
  constexpr double kOne = 1.0 - 1e-15;
  if (u <= 0.0 || v <= 0.0) return 0.0;
  if (u >= kOne) return v;
  if (v >= kOne) return u;
  double value = 0.0;
  if (c.independent()) {
    value = u * v;
  } else {
    // -log(1-u) via log1p keeps precision for small u.
    const double la = -std::log1p(-u);
    const double lb = -std::log1p(-v);
    const double hi = std::max(la, lb);
    const double lo = std::min(la, lb);
    const double norm = hi * std::pow(1.0 + std::pow(lo / hi, c.rho), 1.0 / c.rho);
    value = u + v - 1.0 + std::exp(-norm);
  }
  return std::clamp(value, std::max(u + v - 1.0, 0.0), std::min(u, v));
}

double lower_tail_coefficient(const CopulaParam& c) {
  c.validate();
  if (c.family == CopulaFamily::independence) return 0.0;
  return 2.0 - std::exp2(1.0 / c.rho);
}

namespace {

// Positive stable variable with Laplace transform exp(-s^alpha), 0 < alpha < 1
// (Kanter's representation).
double positive_stable(double alpha, Rng& rng) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::exponential_distribution<double> expo(1.0);
  double theta = angle(rng);
  while (theta <= 0.0) theta = angle(rng);
  const double w = expo(rng);
  const double a = std::sin(alpha * theta) / std::pow(std::sin(theta), 1.0 / alpha);
  const double b = std::pow(std::sin((1.0 - alpha) * theta) / w, (1.0 - alpha) / alpha);
  return a * b;
}

double open_unit(double x) {
  constexpr double eps = 1e-16;
  return std::clamp(x, eps, 1.0 - eps);
}

}  // namespace

std::pair<double, double> copula_sample(const CopulaParam& c, Rng& rng) {
  c.validate();
  std::exponential_distribution<double> expo(1.0);
  if (c.independent()) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    const double v = unif(rng);
    return {open_unit(u), open_unit(v)};
  }
  const double alpha = 1.0 / c.rho;
  const double frailty = positive_stable(alpha, rng);
  const double e1 = expo(rng);
  const double e2 = expo(rng);
  // Gumbel generator inverse: psi(s) = exp(-s^alpha).
  const double g1 = std::exp(-std::pow(e1 / frailty, alpha));
  const double g2 = std::exp(-std::pow(e2 / frailty, alpha));
  return {open_unit(1.0 - g1), open_unit(1.0 - g2)};
}

}  // namespace copulahmm
