#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "copulahmm/copula.hpp"
#include "copulahmm/data.hpp"
#include "copulahmm/scalar.hpp"

namespace copulahmm {

inline constexpr double kPmfFloor = 1e-300;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Neumaier-compensated running sum.
template <typename Scalar>
class CompensatedSum {
 public:
  void add(const Scalar& x) {
    const Scalar t = sum_ + x;
    if (std::abs(value_of(sum_)) >= std::abs(value_of(x)))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  Scalar value() const { return sum_ + comp_; }

 private:
  Scalar sum_ = Scalar(0.0);
  Scalar comp_ = Scalar(0.0);
};

// Poisson(lambda) restricted to {0, ..., M}.
template <typename Scalar>
struct TruncatedPoisson {
  VectorT<Scalar> log_pmf;
  VectorT<Scalar> pmf;
  VectorT<Scalar> survival;  // survival[y] = P(Y > y); survival[M] = 0

  TruncatedPoisson(const Scalar& lambda, int M) {
    using std::exp;
    using std::log;
    if (!(value_of(lambda) > 0.0) || !std::isfinite(value_of(lambda)))
      throw ParameterError("truncated Poisson rate must be positive and finite");
    if (M < 0) throw ParameterError("truncated Poisson support maximum must be >= 0");
    const Eigen::Index n = M + 1;
    const Scalar log_lambda = log(lambda);
    VectorT<Scalar> w(n);
    double wmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index y = 0; y < n; ++y) {
      w[y] = static_cast<double>(y) * log_lambda - std::lgamma(static_cast<double>(y) + 1.0);
      wmax = std::max(wmax, value_of(w[y]));
    }
    CompensatedSum<Scalar> z;
    for (Eigen::Index y = 0; y < n; ++y) z.add(exp(w[y] - wmax));
    const Scalar log_norm = wmax + log(z.value());
    log_pmf.resize(n);
    pmf.resize(n);
    for (Eigen::Index y = 0; y < n; ++y) {
      log_pmf[y] = w[y] - log_norm;
      pmf[y] = exp(log_pmf[y]);
    }
    survival.resize(n);
    CompensatedSum<Scalar> tail;
    for (Eigen::Index y = n - 1; y >= 0; --y) {
      survival[y] = tail.value();
      if (value_of(survival[y]) > 1.0) survival[y] = Scalar(1.0) + 0.0 * survival[y];
      tail.add(pmf[y]);
    }
  }

  // P(Y > y) with P(Y > -1) = 1.
  Scalar survival_at(int y) const {
    if (y < 0) return pmf[0] * 0.0 + 1.0;
    return survival[y];
  }
};

// Log-pmf table of one hidden state: joint pmf over the (MP+1) x (MD+1) grid
// plus both margins.
template <typename Scalar>
struct StateLogTable {
  MatrixT<Scalar> joint;
  VectorT<Scalar> pain;
  VectorT<Scalar> disability;
};

// Joint pmf by inclusion-exclusion over the copula CDF. With survival
// probabilities S_P, S_D the copula's linear part cancels and
//   pmf(yP, yD) = sum_{iP,iD} (-1)^(iP+iD) G(S_P(yP - 1 + iP), S_D(yD - 1 + iD)).
template <typename Scalar>
MatrixT<Scalar> joint_pmf_grid(const TruncatedPoisson<Scalar>& mp, const TruncatedPoisson<Scalar>& md,
                               const Scalar& rho, bool independent) {
  const Eigen::Index np = mp.pmf.size();
  const Eigen::Index nd = md.pmf.size();
  MatrixT<Scalar> pmf(np, nd);
  if (independent) {
    for (Eigen::Index i = 0; i < np; ++i)
      for (Eigen::Index j = 0; j < nd; ++j) pmf(i, j) = mp.pmf[i] * md.pmf[j];
    return pmf;
  }
  // grid(i, j) = G(S_P(i - 1), S_D(j - 1))
  MatrixT<Scalar> grid(np + 1, nd + 1);
  for (Eigen::Index i = 0; i <= np; ++i) {
    const Scalar sp = mp.survival_at(static_cast<int>(i) - 1);
    for (Eigen::Index j = 0; j <= nd; ++j) {
      const Scalar sd = md.survival_at(static_cast<int>(j) - 1);
      grid(i, j) = gumbel_at_survival(sp, sd, rho);
    }
  }
  for (Eigen::Index i = 0; i < np; ++i)
    for (Eigen::Index j = 0; j < nd; ++j)
      pmf(i, j) = (grid(i, j) - grid(i + 1, j)) - (grid(i, j + 1) - grid(i + 1, j + 1));
  return pmf;
}

template <typename Scalar>
StateLogTable<Scalar> state_log_table(const Scalar& lambda_pain, const Scalar& lambda_disability,
                                      const Scalar& rho, bool independent, int MP, int MD) {
  using std::log;
  const TruncatedPoisson<Scalar> mp(lambda_pain, MP);
  const TruncatedPoisson<Scalar> md(lambda_disability, MD);
  const MatrixT<Scalar> pmf = joint_pmf_grid(mp, md, rho, independent);
  StateLogTable<Scalar> out;
  out.joint.resize(pmf.rows(), pmf.cols());
  const double log_floor = std::log(kPmfFloor);
  for (Eigen::Index i = 0; i < pmf.rows(); ++i) {
    for (Eigen::Index j = 0; j < pmf.cols(); ++j) {
      if (independent) {
        const Scalar v = mp.log_pmf[i] + md.log_pmf[j];
        out.joint(i, j) = value_of(v) > log_floor ? v : Scalar(log_floor) + 0.0 * pmf(i, j);
      } else if (value_of(pmf(i, j)) > kPmfFloor)
        out.joint(i, j) = log(pmf(i, j));
      else
        out.joint(i, j) = Scalar(log_floor) + 0.0 * pmf(i, j);
    }
  }
  out.pain = mp.log_pmf;
  out.disability = md.log_pmf;
  return out;
}

struct EmissionParams {
  Eigen::VectorXd lambda_pain;        // per state
  Eigen::VectorXd lambda_disability;  // per state
  CopulaParam copula;
  int MP = 10;
  int MD = 7;

  Eigen::Index S() const { return lambda_pain.size(); }
  void validate() const;
};

// Log-probabilities for every (state, yP, yD), plus per-state margins used
// when one coordinate of an observation is missing.
struct EmissionTable {
  std::vector<Eigen::MatrixXd> joint;  // [state](yP, yD)
  Eigen::MatrixXd pain;                // (state, yP)
  Eigen::MatrixXd disability;          // (state, yD)

  Eigen::Index S() const { return static_cast<Eigen::Index>(joint.size()); }
  double log_emission(Eigen::Index s, const Observation& o) const {
    if (o.pain && o.disability) return joint[static_cast<std::size_t>(s)](*o.pain, *o.disability);
    if (o.pain) return pain(s, *o.pain);
    if (o.disability) return disability(s, *o.disability);
    return 0.0;
  }
};

// Poisson(lambda) pmf truncated to {0..M}, normalized to sum 1.
Eigen::VectorXd trunc_poisson_pmf(double lambda, int M);

// P(yP, yD | state s); s is 0-based.
double joint_pmf(const EmissionParams& e, Eigen::Index s, int yP, int yD);

EmissionTable joint_log_pmf_table(const EmissionParams& e);

// (F_P^{-1}(u), F_D^{-1}(v)) for (u, v) drawn from the copula.
std::pair<int, int> emission_sample(const EmissionParams& e, Eigen::Index s, Rng& rng);

}  // namespace copulahmm
