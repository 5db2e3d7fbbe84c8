#pragma once

#include <cmath>
#include <type_traits>

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

namespace copulahmm {

// Forward-mode scalar used for local parameter derivatives.
template <int N>
using Dual = Eigen::AutoDiffScalar<Eigen::Matrix<double, N, 1>>;
using DualX = Eigen::AutoDiffScalar<Eigen::VectorXd>;

inline double value_of(double x) { return x; }
template <typename D>
double value_of(const Eigen::AutoDiffScalar<D>& x) {
  return x.value();
}

template <typename T>
struct is_dual : std::false_type {};
template <typename D>
struct is_dual<Eigen::AutoDiffScalar<D>> : std::true_type {};

// x^y for a possibly-dual exponent (Eigen's AutoDiff pow only accepts a
// constant exponent). Requires x > 0.
template <typename Scalar>
Scalar pow_dual(const Scalar& x, const Scalar& y) {
  using std::exp;
  using std::log;
  return exp(y * log(x));
}

// Dual-aware constant.
template <typename Scalar, typename Like>
Scalar constant(double v, const Like& like) {
  if constexpr (is_dual<Scalar>::value) {
    Scalar out(v);
    out.derivatives() = decltype(like.derivatives())::PlainObject::Zero(like.derivatives().size());
    return out;
  } else {
    (void)like;
    return v;
  }
}

}  // namespace copulahmm
