#include "lbfgs.hpp"

#include <cmath>
#include <deque>
#include <exception>
#include <limits>

#include "copulahmm/error.hpp"

namespace copulahmm::detail {

namespace {
double try_eval(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  try {
    const double v = f(x, g);
    if (std::isfinite(v) && g.allFinite()) return v;
  } catch (const NumericalError&) {
  }
  return std::numeric_limits<double>::infinity();
}
}  // namespace

LbfgsResult minimize_lbfgs(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                           Eigen::VectorXd x0, int max_iterations, double gradient_tolerance, int memory) {
  LbfgsResult res;
  Eigen::VectorXd g(x0.size());
  double fx = try_eval(f, x0, g);
  if (!std::isfinite(fx)) throw NumericalError("objective is not finite at the starting point");
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd x_new(x.size()), g_new(x.size()), dir(x.size());
  int it = 0;
  for (; it < max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < gradient_tolerance) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    dir = -g;
    std::vector<double> a(s_hist.size());
    for (std::size_t j = s_hist.size(); j-- > 0;) {
      a[j] = rho_hist[j] * s_hist[j].dot(dir);
      dir -= a[j] * y_hist[j];
    }
    if (!s_hist.empty()) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double b = rho_hist[j] * y_hist[j].dot(dir);
      dir += (a[j] - b) * s_hist[j];
    }
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(1e-12, g.lpNorm<Eigen::Infinity>())) : 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = try_eval(f, x_new, g_new);
      if (f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double rel_change = std::abs(fx - f_new) / std::max({1.0, std::abs(fx), std::abs(f_new)});
    x = x_new;
    g = g_new;
    fx = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (rel_change < 1e-14 && g.lpNorm<Eigen::Infinity>() < 100 * gradient_tolerance) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.x = std::move(x);
  res.value = fx;
  res.gradient_norm = g.norm();
  res.iterations = it;
  if (g.lpNorm<Eigen::Infinity>() < gradient_tolerance) res.converged = true;
  return res;
}

}  // namespace copulahmm::detail
