#pragma once

#include <functional>

#include <Eigen/Dense>

namespace copulahmm::detail {

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimizes f with limited-memory BFGS and a backtracking Armijo line search.
// f returns the value and fills the gradient; it may throw to signal an
// infeasible point, which the line search treats as an infinite value.
LbfgsResult minimize_lbfgs(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                           Eigen::VectorXd x0, int max_iterations, double gradient_tolerance,
                           int memory = 10);

}  // namespace copulahmm::detail
