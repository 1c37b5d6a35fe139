#pragma once

// Limited-memory BFGS minimizer with a strong Wolfe line search.
//
// Close to the optimum, objective differences fall below double precision
// long before the gradient reaches a tight tolerance. The line search then
// accepts steps satisfying the approximate Wolfe conditions of Hager and
// Zhang, which rely on directional derivatives only.

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace rtcp {

// Returns f(x) and writes the gradient. Returning a non-finite value marks x
// as infeasible; the line search then shortens the step.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& gradient)>;

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 2000;
  double gradient_tolerance = 1e-6;  // sup-norm
  double sufficient_decrease = 1e-4;
  double curvature = 0.9;
  int max_line_search = 40;
  double approx_wolfe_epsilon = 1e-11;  // relative objective noise level
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
};

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0, const LbfgsOptions& options = {});

}  // namespace rtcp
