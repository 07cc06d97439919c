#pragma once

#include <Eigen/Core>
#include <functional>

namespace recallsurv {

// Objective to minimize. May return +inf (or NaN) for points outside the
// usable region; the line search then rejects the step.
using Objective = std::function<double(const Eigen::VectorXd&)>;

// Central differences with step rel_step * max(1, |x_i|). Falls back to a
// one-sided stencil when one side is not finite.
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step, double fx);

// Symmetric central-difference Hessian from function values.
Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step);

struct BfgsOptions {
  int max_iterations = 500;
  double grad_tol = 1e-6;       // max-norm of the gradient
  double grad_step = 1e-5;      // relative finite-difference step
  double max_step = 2.0;        // cap on a single step's max-norm
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Quasi-Newton minimization with an inverse-Hessian BFGS update and a
// backtracking line search enforcing sufficient decrease.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& opts = {});

}  // namespace recallsurv
