#include "recallsurv/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace recallsurv {

namespace {

double step_for(double xi, double rel) { return rel * std::max(1.0, std::abs(xi)); }

}  // namespace

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step, double fx) {
  const Eigen::Index p = x.size();
  Eigen::VectorXd g(p);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < p; ++i) {
    const double h = step_for(x[i], rel_step);
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g[i] = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp)) {
      g[i] = (fp - fx) / h;
    } else if (std::isfinite(fm)) {
      g[i] = (fx - fm) / h;
    } else {
      g[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return g;
}

Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step) {
  const Eigen::Index p = x.size();
  Eigen::MatrixXd hess(p, p);
  Eigen::VectorXd h(p);
  for (Eigen::Index i = 0; i < p; ++i) h[i] = step_for(x[i], rel_step);
  const double f0 = f(x);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < p; ++i) {
    xp[i] = x[i] + h[i];
    const double fp = f(xp);
    xp[i] = x[i] - h[i];
    const double fm = f(xp);
    xp[i] = x[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      double acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          xp[i] = x[i] + si * h[i];
          xp[j] = x[j] + sj * h[j];
          acc += si * sj * f(xp);
        }
      }
      xp[i] = x[i];
      xp[j] = x[j];
      hess(i, j) = hess(j, i) = acc / (4.0 * h[i] * h[j]);
    }
  }
  return hess;
}

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& opts) {
  const Eigen::Index p = x0.size();
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  auto grad = [&](const Eigen::VectorXd& x, double fx) {
    evals += 2 * static_cast<int>(p);
    return numerical_gradient(f, x, opts.grad_step, fx);
  };

  BfgsResult res;
  res.x = std::move(x0);
  res.value = eval(res.x);
  if (!std::isfinite(res.value)) {
    res.gradient = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    res.evaluations = evals;
    return res;
  }
  res.gradient = grad(res.x, res.value);

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(p, p);
  bool fresh = true;  // hinv is a (scaled) identity
  constexpr double c1 = 1e-4;

  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    if (!res.gradient.allFinite()) break;
    if (res.gradient.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -hinv * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      fresh = true;
      dir = -res.gradient;
      slope = res.gradient.dot(dir);
    }
    const double dir_norm = dir.lpNorm<Eigen::Infinity>();
    double alpha = dir_norm > opts.max_step ? opts.max_step / dir_norm : 1.0;

    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int k = 0; k < 60; ++k) {
      x_new = res.x + alpha * dir;
      f_new = eval(x_new);
      if (std::isfinite(f_new) && f_new <= res.value + c1 * alpha * slope) {
        accepted = true;
        break;
      }
      // quadratic interpolation when the trial value is usable
      double next = 0.5 * alpha;
      if (std::isfinite(f_new)) {
        const double denom = 2.0 * (f_new - res.value - slope * alpha);
        if (denom > 0.0) next = std::clamp(-slope * alpha * alpha / denom, 0.1 * alpha, 0.5 * alpha);
      }
      alpha = next;
    }
    if (!accepted) {
      if (!fresh) {
        hinv.setIdentity();
        fresh = true;
        continue;
      }
      break;
    }

    Eigen::VectorXd g_new = grad(x_new, f_new);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.gradient;
    const double sy = s.dot(y);
    if (g_new.allFinite() && sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        hinv *= sy / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
      hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    res.x = std::move(x_new);
    res.value = f_new;
    res.gradient = std::move(g_new);
  }
  if (!res.converged && res.gradient.allFinite() && res.gradient.lpNorm<Eigen::Infinity>() < opts.grad_tol)
    res.converged = true;
  res.evaluations = evals;
  return res;
}

}  // namespace recallsurv
