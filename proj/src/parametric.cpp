#include "recallsurv/parametric.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "recallsurv/error.hpp"
#include "recallsurv/optimize.hpp"
#include "recallsurv/stats.hpp"

namespace recallsurv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPi0Horizon = 5.0;
// category driven by logistic pair i (see LogisticRecall)
constexpr std::array<int, 3> kPairCategory{kNoRecall, kMonth, kYear};

// Pieces of the recall likelihood that only depend on (s, category) are
// cached per evaluation; interview ages repeat a lot in practice.
struct SpanCache {
  std::vector<std::pair<double, double>> entries;
  double* find(double s) {
    for (auto& [key, val] : entries)
      if (key == s) return &val;
    return nullptr;
  }
};

template <class Recall>
double recall_loglik(std::span<const SubjectRecord> data, const Weibull& w, const Recall& recall, bool fold_partial) {
  std::vector<double> terms;
  terms.reserve(data.size());
  SpanCache norecall_cache;
  auto integral = [&](double s, double lo, double hi, int k) {
    return integrate_pieces([&](double u) { return w.pdf(u) * recall.probs(s - u)[static_cast<size_t>(k)]; }, lo,
                            hi);
  };
  for (const auto& rec : data) {
    double term;
    if (rec.delta == 0) {
      term = -std::pow(rec.s / w.scale, w.shape);
    } else {
      int eps = rec.epsilon;
      if (fold_partial && (eps == kMonth || eps == kYear)) eps = kNoRecall;
      if (eps == kExact) {
        if (!(rec.v < rec.s)) return kNegInf;
        term = w.log_pdf(rec.v) + std::log(recall.probs(rec.s - rec.v)[kExact]);
      } else if (eps == kNoRecall) {
        double* cached = norecall_cache.find(rec.s);
        if (cached == nullptr) {
          norecall_cache.entries.emplace_back(rec.s, std::log(integral(rec.s, 0.0, rec.s, kNoRecall)));
          cached = &norecall_cache.entries.back().second;
        }
        term = *cached;
      } else {
        const AgeRange r = event_age_range(rec);
        term = std::log(integral(rec.s, r.lo, r.hi, eps));
      }
    }
    if (!std::isfinite(term)) return kNegInf;
    terms.push_back(term);
  }
  return pairwise_sum(terms);
}

double current_status_loglik(std::span<const SubjectRecord> data, const Weibull& w) {
  std::vector<double> terms;
  terms.reserve(data.size());
  for (const auto& rec : data) {
    const double z = std::pow(rec.s / w.scale, w.shape);
    const double term = rec.delta == 0 ? -z : std::log(-std::expm1(-z));
    if (!std::isfinite(term)) return kNegInf;
    terms.push_back(term);
  }
  return pairwise_sum(terms);
}

LogisticRecall logistic_from(std::span<const double> eta) {
  LogisticRecall lr;
  std::copy(eta.begin(), eta.end(), lr.eta.begin());
  return lr;
}

void check_eta(LikelihoodKind kind, std::span<const double> eta) {
  if (static_cast<int>(eta.size()) != recall_parameter_count(kind))
    throw DomainError(to_string(kind) + " likelihood expects " + std::to_string(recall_parameter_count(kind)) +
                      " recall parameters, got " + std::to_string(eta.size()));
}

double quantile_sorted(const std::vector<double>& xs, double p) {
  const double pos = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

Eigen::VectorXd median_gradient(const ParametricFit& fit) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(parameter_count(fit.kind));
  const double k = fit.theta.shape;
  const double med = fit.theta.median();
  g[0] = -med * std::log(std::numbers::ln2) / (k * k);
  g[1] = std::pow(std::numbers::ln2, 1.0 / k);
  return g;
}

Eigen::VectorXd pi0_gradient(const ParametricFit& fit) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(parameter_count(fit.kind));
  if (fit.kind == LikelihoodKind::BinaryRecall) {
    const double p = BinaryRecall{fit.eta[0], fit.eta[1]}.nonrecall(kPi0Horizon);
    g[2] = -p * (1.0 - p);
    g[3] = -kPi0Horizon * p * (1.0 - p);
  } else if (fit.kind == LikelihoodKind::PartialRecall) {
    const RecallProbs pr = logistic_from(fit.eta).probs(kPi0Horizon);
    for (int i = 0; i < 3; ++i) {
      const double d = -pr[0] * pr[static_cast<size_t>(kPairCategory[static_cast<size_t>(i)])];
      g[2 + i] = d;
      g[5 + i] = kPi0Horizon * d;
    }
  }
  return g;
}

double delta_se(const Eigen::VectorXd& grad, const Eigen::MatrixXd& cov) {
  const double var = grad.dot(cov * grad);
  return std::sqrt(std::max(0.0, var));
}

}  // namespace

std::string to_string(LikelihoodKind kind) {
  switch (kind) {
    case LikelihoodKind::CurrentStatus:
      return "current";
    case LikelihoodKind::BinaryRecall:
      return "binary";
    default:
      return "partial";
  }
}

LikelihoodKind parse_likelihood_kind(const std::string& name) {
  if (name == "current" || name == "current_status") return LikelihoodKind::CurrentStatus;
  if (name == "binary") return LikelihoodKind::BinaryRecall;
  if (name == "partial") return LikelihoodKind::PartialRecall;
  throw DomainError("unknown likelihood kind '" + name + "' (expected current, binary or partial)");
}

int recall_parameter_count(LikelihoodKind kind) {
  switch (kind) {
    case LikelihoodKind::CurrentStatus:
      return 0;
    case LikelihoodKind::BinaryRecall:
      return 2;
    default:
      return 6;
  }
}

RecallModel recall_model_for(LikelihoodKind kind, std::span<const double> eta) {
  check_eta(kind, eta);
  switch (kind) {
    case LikelihoodKind::CurrentStatus: {
      Eigen::Matrix<double, 4, Eigen::Dynamic> b(4, 1);
      b << 0.0, 0.0, 0.0, 1.0;
      return RecallModel(PiecewiseRecall({0.0}, b));
    }
    case LikelihoodKind::BinaryRecall:
      return RecallModel(BinaryRecall{eta[0], eta[1]});
    default:
      return RecallModel(logistic_from(eta));
  }
}

double loglik(std::span<const SubjectRecord> data, LikelihoodKind kind, const Weibull& theta,
              std::span<const double> eta) {
  check_eta(kind, eta);
  if (!(theta.shape > 0.0 && theta.scale > 0.0) || !std::isfinite(theta.shape) || !std::isfinite(theta.scale))
    return kNegInf;
  for (double e : eta)
    if (!std::isfinite(e)) return kNegInf;
  switch (kind) {
    case LikelihoodKind::CurrentStatus:
      return current_status_loglik(data, theta);
    case LikelihoodKind::BinaryRecall:
      return recall_loglik(data, theta, BinaryRecall{eta[0], eta[1]}, true);
    default:
      return recall_loglik(data, theta, logistic_from(eta), false);
  }
}

Eigen::VectorXd to_transformed(const Weibull& theta, std::span<const double> eta) {
  Eigen::VectorXd x(2 + static_cast<Eigen::Index>(eta.size()));
  x[0] = std::log(theta.shape);
  x[1] = std::log(theta.scale);
  for (size_t i = 0; i < eta.size(); ++i) x[2 + static_cast<Eigen::Index>(i)] = eta[i];
  return x;
}

double loglik_transformed(std::span<const SubjectRecord> data, LikelihoodKind kind, const Eigen::VectorXd& x) {
  const Weibull theta{std::exp(x[0]), std::exp(x[1])};
  return loglik(data, kind, theta, std::span<const double>(x.data() + 2, static_cast<size_t>(x.size() - 2)));
}

double exact_recall_at(LikelihoodKind kind, std::span<const double> eta, double elapsed) {
  switch (kind) {
    case LikelihoodKind::CurrentStatus:
      return std::numeric_limits<double>::quiet_NaN();
    case LikelihoodKind::BinaryRecall:
      return 1.0 - BinaryRecall{eta[0], eta[1]}.nonrecall(elapsed);
    default:
      return logistic_from(eta).probs(elapsed)[kExact];
  }
}

Weibull initial_theta(std::span<const SubjectRecord> data) {
  std::vector<double> ages;
  for (const auto& rec : data)
    if (rec.exact()) ages.push_back(rec.v);
  if (ages.size() < 4) return {10.0, 12.0};
  std::sort(ages.begin(), ages.end());
  const double q1 = quantile_sorted(ages, 0.25), q3 = quantile_sorted(ages, 0.75);
  if (!(q1 > 0.0 && q3 > q1)) return {10.0, 12.0};
  const double k = std::log(std::log(4.0) / std::log(4.0 / 3.0)) / std::log(q3 / q1);
  const double shape = std::clamp(k, 1.0, 50.0);
  const double scale = q3 / std::pow(std::log(4.0), 1.0 / shape);
  return {shape, scale};
}

ParametricFit fit_mle(std::span<const SubjectRecord> data, LikelihoodKind kind, const FitOptions& opts) {
  if (data.empty()) throw DegenerateData("cannot fit an empty dataset");
  const auto events = std::count_if(data.begin(), data.end(), [](const auto& r) { return r.delta == 1; });
  if (events == 0) throw DegenerateData("no subject has experienced the event");
  if (kind == LikelihoodKind::CurrentStatus && events == static_cast<long>(data.size()))
    throw DegenerateData("current status fit needs at least one subject without the event");

  const int rc = recall_parameter_count(kind);
  const Weibull theta0 = opts.init_theta.value_or(initial_theta(data));
  std::vector<double> eta0 = opts.init_eta.value_or(std::vector<double>(static_cast<size_t>(rc), 0.0));
  check_eta(kind, eta0);

  const Eigen::VectorXd full0 = to_transformed(theta0, eta0);
  // with fix_eta only (log shape, log scale) move
  auto expand = [&](const Eigen::VectorXd& x) {
    if (!opts.fix_eta) return x;
    Eigen::VectorXd full = full0;
    full.head(2) = x;
    return full;
  };
  const Eigen::VectorXd x0 = opts.fix_eta ? Eigen::VectorXd(full0.head(2)) : full0;
  const Objective objective = [&](const Eigen::VectorXd& x) {
    const double ll = loglik_transformed(data, kind, expand(x));
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };
  BfgsOptions bopts;
  bopts.max_iterations = opts.max_iterations;
  bopts.grad_tol = opts.grad_tol;

  BfgsResult best = minimize_bfgs(objective, x0, bopts);
  int starts = 1;
  // jittered restarts, deterministic
  constexpr std::array<double, 3> kShapeJitter{0.3, -0.3, 0.6};
  constexpr std::array<double, 3> kScaleJitter{0.05, -0.05, 0.1};
  constexpr std::array<double, 3> kEtaJitter{0.2, -0.2, 0.4};
  for (int j = 0; j < opts.extra_starts && !best.converged; ++j) {
    Eigen::VectorXd xj = x0;
    xj[0] += kShapeJitter[static_cast<size_t>(j % 3)];
    xj[1] += kScaleJitter[static_cast<size_t>(j % 3)];
    for (Eigen::Index i = 2; i < xj.size(); ++i) xj[i] += (i % 2 == 0 ? 1.0 : -1.0) * kEtaJitter[static_cast<size_t>(j % 3)];
    BfgsResult r = minimize_bfgs(objective, xj, bopts);
    ++starts;
    const bool better = (r.converged && !best.converged) ||
                        (r.converged == best.converged && std::isfinite(r.value) && r.value < best.value);
    if (better || !std::isfinite(best.value)) best = std::move(r);
  }

  ParametricFit fit;
  fit.kind = kind;
  const Eigen::VectorXd xbest = expand(best.x);
  fit.theta = Weibull{std::exp(xbest[0]), std::exp(xbest[1])};
  fit.eta.assign(xbest.data() + 2, xbest.data() + xbest.size());
  fit.loglik = -best.value;
  fit.converged = best.converged && std::isfinite(best.value);
  fit.iterations = best.iterations;
  fit.starts = starts;
  fit.gradient_norm = best.gradient.size() > 0 ? best.gradient.lpNorm<Eigen::Infinity>() : 0.0;
  fit.median.value = fit.theta.median();
  if (kind != LikelihoodKind::CurrentStatus) fit.pi0_at_5 = Estimate{exact_recall_at(kind, fit.eta, kPi0Horizon)};

  if (opts.compute_covariance && fit.converged) {
    try {
      StandardErrors se = standard_errors(fit, data);
      fit.covariance = std::move(se.covariance);
      fit.median = se.median;
      fit.pi0_at_5 = se.pi0_at_5;
    } catch (const SingularInformation&) {
      // estimates stand; errors stay NaN
    }
  }
  return fit;
}

StandardErrors standard_errors(const ParametricFit& fit, std::span<const SubjectRecord> data) {
  const Eigen::VectorXd x = to_transformed(fit.theta, fit.eta);
  const Objective objective = [&](const Eigen::VectorXd& z) {
    const double ll = loglik_transformed(data, fit.kind, z);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };
  Eigen::MatrixXd hess = numerical_hessian(objective, x, 1e-4);
  if (!hess.allFinite()) throw SingularInformation("observed information is not finite");
  hess = 0.5 * (hess + hess.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double lmin = lambda.minCoeff(), lmax = lambda.maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw SingularInformation("observed information is singular or indefinite (condition " +
                              std::to_string(lmax / lmin) + ")");
  const Eigen::MatrixXd cov_x = eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();

  Eigen::VectorXd jac = Eigen::VectorXd::Ones(x.size());
  jac[0] = fit.theta.shape;
  jac[1] = fit.theta.scale;
  StandardErrors out;
  out.covariance = jac.asDiagonal() * cov_x * jac.asDiagonal();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();

  out.median = {fit.theta.median(), delta_se(median_gradient(fit), out.covariance)};
  if (fit.kind != LikelihoodKind::CurrentStatus)
    out.pi0_at_5 = Estimate{exact_recall_at(fit.kind, fit.eta, kPi0Horizon), delta_se(pi0_gradient(fit), out.covariance)};
  return out;
}

std::vector<SurvivalPoint> survival_curve(const ParametricFit& fit, std::span<const double> ages) {
  constexpr double z975 = 1.959963984540054;
  std::vector<SurvivalPoint> out;
  out.reserve(ages.size());
  const double k = fit.theta.shape, lam = fit.theta.scale;
  for (double t : ages) {
    SurvivalPoint p{t, 1.0, 0.0};
    if (t > 0.0) {
      const double z = std::pow(t / lam, k);
      p.survival = std::exp(-z);
      if (fit.has_covariance()) {
        Eigen::Vector2d g(-p.survival * z * std::log(t / lam), p.survival * z * k / lam);
        const Eigen::Matrix2d cov = fit.covariance.topLeftCorner<2, 2>();
        p.halfwidth = z975 * std::sqrt(std::max(0.0, g.dot(cov * g)));
      } else {
        p.halfwidth = std::numeric_limits<double>::quiet_NaN();
      }
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace recallsurv
