#pragma once

#include <Eigen/Core>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recallsurv/event_model.hpp"
#include "recallsurv/observation.hpp"

namespace recallsurv {

enum class LikelihoodKind { CurrentStatus, BinaryRecall, PartialRecall };

std::string to_string(LikelihoodKind kind);
LikelihoodKind parse_likelihood_kind(const std::string& name);  // current | binary | partial

// Number of recall parameters: 0, 2 (alpha, beta) or 6 (logistic eta).
int recall_parameter_count(LikelihoodKind kind);
inline int parameter_count(LikelihoodKind kind) { return 2 + recall_parameter_count(kind); }

// Recall model implied by a kind and its recall parameters. Current status
// corresponds to "never recall anything".
RecallModel recall_model_for(LikelihoodKind kind, std::span<const double> eta);

// Log-likelihood of a Weibull event model plus the kind's recall model.
// Binary recall folds month and year recall into no recall. Returns -inf if
// any subject's contribution is not positive and finite.
double loglik(std::span<const SubjectRecord> data, LikelihoodKind kind, const Weibull& theta,
              std::span<const double> eta);

// Same, in the optimizer's coordinates (log shape, log scale, eta...).
double loglik_transformed(std::span<const SubjectRecord> data, LikelihoodKind kind, const Eigen::VectorXd& x);

Eigen::VectorXd to_transformed(const Weibull& theta, std::span<const double> eta);

// Exact-recall probability five years after the event under the fitted recall model.
double exact_recall_at(LikelihoodKind kind, std::span<const double> eta, double elapsed);

struct Estimate {
  double value = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
};

struct ParametricFit {
  LikelihoodKind kind = LikelihoodKind::PartialRecall;
  Weibull theta;
  std::vector<double> eta;
  double loglik = 0.0;
  // Covariance over (shape, scale, eta...) in natural coordinates; empty if
  // the observed information could not be inverted.
  Eigen::MatrixXd covariance;
  bool converged = false;
  int iterations = 0;
  int starts = 1;
  double gradient_norm = 0.0;
  Estimate median;
  std::optional<Estimate> pi0_at_5;

  bool has_covariance() const { return covariance.size() > 0; }
};

struct FitOptions {
  // Starting point in natural coordinates; default from the data.
  std::optional<Weibull> init_theta;
  std::optional<std::vector<double>> init_eta;
  int max_iterations = 500;
  double grad_tol = 1e-6;
  int extra_starts = 3;
  bool compute_covariance = true;
  bool fix_eta = false;  // hold the recall parameters at init_eta
};

ParametricFit fit_mle(std::span<const SubjectRecord> data, LikelihoodKind kind, const FitOptions& opts = {});

// Crude Weibull start from the quartiles of exactly recalled ages; (10, 12)
// when there are too few.
Weibull initial_theta(std::span<const SubjectRecord> data);

struct StandardErrors {
  Eigen::MatrixXd covariance;  // natural coordinates
  Estimate median;
  std::optional<Estimate> pi0_at_5;
};

// Observed-information covariance at the fit, mapped back through the log
// transform, plus delta-method errors for the median and the five-year exact
// recall probability. Throws SingularInformation.
StandardErrors standard_errors(const ParametricFit& fit, std::span<const SubjectRecord> data);

struct SurvivalPoint {
  double age = 0.0;
  double survival = 1.0;
  double halfwidth = 0.0;  // pointwise 95% normal interval
};

std::vector<SurvivalPoint> survival_curve(const ParametricFit& fit, std::span<const double> ages);

}  // namespace recallsurv
