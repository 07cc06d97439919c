#pragma once

#include <span>
#include <variant>
#include <vector>

namespace recallsurv {

// Weibull with shape k and scale lambda: F(t) = 1 - exp(-(t/lambda)^k).
struct Weibull {
  double shape = 10.0;
  double scale = 12.0;

  double pdf(double t) const;
  double log_pdf(double t) const;
  double cdf(double t) const;
  double sf(double t) const;
  double quantile(double p) const;
  double median() const;
};

// Weibull restricted to [lower, upper] and renormalized.
struct TruncatedWeibull {
  Weibull base;
  double lower = 8.0;
  double upper = 16.0;

  double pdf(double t) const;
  double cdf(double t) const;
  double sf(double t) const;
  double quantile(double p) const;

 private:
  double mass() const { return base.cdf(upper) - base.cdf(lower); }
};

// Lognormal(mu, sigma2) and Weibull ages X and W combined with weight gamma.
// Combination: T = gamma * X + (1 - gamma) * W, X and W independent; density
// and CDF by numerical convolution. Distribution: T is X with probability
// gamma and W otherwise.
enum class MixtureForm { Combination, Distribution };

struct MixtureModel {
  double gamma = 0.0;
  double mu = 2.45;
  double sigma2 = 0.07;
  Weibull weibull;
  MixtureForm form = MixtureForm::Combination;

  double pdf(double t) const;
  double cdf(double t) const;
  double sf(double t) const;
  double quantile(double p) const;

  double lognormal_pdf(double t) const;
  double lognormal_cdf(double t) const;
  double lognormal_sf(double t) const;
  double lognormal_quantile(double p) const;
};

class EventTimeModel {
 public:
  using Variant = std::variant<Weibull, TruncatedWeibull, MixtureModel>;

  EventTimeModel() : v_(Weibull{}) {}
  EventTimeModel(Weibull m);
  EventTimeModel(TruncatedWeibull m);
  EventTimeModel(MixtureModel m);

  double pdf(double t) const;
  double cdf(double t) const;
  double sf(double t) const;
  double quantile(double p) const;
  double median() const { return quantile(0.5); }

  // Draw T from two independent uniforms on (0,1). The second drives the
  // lognormal part of a mixture and is ignored otherwise.
  double sample(double u_value, double u_component) const;

  // Points where pdf() is not smooth (truncation bounds).
  std::span<const double> breakpoints() const { return kinks_; }

  const Variant& variant() const { return v_; }

 private:
  void init();

  Variant v_;
  std::vector<double> kinks_;
};

}  // namespace recallsurv
