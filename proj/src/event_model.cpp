#include "recallsurv/event_model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "recallsurv/error.hpp"

namespace recallsurv {

namespace {

void check_weibull(const Weibull& w) {
  if (!(w.shape > 0.0) || !(w.scale > 0.0) || !std::isfinite(w.shape) || !std::isfinite(w.scale))
    throw DomainError("Weibull shape and scale must be positive and finite");
}

double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

// Integral of phi(z) g(w(z)) over the lognormal part of a combination, where
// z is its standard normal score and w(z) the Weibull age that completes t.
template <class G>
double over_lognormal(const MixtureModel& m, double t, G g) {
  const double b = 1.0 - m.gamma, sd = std::sqrt(m.sigma2);
  const double z_hi = std::min(8.0, (std::log(t / m.gamma) - m.mu) / sd);
  if (!(z_hi > -8.0)) return 0.0;
  const auto f = [&](double z) {
    const double w = (t - m.gamma * std::exp(m.mu + sd * z)) / b;
    return std::exp(-0.5 * z * z) * g(w);
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, -8.0, z_hi, 10, 1e-11) /
         std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

// --- Weibull ---------------------------------------------------------------

double Weibull::log_pdf(double t) const {
  if (t <= 0.0) return -std::numeric_limits<double>::infinity();
  const double lz = std::log(t / scale);
  return std::log(shape / scale) + (shape - 1.0) * lz - std::exp(shape * lz);
}

double Weibull::pdf(double t) const {
  if (t <= 0.0) return 0.0;
  return std::exp(log_pdf(t));
}

double Weibull::cdf(double t) const {
  if (t <= 0.0) return 0.0;
  return -std::expm1(-std::pow(t / scale, shape));
}

double Weibull::sf(double t) const {
  if (t <= 0.0) return 1.0;
  return std::exp(-std::pow(t / scale, shape));
}

double Weibull::quantile(double p) const {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return scale * std::pow(-std::log1p(-p), 1.0 / shape);
}

double Weibull::median() const { return scale * std::pow(std::numbers::ln2, 1.0 / shape); }

// --- TruncatedWeibull ------------------------------------------------------

double TruncatedWeibull::pdf(double t) const {
  if (t < lower || t > upper) return 0.0;
  return base.pdf(t) / mass();
}

double TruncatedWeibull::cdf(double t) const {
  if (t <= lower) return 0.0;
  if (t >= upper) return 1.0;
  return clamp01((base.cdf(t) - base.cdf(lower)) / mass());
}

double TruncatedWeibull::sf(double t) const {
  if (t <= lower) return 1.0;
  if (t >= upper) return 0.0;
  // upper-tail form keeps precision when the survival is small
  return clamp01((base.sf(t) - base.sf(upper)) / mass());
}

double TruncatedWeibull::quantile(double p) const {
  if (p <= 0.0) return lower;
  if (p >= 1.0) return upper;
  const double target = base.cdf(lower) + p * mass();
  return std::min(upper, std::max(lower, base.quantile(target)));
}

// --- MixtureModel ----------------------------------------------------------

double MixtureModel::lognormal_pdf(double t) const {
  if (t <= 0.0) return 0.0;
  const double z = (std::log(t) - mu);
  return std::exp(-z * z / (2.0 * sigma2)) / (t * std::sqrt(2.0 * std::numbers::pi * sigma2));
}

double MixtureModel::lognormal_cdf(double t) const {
  if (t <= 0.0) return 0.0;
  return 0.5 * std::erfc(-(std::log(t) - mu) / std::sqrt(2.0 * sigma2));
}

double MixtureModel::lognormal_sf(double t) const {
  if (t <= 0.0) return 1.0;
  return 0.5 * std::erfc((std::log(t) - mu) / std::sqrt(2.0 * sigma2));
}

double MixtureModel::lognormal_quantile(double p) const {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  const double z = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
  return std::exp(mu + std::sqrt(sigma2) * z);
}

double MixtureModel::pdf(double t) const {
  if (form == MixtureForm::Distribution) return gamma * lognormal_pdf(t) + (1.0 - gamma) * weibull.pdf(t);
  if (gamma == 0.0) return weibull.pdf(t);
  if (gamma == 1.0) return lognormal_pdf(t);
  if (t <= 0.0) return 0.0;
  const double b = 1.0 - gamma;
  return over_lognormal(*this, t, [&](double w) { return weibull.pdf(w) / b; });
}

double MixtureModel::cdf(double t) const {
  if (form == MixtureForm::Distribution) return gamma * lognormal_cdf(t) + (1.0 - gamma) * weibull.cdf(t);
  if (gamma == 0.0) return weibull.cdf(t);
  if (gamma == 1.0) return lognormal_cdf(t);
  if (t <= 0.0) return 0.0;
  return clamp01(over_lognormal(*this, t, [&](double w) { return weibull.cdf(w); }));
}

double MixtureModel::sf(double t) const {
  if (form == MixtureForm::Distribution) return gamma * lognormal_sf(t) + (1.0 - gamma) * weibull.sf(t);
  return 1.0 - cdf(t);
}

double MixtureModel::quantile(double p) const {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  if (gamma == 0.0) return weibull.quantile(p);
  if (gamma == 1.0) return lognormal_quantile(p);
  double lo = std::min(weibull.quantile(p), lognormal_quantile(p));
  double hi = std::max(weibull.quantile(p), lognormal_quantile(p));
  if (hi - lo < 1e-15) return lo;
  auto f = [&](double t) { return cdf(t) - p; };
  // a weighted sum can fall outside the component quantiles
  while (f(lo) > 0.0) lo *= 0.5;
  while (f(hi) < 0.0) hi *= 2.0;
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f(lo), f(hi), tol, iters);
  return 0.5 * (a + b);
}

// --- EventTimeModel --------------------------------------------------------

EventTimeModel::EventTimeModel(Weibull m) : v_(m) { init(); }
EventTimeModel::EventTimeModel(TruncatedWeibull m) : v_(m) { init(); }
EventTimeModel::EventTimeModel(MixtureModel m) : v_(m) { init(); }

void EventTimeModel::init() {
  kinks_.clear();
  if (const auto* w = std::get_if<Weibull>(&v_)) {
    check_weibull(*w);
  } else if (const auto* tw = std::get_if<TruncatedWeibull>(&v_)) {
    check_weibull(tw->base);
    if (!(tw->lower >= 0.0 && tw->upper > tw->lower))
      throw DomainError("truncation bounds must satisfy 0 <= lower < upper");
    if (!(tw->base.cdf(tw->upper) - tw->base.cdf(tw->lower) > 0.0))
      throw DomainError("truncation window carries no probability");
    kinks_ = {tw->lower, tw->upper};
  } else {
    const auto& mx = std::get<MixtureModel>(v_);
    check_weibull(mx.weibull);
    if (!(mx.gamma >= 0.0 && mx.gamma <= 1.0)) throw DomainError("mixture weight must lie in [0,1]");
    if (!(mx.sigma2 > 0.0)) throw DomainError("lognormal variance must be positive");
  }
}

double EventTimeModel::pdf(double t) const {
  return std::visit([t](const auto& m) { return m.pdf(t); }, v_);
}

double EventTimeModel::cdf(double t) const {
  return std::visit([t](const auto& m) { return m.cdf(t); }, v_);
}

double EventTimeModel::sf(double t) const {
  return std::visit([t](const auto& m) { return m.sf(t); }, v_);
}

double EventTimeModel::quantile(double p) const {
  return std::visit([p](const auto& m) { return m.quantile(p); }, v_);
}

double EventTimeModel::sample(double u_value, double u_component) const {
  if (const auto* mx = std::get_if<MixtureModel>(&v_)) {
    if (mx->form == MixtureForm::Distribution)
      return u_component < mx->gamma ? mx->lognormal_quantile(u_value) : mx->weibull.quantile(u_value);
    if (mx->gamma == 0.0) return mx->weibull.quantile(u_value);
    return mx->gamma * mx->lognormal_quantile(u_component) + (1.0 - mx->gamma) * mx->weibull.quantile(u_value);
  }
  return quantile(u_value);
}

}  // namespace recallsurv
