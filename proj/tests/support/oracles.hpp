#pragma once

// Independent reference computations for the test suites. Nothing here calls
// the library's quadrature or closed forms for the quantity under test.

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "recallsurv/observation.hpp"
#include "recallsurv/recall_model.hpp"
#include "recallsurv/rng.hpp"
#include "recallsurv/simulate.hpp"

namespace oracle {

inline double weibull_pdf(double t, double k, double lam) {
  const double z = t / lam;
  return k / lam * std::pow(z, k - 1.0) * std::exp(-std::pow(z, k));
}

inline double weibull_cdf(double t, double k, double lam) { return 1.0 - std::exp(-std::pow(t / lam, k)); }

// exp(alpha_i + beta_i u) relative to exact recall; pair 1 none, 2 month, 3 year.
inline std::array<double, 4> logistic_by_hand(const std::array<double, 6>& eta, double u) {
  const double none = std::exp(eta[0] + eta[3] * u);
  const double month = std::exp(eta[1] + eta[4] * u);
  const double year = std::exp(eta[2] + eta[5] * u);
  const double p0 = 1.0 / (1.0 + none + month + year);
  return {p0, month * p0, year * p0, none * p0};
}

// Adaptive Gauss-Kronrod over [a, b] split at the given points.
template <class F>
double adaptive(F f, double a, double b, const std::vector<double>& cuts) {
  std::vector<double> pts{a};
  for (double c : cuts)
    if (c > a && c < b) pts.push_back(c);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  double total = 0.0;
  for (size_t k = 0; k + 1 < pts.size(); ++k)
    if (pts[k + 1] > pts[k])
      total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, pts[k], pts[k + 1], 12, 1e-13);
  return total;
}

// Total probability of the discretized outcome space at fixed (s, m, d):
// censoring, exact recall integrated over v, every attainable month and year
// value, and no recall.
inline double observation_law_total(double s, int m, double d, const recallsurv::EventTimeModel& event,
                                    const recallsurv::RecallModel& recall) {
  using namespace recallsurv;
  SubjectRecord rec;
  rec.s = s;
  rec.m = m;
  rec.d = d;
  rec.delta = 0;
  double total = outcome_density(rec, event, recall);

  rec.delta = 1;
  rec.epsilon = kExact;
  std::vector<double> cuts(event.breakpoints().begin(), event.breakpoints().end());
  for (double x : recall.breakpoints()) cuts.push_back(s - x);
  total += adaptive(
      [&](double v) {
        SubjectRecord r = rec;
        r.v = v;
        return outcome_density(r, event, recall);
      },
      0.0, s, cuts);

  rec.epsilon = kMonth;
  const int months = static_cast<int>(std::floor(12.0 * (d + s)));
  for (int k = 0; k <= months; ++k) {
    rec.v = k / 12.0;
    total += outcome_density(rec, event, recall);
  }
  rec.epsilon = kYear;
  const int years = static_cast<int>(std::floor(s + d + (m - 1) / 12.0));
  for (int k = 0; k <= years; ++k) {
    rec.v = k;
    total += outcome_density(rec, event, recall);
  }
  rec.epsilon = kNoRecall;
  rec.v = 0.0;
  total += outcome_density(rec, event, recall);
  return total;
}

// CDF of gamma * X + (1 - gamma) * W, X lognormal and W Weibull, integrating
// over the lognormal part on the age scale.
inline double combination_cdf(double t, double gamma, double mu, double sigma2, double k, double lam) {
  const double b = 1.0 - gamma, sd = std::sqrt(sigma2);
  const double x_hi = std::min(t / gamma, std::exp(mu + 12.0 * sd));
  const auto f = [&](double x) {
    const double z = (std::log(x) - mu) / sd;
    const double ln_pdf = std::exp(-0.5 * z * z) / (x * sd * std::sqrt(2.0 * std::numbers::pi));
    return ln_pdf * weibull_cdf((t - gamma * x) / b, k, lam);
  };
  return adaptive(f, std::exp(mu - 12.0 * sd), x_hi, {std::exp(mu)});
}

// A random event model and recall model for property checks.
struct RandomModel {
  recallsurv::EventTimeModel event;
  recallsurv::RecallModel recall;
};

inline RandomModel random_model(std::mt19937_64& gen) {
  using namespace recallsurv;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomModel out;
  const Weibull w{2.0 + 10.0 * unit(gen), 8.0 + 8.0 * unit(gen)};
  switch (gen() % 3) {
    case 0:
      out.event = EventTimeModel(w);
      break;
    case 1: {
      const double lo = 4.0 + 5.0 * unit(gen);
      out.event = EventTimeModel(TruncatedWeibull{w, lo, lo + 2.0 + 8.0 * unit(gen)});
      break;
    }
    default:
      out.event = EventTimeModel(MixtureModel{unit(gen), 2.2 + 0.4 * unit(gen), 0.02 + 0.1 * unit(gen), w,
                                              gen() % 2 == 0 ? MixtureForm::Combination : MixtureForm::Distribution});
  }
  if (gen() % 2 == 0) {
    LogisticRecall r;
    for (int k = 0; k < 3; ++k) r.eta[static_cast<size_t>(k)] = -2.0 + 3.0 * unit(gen);
    for (int k = 3; k < 6; ++k) r.eta[static_cast<size_t>(k)] = -0.3 + 0.6 * unit(gen);
    out.recall = RecallModel(r);
  } else {
    const int segments = 1 + static_cast<int>(gen() % 4);
    std::vector<double> knots{0.0};
    for (int j = 1; j < segments; ++j) knots.push_back(knots.back() + 0.5 + 3.0 * unit(gen));
    Eigen::Matrix<double, 4, Eigen::Dynamic> b(4, segments);
    for (int j = 0; j < segments; ++j) {
      for (int k = 0; k < 4; ++k) b(k, j) = unit(gen) + 0.01;
      b.col(j) /= b.col(j).sum();
    }
    out.recall = RecallModel(PiecewiseRecall(knots, b));
  }
  return out;
}

// Tiny instance for the exhaustive NPMLE: two or three exact recalls, the
// rest censored before one of them or partially recalling one of them, so
// every partial recall interval holds a recalled point.
inline recallsurv::Dataset tiny_instance(std::uint64_t seed, int index, int n) {
  using namespace recallsurv;
  StreamRng rng(seed, static_cast<std::uint64_t>(index));
  Dataset data;
  const int n_exact = 2 + rng.uniform_int(0, 1);
  std::vector<double> ts;
  for (int i = 0; i < n; ++i) {
    SubjectRecord r;
    r.id = i + 1;
    r.m = rng.uniform_int(1, 12);
    r.d = rng.uniform() / 12.0;
    if (i < n_exact) {
      const double t = 8.0 + 6.0 * rng.uniform();
      r.s = std::ceil(t + 4.0 * rng.uniform());
      if (r.s <= t) r.s += 1.0;
      r.delta = 1;
      r.epsilon = kExact;
      r.v = t;
      ts.push_back(t);
    } else {
      const int kind = rng.uniform_int(0, 3);
      const double tj = ts[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(ts.size()) - 1))];
      if (kind == 0) {
        r.delta = 0;
        r.s = std::max(1.0, std::floor(tj - 0.01 - 2.0 * rng.uniform()));
      } else {
        r.delta = 1;
        r.epsilon = kind;
        r.s = std::ceil(tj + 0.01 + 4.0 * rng.uniform());
        r.v = observed_v(tj, r.d, r.m, r.epsilon, 1);
      }
    }
    data.push_back(r);
  }
  return data;
}

}  // namespace oracle
