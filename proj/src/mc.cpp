#include "recallsurv/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <thread>
#include <type_traits>
#include <variant>

#include "recallsurv/dataset_io.hpp"
#include "recallsurv/error.hpp"
#include "recallsurv/nonparametric.hpp"
#include "recallsurv/parametric.hpp"
#include "recallsurv/rng.hpp"

namespace recallsurv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const std::vector<std::string> kParametricQuantities{"theta1", "theta2", "median", "pi0_5"};

LikelihoodKind kind_of(Estimator e) {
  switch (e) {
    case Estimator::Current:
      return LikelihoodKind::CurrentStatus;
    case Estimator::Binary:
      return LikelihoodKind::BinaryRecall;
    default:
      return LikelihoodKind::PartialRecall;
  }
}

Dataset replicate(const McConfig& cfg, int rep) {
  Scenario sc = cfg.scenario;
  sc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  return generate(sc);
}

std::string format_or_na(double x) { return std::isfinite(x) ? format_real(x) : "NA"; }

// Rows for one quantity across reps, reading column q of each estimator's raw values.
McRow summarize_column(const McSummary& s, const McConfig& cfg, Estimator e, size_t q, double truth) {
  std::vector<double> xs;
  for (const auto& r : s.raw)
    if (r.estimator == e) xs.push_back(r.ok ? r.values[q] : kNaN);
  McRow row = summarize(xs, truth);
  row.case_name = cfg.name;
  row.estimator = e;
  return row;
}

}  // namespace

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::Current:
      return "current";
    case Estimator::Binary:
      return "binary";
    case Estimator::Partial:
      return "partial";
    case Estimator::AmlePartial:
      return "amle_partial";
    case Estimator::AmleBinary:
      return "amle_binary";
    default:
      return "edf";
  }
}

Estimator parse_estimator(const std::string& name) {
  for (Estimator e : {Estimator::Current, Estimator::Binary, Estimator::Partial, Estimator::AmlePartial,
                      Estimator::AmleBinary, Estimator::Edf})
    if (to_string(e) == name) return e;
  throw DomainError("unknown estimator '" + name + "'");
}

bool is_parametric(Estimator e) {
  return e == Estimator::Current || e == Estimator::Binary || e == Estimator::Partial;
}

bool McConfig::nonparametric() const {
  return !estimators.empty() && !is_parametric(estimators.front());
}

void McConfig::validate() const {
  if (reps < 1) throw DomainError("reps must be at least 1");
  if (estimators.empty()) throw DomainError("estimator set is empty");
  const bool np = nonparametric();
  for (Estimator e : estimators)
    if (is_parametric(e) == np) throw DomainError("cannot mix parametric and nonparametric estimators in one run");
  if (np && age_grid.empty()) throw DomainError("nonparametric run needs an age grid");
  scenario.validate();
}

McRow summarize(std::span<const double> xs, double truth) {
  McRow row;
  row.truth = truth;
  std::vector<double> v;
  for (double x : xs)
    if (std::isfinite(x)) v.push_back(x);
  row.reps_used = static_cast<int>(v.size());
  row.failures = static_cast<int>(xs.size() - v.size());
  if (v.empty()) {
    row.mean = row.bias = row.stdev = row.variance = row.mse = kNaN;
    return row;
  }
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  row.mean = mean;
  row.bias = mean - truth;
  row.variance = ss / n;
  row.stdev = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  row.mse = row.bias * row.bias + row.variance;
  return row;
}

Weibull reference_weibull(const EventTimeModel& event) {
  return std::visit(
      [](const auto& m) -> Weibull {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Weibull>)
          return m;
        else if constexpr (std::is_same_v<T, TruncatedWeibull>)
          return m.base;
        else
          return m.weibull;
      },
      event.variant());
}

int worker_count(int hint, int jobs) {
  int n = hint > 0 ? hint : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("RECALLSURV_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return std::max(1, std::min(n, jobs));
}

void parallel_for(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1) {
    for (int j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int j = next++; j < jobs; j = next++) fn(j);
    });
  for (auto& th : pool) th.join();
}

McSummary run_mc_parametric(const McConfig& cfg) {
  cfg.validate();
  if (cfg.nonparametric()) throw DomainError("run_mc_parametric needs parametric estimators");
  const size_t ne = cfg.estimators.size();
  std::vector<McRawRow> raw(static_cast<size_t>(cfg.reps) * ne);

  parallel_for(cfg.reps, worker_count(cfg.threads, cfg.reps), [&](int rep) {
    Dataset data;
    std::string data_error;
    try {
      data = replicate(cfg, rep);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (size_t k = 0; k < ne; ++k) {
      McRawRow& r = raw[static_cast<size_t>(rep) * ne + k];
      r.rep = rep;
      r.estimator = cfg.estimators[k];
      r.values.assign(kParametricQuantities.size(), kNaN);
      if (!data_error.empty()) {
        r.error = data_error;
        continue;
      }
      try {
        FitOptions opts;
        opts.compute_covariance = false;
        const ParametricFit fit = fit_mle(data, kind_of(r.estimator), opts);
        if (!fit.converged) {
          r.error = "no convergence";
          continue;
        }
        r.ok = true;
        r.values = {fit.theta.shape, fit.theta.scale, fit.median.value,
                    fit.pi0_at_5 ? fit.pi0_at_5->value : kNaN};
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  });

  McSummary s;
  s.value_names = kParametricQuantities;
  s.raw = std::move(raw);
  const Weibull ref = reference_weibull(cfg.scenario.event);
  const std::vector<double> truth{ref.shape, ref.scale, cfg.scenario.event.median(),
                                  cfg.scenario.recall.probs(5.0)[kExact]};
  for (size_t q = 0; q < kParametricQuantities.size(); ++q) {
    for (Estimator e : cfg.estimators) {
      McRow row = summarize_column(s, cfg, e, q, truth[q]);
      row.param = kParametricQuantities[q];
      s.rows.push_back(std::move(row));
    }
  }
  return s;
}

McSummary run_mc_nonparametric(const McConfig& cfg) {
  cfg.validate();
  if (!cfg.nonparametric()) throw DomainError("run_mc_nonparametric needs nonparametric estimators");
  const size_t ne = cfg.estimators.size();
  const size_t na = cfg.age_grid.size();
  std::vector<McRawRow> raw(static_cast<size_t>(cfg.reps) * ne);

  parallel_for(cfg.reps, worker_count(cfg.threads, cfg.reps), [&](int rep) {
    Dataset data;
    std::string data_error;
    try {
      data = replicate(cfg, rep);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (size_t k = 0; k < ne; ++k) {
      McRawRow& r = raw[static_cast<size_t>(rep) * ne + k];
      r.rep = rep;
      r.estimator = cfg.estimators[k];
      r.values.assign(na, kNaN);
      if (!data_error.empty()) {
        r.error = data_error;
        continue;
      }
      try {
        StepFunction f;
        if (r.estimator == Estimator::Edf) {
          std::vector<double> ts;
          for (const auto& rec : data) {
            if (!rec.t) throw DomainError("complete-data benchmark needs true event ages");
            ts.push_back(*rec.t);
          }
          f = edf(ts);
        } else {
          const NpFit fit = r.estimator == Estimator::AmlePartial ? fit_amle(data, cfg.knots)
                                                                  : fit_binary_amle(data, cfg.knots);
          if (!fit.converged) {
            r.error = "no convergence";
            continue;
          }
          f = fit.cdf();
        }
        for (size_t a = 0; a < na; ++a) r.values[a] = f(cfg.age_grid[a]);
        r.ok = true;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  });

  McSummary s;
  s.nonparametric = true;
  for (double a : cfg.age_grid) s.value_names.push_back("F(" + format_real(a) + ")");
  s.raw = std::move(raw);
  for (size_t a = 0; a < na; ++a) {
    for (Estimator e : cfg.estimators) {
      McRow row = summarize_column(s, cfg, e, a, cfg.scenario.event.cdf(cfg.age_grid[a]));
      row.param = "F";
      row.age = cfg.age_grid[a];
      s.rows.push_back(std::move(row));
    }
  }
  return s;
}

McSummary run_sensitivity(const McConfig& cfg) {
  if (!std::holds_alternative<MixtureModel>(cfg.scenario.event.variant()))
    throw DomainError("sensitivity runs need a mixture event model");
  return run_mc_parametric(cfg);
}

McSummary run_mc(const McConfig& cfg) {
  cfg.validate();
  return cfg.nonparametric() ? run_mc_nonparametric(cfg) : run_mc_parametric(cfg);
}

void write_summary_csv(std::ostream& out, const McSummary& s) {
  if (s.nonparametric) {
    out << "case,age,estimator,bias,variance,mse,reps_used,failures\n";
    for (const auto& r : s.rows)
      out << r.case_name << ',' << format_real(r.age) << ',' << to_string(r.estimator) << ',' << format_or_na(r.bias)
          << ',' << format_or_na(r.variance) << ',' << format_or_na(r.mse) << ',' << r.reps_used << ','
          << r.failures << '\n';
    return;
  }
  out << "case,param,estimator,bias,stdev,mse,reps_used,failures\n";
  for (const auto& r : s.rows)
    out << r.case_name << ',' << r.param << ',' << to_string(r.estimator) << ',' << format_or_na(r.bias) << ','
        << format_or_na(r.stdev) << ',' << format_or_na(r.mse) << ',' << r.reps_used << ',' << r.failures << '\n';
}

void write_raw_csv(std::ostream& out, const McSummary& s) {
  out << "rep,estimator,ok";
  for (const auto& name : s.value_names) out << ',' << name;
  out << ",error\n";
  for (const auto& r : s.raw) {
    out << r.rep << ',' << to_string(r.estimator) << ',' << (r.ok ? 1 : 0);
    for (double v : r.values) out << ',' << format_or_na(v);
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << ',' << err << '\n';
  }
}

}  // namespace recallsurv
