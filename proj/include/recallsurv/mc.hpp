#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "recallsurv/simulate.hpp"

namespace recallsurv {

enum class Estimator { Current, Binary, Partial, AmlePartial, AmleBinary, Edf };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);
bool is_parametric(Estimator e);

struct McConfig {
  std::string name = "mc";  // case label written to outputs
  Scenario scenario;
  int reps = 100;
  std::vector<Estimator> estimators;
  std::uint64_t seed = 1;
  int threads = 0;                  // 0: one per core
  std::vector<double> age_grid;     // nonparametric runs
  std::vector<double> knots{0.0, 3.0, 6.0, 9.0};

  bool nonparametric() const;
  // Throws DomainError.
  void validate() const;
};

struct McRow {
  std::string case_name;
  std::string param;  // theta1, theta2, median, pi0_5, or F for curves
  double age = std::numeric_limits<double>::quiet_NaN();
  Estimator estimator = Estimator::Partial;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double stdev = 0.0;     // divisor reps_used - 1; 0 for a single rep
  double variance = 0.0;  // divisor reps_used
  double mse = 0.0;       // bias^2 + variance
  int reps_used = 0;
  int failures = 0;
};

struct McRawRow {
  int rep = 0;
  Estimator estimator = Estimator::Partial;
  bool ok = false;
  std::string error;
  std::vector<double> values;
};

struct McSummary {
  bool nonparametric = false;
  std::vector<McRow> rows;
  std::vector<std::string> value_names;  // columns of McRawRow::values
  std::vector<McRawRow> raw;             // ordered by rep, then estimator
};

// Error statistics of the finite values in xs against a known truth; the
// non-finite ones count as failures.
McRow summarize(std::span<const double> xs, double truth);

// Weibull the parametric fits are judged against: the model itself, the
// base of a truncated one, or the Weibull part of a mixture.
Weibull reference_weibull(const EventTimeModel& event);

McSummary run_mc_parametric(const McConfig& cfg);
McSummary run_mc_nonparametric(const McConfig& cfg);
// Parametric run on a mixture scenario, fits under the Weibull assumption.
McSummary run_sensitivity(const McConfig& cfg);
McSummary run_mc(const McConfig& cfg);

// Worker count: the hint (or the core count) capped by RECALLSURV_THREADS
// and by the number of jobs.
int worker_count(int hint, int jobs);
// Run fn(0..jobs-1) on a pool; fn must not throw.
void parallel_for(int jobs, int threads, const std::function<void(int)>& fn);

void write_summary_csv(std::ostream& out, const McSummary& s);
void write_raw_csv(std::ostream& out, const McSummary& s);

}  // namespace recallsurv
