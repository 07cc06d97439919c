#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "recallsurv/event_model.hpp"
#include "recallsurv/observation.hpp"
#include "recallsurv/parametric.hpp"

namespace recallsurv {

// Goodness of fit over the discretized outcome space. Cells split the
// interview age at 14 and the birth offset at half a month, and recalled
// values V at their median; delta and epsilon are kept apart.
struct GofCell {
  int delta = 0;
  int epsilon = 0;
  int s_high = 0;  // S > 14
  int v_high = -1; // V above the median; -1 where V carries no information
  int d_high = 0;  // d > 1/24

  std::string label() const;
};

struct GofBin {
  std::vector<GofCell> cells;
  double observed = 0.0;
  double expected = 0.0;

  std::string label() const;  // cell labels joined with '+'
};

struct GofSplits {
  double s_split = 14.0;
  double d_split = 1.0 / 24.0;
  double v_split = 0.0;  // median of the nonzero V by default
};

struct GofResult {
  std::vector<GofBin> bins;
  GofSplits splits;
  double statistic = 0.0;
  int df = 0;
  int parameters = 0;
  double p_value = 1.0;
  size_t merged_from = 0;
};

inline constexpr double kMinExpected = 5.0;

// Median of V over subjects with a recalled value (delta=1, epsilon<3).
double nonzero_v_median(std::span<const SubjectRecord> data);

// The 32 unmerged cells with observed and expected counts. Throws
// FitNotConverged, and DomainError for fits other than partial recall.
std::vector<GofBin> gof_cells(std::span<const SubjectRecord> data, const ParametricFit& fit, const GofSplits& splits);

// Repeatedly fold the bin with the smallest expected count into its
// smaller neighbour within the same (delta, epsilon) stratum, until every
// bin reaches min_expected or one bin is left.
std::vector<GofBin> merge_bins(std::vector<GofBin> bins, double min_expected = kMinExpected);

// Cells, merged.
std::vector<GofBin> gof_bins(std::span<const SubjectRecord> data, const ParametricFit& fit);

// Pearson statistic on the merged bins. Throws NonPositiveDf.
GofResult gof_chisq(std::span<const SubjectRecord> data, const ParametricFit& fit);
GofResult gof_chisq(std::vector<GofBin> merged, size_t initial_bins, int parameters);

// Piecewise recall probabilities (4 x L) maximizing the likelihood with the
// event-time law held fixed.
Eigen::MatrixXd conditional_piecewise_recall(std::span<const SubjectRecord> data, const EventTimeModel& event,
                                             std::span<const double> knots, int max_iterations = 10000,
                                             double tol = 1e-10);

struct RecallCheckRow {
  int segment = 0;
  double lo = 0.0;  // elapsed-time range of the segment
  double hi = 0.0;
  int type = 0;     // recall status 0..3
  double piecewise = 0.0;
  double model = 0.0;  // fitted recall probability averaged over [lo, hi]
};

// Conditional piecewise estimates with the event law fixed at the fit, next
// to the fit's own recall probabilities. The open last segment is closed at
// the largest interview age in the data.
std::vector<RecallCheckRow> recall_check(std::span<const SubjectRecord> data, const ParametricFit& fit,
                                         std::span<const double> knots);

struct RecallCurveRow {
  double lo = 0.0;   // interview-age group [lo, hi)
  double hi = 0.0;
  double age = 0.0;  // group midpoint, or the age for model rows
  size_t events = 0;
  std::array<double, 4> cumulative{};  // P(epsilon <= k | event)
};

inline constexpr std::array<double, 5> kDefaultRecallGroupEdges{9.5, 12.5, 15.5, 18.5, 21.5};

// Observed cumulative recall proportions per interview-age group; groups
// without events are left out.
std::vector<RecallCurveRow> cumulative_recall_curves(std::span<const SubjectRecord> data,
                                                     std::span<const double> edges = kDefaultRecallGroupEdges);

// The same proportions implied by a fitted model at the given interview ages.
std::vector<RecallCurveRow> model_recall_curves(const EventTimeModel& event, const RecallModel& recall,
                                                std::span<const double> ages);
std::vector<RecallCurveRow> model_recall_curves(const ParametricFit& fit, std::span<const double> ages);

}  // namespace recallsurv
