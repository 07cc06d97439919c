#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "recallsurv/calendar.hpp"
#include "recallsurv/event_model.hpp"
#include "recallsurv/quadrature.hpp"
#include "recallsurv/recall_model.hpp"

namespace recallsurv {

enum RecallStatus : int { kExact = 0, kMonth = 1, kYear = 2, kNoRecall = 3 };

// One respondent: interview age s, event indicator delta, recall status
// epsilon, observed value v, birth month m and offset d within that month.
// t is the true event age and is only present in simulated data.
struct SubjectRecord {
  long id = 0;
  double s = 0.0;
  int delta = 0;
  int epsilon = 0;
  double v = 0.0;
  int m = 1;
  double d = 0.0;
  std::optional<double> t;

  bool exact() const { return delta == 1 && epsilon == kExact; }
};

using Dataset = std::vector<SubjectRecord>;

// Throws InvalidRecord when a record breaks the V/epsilon/delta invariants.
void validate_record(const SubjectRecord& rec);
void validate_dataset(std::span<const SubjectRecord> data);

// Event-age range [lo, hi] consistent with a partial or no-recall record,
// already capped at the interview age and floored at 0. Empty when hi <= lo.
struct AgeRange {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return !(hi > lo); }
};
AgeRange event_age_range(const SubjectRecord& rec);

// Integral of f(u) * pi^(k)(s - u) over [lo, hi] under the fixed-node rule,
// split where s - u crosses a recall knot and at event-model kinks.
template <class EventLike, class RecallLike>
double recall_integral(const EventLike& event, const RecallLike& recall, std::span<const double> event_kinks,
                       std::span<const double> recall_knots, double s, double lo, double hi, int k) {
  if (!(hi > lo)) return 0.0;
  std::vector<double> cuts(event_kinks.begin(), event_kinks.end());
  for (double x : recall_knots) cuts.push_back(s - x);
  return integrate_pieces([&](double u) { return event.pdf(u) * recall.probs(s - u)[k]; }, lo, hi, cuts);
}

// Conditional density of (V, epsilon, delta) given (S, m, d): the five-branch
// observation law with the g1 g2 g3 factors dropped.
double outcome_density(const SubjectRecord& rec, const EventTimeModel& event, const RecallModel& recall);

}  // namespace recallsurv
