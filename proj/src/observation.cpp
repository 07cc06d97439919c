#include "recallsurv/observation.hpp"

#include <cmath>
#include <string>

#include "recallsurv/error.hpp"

namespace recallsurv {

namespace {

bool near_multiple(double x, double unit) {
  const double k = std::round(x / unit);
  return std::abs(x - k * unit) <= 1e-9;
}

[[noreturn]] void bad(const SubjectRecord& rec, const std::string& what) {
  throw InvalidRecord("subject " + std::to_string(rec.id) + ": " + what);
}

}  // namespace

void validate_record(const SubjectRecord& rec) {
  if (!(rec.s > 0.0) || !std::isfinite(rec.s)) bad(rec, "interview age must be positive");
  if (rec.delta != 0 && rec.delta != 1) bad(rec, "delta must be 0 or 1");
  if (rec.epsilon < 0 || rec.epsilon > 3) bad(rec, "epsilon must be in 0..3");
  if (rec.m < 1 || rec.m > 12) bad(rec, "birth month must be in 1..12");
  if (!(rec.d >= 0.0 && rec.d <= kMonthLength)) bad(rec, "birth offset must lie in [0, 1/12]");
  if (!std::isfinite(rec.v)) bad(rec, "v must be finite");

  if (rec.delta == 0 || rec.epsilon == kNoRecall) {
    if (rec.v != 0.0) bad(rec, "v must be 0 without an event or without recall");
    return;
  }
  switch (rec.epsilon) {
    case kExact:
      if (!(rec.v > 0.0 && rec.v <= rec.s)) bad(rec, "exact recall needs 0 < v <= s");
      break;
    case kMonth:
      if (!near_multiple(rec.v, kMonthLength)) bad(rec, "month recall needs v on a 1/12 grid");
      break;
    case kYear:
      if (!(rec.v >= 0.0) || !near_multiple(rec.v, 1.0)) bad(rec, "year recall needs a nonnegative integer v");
      break;
    default:
      break;
  }
}

void validate_dataset(std::span<const SubjectRecord> data) {
  for (const auto& rec : data) validate_record(rec);
}

AgeRange event_age_range(const SubjectRecord& rec) {
  double lo = 0.0, hi = rec.s;
  if (rec.epsilon == kMonth) {
    lo = month_lower_from_v(rec.v, rec.d);
    hi = std::min(rec.s, lo + kMonthLength);
  } else if (rec.epsilon == kYear) {
    lo = year_lower_from_v(rec.v, rec.d, rec.m);
    hi = std::min(rec.s, lo + kYearLength);
  }
  return {std::max(0.0, lo), hi};
}

double outcome_density(const SubjectRecord& rec, const EventTimeModel& event, const RecallModel& recall) {
  if (rec.delta == 0) return event.sf(rec.s);
  if (rec.epsilon == kExact) {
    if (!(rec.v < rec.s)) return 0.0;
    return event.pdf(rec.v) * recall.probs(rec.s - rec.v)[kExact];
  }
  const AgeRange r = event_age_range(rec);
  return recall_integral(event, recall, event.breakpoints(), recall.breakpoints(), rec.s, r.lo, r.hi,
                         rec.epsilon);
}

}  // namespace recallsurv
