#include "recallsurv/calendar.hpp"

#include <cmath>
#include <string>

#include "recallsurv/error.hpp"

namespace recallsurv {

namespace {

void check_event_age(double t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw DomainError("event age must be positive and finite, got " + std::to_string(t));
}

}  // namespace

void check_birth_offset(double d) {
  if (!(d >= 0.0 && d <= kMonthLength))
    throw DomainError("birth offset d must lie in [0, 1/12], got " + std::to_string(d));
}

void check_birth_month(int m) {
  if (m < 1 || m > 12) throw DomainError("birth month must be in 1..12, got " + std::to_string(m));
}

RecallInterval month_interval(double t, double d) {
  check_event_age(t);
  check_birth_offset(d);
  const double lo = std::floor(12.0 * (d + t)) / 12.0 - d;
  return {lo, lo + kMonthLength, IntervalKind::Month};
}

RecallInterval year_interval(double t, double d, int m) {
  check_event_age(t);
  check_birth_offset(d);
  check_birth_month(m);
  const double shift = d + (m - 1) / 12.0;
  const double lo = std::floor(t + shift) - shift;
  return {lo, lo + kYearLength, IntervalKind::Year};
}

double observed_v(double t, double d, int m, int epsilon, int delta) {
  if (delta != 0 && delta != 1) throw DomainError("delta must be 0 or 1");
  if (epsilon < 0 || epsilon > 3) throw DomainError("epsilon must be in 0..3");
  if (delta == 0 || epsilon == 3) return 0.0;
  check_event_age(t);
  check_birth_offset(d);
  check_birth_month(m);
  switch (epsilon) {
    case 0:
      return t;
    case 1:
      return std::floor(12.0 * (d + t)) / 12.0;
    default:
      return std::floor(t + d + (m - 1) / 12.0);
  }
}

double month_lower_from_v(double v, double d) { return v - d; }

double year_lower_from_v(double v, double d, int m) { return v - d - (m - 1) / 12.0; }

}  // namespace recallsurv
