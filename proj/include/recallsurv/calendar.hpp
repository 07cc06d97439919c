#pragma once

// Calendar arithmetic on the idealized calendar: a year has length 1 and a
// month has length 1/12. Ages are in years.

namespace recallsurv {

inline constexpr double kMonthLength = 1.0 / 12.0;
inline constexpr double kYearLength = 1.0;

enum class IntervalKind { Month, Year };

struct RecallInterval {
  double lo = 0.0;
  double hi = 0.0;
  IntervalKind kind = IntervalKind::Month;

  double width() const { return hi - lo; }
  bool contains(double t) const { return lo <= t && t <= hi; }
};

// Ages at the start and end of the calendar month holding the event at age t,
// for a subject born d years after the start of their birth month.
RecallInterval month_interval(double t, double d);

// Ages at the start and end of the calendar year holding the event; m is the
// birth month serial (1..12).
RecallInterval year_interval(double t, double d, int m);

// Observed recall value V for recall status epsilon and event indicator delta.
double observed_v(double t, double d, int m, int epsilon, int delta);

// Lower end of the interval implied by an observed V (inverse of the floor maps).
double month_lower_from_v(double v, double d);
double year_lower_from_v(double v, double d, int m);

void check_birth_offset(double d);
void check_birth_month(int m);

}  // namespace recallsurv
