#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recallsurv/event_model.hpp"
#include "recallsurv/observation.hpp"
#include "recallsurv/recall_model.hpp"

namespace recallsurv {

struct Scenario {
  std::string name = "custom";
  int n = 100;
  EventTimeModel event;
  RecallModel recall;
  // interview age: discrete uniform on {interview_lo, ..., interview_hi}
  int interview_lo = 8;
  int interview_hi = 21;
  // birth month probabilities for months 1..12 (uniform when empty)
  std::vector<double> birth_month_probs;
  // birth offset: continuous uniform on [offset_lo, offset_hi] within [0, 1/12]
  double offset_lo = 0.0;
  double offset_hi = kMonthLength;
  std::uint64_t seed = 0;

  void validate() const;
};

// Named presets: case_i..case_iv (Weibull + logistic recall), case_a..case_c
// (truncated Weibull + piecewise recall on knots 0,3,6,9), mixture_g02 and
// mixture_g05 (weighted sum of lognormal and Weibull ages, case_i recall).
Scenario preset_scenario(const std::string& name);
std::vector<std::string> preset_names();
bool is_preset(const std::string& name);

// Knots shared by the piecewise presets.
std::vector<double> preset_knots();

// Draw a dataset; subject i uses its own stream keyed by (seed, i).
Dataset generate(const Scenario& sc);

}  // namespace recallsurv
