#include "recallsurv/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recallsurv/error.hpp"
#include "recallsurv/rng.hpp"

namespace recallsurv {

namespace {

const Weibull kBaseWeibull{10.0, 12.0};

LogisticRecall logistic_case(char which) {
  switch (which) {
    case '1':
      return {{-0.05, -0.05, -0.05, 0.01, 0.01, 0.01}};
    case '2':
      return {{-2.0, -1.0, -0.4, 0.05, 0.3, 0.02}};
    case '3':
      return {{-2.0, -0.7, -1.0, 0.5, 0.06, 0.2}};
    default:
      return {{-2.0, -2.0, -2.0, 0.3, 0.08, 0.08}};
  }
}

PiecewiseRecall piecewise_case(char which) {
  Eigen::Matrix<double, 4, Eigen::Dynamic> b(4, 4);
  switch (which) {
    case 'a':
      b << 0.15, 0.10, 0.08, 0.05,  //
          0.28, 0.20, 0.15, 0.10,   //
          0.22, 0.25, 0.17, 0.10,   //
          0.35, 0.45, 0.60, 0.75;
      break;
    case 'b':
      b << 0.69, 0.55, 0.49, 0.31,  //
          0.08, 0.05, 0.03, 0.02,   //
          0.08, 0.05, 0.03, 0.02,   //
          0.15, 0.35, 0.45, 0.65;
      break;
    default:
      b.setConstant(0.25);
      break;
  }
  return PiecewiseRecall(preset_knots(), b);
}

}  // namespace

std::vector<double> preset_knots() { return {0.0, 3.0, 6.0, 9.0}; }

std::vector<std::string> preset_names() {
  return {"case_i", "case_ii", "case_iii", "case_iv", "case_a", "case_b", "case_c", "mixture_g02", "mixture_g05"};
}

bool is_preset(const std::string& name) {
  const auto names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

Scenario preset_scenario(const std::string& name) {
  Scenario sc;
  sc.name = name;
  if (name == "case_i" || name == "case_ii" || name == "case_iii" || name == "case_iv") {
    const char which = name == "case_i" ? '1' : name == "case_ii" ? '2' : name == "case_iii" ? '3' : '4';
    sc.event = EventTimeModel(kBaseWeibull);
    sc.recall = RecallModel(logistic_case(which));
  } else if (name == "case_a" || name == "case_b" || name == "case_c") {
    sc.event = EventTimeModel(TruncatedWeibull{kBaseWeibull, 8.0, 16.0});
    sc.recall = RecallModel(piecewise_case(name.back()));
  } else if (name == "mixture_g02" || name == "mixture_g05") {
    const double gamma = name == "mixture_g02" ? 0.2 : 0.5;
    sc.event = EventTimeModel(MixtureModel{gamma, 2.45, 0.07, kBaseWeibull});
    sc.recall = RecallModel(logistic_case('1'));
  } else {
    throw DomainError("unknown scenario preset '" + name + "'");
  }
  return sc;
}

void Scenario::validate() const {
  if (n < 1) throw DomainError("scenario n must be >= 1");
  if (interview_lo < 1 || interview_hi < interview_lo) throw DomainError("invalid interview age range");
  if (!(offset_lo >= 0.0 && offset_hi <= kMonthLength && offset_lo <= offset_hi))
    throw DomainError("birth offset range must lie within [0, 1/12]");
  if (!birth_month_probs.empty()) {
    if (birth_month_probs.size() != 12) throw DomainError("birth_month_probs needs 12 entries");
    double total = 0.0;
    for (double p : birth_month_probs) {
      if (!(p >= 0.0)) throw DomainError("birth month probabilities must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("birth month probabilities must sum to 1");
  }
}

Dataset generate(const Scenario& sc) {
  sc.validate();
  Dataset data(static_cast<size_t>(sc.n));
  for (int i = 0; i < sc.n; ++i) {
    StreamRng rng(sc.seed, static_cast<std::uint64_t>(i));
    // fixed draw order regardless of branch
    const double u_t = rng.uniform();
    const double u_comp = rng.uniform();
    const int s = rng.uniform_int(sc.interview_lo, sc.interview_hi);
    const double u_m = rng.uniform();
    const double u_d = rng.uniform();
    const double u_eps = rng.uniform();

    int m = 12;
    if (sc.birth_month_probs.empty()) {
      m = std::min(12, 1 + static_cast<int>(u_m * 12.0));
    } else {
      double acc = 0.0;
      for (int k = 0; k < 12; ++k) {
        acc += sc.birth_month_probs[static_cast<size_t>(k)];
        if (u_m < acc) {
          m = k + 1;
          break;
        }
      }
    }

    SubjectRecord& rec = data[static_cast<size_t>(i)];
    rec.id = i + 1;
    rec.s = s;
    rec.m = m;
    rec.d = sc.offset_lo + (sc.offset_hi - sc.offset_lo) * u_d;
    const double t = sc.event.sample(u_t, u_comp);
    rec.t = t;
    rec.delta = t <= rec.s ? 1 : 0;
    rec.epsilon = kExact;
    if (rec.delta == 1) {
      const RecallProbs p = sc.recall.probs(rec.s - t);
      double acc = 0.0;
      rec.epsilon = kNoRecall;
      for (int k = 0; k < 4; ++k) {
        acc += p[static_cast<size_t>(k)];
        if (u_eps < acc) {
          rec.epsilon = k;
          break;
        }
      }
    }
    rec.v = observed_v(t, rec.d, rec.m, rec.epsilon, rec.delta);
  }
  return data;
}

}  // namespace recallsurv
