#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <variant>
#include <vector>

namespace recallsurv {

// Probabilities of (exact, month, year, no recall) given elapsed time.
using RecallProbs = std::array<double, 4>;

// Multinomial logistic recall with exact recall as the reference category:
// log(pi_c / pi_0) = alpha_i + beta_i * u, eta = (alpha_1..3, beta_1..3).
// Pair i = 1, 2, 3 drives, in order, no recall, month recall and year
// recall; the scenario presets are written in this layout.
struct LogisticRecall {
  std::array<double, 6> eta{};

  RecallProbs probs(double u) const;
};

// Two-category recall (exact or nothing), logit of the non-recall
// probability linear in elapsed time. Months and years fold into "nothing".
struct BinaryRecall {
  double alpha = 0.0;
  double beta = 0.0;

  double nonrecall(double u) const;
  RecallProbs probs(double u) const;
};

// Piecewise-constant recall on elapsed-time segments (x_j, x_{j+1}], the last
// segment extending to infinity. Column j of b is the probability vector on
// segment j.
struct PiecewiseRecall {
  std::vector<double> knots;
  Eigen::Matrix<double, 4, Eigen::Dynamic> b;

  PiecewiseRecall() = default;
  PiecewiseRecall(std::vector<double> knots, Eigen::Matrix<double, 4, Eigen::Dynamic> b);

  int segments() const { return static_cast<int>(knots.size()); }
  RecallProbs probs(double u) const;
};

// Segment index for elapsed time u under right-closed segments; u <= 0 maps
// to the first segment.
int segment_of(std::span<const double> knots, double u);

void validate_knots(std::span<const double> knots);

class RecallModel {
 public:
  using Variant = std::variant<LogisticRecall, BinaryRecall, PiecewiseRecall>;

  RecallModel() : v_(LogisticRecall{}) {}
  RecallModel(LogisticRecall m) : v_(std::move(m)) {}
  RecallModel(BinaryRecall m) : v_(std::move(m)) {}
  RecallModel(PiecewiseRecall m);

  RecallProbs probs(double u) const;

  // Elapsed times at which probs() is discontinuous (empty for smooth models).
  std::span<const double> breakpoints() const;

  const Variant& variant() const { return v_; }
  bool is_piecewise() const { return std::holds_alternative<PiecewiseRecall>(v_); }

 private:
  Variant v_;
};

}  // namespace recallsurv
