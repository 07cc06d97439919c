#include "recallsurv/recall_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recallsurv/error.hpp"

namespace recallsurv {

RecallProbs LogisticRecall::probs(double u) const {
  // pair 1 drives no recall, pair 2 month, pair 3 year
  std::array<double, 4> z{0.0, eta[1] + eta[4] * u, eta[2] + eta[5] * u, eta[0] + eta[3] * u};
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& zi : z) {
    zi = std::exp(zi - zmax);
    total += zi;
  }
  return {z[0] / total, z[1] / total, z[2] / total, z[3] / total};
}

double BinaryRecall::nonrecall(double u) const {
  const double z = alpha + beta * u;
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

RecallProbs BinaryRecall::probs(double u) const {
  const double p = nonrecall(u);
  return {1.0 - p, 0.0, 0.0, p};
}

void validate_knots(std::span<const double> knots) {
  if (knots.empty()) throw DomainError("piecewise recall needs at least one knot");
  if (knots.front() != 0.0) throw DomainError("first knot must be 0");
  for (size_t j = 1; j < knots.size(); ++j)
    if (!(knots[j] > knots[j - 1])) throw DomainError("knots must be strictly increasing");
}

PiecewiseRecall::PiecewiseRecall(std::vector<double> k, Eigen::Matrix<double, 4, Eigen::Dynamic> bm)
    : knots(std::move(k)), b(std::move(bm)) {
  validate_knots(knots);
  if (b.cols() != static_cast<Eigen::Index>(knots.size()))
    throw DomainError("piecewise recall: b must have one column per knot");
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    if ((b.col(j).array() < 0.0).any() || (b.col(j).array() > 1.0).any())
      throw DomainError("piecewise recall: entries must lie in [0,1]");
    if (std::abs(b.col(j).sum() - 1.0) > 1e-12)
      throw DomainError("piecewise recall: column " + std::to_string(j) + " does not sum to 1");
  }
}

int segment_of(std::span<const double> knots, double u) {
  // number of knots strictly below u, minus one
  const auto it = std::lower_bound(knots.begin(), knots.end(), u);
  const auto below = static_cast<int>(it - knots.begin());
  return std::max(0, below - 1);
}

RecallProbs PiecewiseRecall::probs(double u) const {
  const int j = segment_of(knots, u);
  return {b(0, j), b(1, j), b(2, j), b(3, j)};
}

RecallModel::RecallModel(PiecewiseRecall m) : v_(std::move(m)) {}

RecallProbs RecallModel::probs(double u) const {
  return std::visit([u](const auto& m) { return m.probs(u); }, v_);
}

std::span<const double> RecallModel::breakpoints() const {
  if (const auto* p = std::get_if<PiecewiseRecall>(&v_)) return p->knots;
  return {};
}

}  // namespace recallsurv
