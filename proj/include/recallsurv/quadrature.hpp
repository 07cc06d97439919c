#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <vector>

namespace recallsurv {

inline constexpr int kGaussNodes = 64;

struct GaussLegendreRule {
  std::array<double, kGaussNodes> nodes{};    // on [-1, 1]
  std::array<double, kGaussNodes> weights{};
};

// The fixed 64-point rule, computed once.
const GaussLegendreRule& gauss_legendre_64();

// Integrate fn over [a, b], splitting at every breakpoint strictly inside the
// range and applying the 64-point rule on each piece. Returns 0 for b <= a.
template <class F>
double integrate_pieces(F&& fn, double a, double b, std::span<const double> breakpoints = {}) {
  if (!(b > a)) return 0.0;
  const auto& rule = gauss_legendre_64();

  std::vector<double> cuts;
  cuts.reserve(breakpoints.size() + 2);
  cuts.push_back(a);
  for (double x : breakpoints)
    if (x > a && x < b) cuts.push_back(x);
  cuts.push_back(b);
  std::sort(cuts.begin() + 1, cuts.end() - 1);

  double total = 0.0;
  for (size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double lo = cuts[p], hi = cuts[p + 1];
    if (!(hi > lo)) continue;
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double piece = 0.0;
    for (int k = 0; k < kGaussNodes; ++k) piece += rule.weights[k] * fn(mid + half * rule.nodes[k]);
    total += half * piece;
  }
  return total;
}

}  // namespace recallsurv
