#pragma once

#include <span>

namespace recallsurv {

// Pairwise (cascade) summation; error grows like log n rather than n.
double pairwise_sum(std::span<const double> xs);

}  // namespace recallsurv
