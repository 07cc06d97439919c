#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "recallsurv/observation.hpp"

namespace recallsurv {

// Exhaustive NPMLE for tiny instances: builds every set the likelihood
// refers to, splits the line into atoms by membership signature, and
// maximizes over masses and piecewise recall parameters by grid search over b
// with an exact concave solve for the masses at each grid point.

inline constexpr size_t kOracleMaxSubjects = 6;
inline constexpr size_t kOracleMaxKnots = 2;

struct OracleAtom {
  uint64_t signature = 0;  // bit k set when the atom lies in set k
  double lo = 0.0;         // extent of the atom's pieces
  double hi = 0.0;
  bool exact = false;      // the atom is a recalled point {T}
  bool in_c0 = false;
};

struct OracleMaximum {
  double loglik = 0.0;
  Eigen::VectorXd masses;  // over OracleResult::atoms (zero outside the searched class)
  Eigen::MatrixXd b;       // 4 x L
};

struct OracleOptions {
  double b_step = 0.1;
  int refine_sweeps = 40;
};

struct OracleResult {
  double t_min = 0.0;
  double t_max = 0.0;
  size_t sets = 0;
  size_t removed_nested = 0;   // signatures strictly inside another
  size_t removed_swapped = 0;  // signatures that trade {T} for (T, t_max]
  std::vector<OracleAtom> atoms;
  OracleMaximum over_c;        // all nonempty atoms
  OracleMaximum over_c0;       // reduced class
  OracleMaximum restricted;    // recalled points only
};

// Throws TooLarge beyond kOracleMaxSubjects subjects or kOracleMaxKnots knots.
OracleResult brute_force_npmle(std::span<const SubjectRecord> data, std::span<const double> knots,
                               const OracleOptions& opts = {});

// Maximize sum_i log(c_i . p) over the probability simplex by pairwise mass
// transfers. coef is n x R; returns the maximal value (-inf if some row is
// zero everywhere) and writes the maximizer into p.
double maximize_mixture_loglik(const Eigen::MatrixXd& coef, Eigen::VectorXd& p, double tol = 1e-12,
                               int max_iterations = 20000);

}  // namespace recallsurv
