#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "recallsurv/observation.hpp"

namespace recallsurv {

// Right-continuous step function F(t) = cum[k] for x[k] <= t < x[k+1].
struct StepFunction {
  std::vector<double> x;
  std::vector<double> cum;

  double operator()(double t) const;
};

StepFunction edf(std::span<const double> ages);

struct NpSupport {
  std::vector<double> points;             // ascending, distinct
  std::vector<std::vector<size_t>> rows;  // subjects recalled exactly at each point

  size_t size() const { return points.size(); }
  // Index of an exact point, or -1.
  long index_of(double t) const;
};

// Throws NoExactRecalls.
NpSupport build_support(std::span<const SubjectRecord> data);

// Which recall row of b a subject's likelihood term uses.
enum class RecallScheme { Partial, Binary };

// Month or year recalls whose interval holds no recalled point: widen to the
// enclosing calendar year, then to [0, S], keeping the reported recall row;
// or leave them out.
enum class UnmatchedRecall { Coarsen, Drop };

// Sparse geometry of the reduced likelihood on the support: for each subject
// the support points it can sit on, the elapsed-time segment of each, and the
// row of b that weights it (-1 for censored rows, whose weight is 1).
struct NpGeometry {
  struct Entry {
    size_t point;
    int segment;
  };
  std::vector<std::vector<Entry>> candidates;  // per subject
  std::vector<int> row;                        // per subject
  size_t points = 0;
  int segments = 0;
  size_t coarsened = 0;

  double weight(size_t i, const Entry& e, const Eigen::MatrixXd& b) const {
    return row[i] < 0 ? 1.0 : b(row[i], e.segment);
  }
};

NpGeometry build_geometry(std::span<const SubjectRecord> data, const NpSupport& support,
                          std::span<const double> knots, RecallScheme scheme = RecallScheme::Partial,
                          UnmatchedRecall unmatched = UnmatchedRecall::Coarsen);

// Dense n x nu coefficient table under the recall matrix b (4 x L for the
// partial scheme, 2 x L for the binary one). Unmatched rows stay zero.
Eigen::MatrixXd alpha_matrix(std::span<const SubjectRecord> data, const NpSupport& support,
                             std::span<const double> knots, const Eigen::MatrixXd& b,
                             RecallScheme scheme = RecallScheme::Partial);

struct ScStep {
  Eigen::VectorXd q;
  std::vector<size_t> zero_rows;  // rows left out of the average
};

// One self-consistency update. Throws AllZeroRow if a row vanishes while q is
// strictly positive.
ScStep self_consistency_step(const Eigen::VectorXd& q, const Eigen::MatrixXd& alpha);

// Same update on sparse geometry; rows with no candidates are skipped.
Eigen::VectorXd self_consistency_step(const Eigen::VectorXd& q, const NpGeometry& geo, const Eigen::MatrixXd& b);

// Expected-count update of the recall matrix with the masses held fixed.
Eigen::MatrixXd m_step_recall(const NpGeometry& geo, const Eigen::VectorXd& q, const Eigen::MatrixXd& b);
Eigen::MatrixXd m_step_recall(std::span<const SubjectRecord> data, const NpSupport& support, const Eigen::VectorXd& q,
                              std::span<const double> knots, const Eigen::MatrixXd& b,
                              RecallScheme scheme = RecallScheme::Partial);

// Sum over subjects with candidates of log(sum_j alpha_ij q_j).
double np_loglik(const NpGeometry& geo, const Eigen::VectorXd& q, const Eigen::MatrixXd& b);

struct NpOptions {
  double inner_tol = 1e-8;
  int max_inner = 100000;
  double outer_tol = 1e-8;
  int max_outer = 5000;
  UnmatchedRecall unmatched = UnmatchedRecall::Coarsen;
};

struct NpFit {
  NpSupport support;
  Eigen::VectorXd masses;
  Eigen::MatrixXd recall_b;
  std::vector<double> knots;
  RecallScheme scheme = RecallScheme::Partial;
  std::vector<double> loglik_trace;
  bool converged = false;
  int outer_iterations = 0;
  size_t dropped = 0;    // subjects with no candidate support point
  size_t coarsened = 0;  // partial recalls widened to reach a support point

  double loglik() const { return loglik_trace.empty() ? 0.0 : loglik_trace.back(); }
  StepFunction cdf() const;
};

NpFit fit_amle(std::span<const SubjectRecord> data, std::span<const double> knots, const NpOptions& opts = {});
NpFit fit_binary_amle(std::span<const SubjectRecord> data, std::span<const double> knots,
                      const NpOptions& opts = {});

}  // namespace recallsurv
