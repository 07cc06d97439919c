#include "recallsurv/nonparametric.hpp"

#include <algorithm>
#include <cmath>

#include "recallsurv/error.hpp"
#include "recallsurv/recall_model.hpp"
#include "recallsurv/stats.hpp"

namespace recallsurv {

double StepFunction::operator()(double t) const {
  const auto it = std::upper_bound(x.begin(), x.end(), t);
  if (it == x.begin()) return 0.0;
  return cum[static_cast<size_t>(it - x.begin()) - 1];
}

StepFunction edf(std::span<const double> ages) {
  std::vector<double> sorted(ages.begin(), ages.end());
  std::sort(sorted.begin(), sorted.end());
  StepFunction f;
  const double n = static_cast<double>(sorted.size());
  for (size_t k = 0; k < sorted.size(); ++k) {
    if (k + 1 < sorted.size() && sorted[k + 1] == sorted[k]) continue;
    f.x.push_back(sorted[k]);
    f.cum.push_back(static_cast<double>(k + 1) / n);
  }
  return f;
}

long NpSupport::index_of(double t) const {
  const auto it = std::lower_bound(points.begin(), points.end(), t);
  if (it == points.end() || *it != t) return -1;
  return it - points.begin();
}

NpSupport build_support(std::span<const SubjectRecord> data) {
  std::vector<std::pair<double, size_t>> exact;
  for (size_t i = 0; i < data.size(); ++i)
    if (data[i].exact()) exact.emplace_back(data[i].v, i);
  if (exact.empty()) throw NoExactRecalls("no subject recalls the event age exactly");
  std::sort(exact.begin(), exact.end());
  NpSupport sup;
  for (const auto& [v, i] : exact) {
    if (sup.points.empty() || sup.points.back() != v) {
      sup.points.push_back(v);
      sup.rows.emplace_back();
    }
    sup.rows.back().push_back(i);
  }
  return sup;
}

NpGeometry build_geometry(std::span<const SubjectRecord> data, const NpSupport& support,
                          std::span<const double> knots, RecallScheme scheme, UnmatchedRecall unmatched) {
  validate_knots(knots);
  const bool binary = scheme == RecallScheme::Binary;
  NpGeometry geo;
  geo.points = support.size();
  geo.segments = static_cast<int>(knots.size());
  geo.candidates.resize(data.size());
  geo.row.assign(data.size(), -1);
  const auto& pts = support.points;

  auto add_range = [&](size_t i, double s, double lo, double hi) {
    auto first = std::lower_bound(pts.begin(), pts.end(), lo);
    for (auto it = first; it != pts.end() && *it <= hi; ++it)
      geo.candidates[i].push_back({static_cast<size_t>(it - pts.begin()), segment_of(knots, s - *it)});
  };

  for (size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data[i];
    if (rec.delta == 0) {
      auto first = std::upper_bound(pts.begin(), pts.end(), rec.s);
      for (auto it = first; it != pts.end(); ++it) geo.candidates[i].push_back({static_cast<size_t>(it - pts.begin()), 0});
      continue;
    }
    if (rec.epsilon == kExact) {
      geo.row[i] = 0;
      const long j = support.index_of(rec.v);
      geo.candidates[i].push_back({static_cast<size_t>(j), segment_of(knots, rec.s - rec.v)});
      continue;
    }
    if (binary || rec.epsilon == kNoRecall) {
      geo.row[i] = binary ? 1 : kNoRecall;
      add_range(i, rec.s, 0.0, rec.s);
      continue;
    }
    geo.row[i] = rec.epsilon;
    const AgeRange r = event_age_range(rec);
    if (!r.empty()) add_range(i, rec.s, r.lo, r.hi);
    if (!geo.candidates[i].empty() || unmatched == UnmatchedRecall::Drop) continue;
    // no recalled point in the reported interval: fall back to the calendar
    // year holding it, then to anything before the interview
    if (rec.epsilon == kMonth) {
      const double year = std::floor(rec.v + (rec.m - 1) / 12.0 + 1e-9);
      const double lo = year_lower_from_v(year, rec.d, rec.m);
      add_range(i, rec.s, std::max(lo, 0.0), std::min(lo + kYearLength, rec.s));
    }
    if (geo.candidates[i].empty()) add_range(i, rec.s, 0.0, rec.s);
    if (!geo.candidates[i].empty()) ++geo.coarsened;
  }
  return geo;
}

Eigen::MatrixXd alpha_matrix(std::span<const SubjectRecord> data, const NpSupport& support,
                             std::span<const double> knots, const Eigen::MatrixXd& b, RecallScheme scheme) {
  const NpGeometry geo = build_geometry(data, support, knots, scheme, UnmatchedRecall::Drop);
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()),
                                                static_cast<Eigen::Index>(support.size()));
  for (size_t i = 0; i < data.size(); ++i)
    for (const auto& e : geo.candidates[i])
      alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e.point)) += geo.weight(i, e, b);
  return alpha;
}

ScStep self_consistency_step(const Eigen::VectorXd& q, const Eigen::MatrixXd& alpha) {
  ScStep out;
  out.q = Eigen::VectorXd::Zero(q.size());
  const bool positive = (q.array() > 0.0).all();
  size_t used = 0;
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    const Eigen::VectorXd num = alpha.row(i).transpose().cwiseProduct(q);
    const double den = num.sum();
    if (!(den > 0.0)) {
      if (positive) throw AllZeroRow("row " + std::to_string(i) + " has zero total weight under positive masses");
      out.zero_rows.push_back(static_cast<size_t>(i));
      continue;
    }
    out.q += num / den;
    ++used;
  }
  if (used > 0) out.q /= static_cast<double>(used);
  return out;
}

Eigen::VectorXd self_consistency_step(const Eigen::VectorXd& q, const NpGeometry& geo, const Eigen::MatrixXd& b) {
  Eigen::VectorXd next = Eigen::VectorXd::Zero(q.size());
  size_t used = 0;
  for (size_t i = 0; i < geo.candidates.size(); ++i) {
    const auto& cand = geo.candidates[i];
    double den = 0.0;
    for (const auto& e : cand) den += geo.weight(i, e, b) * q[static_cast<Eigen::Index>(e.point)];
    if (!(den > 0.0)) continue;
    for (const auto& e : cand)
      next[static_cast<Eigen::Index>(e.point)] += geo.weight(i, e, b) * q[static_cast<Eigen::Index>(e.point)] / den;
    ++used;
  }
  if (used > 0) next /= static_cast<double>(used);
  return next;
}

Eigen::MatrixXd m_step_recall(const NpGeometry& geo, const Eigen::VectorXd& q, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(b.rows(), b.cols());
  for (size_t i = 0; i < geo.candidates.size(); ++i) {
    if (geo.row[i] < 0) continue;
    const auto& cand = geo.candidates[i];
    double den = 0.0;
    for (const auto& e : cand) den += geo.weight(i, e, b) * q[static_cast<Eigen::Index>(e.point)];
    if (!(den > 0.0)) continue;
    for (const auto& e : cand)
      counts(geo.row[i], e.segment) += geo.weight(i, e, b) * q[static_cast<Eigen::Index>(e.point)] / den;
  }
  Eigen::MatrixXd next = b;
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    const double total = counts.col(c).sum();
    if (total > 0.0) next.col(c) = counts.col(c) / total;
  }
  return next;
}

Eigen::MatrixXd m_step_recall(std::span<const SubjectRecord> data, const NpSupport& support, const Eigen::VectorXd& q,
                              std::span<const double> knots, const Eigen::MatrixXd& b, RecallScheme scheme) {
  return m_step_recall(build_geometry(data, support, knots, scheme), q, b);
}

double np_loglik(const NpGeometry& geo, const Eigen::VectorXd& q, const Eigen::MatrixXd& b) {
  std::vector<double> terms;
  terms.reserve(geo.candidates.size());
  for (size_t i = 0; i < geo.candidates.size(); ++i) {
    const auto& cand = geo.candidates[i];
    if (cand.empty()) continue;
    double s = 0.0;
    for (const auto& e : cand) s += geo.weight(i, e, b) * q[static_cast<Eigen::Index>(e.point)];
    terms.push_back(std::log(s));
  }
  return pairwise_sum(terms);
}

StepFunction NpFit::cdf() const {
  StepFunction f;
  f.x = support.points;
  f.cum.resize(support.size());
  double acc = 0.0;
  for (size_t j = 0; j < support.size(); ++j) {
    acc += masses[static_cast<Eigen::Index>(j)];
    f.cum[j] = std::min(acc, 1.0);
  }
  return f;
}

namespace {

NpFit fit_alternating(std::span<const SubjectRecord> data, std::span<const double> knots, const NpOptions& opts,
                      RecallScheme scheme) {
  NpFit fit;
  fit.scheme = scheme;
  fit.knots.assign(knots.begin(), knots.end());
  fit.support = build_support(data);
  const NpGeometry geo = build_geometry(data, fit.support, knots, scheme, opts.unmatched);
  fit.coarsened = geo.coarsened;
  fit.dropped = static_cast<size_t>(
      std::count_if(geo.candidates.begin(), geo.candidates.end(), [](const auto& c) { return c.empty(); }));

  const Eigen::Index nu = static_cast<Eigen::Index>(fit.support.size());
  const int rows = scheme == RecallScheme::Binary ? 2 : 4;
  fit.masses = Eigen::VectorXd::Constant(nu, 1.0 / static_cast<double>(nu));
  fit.recall_b = Eigen::MatrixXd::Constant(rows, static_cast<Eigen::Index>(knots.size()), 1.0 / rows);

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    for (int k = 0; k < opts.max_inner; ++k) {
      Eigen::VectorXd next = self_consistency_step(fit.masses, geo, fit.recall_b);
      const double change = (next - fit.masses).lpNorm<Eigen::Infinity>();
      fit.masses = std::move(next);
      if (change < opts.inner_tol) break;
    }
    fit.loglik_trace.push_back(np_loglik(geo, fit.masses, fit.recall_b));
    fit.outer_iterations = outer + 1;
    const size_t m = fit.loglik_trace.size();
    if (m > 1 && std::abs(fit.loglik_trace[m - 1] - fit.loglik_trace[m - 2]) < opts.outer_tol) {
      fit.converged = true;
      break;
    }
    fit.recall_b = m_step_recall(geo, fit.masses, fit.recall_b);
  }
  return fit;
}

}  // namespace

NpFit fit_amle(std::span<const SubjectRecord> data, std::span<const double> knots, const NpOptions& opts) {
  return fit_alternating(data, knots, opts, RecallScheme::Partial);
}

NpFit fit_binary_amle(std::span<const SubjectRecord> data, std::span<const double> knots, const NpOptions& opts) {
  return fit_alternating(data, knots, opts, RecallScheme::Binary);
}

}  // namespace recallsurv
