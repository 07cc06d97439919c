#include "recallsurv/diagnostics.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "recallsurv/error.hpp"
#include "recallsurv/recall_model.hpp"

namespace recallsurv {

namespace {

constexpr int kStrata = 5;  // censored, then recall status 0..3 among events

int stratum_of(const GofCell& c) { return c.delta == 0 ? 0 : 1 + c.epsilon; }

std::vector<GofCell> all_cells() {
  std::vector<GofCell> cells;
  for (int st = 0; st < kStrata; ++st) {
    const int delta = st == 0 ? 0 : 1;
    const int eps = st == 0 ? 0 : st - 1;
    const bool has_v = delta == 1 && eps != kNoRecall;
    for (int s = 0; s < 2; ++s)
      for (int v = has_v ? 0 : -1; v < (has_v ? 2 : 0); ++v)
        for (int d = 0; d < 2; ++d) cells.push_back({delta, eps, s, v, d});
  }
  return cells;
}

size_t cell_index(const std::vector<GofCell>& cells, const GofCell& key) {
  for (size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    if (c.delta == key.delta && c.epsilon == key.epsilon && c.s_high == key.s_high && c.v_high == key.v_high &&
        c.d_high == key.d_high)
      return k;
  }
  throw DomainError("no goodness-of-fit cell for " + key.label());
}

// Event age below which a recall of status eps reports V <= split.
double v_cut(int eps, double split, const SubjectRecord& rec) {
  switch (eps) {
    case kExact:
      return split;
    case kMonth:
      return (std::floor(12.0 * split) + 1.0) / 12.0 - rec.d;
    default:
      return std::floor(split) + 1.0 - rec.d - (rec.m - 1) / 12.0;
  }
}

}  // namespace

std::string GofCell::label() const {
  std::string s = "delta" + std::to_string(delta);
  if (delta == 1) s += ".eps" + std::to_string(epsilon);
  s += s_high ? ".S_hi" : ".S_lo";
  if (v_high >= 0) s += v_high ? ".V_hi" : ".V_lo";
  s += d_high ? ".d_hi" : ".d_lo";
  return s;
}

std::string GofBin::label() const {
  std::string s;
  for (const auto& c : cells) s += (s.empty() ? "" : "+") + c.label();
  return s;
}

double nonzero_v_median(std::span<const SubjectRecord> data) {
  std::vector<double> vs;
  for (const auto& r : data)
    if (r.delta == 1 && r.epsilon != kNoRecall) vs.push_back(r.v);
  if (vs.empty()) return 0.0;
  std::sort(vs.begin(), vs.end());
  const size_t h = vs.size() / 2;
  return vs.size() % 2 == 1 ? vs[h] : 0.5 * (vs[h - 1] + vs[h]);
}

std::vector<GofBin> gof_cells(std::span<const SubjectRecord> data, const ParametricFit& fit, const GofSplits& splits) {
  if (!fit.converged) throw FitNotConverged("goodness of fit needs a converged fit");
  if (fit.kind != LikelihoodKind::PartialRecall)
    throw DomainError("goodness of fit is defined for partial recall fits only, got " + to_string(fit.kind));

  const std::vector<GofCell> cells = all_cells();
  std::vector<GofBin> bins(cells.size());
  for (size_t k = 0; k < cells.size(); ++k) bins[k].cells = {cells[k]};

  const EventTimeModel event(fit.theta);
  const RecallModel recall = recall_model_for(fit.kind, fit.eta);
  const auto kinks = event.breakpoints();
  const auto knots = recall.breakpoints();
  auto integral = [&](double s, double lo, double hi, int k) {
    return recall_integral(event, recall, kinks, knots, s, std::max(lo, 0.0), std::min(hi, s), k);
  };

  for (const auto& rec : data) {
    GofCell key;
    key.s_high = rec.s > splits.s_split ? 1 : 0;
    key.d_high = rec.d > splits.d_split ? 1 : 0;

    // observed cell
    GofCell obs = key;
    obs.delta = rec.delta;
    obs.epsilon = rec.delta == 1 ? rec.epsilon : 0;
    obs.v_high = (rec.delta == 1 && rec.epsilon != kNoRecall) ? (rec.v > splits.v_split ? 1 : 0) : -1;
    bins[cell_index(cells, obs)].observed += 1.0;

    // expected: the fitted law of (delta, epsilon, V) given S, m, d
    GofCell c = key;
    c.delta = 0;
    c.epsilon = 0;
    c.v_high = -1;
    bins[cell_index(cells, c)].expected += event.sf(rec.s);
    c.delta = 1;
    c.epsilon = kNoRecall;
    bins[cell_index(cells, c)].expected += integral(rec.s, 0.0, rec.s, kNoRecall);
    for (int eps = kExact; eps <= kYear; ++eps) {
      const double cut = std::clamp(v_cut(eps, splits.v_split, rec), 0.0, rec.s);
      c.epsilon = eps;
      c.v_high = 0;
      bins[cell_index(cells, c)].expected += integral(rec.s, 0.0, cut, eps);
      c.v_high = 1;
      bins[cell_index(cells, c)].expected += integral(rec.s, cut, rec.s, eps);
    }
  }
  return bins;
}

std::vector<GofBin> merge_bins(std::vector<GofBin> bins, double min_expected) {
  while (bins.size() > 1) {
    size_t idx = bins.size();
    for (size_t k = 0; k < bins.size(); ++k)
      if (bins[k].expected < min_expected && (idx == bins.size() || bins[k].expected < bins[idx].expected)) idx = k;
    if (idx == bins.size()) break;

    const int st = stratum_of(bins[idx].cells.front());
    const bool prev_same = idx > 0 && stratum_of(bins[idx - 1].cells.front()) == st;
    const bool next_same = idx + 1 < bins.size() && stratum_of(bins[idx + 1].cells.front()) == st;
    bool has_prev = prev_same, has_next = next_same;
    if (!prev_same && !next_same) {
      has_prev = idx > 0;
      has_next = idx + 1 < bins.size();
    }
    size_t target;
    if (has_prev && has_next)
      target = bins[idx + 1].expected < bins[idx - 1].expected ? idx + 1 : idx - 1;
    else
      target = has_prev ? idx - 1 : idx + 1;

    const size_t first = std::min(idx, target), second = std::max(idx, target);
    GofBin merged = bins[first];
    merged.cells.insert(merged.cells.end(), bins[second].cells.begin(), bins[second].cells.end());
    merged.observed += bins[second].observed;
    merged.expected += bins[second].expected;
    bins[first] = std::move(merged);
    bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(second));
  }
  return bins;
}

std::vector<GofBin> gof_bins(std::span<const SubjectRecord> data, const ParametricFit& fit) {
  GofSplits splits;
  splits.v_split = nonzero_v_median(data);
  return merge_bins(gof_cells(data, fit, splits));
}

GofResult gof_chisq(std::vector<GofBin> merged, size_t initial_bins, int parameters) {
  GofResult res;
  res.bins = std::move(merged);
  res.merged_from = initial_bins;
  res.parameters = parameters;
  res.df = static_cast<int>(res.bins.size()) - 1 - parameters;
  if (res.df <= 0)
    throw NonPositiveDf(std::to_string(res.bins.size()) + " bins leave no degrees of freedom for " +
                        std::to_string(parameters) + " parameters");
  for (const auto& b : res.bins) {
    const double diff = b.observed - b.expected;
    res.statistic += diff * diff / b.expected;
  }
  res.p_value = boost::math::gamma_q(0.5 * res.df, 0.5 * res.statistic);
  return res;
}

GofResult gof_chisq(std::span<const SubjectRecord> data, const ParametricFit& fit) {
  GofSplits splits;
  splits.v_split = nonzero_v_median(data);
  auto cells = gof_cells(data, fit, splits);
  const size_t initial = cells.size();
  GofResult res = gof_chisq(merge_bins(std::move(cells)), initial, parameter_count(fit.kind));
  res.splits = splits;
  return res;
}

Eigen::MatrixXd conditional_piecewise_recall(std::span<const SubjectRecord> data, const EventTimeModel& event,
                                             std::span<const double> knots, int max_iterations, double tol) {
  validate_knots(knots);
  const auto L = static_cast<Eigen::Index>(knots.size());

  // per subject: recall status and the event-model mass of its age range in
  // each elapsed-time segment
  struct Row {
    int type;
    Eigen::VectorXd mass;
  };
  std::vector<Row> rows;
  Eigen::MatrixXd exact_counts = Eigen::MatrixXd::Zero(4, L);
  for (const auto& rec : data) {
    if (rec.delta == 0) continue;
    if (rec.epsilon == kExact) {
      exact_counts(kExact, segment_of(knots, rec.s - rec.v)) += 1.0;
      continue;
    }
    const AgeRange range = event_age_range(rec);
    Row row{rec.epsilon, Eigen::VectorXd::Zero(L)};
    for (Eigen::Index l = 0; l < L; ++l) {
      // event ages t with s - t in segment l
      double lo = l + 1 < L ? rec.s - knots[static_cast<size_t>(l + 1)] : range.lo;
      double hi = l == 0 ? range.hi : rec.s - knots[static_cast<size_t>(l)];
      lo = std::max(lo, range.lo);
      hi = std::min(hi, range.hi);
      if (hi > lo) row.mass[l] = event.cdf(hi) - event.cdf(lo);
    }
    if (row.mass.sum() > 0.0) rows.push_back(std::move(row));
  }

  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(4, L, 0.25);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd counts = exact_counts;
    for (const auto& row : rows) {
      const Eigen::VectorXd w = b.row(row.type).transpose().cwiseProduct(row.mass);
      const double total = w.sum();
      if (total > 0.0) counts.row(row.type) += (w / total).transpose();
    }
    Eigen::MatrixXd next = b;
    for (Eigen::Index c = 0; c < L; ++c) {
      const double total = counts.col(c).sum();
      if (total > 0.0) next.col(c) = counts.col(c) / total;
    }
    const double change = (next - b).lpNorm<Eigen::Infinity>();
    b = std::move(next);
    if (change < tol) break;
  }
  return b;
}

std::vector<RecallCurveRow> cumulative_recall_curves(std::span<const SubjectRecord> data,
                                                     std::span<const double> edges) {
  std::vector<RecallCurveRow> out;
  for (size_t g = 0; g + 1 < edges.size(); ++g) {
    RecallCurveRow row;
    row.lo = edges[g];
    row.hi = edges[g + 1];
    row.age = 0.5 * (row.lo + row.hi);
    std::array<size_t, 4> counts{};
    for (const auto& rec : data) {
      if (rec.delta != 1 || rec.s < row.lo || rec.s >= row.hi) continue;
      ++counts[static_cast<size_t>(rec.epsilon)];
      ++row.events;
    }
    if (row.events == 0) continue;
    size_t acc = 0;
    for (size_t k = 0; k < 4; ++k) {
      acc += counts[k];
      row.cumulative[k] = static_cast<double>(acc) / static_cast<double>(row.events);
    }
    out.push_back(row);
  }
  return out;
}

std::vector<RecallCurveRow> model_recall_curves(const EventTimeModel& event, const RecallModel& recall,
                                                std::span<const double> ages) {
  const auto kinks = event.breakpoints();
  const auto knots = recall.breakpoints();
  std::vector<RecallCurveRow> out;
  for (double s : ages) {
    RecallCurveRow row;
    row.lo = row.hi = row.age = s;
    std::array<double, 4> parts{};
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
      parts[static_cast<size_t>(k)] = recall_integral(event, recall, kinks, knots, s, 0.0, s, k);
      total += parts[static_cast<size_t>(k)];
    }
    if (!(total > 0.0)) continue;
    double acc = 0.0;
    for (size_t k = 0; k < 4; ++k) {
      acc += parts[k];
      row.cumulative[k] = std::min(acc / total, 1.0);
    }
    out.push_back(row);
  }
  return out;
}

std::vector<RecallCurveRow> model_recall_curves(const ParametricFit& fit, std::span<const double> ages) {
  return model_recall_curves(EventTimeModel(fit.theta), recall_model_for(fit.kind, fit.eta), ages);
}

std::vector<RecallCheckRow> recall_check(std::span<const SubjectRecord> data, const ParametricFit& fit,
                                         std::span<const double> knots) {
  const Eigen::MatrixXd b = conditional_piecewise_recall(data, EventTimeModel(fit.theta), knots);
  const RecallModel model = recall_model_for(fit.kind, fit.eta);
  double s_max = 0.0;
  for (const auto& rec : data) s_max = std::max(s_max, rec.s);
  std::vector<RecallCheckRow> rows;
  const int segments = static_cast<int>(knots.size());
  for (int j = 0; j < segments; ++j) {
    const double lo = knots[static_cast<size_t>(j)];
    double hi = j + 1 < segments ? knots[static_cast<size_t>(j) + 1] : std::max(s_max, lo + 1.0);
    for (int k = 0; k < 4; ++k) {
      RecallCheckRow row;
      row.segment = j;
      row.lo = lo;
      row.hi = hi;
      row.type = k;
      row.piecewise = b(k, j);
      row.model = integrate_pieces([&](double u) { return model.probs(u)[static_cast<size_t>(k)]; }, lo, hi) / (hi - lo);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace recallsurv
