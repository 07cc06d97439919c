#include "recallsurv/npmle_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "recallsurv/error.hpp"
#include "recallsurv/recall_model.hpp"

namespace recallsurv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Entry {
  size_t set;
  int segment;
};

struct Term {
  int type = -1;  // -1 censored, else row of b
  std::vector<Entry> entries;
};

struct Problem {
  std::vector<Term> terms;
  std::vector<OracleAtom> atoms;
  int segments = 1;
};

bool has_bit(uint64_t sig, size_t k) { return (sig >> k) & 1u; }

// Coefficient table for the atoms in ids under recall matrix b.
Eigen::MatrixXd coefficients(const Problem& pr, const std::vector<size_t>& ids, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pr.terms.size()),
                                            static_cast<Eigen::Index>(ids.size()));
  for (size_t i = 0; i < pr.terms.size(); ++i) {
    const Term& term = pr.terms[i];
    for (size_t a = 0; a < ids.size(); ++a) {
      const uint64_t sig = pr.atoms[ids[a]].signature;
      double v = 0.0;
      for (const auto& e : term.entries)
        if (has_bit(sig, e.set)) v += term.type < 0 ? 1.0 : b(term.type, e.segment);
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = v;
    }
  }
  return c;
}

// All ways to split `units` steps among k parts.
void compositions(int units, int k, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (k == 1) {
    cur.push_back(units);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int u = 0; u <= units; ++u) {
    cur.push_back(u);
    compositions(units - u, k - 1, cur, out);
    cur.pop_back();
  }
}

OracleMaximum maximize_over(const Problem& pr, const std::vector<size_t>& ids, const OracleOptions& opts) {
  const int L = pr.segments;
  // recall types that actually carry weight in each column
  std::vector<std::vector<int>> present(static_cast<size_t>(L));
  for (const auto& term : pr.terms) {
    if (term.type < 0) continue;
    for (const auto& e : term.entries) {
      const bool used = std::any_of(ids.begin(), ids.end(), [&](size_t a) { return has_bit(pr.atoms[a].signature, e.set); });
      auto& col = present[static_cast<size_t>(e.segment)];
      if (used && std::find(col.begin(), col.end(), term.type) == col.end()) col.push_back(term.type);
    }
  }
  for (auto& col : present) std::sort(col.begin(), col.end());

  const int units = static_cast<int>(std::lround(1.0 / opts.b_step));
  std::vector<std::vector<std::vector<int>>> grids(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto& col = present[static_cast<size_t>(l)];
    std::vector<int> cur;
    if (col.empty())
      grids[static_cast<size_t>(l)].push_back({});
    else
      compositions(units, static_cast<int>(col.size()), cur, grids[static_cast<size_t>(l)]);
  }

  auto fill_column = [&](Eigen::MatrixXd& b, int l, const std::vector<int>& comp) {
    const auto& col = present[static_cast<size_t>(l)];
    if (col.empty()) {
      b.col(l).setConstant(0.25);
      return;
    }
    b.col(l).setZero();
    for (size_t k = 0; k < col.size(); ++k) b(col[k], l) = comp[k] * opts.b_step;
  };

  const Eigen::Index R = static_cast<Eigen::Index>(ids.size());
  auto evaluate = [&](const Eigen::MatrixXd& b, Eigen::VectorXd& p) {
    p = Eigen::VectorXd::Constant(R, 1.0 / static_cast<double>(R));
    return maximize_mixture_loglik(coefficients(pr, ids, b), p);
  };

  OracleMaximum best;
  best.loglik = kNegInf;
  best.b = Eigen::MatrixXd::Constant(4, L, 0.25);
  Eigen::VectorXd best_p = Eigen::VectorXd::Constant(R, 1.0 / static_cast<double>(R));

  std::vector<size_t> idx(static_cast<size_t>(L), 0);
  Eigen::MatrixXd b(4, L);
  Eigen::VectorXd p;
  while (true) {
    for (int l = 0; l < L; ++l) fill_column(b, l, grids[static_cast<size_t>(l)][idx[static_cast<size_t>(l)]]);
    const double ll = evaluate(b, p);
    if (ll > best.loglik) {
      best.loglik = ll;
      best.b = b;
      best_p = p;
    }
    int l = 0;
    for (; l < L; ++l) {
      if (++idx[static_cast<size_t>(l)] < grids[static_cast<size_t>(l)].size()) break;
      idx[static_cast<size_t>(l)] = 0;
    }
    if (l == L) break;
  }

  // coordinatewise refinement: shift weight between two types of one column
  if (std::isfinite(best.loglik)) {
    constexpr double kGolden = 0.6180339887498949;
    for (int sweep = 0; sweep < opts.refine_sweeps; ++sweep) {
      const double start = best.loglik;
      for (int l = 0; l < L; ++l) {
        const auto& col = present[static_cast<size_t>(l)];
        for (size_t a = 0; a < col.size(); ++a) {
          for (size_t c = a + 1; c < col.size(); ++c) {
            const double total = best.b(col[a], l) + best.b(col[c], l);
            if (!(total > 0.0)) continue;
            Eigen::MatrixXd trial = best.b;
            auto at = [&](double x, Eigen::VectorXd& pp) {
              trial(col[a], l) = x;
              trial(col[c], l) = total - x;
              return evaluate(trial, pp);
            };
            double lo = 0.0, hi = total;
            double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
            Eigen::VectorXd p1, p2;
            double f1 = at(x1, p1), f2 = at(x2, p2);
            for (int it = 0; it < 60 && hi - lo > 1e-10; ++it) {
              if (f1 < f2) {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + kGolden * (hi - lo);
                f2 = at(x2, p2);
              } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - kGolden * (hi - lo);
                f1 = at(x1, p1);
              }
            }
            for (double x : {0.5 * (lo + hi), 0.0, total}) {
              Eigen::VectorXd pp;
              const double f = at(x, pp);
              if (f > best.loglik) {
                best.loglik = f;
                best.b = trial;
                best_p = pp;
              }
            }
          }
        }
      }
      if (best.loglik - start < 1e-12) break;
    }
  }

  best.masses = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pr.atoms.size()));
  for (size_t a = 0; a < ids.size(); ++a)
    best.masses[static_cast<Eigen::Index>(ids[a])] = best_p[static_cast<Eigen::Index>(a)];
  return best;
}

}  // namespace

double maximize_mixture_loglik(const Eigen::MatrixXd& coef, Eigen::VectorXd& p, double tol, int max_iterations) {
  const Eigen::Index n = coef.rows(), R = coef.cols();
  if (R == 0) return n == 0 ? 0.0 : kNegInf;
  if (p.size() != R || std::abs(p.sum() - 1.0) > 1e-9 || (p.array() < 0.0).any())
    p = Eigen::VectorXd::Constant(R, 1.0 / static_cast<double>(R));
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(coef.row(i).maxCoeff() > 0.0)) return kNegInf;

  Eigen::VectorXd d = coef * p;
  if (!(d.array() > 0.0).all()) {
    p = Eigen::VectorXd::Constant(R, 1.0 / static_cast<double>(R));
    d = coef * p;
  }
  const double scale = static_cast<double>(std::max<Eigen::Index>(n, 1));
  for (int iter = 0; iter < max_iterations; ++iter) {
    const Eigen::VectorXd g = coef.transpose() * d.cwiseInverse();
    Eigen::Index up = 0, down = -1;
    for (Eigen::Index r = 0; r < R; ++r) {
      if (g[r] > g[up]) up = r;
      if (p[r] > 0.0 && (down < 0 || g[r] < g[down])) down = r;
    }
    if (down < 0 || up == down || (g[up] - g[down]) / scale < tol) break;
    const Eigen::VectorXd delta = coef.col(up) - coef.col(down);
    auto slope = [&](double t) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += delta[i] / (d[i] + t * delta[i]);
      return s;
    };
    double t = p[down];
    if (slope(t) < 0.0) {
      double lo = 0.0, hi = t;
      for (int k = 0; k < 100 && hi - lo > 1e-17; ++k) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? lo : hi) = mid;
      }
      t = 0.5 * (lo + hi);
    }
    p[up] += t;
    p[down] = t == p[down] ? 0.0 : p[down] - t;
    d = coef * p;
  }
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ll += std::log(d[i]);
  return ll;
}

OracleResult brute_force_npmle(std::span<const SubjectRecord> data, std::span<const double> knots,
                               const OracleOptions& opts) {
  if (data.size() > kOracleMaxSubjects)
    throw TooLarge("oracle handles at most " + std::to_string(kOracleMaxSubjects) + " subjects, got " +
                   std::to_string(data.size()));
  if (knots.size() > kOracleMaxKnots)
    throw TooLarge("oracle handles at most " + std::to_string(kOracleMaxKnots) + " knots, got " +
                   std::to_string(knots.size()));
  validate_knots(knots);
  validate_dataset(data);

  OracleResult res;
  res.t_max = 0.0;
  res.t_min = std::numeric_limits<double>::infinity();
  for (const auto& rec : data) {
    res.t_max = std::max(res.t_max, rec.s);
    if (rec.exact()) res.t_min = std::min(res.t_min, rec.v);
    if (rec.delta == 1 && (rec.epsilon == kMonth || rec.epsilon == kYear))
      res.t_min = std::min(res.t_min, event_age_range(rec).lo);
  }
  if (!std::isfinite(res.t_min)) res.t_min = 0.0;
  const double t_min = res.t_min, t_max = res.t_max;

  // candidate sets, singletons first, then (T, t_max], then the rest
  using Pred = std::function<bool(double)>;
  std::vector<Pred> preds;
  std::vector<double> ends{t_min, t_max};
  std::vector<double> exact_ts;
  for (const auto& rec : data)
    if (rec.exact()) exact_ts.push_back(rec.v);
  std::sort(exact_ts.begin(), exact_ts.end());
  exact_ts.erase(std::unique(exact_ts.begin(), exact_ts.end()), exact_ts.end());
  const size_t n2 = exact_ts.size();
  for (double T : exact_ts) {
    preds.push_back([T](double t) { return t == T; });
    ends.push_back(T);
  }
  for (double T : exact_ts) preds.push_back([T, t_max](double t) { return t > T && t <= t_max; });

  Problem pr;
  pr.segments = static_cast<int>(knots.size());
  std::vector<std::vector<size_t>> raw_sets(data.size());  // per subject, indices into preds
  std::vector<std::vector<int>> raw_segs(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data[i];
    Term term;
    const double s = rec.s;
    ends.push_back(s);
    for (double k : knots) ends.push_back(s - k);
    if (rec.delta == 0) {
      term.type = -1;
      raw_sets[i].push_back(preds.size());
      raw_segs[i].push_back(0);
      preds.push_back([s, t_max](double t) { return t > s && t <= t_max; });
    } else if (rec.epsilon == kExact) {
      term.type = kExact;
      const auto j = static_cast<size_t>(std::lower_bound(exact_ts.begin(), exact_ts.end(), rec.v) - exact_ts.begin());
      raw_sets[i].push_back(j);
      raw_segs[i].push_back(segment_of(knots, s - rec.v));
    } else {
      term.type = rec.epsilon;
      double lo = t_min, hi = s;
      if (rec.epsilon != kNoRecall) {
        const AgeRange r = event_age_range(rec);
        lo = r.lo;
        hi = r.hi;
        ends.push_back(lo);
        ends.push_back(hi);
      }
      for (int l = 0; l < pr.segments; ++l) {
        raw_sets[i].push_back(preds.size());
        raw_segs[i].push_back(l);
        preds.push_back([&knots, s, lo, hi, l](double t) { return t >= lo && t <= hi && segment_of(knots, s - t) == l; });
      }
    }
    pr.terms.push_back(std::move(term));
  }

  // elementary pieces: every endpoint and every open gap between neighbours
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  struct Piece {
    double rep, lo, hi;
  };
  std::vector<Piece> pieces;
  for (size_t k = 0; k < ends.size(); ++k) {
    pieces.push_back({ends[k], ends[k], ends[k]});
    if (k + 1 < ends.size()) pieces.push_back({0.5 * (ends[k] + ends[k + 1]), ends[k], ends[k + 1]});
  }

  // membership of each candidate set; identical or empty sets collapse
  std::vector<std::vector<bool>> member(preds.size(), std::vector<bool>(pieces.size()));
  for (size_t k = 0; k < preds.size(); ++k)
    for (size_t m = 0; m < pieces.size(); ++m) member[k][m] = preds[k](pieces[m].rep);
  std::map<std::vector<bool>, size_t> seen;
  std::vector<long> canon(preds.size(), -1);
  for (size_t k = 0; k < preds.size(); ++k) {
    if (std::none_of(member[k].begin(), member[k].end(), [](bool x) { return x; })) continue;
    auto [it, inserted] = seen.emplace(member[k], seen.size());
    canon[k] = static_cast<long>(it->second);
  }
  res.sets = seen.size();
  if (res.sets > 64) throw TooLarge("oracle instance produces more than 64 distinct sets");

  for (size_t i = 0; i < data.size(); ++i)
    for (size_t e = 0; e < raw_sets[i].size(); ++e)
      if (canon[raw_sets[i][e]] >= 0)
        pr.terms[i].entries.push_back({static_cast<size_t>(canon[raw_sets[i][e]]), raw_segs[i][e]});

  std::map<uint64_t, size_t> atom_of;
  for (size_t m = 0; m < pieces.size(); ++m) {
    uint64_t sig = 0;
    for (size_t k = 0; k < preds.size(); ++k)
      if (canon[k] >= 0 && member[k][m]) sig |= uint64_t{1} << canon[k];
    if (sig == 0) continue;
    auto [it, inserted] = atom_of.emplace(sig, pr.atoms.size());
    if (inserted) {
      OracleAtom atom;
      atom.signature = sig;
      atom.lo = pieces[m].lo;
      atom.hi = pieces[m].hi;
      for (size_t j = 0; j < n2; ++j)
        if (has_bit(sig, static_cast<size_t>(canon[j]))) atom.exact = true;
      pr.atoms.push_back(atom);
    } else {
      auto& atom = pr.atoms[it->second];
      atom.lo = std::min(atom.lo, pieces[m].lo);
      atom.hi = std::max(atom.hi, pieces[m].hi);
    }
  }
  std::sort(pr.atoms.begin(), pr.atoms.end(), [](const auto& a, const auto& b) {
    return a.lo != b.lo ? a.lo < b.lo : a.hi < b.hi;
  });

  // reduction: drop signatures nested in another, and those that hold
  // (T, t_max] where a sibling holds {T} instead
  for (auto& atom : pr.atoms) {
    const uint64_t s = atom.signature;
    bool nested = false, swapped = false;
    for (const auto& other : pr.atoms) {
      const uint64_t t = other.signature;
      if (t == s) continue;
      if ((s & t) == s) nested = true;
      for (size_t j = 0; j < n2 && !swapped; ++j) {
        const uint64_t single = uint64_t{1} << canon[j];
        const uint64_t after = uint64_t{1} << canon[n2 + j];
        if ((t & ~s) == single && (s & ~t) == after) swapped = true;
      }
    }
    atom.in_c0 = !nested && !swapped;
    res.removed_nested += nested ? 1 : 0;
    res.removed_swapped += (swapped && !nested) ? 1 : 0;
  }

  std::vector<size_t> all(pr.atoms.size()), c0, exact;
  std::iota(all.begin(), all.end(), size_t{0});
  for (size_t a = 0; a < pr.atoms.size(); ++a) {
    if (pr.atoms[a].in_c0) c0.push_back(a);
    if (pr.atoms[a].exact) exact.push_back(a);
  }
  res.over_c = maximize_over(pr, all, opts);
  res.over_c0 = maximize_over(pr, c0, opts);
  res.restricted = maximize_over(pr, exact, opts);
  res.atoms = std::move(pr.atoms);
  return res;
}

}  // namespace recallsurv
