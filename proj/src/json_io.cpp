#include "recallsurv/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <type_traits>

#include "recallsurv/error.hpp"

namespace recallsurv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double number_or_nan(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

Json matrix_rows(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const Json& rows) {
  if (!rows.is_array()) throw DomainError("matrix must be a list of rows");
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = nr == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const Json& row = rows[static_cast<size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != nc) throw DomainError("matrix rows differ in length");
    for (Eigen::Index c = 0; c < nc; ++c) m(r, c) = number_or_nan(row[static_cast<size_t>(c)]);
  }
  return m;
}

Json estimate_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

Estimate estimate_from(const Json& j) { return {j.at("value").get<double>(), number_or_nan(j.value("se", Json()))}; }

std::vector<double> age_grid_from(const Json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  const double from = j.at("from").get<double>(), to = j.at("to").get<double>(), step = j.at("step").get<double>();
  if (!(step > 0.0) || to < from) throw DomainError("age_grid needs from <= to and step > 0");
  std::vector<double> grid;
  const int count = static_cast<int>(std::floor((to - from) / step + 1e-9));
  for (int k = 0; k <= count; ++k) grid.push_back(from + k * step);
  return grid;
}

}  // namespace

void to_json(Json& j, const EventTimeModel& m) {
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Weibull>)
          j = {{"type", "weibull"}, {"shape", e.shape}, {"scale", e.scale}};
        else if constexpr (std::is_same_v<T, TruncatedWeibull>)
          j = {{"type", "truncated_weibull"}, {"shape", e.base.shape}, {"scale", e.base.scale},
               {"lower", e.lower},          {"upper", e.upper}};
        else
          j = {{"type", "mixture"},
               {"form", e.form == MixtureForm::Combination ? "combination" : "distribution"},
               {"gamma", e.gamma},
               {"mu", e.mu},
               {"sigma2", e.sigma2},
               {"shape", e.weibull.shape},
               {"scale", e.weibull.scale}};
      },
      m.variant());
}

void from_json(const Json& j, EventTimeModel& m) {
  const std::string type = j.value("type", "weibull");
  const Weibull w{j.value("shape", 10.0), j.value("scale", 12.0)};
  if (type == "weibull")
    m = EventTimeModel(w);
  else if (type == "truncated_weibull")
    m = EventTimeModel(TruncatedWeibull{w, j.value("lower", 8.0), j.value("upper", 16.0)});
  else if (type == "mixture") {
    const std::string form = j.value("form", "combination");
    if (form != "combination" && form != "distribution") throw DomainError("unknown mixture form '" + form + "'");
    m = EventTimeModel(MixtureModel{j.value("gamma", 0.0), j.value("mu", 2.45), j.value("sigma2", 0.07), w,
                                    form == "combination" ? MixtureForm::Combination : MixtureForm::Distribution});
  }
  else
    throw DomainError("unknown event model type '" + type + "'");
}

void to_json(Json& j, const RecallModel& m) {
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, LogisticRecall>)
          j = {{"type", "logistic"}, {"eta", r.eta}};
        else if constexpr (std::is_same_v<T, BinaryRecall>)
          j = {{"type", "binary"}, {"alpha", r.alpha}, {"beta", r.beta}};
        else
          j = {{"type", "piecewise"}, {"knots", r.knots}, {"b", matrix_rows(r.b)}};
      },
      m.variant());
}

void from_json(const Json& j, RecallModel& m) {
  const std::string type = j.value("type", "logistic");
  if (type == "logistic") {
    LogisticRecall r;
    const auto eta = j.at("eta").get<std::vector<double>>();
    if (eta.size() != 6) throw DomainError("logistic recall needs 6 eta values");
    std::copy(eta.begin(), eta.end(), r.eta.begin());
    m = RecallModel(r);
  } else if (type == "binary") {
    m = RecallModel(BinaryRecall{j.at("alpha").get<double>(), j.at("beta").get<double>()});
  } else if (type == "piecewise") {
    const Eigen::MatrixXd b = matrix_from_rows(j.at("b"));
    if (b.rows() != 4) throw DomainError("piecewise recall b needs 4 rows");
    m = RecallModel(PiecewiseRecall(j.at("knots").get<std::vector<double>>(), b));
  } else {
    throw DomainError("unknown recall model type '" + type + "'");
  }
}

void to_json(Json& j, const Scenario& sc) {
  j = {{"name", sc.name},
       {"n", sc.n},
       {"event", sc.event},
       {"recall", sc.recall},
       {"interview", {sc.interview_lo, sc.interview_hi}},
       {"birth_month_probs", sc.birth_month_probs},
       {"birth_offset", {sc.offset_lo, sc.offset_hi}},
       {"seed", sc.seed}};
}

void from_json(const Json& j, Scenario& sc) {
  if (j.contains("preset")) {
    sc = preset_scenario(j.at("preset").get<std::string>());
  } else {
    sc = Scenario{};
    sc.name = "custom";
  }
  if (j.contains("name")) sc.name = j.at("name").get<std::string>();
  if (j.contains("n")) sc.n = j.at("n").get<int>();
  if (j.contains("event")) sc.event = j.at("event").get<EventTimeModel>();
  if (j.contains("recall")) sc.recall = j.at("recall").get<RecallModel>();
  if (j.contains("interview")) {
    const auto r = j.at("interview").get<std::vector<int>>();
    if (r.size() != 2) throw DomainError("interview needs [lo, hi]");
    sc.interview_lo = r[0];
    sc.interview_hi = r[1];
  }
  if (j.contains("birth_month_probs")) sc.birth_month_probs = j.at("birth_month_probs").get<std::vector<double>>();
  if (j.contains("birth_offset")) {
    const auto r = j.at("birth_offset").get<std::vector<double>>();
    if (r.size() != 2) throw DomainError("birth_offset needs [lo, hi]");
    sc.offset_lo = r[0];
    sc.offset_hi = r[1];
  }
  if (j.contains("seed")) sc.seed = j.at("seed").get<std::uint64_t>();
  sc.validate();
}

void to_json(Json& j, const ParametricFit& fit) {
  j = {{"kind", to_string(fit.kind)},
       {"theta", {fit.theta.shape, fit.theta.scale}},
       {"eta", fit.eta},
       {"loglik", fit.loglik},
       {"covariance", fit.has_covariance() ? matrix_rows(fit.covariance) : Json()},
       {"converged", fit.converged},
       {"iterations", fit.iterations},
       {"starts", fit.starts},
       {"gradient_norm", fit.gradient_norm},
       {"median", estimate_json(fit.median)},
       {"pi0_at_5", fit.pi0_at_5 ? estimate_json(*fit.pi0_at_5) : Json()}};
}

void from_json(const Json& j, ParametricFit& fit) {
  fit = ParametricFit{};
  fit.kind = parse_likelihood_kind(j.at("kind").get<std::string>());
  const auto theta = j.at("theta").get<std::vector<double>>();
  if (theta.size() != 2) throw DomainError("theta needs (shape, scale)");
  fit.theta = Weibull{theta[0], theta[1]};
  fit.eta = j.value("eta", std::vector<double>{});
  if (static_cast<int>(fit.eta.size()) != recall_parameter_count(fit.kind))
    throw DomainError("eta has " + std::to_string(fit.eta.size()) + " values, " + to_string(fit.kind) + " needs " +
                      std::to_string(recall_parameter_count(fit.kind)));
  fit.loglik = number_or_nan(j.value("loglik", Json()));
  if (j.contains("covariance") && !j.at("covariance").is_null()) fit.covariance = matrix_from_rows(j.at("covariance"));
  fit.converged = j.value("converged", false);
  fit.iterations = j.value("iterations", 0);
  fit.starts = j.value("starts", 1);
  fit.gradient_norm = number_or_nan(j.value("gradient_norm", Json()));
  if (j.contains("median"))
    fit.median = estimate_from(j.at("median"));
  else
    fit.median = {fit.theta.median(), kNaN};
  if (j.contains("pi0_at_5") && !j.at("pi0_at_5").is_null()) fit.pi0_at_5 = estimate_from(j.at("pi0_at_5"));
}

void to_json(Json& j, const NpFit& fit) {
  j = {{"scheme", fit.scheme == RecallScheme::Binary ? "binary" : "partial"},
       {"knots", fit.knots},
       {"support", fit.support.points},
       {"masses", std::vector<double>(fit.masses.data(), fit.masses.data() + fit.masses.size())},
       {"b", matrix_rows(fit.recall_b)},
       {"loglik", fit.loglik()},
       {"loglik_trace", fit.loglik_trace},
       {"converged", fit.converged},
       {"outer_iterations", fit.outer_iterations},
       {"dropped", fit.dropped},
       {"coarsened", fit.coarsened}};
}

void to_json(Json& j, const GofResult& res) {
  Json bins = Json::array();
  for (const auto& b : res.bins) bins.push_back({{"cells", b.label()}, {"observed", b.observed}, {"expected", b.expected}});
  j = {{"bins", bins},
       {"splits", {{"s", res.splits.s_split}, {"d", res.splits.d_split}, {"v", res.splits.v_split}}},
       {"statistic", res.statistic},
       {"df", res.df},
       {"parameters", res.parameters},
       {"p_value", res.p_value},
       {"merged_from", res.merged_from}};
}

void to_json(Json& j, const McConfig& cfg) {
  Json est = Json::array();
  for (Estimator e : cfg.estimators) est.push_back(to_string(e));
  j = {{"name", cfg.name},   {"scenario", cfg.scenario}, {"reps", cfg.reps},         {"estimators", est},
       {"seed", cfg.seed},   {"threads", cfg.threads},   {"age_grid", cfg.age_grid}, {"knots", cfg.knots}};
}

void from_json(const Json& j, McConfig& cfg) {
  cfg = McConfig{};
  const Json& sc = j.at("scenario");
  cfg.scenario = sc.is_string() ? preset_scenario(sc.get<std::string>()) : sc.get<Scenario>();
  cfg.name = j.value("name", cfg.scenario.name);
  if (j.contains("n")) cfg.scenario.n = j.at("n").get<int>();
  cfg.reps = j.value("reps", cfg.reps);
  for (const auto& e : j.at("estimators")) cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", 0);
  if (j.contains("age_grid")) cfg.age_grid = age_grid_from(j.at("age_grid"));
  if (j.contains("knots")) cfg.knots = j.at("knots").get<std::vector<double>>();
  cfg.validate();
}

Scenario load_scenario(const std::string& preset_or_path) {
  if (is_preset(preset_or_path)) return preset_scenario(preset_or_path);
  return read_json_file(preset_or_path).get<Scenario>();
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << dump_json(j);
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<size_t>(k)] = digits[h & 0xf];
  return out;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

}  // namespace recallsurv
