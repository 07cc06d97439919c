#include "recallsurv/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "recallsurv/dataset_io.hpp"
#include "recallsurv/diagnostics.hpp"
#include "recallsurv/error.hpp"
#include "recallsurv/json_io.hpp"
#include "recallsurv/mc.hpp"
#include "recallsurv/nonparametric.hpp"
#include "recallsurv/parametric.hpp"
#include "recallsurv/rng.hpp"
#include "recallsurv/simulate.hpp"

namespace recallsurv {

namespace {

namespace fs = std::filesystem;

// Bad flag values found after parsing; reported with exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const char* kRecallNames[4] = {"exact", "month", "year", "none"};

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::atoll(epoch));
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> args;
  std::optional<std::uint64_t> seed;
  Json config = Json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void write(const std::string& path) const {
    Json in = Json::object(), out = Json::object();
    for (const auto& p : inputs) in[p] = file_digest(p);
    for (const auto& p : outputs) out[p] = file_digest(p);
    Json j = {{"subcommand", subcommand},
              {"args", args},
              {"seed", seed ? Json(*seed) : Json()},
              {"config", config},
              {"tool_version", kToolVersion},
              {"inputs", in},
              {"outputs", out},
              {"timestamp", utc_timestamp()}};
    write_json_file(path, j);
  }
};

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void check_knots(const std::vector<double>& knots) {
  try {
    validate_knots(knots);
  } catch (const DomainError& e) {
    throw UsageError(std::string("--knots: ") + e.what());
  }
}

ParametricFit load_fit(const std::string& path) {
  try {
    return read_json_file(path).get<ParametricFit>();
  } catch (const Json::exception& e) {
    throw IoError("'" + path + "' is not a fit file: " + e.what());
  }
}

void write_fig2(const std::string& path, const McSummary& s) {
  auto out = open_out(path);
  out << "age,estimator,bias,variance,mse\n";
  for (const auto& r : s.rows)
    out << format_real(r.age) << ',' << to_string(r.estimator) << ',' << format_real(r.bias) << ','
        << format_real(r.variance) << ',' << format_real(r.mse) << '\n';
}

void write_recall_check(std::ostream& out, const std::vector<RecallCheckRow>& rows) {
  out << "segment,lo,hi,type,piecewise,logistic\n";
  for (const auto& r : rows)
    out << r.segment << ',' << format_real(r.lo) << ',' << format_real(r.hi) << ',' << kRecallNames[r.type] << ','
        << format_real(r.piecewise) << ',' << format_real(r.model) << '\n';
}

void write_curve_rows(std::ostream& out, const std::string& source, const std::vector<RecallCurveRow>& rows) {
  for (const auto& r : rows)
    for (int k = 0; k < 4; ++k)
      out << source << ',' << format_real(r.lo) << ',' << format_real(r.hi) << ',' << format_real(r.age) << ','
          << r.events << ',' << kRecallNames[k] << ',' << format_real(r.cumulative[static_cast<size_t>(k)]) << '\n';
}

struct ReportOptions {
  std::string dir;
  std::uint64_t seed = 1;
  int reps = 0;  // 0: acceptance-scale defaults
  int threads = 0;
};

McConfig report_config(const std::string& name, const std::string& preset, int n, int reps,
                       std::vector<Estimator> estimators, const ReportOptions& o, std::uint64_t salt) {
  McConfig cfg;
  cfg.name = name;
  cfg.scenario = preset_scenario(preset);
  cfg.scenario.n = n;
  cfg.reps = o.reps > 0 ? o.reps : reps;
  cfg.estimators = std::move(estimators);
  cfg.seed = derive_seed(o.seed, salt);
  cfg.threads = o.threads;
  return cfg;
}

void run_report(const ReportOptions& o, Manifest& manifest, std::ostream& log) {
  fs::create_directories(o.dir);
  auto path = [&](const std::string& f) { return (fs::path(o.dir) / f).string(); };
  auto emit = [&](const std::string& f) {
    manifest.outputs.push_back(path(f));
    log << "wrote " << path(f) << '\n';
  };
  const std::vector<Estimator> parametric{Estimator::Current, Estimator::Binary, Estimator::Partial};
  const std::vector<Estimator> nonparametric{Estimator::AmlePartial, Estimator::AmleBinary, Estimator::Edf};

  std::vector<McConfig> tables{
      report_config("case_i", "case_i", 100, 300, parametric, o, 1),
      report_config("case_ii", "case_ii", 1000, 100, parametric, o, 2),
      report_config("mixture_g02", "mixture_g02", 300, 100, parametric, o, 3),
      report_config("mixture_g05", "mixture_g05", 300, 100, parametric, o, 4),
  };
  const std::vector<std::string> table_files{"table1_case_i.csv", "table2_case_ii.csv", "table4_mixture_g02.csv",
                                             "table4_mixture_g05.csv"};
  Json configs = Json::array();
  for (size_t k = 0; k < tables.size(); ++k) {
    configs.push_back(tables[k]);
    const McSummary s = run_mc(tables[k]);
    auto out = open_out(path(table_files[k]));
    write_summary_csv(out, s);
    out.close();
    emit(table_files[k]);
  }

  std::vector<double> grid;
  for (int k = 0; k <= 32; ++k) grid.push_back(8.0 + 0.25 * k);
  for (const char c : {'a', 'b', 'c'}) {
    const std::string name = std::string("case_") + c;
    McConfig cfg = report_config(name, name, 100, 200, nonparametric, o, 10 + static_cast<std::uint64_t>(c - 'a'));
    cfg.age_grid = grid;
    configs.push_back(cfg);
    write_fig2(path("fig2_" + name + ".csv"), run_mc(cfg));
    emit("fig2_" + name + ".csv");
  }

  // single-dataset figures
  Scenario curves = preset_scenario("case_ii");
  curves.n = 1000;
  curves.seed = derive_seed(o.seed, 20);
  const Dataset curve_data = generate(curves);
  {
    auto out = open_out(path("fig1_curves.csv"));
    out << "source,group_lo,group_hi,age,events,level,cumulative\n";
    write_curve_rows(out, "observed", cumulative_recall_curves(curve_data));
    out.close();
    emit("fig1_curves.csv");
  }
  const ParametricFit curve_fit = fit_mle(curve_data, LikelihoodKind::PartialRecall);
  {
    const std::vector<double> ages{11.0, 14.0, 17.0, 20.0};
    auto out = open_out(path("fig5_recall_curves.csv"));
    out << "source,group_lo,group_hi,age,events,level,cumulative\n";
    write_curve_rows(out, "observed", cumulative_recall_curves(curve_data));
    write_curve_rows(out, "model", model_recall_curves(curve_fit, ages));
    out.close();
    emit("fig5_recall_curves.csv");
  }
  {
    auto out = open_out(path("fig4_recall_check.csv"));
    write_recall_check(out, recall_check(curve_data, curve_fit, preset_knots()));
    out.close();
    emit("fig4_recall_check.csv");
  }

  Scenario surv = preset_scenario("case_i");
  surv.n = 1000;
  surv.seed = derive_seed(o.seed, 21);
  const Dataset surv_data = generate(surv);
  {
    std::vector<double> ages;
    for (int k = 0; k <= 40; ++k) ages.push_back(8.0 + 0.2 * k);
    auto out = open_out(path("fig3_survival.csv"));
    out << "estimator,age,survival,halfwidth\n";
    for (LikelihoodKind kind : {LikelihoodKind::CurrentStatus, LikelihoodKind::BinaryRecall, LikelihoodKind::PartialRecall}) {
      const ParametricFit fit = fit_mle(surv_data, kind);
      for (const auto& p : survival_curve(fit, ages))
        out << to_string(kind) << ',' << format_real(p.age) << ',' << format_real(p.survival) << ','
            << format_real(p.halfwidth) << '\n';
    }
    out.close();
    emit("fig3_survival.csv");
  }

  manifest.config = {{"dir", o.dir}, {"reps", o.reps}, {"mc", configs}, {"curves", curves}, {"survival", surv}};
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

namespace {

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-age estimation from recall and current status data"};
  app.name("recallsurv");
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string sim_scenario, sim_out;
  std::optional<int> sim_n;
  std::uint64_t sim_seed = 0;
  sim->add_option("--scenario", sim_scenario, "Preset name or scenario JSON file")->required();
  sim->add_option("--n", sim_n, "Sample size")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Master seed")->required();
  sim->add_option("--out", sim_out, "Output CSV")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Maximum likelihood fit");
  std::string fit_data, fit_kind, fit_init, fit_out;
  fit->add_option("--data", fit_data, "Dataset CSV")->required();
  fit->add_option("--kind", fit_kind, "Likelihood")->required()->check(CLI::IsMember({"current", "binary", "partial"}));
  fit->add_option("--init", fit_init, "JSON with starting theta and eta");
  fit->add_option("--out", fit_out, "Output fit JSON")->required();

  // npfit
  auto* np = app.add_subcommand("npfit", "Approximate nonparametric fit on exactly recalled ages");
  std::string np_data, np_kind = "partial", np_out, np_step;
  std::vector<double> np_knots{0.0, 3.0, 6.0, 9.0};
  bool np_drop = false;
  np->add_option("--data", np_data, "Dataset CSV")->required();
  np->add_option("--knots", np_knots, "Recall segment knots")->delimiter(',');
  np->add_option("--kind", np_kind, "Recall scheme")->check(CLI::IsMember({"partial", "binary"}));
  np->add_option("--out", np_out, "Output JSON")->required();
  np->add_option("--step", np_step, "Step-function CSV (t, F)");
  np->add_flag("--drop-unmatched", np_drop, "Leave out partial recalls whose interval holds no support point");

  // gof
  auto* gof = app.add_subcommand("gof", "Chi-square goodness of fit of a partial recall fit");
  std::string gof_data, gof_fit, gof_out;
  gof->add_option("--data", gof_data, "Dataset CSV")->required();
  gof->add_option("--fit", gof_fit, "Fit JSON")->required();
  gof->add_option("--out", gof_out, "Output JSON")->required();

  // recallcheck
  auto* rc = app.add_subcommand("recallcheck", "Piecewise recall estimates against the fitted recall model");
  std::string rc_data, rc_fit, rc_out;
  std::vector<double> rc_knots{0.0, 3.0, 6.0, 9.0};
  rc->add_option("--data", rc_data, "Dataset CSV")->required();
  rc->add_option("--fit", rc_fit, "Fit JSON")->required();
  rc->add_option("--knots", rc_knots, "Recall segment knots")->delimiter(',');
  rc->add_option("--out", rc_out, "Output CSV")->required();

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo study");
  std::string mc_config, mc_out, mc_raw;
  std::uint64_t mc_seed = 0;
  std::optional<int> mc_threads;
  mc->add_option("--config", mc_config, "MC config JSON")->required();
  mc->add_option("--seed", mc_seed, "Master seed (overrides the config)")->required();
  mc->add_option("--out", mc_out, "Summary CSV")->required();
  mc->add_option("--raw", mc_raw, "Per-replicate CSV");
  mc->add_option("--threads", mc_threads, "Worker threads")->check(CLI::NonNegativeNumber);

  // report
  auto* rep = app.add_subcommand("report", "Reduced-scale reproduction tables and figure data");
  ReportOptions ro;
  rep->add_option("--out-dir", ro.dir, "Output directory")->required();
  rep->add_option("--seed", ro.seed, "Master seed");
  rep->add_option("--reps", ro.reps, "Replicates for every study (default: per study)")->check(CLI::NonNegativeNumber);
  rep->add_option("--threads", ro.threads, "Worker threads")->check(CLI::NonNegativeNumber);

  // rerun
  auto* rerun = app.add_subcommand("rerun", "Repeat the command recorded in a manifest");
  std::string rerun_manifest;
  rerun->add_option("--manifest", rerun_manifest, "Manifest JSON")->required();

  std::vector<const char*> argv{"recallsurv"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Manifest manifest;
  manifest.args = args;

  if (*sim) {
    Scenario sc = load_scenario(sim_scenario);
    if (sim_n) sc.n = *sim_n;
    sc.seed = sim_seed;
    const Dataset data = generate(sc);
    write_dataset_csv(sim_out, data);
    manifest.subcommand = "simulate";
    manifest.seed = sim_seed;
    manifest.config = {{"scenario", sc}};
    if (!is_preset(sim_scenario)) manifest.inputs.push_back(sim_scenario);
    manifest.outputs.push_back(sim_out);
    manifest.write(manifest_path(sim_out));
    out << "wrote " << sim_out << " (" << data.size() << " records)\n";
    return 0;
  }

  if (*fit) {
    const Dataset data = read_dataset_csv(fit_data);
    FitOptions opts;
    if (!fit_init.empty()) {
      const Json init = read_json_file(fit_init);
      if (init.contains("theta")) {
        const auto t = init.at("theta").get<std::vector<double>>();
        if (t.size() != 2 || !(t[0] > 0.0) || !(t[1] > 0.0)) throw UsageError("--init: theta needs two positive values");
        opts.init_theta = Weibull{t[0], t[1]};
      }
      if (init.contains("eta")) opts.init_eta = init.at("eta").get<std::vector<double>>();
      manifest.inputs.push_back(fit_init);
    }
    const ParametricFit res = fit_mle(data, parse_likelihood_kind(fit_kind), opts);
    write_json_file(fit_out, res);
    manifest.subcommand = "fit";
    manifest.config = {{"kind", fit_kind}, {"init", fit_init.empty() ? Json() : Json(fit_init)}};
    manifest.inputs.insert(manifest.inputs.begin(), fit_data);
    manifest.outputs.push_back(fit_out);
    manifest.write(manifest_path(fit_out));
    if (!res.converged) err << "warning: optimizer did not converge (gradient norm " << res.gradient_norm << ")\n";
    out << "wrote " << fit_out << " (loglik " << format_real(res.loglik) << ")\n";
    return 0;
  }

  if (*np) {
    check_knots(np_knots);
    const Dataset data = read_dataset_csv(np_data);
    NpOptions opts;
    opts.unmatched = np_drop ? UnmatchedRecall::Drop : UnmatchedRecall::Coarsen;
    const NpFit res = np_kind == "binary" ? fit_binary_amle(data, np_knots, opts) : fit_amle(data, np_knots, opts);
    write_json_file(np_out, res);
    manifest.outputs.push_back(np_out);
    if (!np_step.empty()) {
      const StepFunction f = res.cdf();
      auto step = open_out(np_step);
      step << "t,F\n";
      for (size_t k = 0; k < f.x.size(); ++k) step << format_real(f.x[k]) << ',' << format_real(f.cum[k]) << '\n';
      step.close();
      manifest.outputs.push_back(np_step);
    }
    manifest.subcommand = "npfit";
    manifest.config = {{"kind", np_kind}, {"knots", np_knots}, {"drop_unmatched", np_drop}};
    manifest.inputs.push_back(np_data);
    manifest.write(manifest_path(np_out));
    if (res.dropped > 0) err << "warning: " << res.dropped << " subjects carry no support point and were left out\n";
    if (!res.converged) err << "warning: alternating maximization did not converge\n";
    out << "wrote " << np_out << " (" << res.support.size() << " support points)\n";
    return 0;
  }

  if (*gof) {
    const Dataset data = read_dataset_csv(gof_data);
    const GofResult res = gof_chisq(data, load_fit(gof_fit));
    write_json_file(gof_out, res);
    manifest.subcommand = "gof";
    manifest.inputs = {gof_data, gof_fit};
    manifest.outputs.push_back(gof_out);
    manifest.write(manifest_path(gof_out));
    out << "chi-square " << format_real(res.statistic) << " on " << res.df << " df, p = " << format_real(res.p_value)
        << " (" << res.bins.size() << " bins from " << res.merged_from << ")\n";
    return 0;
  }

  if (*rc) {
    check_knots(rc_knots);
    const Dataset data = read_dataset_csv(rc_data);
    const auto rows = recall_check(data, load_fit(rc_fit), rc_knots);
    auto csv = open_out(rc_out);
    write_recall_check(csv, rows);
    csv.close();
    manifest.subcommand = "recallcheck";
    manifest.config = {{"knots", rc_knots}};
    manifest.inputs = {rc_data, rc_fit};
    manifest.outputs.push_back(rc_out);
    manifest.write(manifest_path(rc_out));
    out << "wrote " << rc_out << '\n';
    return 0;
  }

  if (*mc) {
    McConfig cfg;
    try {
      cfg = read_json_file(mc_config).get<McConfig>();
    } catch (const Json::exception& e) {
      throw IoError("'" + mc_config + "' is not an MC config: " + e.what());
    }
    cfg.seed = mc_seed;
    if (mc_threads) cfg.threads = *mc_threads;
    const McSummary s = run_mc(cfg);
    {
      auto csv = open_out(mc_out);
      write_summary_csv(csv, s);
    }
    manifest.outputs.push_back(mc_out);
    if (!mc_raw.empty()) {
      auto csv = open_out(mc_raw);
      write_raw_csv(csv, s);
      csv.close();
      manifest.outputs.push_back(mc_raw);
    }
    manifest.subcommand = "mc";
    manifest.seed = mc_seed;
    manifest.config = cfg;
    manifest.inputs.push_back(mc_config);
    manifest.write(manifest_path(mc_out));
    out << "wrote " << mc_out << " (" << s.rows.size() << " rows)\n";
    return 0;
  }

  if (*rep) {
    manifest.subcommand = "report";
    manifest.seed = ro.seed;
    run_report(ro, manifest, out);
    manifest.write((fs::path(ro.dir) / "manifest.json").string());
    return 0;
  }

  if (*rerun) {
    const Json m = read_json_file(rerun_manifest);
    if (!m.contains("args") || !m.at("args").is_array()) throw IoError("'" + rerun_manifest + "' has no recorded args");
    const auto recorded = m.at("args").get<std::vector<std::string>>();
    if (!recorded.empty() && recorded.front() == "rerun") throw UsageError("--manifest: refusing to replay a rerun");
    return run_cli(recorded, out, err);
  }
  return 2;
}

}  // namespace

}  // namespace recallsurv
