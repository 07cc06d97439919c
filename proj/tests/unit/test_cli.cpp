#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "recallsurv/cli.hpp"
#include "recallsurv/dataset_io.hpp"
#include "recallsurv/json_io.hpp"

using namespace recallsurv;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Scratch directory, removed at exit.
struct Scratch {
  fs::path dir;
  Scratch() {
    ::setenv("SOURCE_DATE_EPOCH", "0", 1);
    dir = fs::temp_directory_path() / ("recallsurv_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

const Scratch& scratch() {
  static Scratch s;
  return s;
}

// The dataset every later case reads.
const std::string& dataset() {
  static const std::string path = [] {
    const std::string p = scratch()("case_ii.csv");
    REQUIRE(cli({"simulate", "--scenario", "case_ii", "--n", "400", "--seed", "3", "--out", p}).status == 0);
    return p;
  }();
  return path;
}

const std::string& partial_fit() {
  static const std::string path = [] {
    const std::string p = scratch()("partial.json");
    REQUIRE(cli({"fit", "--data", dataset(), "--kind", "partial", "--out", p}).status == 0);
    return p;
  }();
  return path;
}

// Rerun from the manifest and compare every recorded output byte for byte.
void check_rerun(const std::string& manifest_path) {
  const Json m = read_json_file(manifest_path);
  std::map<std::string, std::string> before;
  for (const auto& [path, digest] : m.at("outputs").items()) {
    before[path] = slurp(path);
    CHECK(file_digest(path) == digest.get<std::string>());
    fs::remove(path);
  }
  const std::string manifest_before = slurp(manifest_path);
  REQUIRE(cli({"rerun", "--manifest", manifest_path}).status == 0);
  for (const auto& [path, bytes] : before) CHECK_MESSAGE(slurp(path) == bytes, path);
  CHECK(slurp(manifest_path) == manifest_before);
}

}  // namespace

TEST_CASE("simulate") {
  const std::string p = scratch()("d.csv");
  const Run r = cli({"simulate", "--scenario", "case_i", "--n", "100", "--seed", "7", "--out", p});
  CHECK(r.status == 0);
  CHECK(line_count(p) == 101);
  const Json m = read_json_file(p + ".manifest.json");
  CHECK(m.at("subcommand") == "simulate");
  CHECK(m.at("seed") == 7);
  CHECK(m.at("tool_version") == kToolVersion);
  CHECK(m.at("timestamp") == "1970-01-01T00:00:00Z");
  CHECK(m.at("config").at("scenario").at("n") == 100);
  CHECK(m.at("outputs").at(p).get<std::string>().size() == 16);
  check_rerun(p + ".manifest.json");

  // same seed, same file; a scenario file works like a preset
  const std::string sc = scratch()("scenario.json");
  write_json_file(sc, Json{{"preset", "case_i"}, {"n", 100}});
  const std::string q = scratch()("d2.csv");
  CHECK(cli({"simulate", "--scenario", sc, "--seed", "7", "--out", q}).status == 0);
  CHECK(slurp(p) == slurp(q));
  CHECK(read_json_file(q + ".manifest.json").at("inputs").contains(sc));
  CHECK(read_dataset_csv(p).size() == 100);
}

TEST_CASE("fit") {
  const Json f = read_json_file(partial_fit());
  CHECK(std::isfinite(f.at("loglik").get<double>()));
  CHECK(f.at("kind") == "partial");
  CHECK(f.at("eta").size() == 6);
  check_rerun(partial_fit() + ".manifest.json");

  const std::string cs = scratch()("current.json");
  CHECK(cli({"fit", "--data", dataset(), "--kind", "current", "--out", cs}).status == 0);
  CHECK(read_json_file(cs).at("eta").empty());

  const std::string init = scratch()("init.json");
  write_json_file(init, Json{{"theta", {9.0, 11.0}}});
  const std::string started = scratch()("started.json");
  CHECK(cli({"fit", "--data", dataset(), "--kind", "binary", "--init", init, "--out", started}).status == 0);
  check_rerun(started + ".manifest.json");
}

TEST_CASE("npfit") {
  const std::string out = scratch()("np.json"), step = scratch()("np_step.csv");
  const Run r = cli({"npfit", "--data", dataset(), "--knots", "0,3,6,9", "--out", out, "--step", step});
  CHECK(r.status == 0);
  const Json j = read_json_file(out);
  CHECK(j.at("converged") == true);
  CHECK(line_count(step) == j.at("support").size() + 1);
  check_rerun(out + ".manifest.json");

  const std::string bin = scratch()("np_binary.json");
  CHECK(cli({"npfit", "--data", dataset(), "--knots", "0,3,6,9", "--kind", "binary", "--drop-unmatched", "--out", bin})
            .status == 0);
  CHECK(read_json_file(bin).at("b").size() == 2);
}

TEST_CASE("gof and recallcheck") {
  const std::string g = scratch()("gof.json");
  const Run r = cli({"gof", "--data", dataset(), "--fit", partial_fit(), "--out", g});
  CHECK(r.status == 0);
  CHECK(r.out.find("chi-square") != std::string::npos);
  const Json j = read_json_file(g);
  CHECK(j.at("df").get<int>() == static_cast<int>(j.at("bins").size()) - 1 - 8);
  check_rerun(g + ".manifest.json");

  const std::string c = scratch()("check.csv");
  CHECK(cli({"recallcheck", "--data", dataset(), "--fit", partial_fit(), "--knots", "0,3,6,9", "--out", c}).status == 0);
  CHECK(line_count(c) == 17);
  CHECK(slurp(c).rfind("segment,lo,hi,type,piecewise,logistic\n", 0) == 0);
  check_rerun(c + ".manifest.json");

  // a binary fit has no goodness-of-fit test here
  const std::string b = scratch()("binary.json");
  REQUIRE(cli({"fit", "--data", dataset(), "--kind", "binary", "--out", b}).status == 0);
  CHECK(cli({"gof", "--data", dataset(), "--fit", b, "--out", scratch()("g2.json")}).status == 1);
}

TEST_CASE("mc") {
  const std::string cfg = scratch()("table1_case_i.json");
  write_json_file(cfg, Json{{"scenario", "case_i"}, {"n", 100}, {"reps", 3},
                            {"estimators", {"current", "binary", "partial"}}});
  const std::string s = scratch()("s.csv"), raw = scratch()("raw.csv");
  CHECK(cli({"mc", "--config", cfg, "--seed", "5", "--out", s, "--raw", raw}).status == 0);
  CHECK(line_count(s) == 13);
  CHECK(line_count(raw) == 10);
  const Json m = read_json_file(s + ".manifest.json");
  CHECK(m.at("seed") == 5);
  CHECK(m.at("config").at("reps") == 3);
  CHECK(m.at("inputs").contains(cfg));
  check_rerun(s + ".manifest.json");

  // the thread count does not change the numbers
  const std::string s1 = scratch()("s1.csv");
  CHECK(cli({"mc", "--config", cfg, "--seed", "5", "--out", s1, "--threads", "2"}).status == 0);
  CHECK(slurp(s1) == slurp(s));

  const std::string np = scratch()("np_cfg.json");
  write_json_file(np, Json{{"scenario", "case_a"}, {"n", 80}, {"reps", 4},
                           {"estimators", {"amle_partial", "amle_binary", "edf"}},
                           {"age_grid", {{"from", 10}, {"to", 12}, {"step", 0.5}}}});
  const std::string ns = scratch()("np_s.csv");
  CHECK(cli({"mc", "--config", np, "--seed", "1", "--out", ns}).status == 0);
  CHECK(line_count(ns) == 16);
  check_rerun(ns + ".manifest.json");
}

TEST_CASE("report") {
  const std::string dir = scratch()("report");
  const Run r = cli({"report", "--out-dir", dir, "--reps", "2", "--seed", "4"});
  REQUIRE(r.status == 0);
  for (const char* f : {"table1_case_i.csv", "table2_case_ii.csv", "table4_mixture_g02.csv", "table4_mixture_g05.csv",
                        "fig1_curves.csv", "fig2_case_a.csv", "fig2_case_b.csv", "fig2_case_c.csv", "fig3_survival.csv",
                        "fig4_recall_check.csv", "fig5_recall_curves.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(fs::path(dir) / f), f);
  CHECK(slurp(fs::path(dir) / "fig2_case_a.csv").rfind("age,estimator,bias,variance,mse\n", 0) == 0);

  // Table 1 columns run current, binary, partial
  std::istringstream t1(slurp(fs::path(dir) / "table1_case_i.csv"));
  std::string header, first;
  std::getline(t1, header);
  std::getline(t1, first);
  CHECK(first.find("current") != std::string::npos);
  check_rerun((fs::path(dir) / "manifest.json").string());
}

TEST_CASE("usage and runtime errors") {
  Run r = cli({"simulate", "--scenario", "case_i", "--out", scratch()("x.csv")});
  CHECK(r.status == 2);
  CHECK(r.err.find("--seed") != std::string::npos);

  r = cli({"fit", "--data", dataset(), "--kind", "weird", "--out", scratch()("x.json")});
  CHECK(r.status == 2);
  CHECK(r.err.find("--kind") != std::string::npos);

  r = cli({"npfit", "--data", dataset(), "--knots", "0,6,3", "--out", scratch()("x.json")});
  CHECK(r.status == 2);
  CHECK(r.err.find("--knots") != std::string::npos);

  r = cli({"frobnicate"});
  CHECK(r.status == 2);
  CHECK(cli({}).status == 2);

  const std::string missing = scratch()("no_such_file.csv");
  r = cli({"fit", "--data", missing, "--kind", "partial", "--out", scratch()("x.json")});
  CHECK(r.status == 1);
  CHECK(r.err.find(missing) != std::string::npos);

  const std::string bad = scratch()("bad.csv");
  std::ofstream(bad) << "s,delta,epsilon,v,m,d\n12,1,7,11,3,0.01\n";
  r = cli({"fit", "--data", bad, "--kind", "partial", "--out", scratch()("x.json")});
  CHECK(r.status == 1);
  CHECK(r.err.find(bad) != std::string::npos);

  r = cli({"simulate", "--scenario", "case_zz", "--seed", "1", "--out", scratch()("x.csv")});
  CHECK(r.status == 1);
  CHECK(r.err.find("case_zz") != std::string::npos);

  r = cli({"gof", "--data", dataset(), "--fit", dataset(), "--out", scratch()("x.json")});
  CHECK(r.status == 1);
  CHECK(r.err.find(dataset()) != std::string::npos);

  r = cli({"rerun", "--manifest", missing});
  CHECK(r.status == 1);
  CHECK(r.err.find(missing) != std::string::npos);

  CHECK(cli({"--version"}).out.find(kToolVersion) != std::string::npos);
}
