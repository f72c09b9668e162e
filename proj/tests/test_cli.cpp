#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "conformal/cli.hpp"
#include "conformal/io.hpp"

using namespace conformal;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "conformal");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("conformal_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& text) const {
    write_text(path / name, text);
    return (path / name).string();
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("calibrate examples") {
  TempDir tmp;
  const auto two = tmp.file("two.csv", "score\n1\n3\n");
  auto r = run({"calibrate", "--method", "bb", "--alpha", "1", two});
  REQUIRE(r.code == cli::kOk);
  CHECK(Json::parse(r.out)["threshold"] == 2.0);

  const auto four = tmp.file("four.csv", "score\n1\n2\n3\n4\n");
  r = run({"calibrate", "--method", "p", "--epsilon", "0.5", four, "--out", (tmp.path / "p.json").string()});
  REQUIRE(r.code == cli::kOk);
  const auto doc = Json::parse(read_text(tmp.path / "p.json"));
  CHECK(doc["threshold"] == 3.0);
  CHECK(doc["method"] == "p_value");
  CHECK(doc["n_calib"] == 4);
}

TEST_CASE("calibrate errors exit 1 and name the line") {
  TempDir tmp;
  const auto bad = tmp.file("bad.csv", "score\n1\n2\noops\n");
  auto r = run({"calibrate", "--method", "bb", "--alpha", "0.1", bad});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("line 4") != std::string::npos);

  const auto empty = tmp.file("empty.csv", "score\n");
  CHECK(run({"calibrate", "--method", "bb", "--alpha", "0.1", empty}).code == cli::kUsageError);

  const auto ok = tmp.file("ok.csv", "score\n1\n");
  CHECK(run({"calibrate", "--method", "bb", "--alpha", "0", ok}).code == cli::kUsageError);
  CHECK(run({"calibrate", "--method", "bb", "--epsilon", "0.1", ok}).code == cli::kUsageError);
  CHECK(run({"calibrate", "--method", "zz", "--alpha", "0.1", ok}).code == cli::kUsageError);
  CHECK(run({"calibrate", "--method", "bb", "--alpha", "0.1"}).code == cli::kUsageError);
  CHECK(run({"frobnicate"}).code == cli::kUsageError);
  CHECK(run({}).code == cli::kUsageError);
}

TEST_CASE("help exits 0") {
  const auto r = run({"--help"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("validate") != std::string::npos);
  CHECK(run({"validate", "--help"}).out.find("--spec") != std::string::npos);
}

TEST_CASE("predict example and report consistency") {
  TempDir tmp;
  CalibratedPredictor p;
  p.method = Method::bb;
  p.level = 0.05;
  p.threshold = 1.5;
  p.n_calib = 10;
  const auto pred = tmp.file("pred.json", to_json(p).dump());
  const auto scores = tmp.file("scores.csv", "id,label_0,label_1,label_2\nx,0.1,2.0,0.05\n");
  const auto r = run({"predict", "--predictor", pred, scores});
  REQUIRE(r.code == cli::kOk);
  const RunReport report = run_report_from_json(Json::parse(r.out));
  CHECK(report.summary == SetSummary{0, 0, 1, 1});
  CHECK(report.sets.at(0).labels == std::vector<int>{0, 2});
  CHECK(report.sets.at(0).id == "x");

  const auto labels = tmp.file("labels.csv", "id,label\nx,1\n");
  const auto with_labels = run({"predict", "--predictor", pred, scores, "--labels", labels});
  REQUIRE(with_labels.code == cli::kOk);
  CHECK(Json::parse(with_labels.out)["coverage"] == 0.0);
}

TEST_CASE("predict rejects malformed matrices") {
  TempDir tmp;
  CalibratedPredictor p;
  p.threshold = 1.0;
  p.level = 0.1;
  p.n_calib = 3;
  const auto pred = tmp.file("pred.json", to_json(p).dump());
  for (const char* bad : {"id,label_0,label_1\nx,1\n", "id,label_0,label_1\nx,1,-1\n", "id,label_0,label_1\nx,1,1\nx,2,2\n"}) {
    const auto scores = tmp.file("m.csv", bad);
    CHECK(run({"predict", "--predictor", pred, scores}).code == cli::kUsageError);
  }
}

TEST_CASE("predict warns on a calibration digest mismatch") {
  TempDir tmp;
  const auto calib = tmp.file("calib.csv", "score\n1\n2\n3\n");
  const auto other = tmp.file("other.csv", "score\n1\n2\n4\n");
  const auto pred = (tmp.path / "pred.json").string();
  REQUIRE(run({"calibrate", "--method", "bb", "--alpha", "0.9", calib, "--out", pred}).code == 0);
  const auto scores = tmp.file("scores.csv", "id,label_0,label_1\na,1,9\n");

  std::vector<std::string> warnings;
  diagnostics::ScopedSink sink([&](std::string_view w) { warnings.emplace_back(w); });
  CHECK(run({"predict", "--predictor", pred, scores, "--calibration", calib}).code == 0);
  CHECK(warnings.empty());
  CHECK(run({"predict", "--predictor", pred, scores, "--calibration", other}).code == 0);
  CHECK(warnings.size() == 1);
}

TEST_CASE("validate exit codes") {
  auto r = run({"validate", "--method", "bb", "--alpha", "0.1", "--spec", "exp:1", "--n", "100", "--trials", "10000"});
  CHECK(r.code == cli::kOk);
  CHECK(Json::parse(r.out)["pass"] == true);

  r = run({"validate", "--method", "bb", "--alpha", "0.5", "--spec", "pool:2,2,2,2,2", "--n", "4", "--trials", "100"});
  CHECK(r.code == cli::kOk);
  CHECK(Json::parse(r.out)["rate"] == 0.0);

  r = run({"validate", "--method", "p", "--epsilon", "0.05", "--spec", "lognorm:0,1", "--n", "50", "--trials", "10000"});
  CHECK(r.code == cli::kOk);

  CHECK(run({"validate", "--method", "bb", "--alpha", "0.1", "--spec", "bogus:1"}).code == cli::kUsageError);
  CHECK(run({"validate", "--method", "bb", "--alpha", "0.1", "--spec", "pool:0,0,0", "--n", "2"}).code ==
        cli::kUsageError);

  // A single trial at epsilon = 0.05 fails the 3-SE bound whenever it violates.
  std::uint64_t seed = 0;
  while (monte_carlo_coverage(Method::p_value, 0.05, {Exponential{1}}, 19, 1, seed).pass) ++seed;
  r = run({"validate", "--method", "p", "--epsilon", "0.05", "--spec", "exp:1", "--n", "19", "--trials", "1", "--seed",
           std::to_string(seed)});
  CHECK(r.code == cli::kBoundViolated);
  CHECK(Json::parse(r.out)["pass"] == false);
}

TEST_CASE("simulate writes a calibration file") {
  TempDir tmp;
  const auto out = (tmp.path / "sim.csv").string();
  REQUIRE(run({"simulate", "--spec", "pool:1,2,3", "--n", "3", "--seed", "5", "--out", out}).code == 0);
  ScoreVectorXd v = read_calibration(out);
  std::sort(v.begin(), v.end());
  CHECK(v == Eigen::Vector3d(1, 2, 3));
  CHECK(run({"simulate", "--spec", "exp:1", "--n", "1"}).code == cli::kUsageError);
}

TEST_CASE("demo is deterministic and self-consistent") {
  TempDir a, b;
  const std::vector<std::string> common{"demo", "--per-class", "200", "--epochs", "80", "--seed", "7"};
  auto args_a = common, args_b = common;
  args_a.insert(args_a.end(), {"--out", a.path.string()});
  args_b.insert(args_b.end(), {"--out", b.path.string()});
  REQUIRE(run(args_a).code == 0);
  REQUIRE(run(args_b).code == 0);
  for (const char* f : {"report_bb.json", "report_p.json", "calibration.csv", "scores.csv", "labels.csv"})
    CHECK(read_text(a.path / f) == read_text(b.path / f));

  const RunReport bb = run_report_from_json(Json::parse(read_text(a.path / "report_bb.json")));
  CHECK(bb.summary == summarize(bb.sets));
  CHECK(bb.summary.total == 120);

  // The demo files feed the calibrate/predict path with identical results.
  const auto pred = (a.path / "pred.json").string();
  REQUIRE(run({"calibrate", "--method", "bb", "--alpha", "0.05", (a.path / "calibration.csv").string(), "--out", pred})
              .code == 0);
  const auto r = run({"predict", "--predictor", pred, (a.path / "scores.csv").string(), "--calibration",
                      (a.path / "calibration.csv").string(), "--labels", (a.path / "labels.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out) == Json::parse(read_text(a.path / "report_bb.json")));
}

TEST_CASE("demo with alpha = 1 uses the calibration mean as threshold") {
  TempDir tmp;
  REQUIRE(run({"demo", "--per-class", "100", "--epochs", "30", "--alpha", "1", "--out", tmp.path.string()}).code == 0);
  const auto doc = Json::parse(read_text(tmp.path / "predictor_bb.json"));
  CHECK(doc["threshold"].get<double>() == doctest::Approx(doc["calib_mean"].get<double>()).epsilon(1e-15));
  CHECK(doc["threshold"].get<double>() ==
        doctest::Approx(read_calibration(tmp.path / "calibration.csv").mean()).epsilon(1e-12));
}

}  // TEST_SUITE
