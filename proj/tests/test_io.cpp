#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "conformal/io.hpp"
#include "generators.hpp"

using namespace conformal;

namespace {

template <typename F>
std::size_t parse_error_line(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  return std::size_t(-1);
}

ScoreVectorXd parse_cal(const std::string& text) {
  std::istringstream in(text);
  return parse_calibration(in);
}

ScoreMatrix parse_matrix(const std::string& text) {
  std::istringstream in(text);
  return parse_score_matrix(in);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.5002) == "1.5002");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(parse_double("1e-300", 1) == 1e-300);
  CHECK_THROWS_AS(parse_double("inf", 1), ParseError);
  CHECK_THROWS_AS(parse_double("nan", 1), ParseError);
  CHECK_THROWS_AS(parse_double("1.0x", 1), ParseError);
  CHECK_THROWS_AS(parse_double("", 1), ParseError);
}

TEST_CASE("property: calibration file round-trips bit-exactly") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    ScoreVectorXd v = testing::random_scores(rng, 1, 50);
    v *= std::exp(std::uniform_real_distribution<double>(-30, 30)(rng));
    const ScoreVectorXd back = parse_cal(serialize_calibration(v));
    REQUIRE(back.size() == v.size());
    CHECK(std::memcmp(back.data(), v.data(), sizeof(double) * std::size_t(v.size())) == 0);
  }
}

TEST_CASE("property: score matrix file round-trips bit-exactly") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    ScoreMatrix m;
    const Eigen::Index rows = std::uniform_int_distribution<Eigen::Index>(0, 30)(rng);
    const Eigen::Index k = std::uniform_int_distribution<Eigen::Index>(2, 12)(rng);
    m.scores = (Eigen::MatrixXd::Random(rows, k).array().abs() * 27.0).matrix();
    for (Eigen::Index i = 0; i < rows; ++i) m.ids.push_back("img_" + std::to_string(i * 7));
    const ScoreMatrix back = parse_matrix(serialize_score_matrix(m));
    CHECK(back.ids == m.ids);
    CHECK(back.scores == m.scores);
  }
}

TEST_CASE("calibration parse errors name the line") {
  CHECK(parse_error_line([] { parse_cal("scores\n1\n"); }) == 1);
  CHECK(parse_error_line([] { parse_cal("score\n"); }) == 2);
  CHECK(parse_error_line([] { parse_cal(""); }) == 1);
  CHECK(parse_error_line([] { parse_cal("score\n1\n2\n-3\n"); }) == 4);
  CHECK(parse_error_line([] { parse_cal("score\n1\nabc\n"); }) == 3);
  CHECK(parse_error_line([] { parse_cal("score\n1\n\n2\n"); }) == 3);
  CHECK(parse_cal("score\r\n1\r\n2\r\n\n").size() == 2);
  CHECK(parse_cal("score\n-0\n")(0) == 0.0);
}

TEST_CASE("score matrix parse errors") {
  CHECK(parse_error_line([] { parse_matrix("id,label_0\nx,1\n"); }) == 1);
  CHECK(parse_error_line([] { parse_matrix("id,label_0,label_2\nx,1,2\n"); }) == 1);
  CHECK(parse_error_line([] { parse_matrix("id,label_0,label_1\nx,1,2\ny,1\n"); }) == 3);
  CHECK(parse_error_line([] { parse_matrix("id,label_0,label_1\nx,1,2\nx,1,3\n"); }) == 3);
  CHECK(parse_error_line([] { parse_matrix("id,label_0,label_1\nx,1,-2\n"); }) == 2);
  CHECK(parse_error_line([] { parse_matrix("id,label_0,label_1\n,1,2\n"); }) == 2);
  const ScoreMatrix ok = parse_matrix("id,label_0,label_1,label_2\na,0.1,2,0.05\n");
  CHECK(ok.num_classes() == 3);
  CHECK(ok.scores(0, 1) == 2.0);
}

TEST_CASE("labels file") {
  std::istringstream in("id,label\na,0\nb,9\n");
  const LabelFile l = parse_labels(in);
  CHECK(l.ids == std::vector<std::string>{"a", "b"});
  CHECK(l.labels == std::vector<int>{0, 9});
  std::istringstream again(serialize_labels(l));
  CHECK(parse_labels(again).labels == l.labels);
  std::istringstream bad("id,label\na,-1\n");
  CHECK_THROWS_AS(parse_labels(bad), ParseError);
}

TEST_CASE("distribution spec grammar") {
  CHECK(std::get<Exponential>(parse_distribution_spec("exp:2").kind).rate == 2.0);
  const auto ln = std::get<LogNormal>(parse_distribution_spec("lognorm:0,1").kind);
  CHECK(ln.mu == 0.0);
  CHECK(ln.sigma == 1.0);
  const auto u = std::get<Uniform>(parse_distribution_spec("unif:0.5,3").kind);
  CHECK(u.b == 3.0);
  CHECK(std::get<PermutedPool>(parse_distribution_spec("pool:1,1,2").kind).values == std::vector<double>{1, 1, 2});
  const auto mix = std::get<ScaleMixture>(parse_distribution_spec("mix:exp:1/unif:0.5,2").kind);
  CHECK(std::holds_alternative<Exponential>(mix.base->kind));
  CHECK(std::get<Uniform>(mix.scale).a == 0.5);

  for (const char* bad : {"exp", "exp:", "exp:1,2", "gauss:0,1", "lognorm:0", "mix:exp:1", "pool:", "pool:1,,2"})
    CHECK_THROWS_AS(parse_distribution_spec(bad), ParseError);
}

TEST_CASE("pool spec from a file") {
  const auto path = std::filesystem::temp_directory_path() / "conformal_pool_test.csv";
  write_text(path, "score\n3\n1\n2\n");
  const auto pool = std::get<PermutedPool>(parse_distribution_spec("pool:@" + path.string()).kind);
  CHECK(pool.values == std::vector<double>{3, 1, 2});
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_distribution_spec("pool:@/nonexistent/file.csv"), ParseError);
}

TEST_CASE("predictor document round-trips, including an infinite threshold") {
  CalibratedPredictor p;
  p.method = Method::bb;
  p.level = 0.01;
  p.threshold = std::numeric_limits<double>::infinity();
  p.n_calib = 5;
  p.calib_mean = 0.25;
  p.calib_digest = "abc";
  const Json j = to_json(p);
  CHECK(j["threshold"] == "inf");
  const auto back = predictor_from_json(Json::parse(j.dump()));
  CHECK(std::isinf(back.threshold));
  CHECK(back.method == Method::bb);
  CHECK(back.level == 0.01);
  CHECK(back.calib_mean == 0.25);
  CHECK(back.calib_digest == "abc");

  Json bad = j;
  bad["level"] = 3.0;
  CHECK_THROWS_AS(predictor_from_json(bad), ParseError);
  bad = j;
  bad.erase("method");
  CHECK_THROWS_AS(predictor_from_json(bad), ParseError);
}

TEST_CASE("run report round-trips and rejects inconsistent summaries") {
  CalibratedPredictor p;
  p.method = Method::p_value;
  p.level = 0.05;
  p.threshold = 0.0247;
  p.n_calib = 5000;
  const RunReport r = make_run_report(p, {{"a", {}}, {"b", {3}}, {"c", {1, 2}}});
  CHECK(r.summary == SetSummary{1, 1, 1, 3});
  const Json j = to_json(r);
  const RunReport back = run_report_from_json(Json::parse(j.dump()));
  CHECK(back.summary == r.summary);
  CHECK(back.sets.size() == 3);
  CHECK(back.sets[2].labels == std::vector<int>{1, 2});

  Json tampered = j;
  tampered["summary"]["empty"] = 0;
  CHECK_THROWS_AS(run_report_from_json(tampered), ParseError);
}

}  // TEST_SUITE
