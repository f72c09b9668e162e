#include "conformal/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <sstream>
#include <unordered_set>

namespace conformal {
namespace {

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_score(std::string_view field, std::size_t line) {
  const double v = parse_double(field, line);
  if (v < 0) throw ParseError("negative score '" + std::string(field) + "'", line);
  return v == 0 ? 0.0 : v;  // folds -0
}

Json json_double(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

double double_from_json(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v == "inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  throw ParseError(std::string("field '") + key + "' is not a number", 0);
}

Method method_from_string(const std::string& s) {
  if (s == "bb") return Method::bb;
  if (s == "p_value" || s == "p") return Method::p_value;
  throw ParseError("unknown method '" + s + "'", 0);
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> values;
  for (auto field : split(text, ',')) values.push_back(parse_double(field, 0));
  return values;
}

ScaleLaw parse_law(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ParseError("distribution '" + std::string(text) + "' lacks ':'", 0);
  const auto kind = text.substr(0, colon);
  const auto params = parse_number_list(text.substr(colon + 1));
  auto expect = [&](std::size_t count) {
    if (params.size() != count)
      throw ParseError("'" + std::string(kind) + "' takes " + std::to_string(count) + " parameter(s)", 0);
  };
  if (kind == "exp") {
    expect(1);
    return Exponential{params[0]};
  }
  if (kind == "lognorm") {
    expect(2);
    return LogNormal{params[0], params[1]};
  }
  if (kind == "unif") {
    expect(2);
    return Uniform{params[0], params[1]};
  }
  throw ParseError("unknown distribution '" + std::string(kind) + "'", 0);
}

}  // namespace

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
    throw ParseError("invalid number '" + std::string(field) + "'", line);
  return v;
}

ScoreVectorXd parse_calibration(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.empty() || lines[0] != "score") throw ParseError("expected header 'score'", 1);
  if (lines.size() == 1) throw ParseError("calibration file has no scores", 2);
  ScoreVectorXd out(Eigen::Index(lines.size() - 1));
  for (std::size_t i = 1; i < lines.size(); ++i) out(Eigen::Index(i - 1)) = parse_score(lines[i], i + 1);
  return out;
}

std::string serialize_calibration(const ScoreVectorXd& scores) {
  std::string out = "score\n";
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    out += format_double(scores(i));
    out += '\n';
  }
  return out;
}

ScoreMatrix parse_score_matrix(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw ParseError("missing header", 1);
  const auto header = split(lines[0], ',');
  if (header.size() < 3 || header[0] != "id")
    throw ParseError("expected header 'id,label_0,...,label_{K-1}' with K >= 2", 1);
  const std::size_t k = header.size() - 1;
  for (std::size_t y = 0; y < k; ++y)
    if (header[y + 1] != "label_" + std::to_string(y))
      throw ParseError("header column " + std::to_string(y + 2) + " should be 'label_" + std::to_string(y) + "'", 1);

  ScoreMatrix m;
  m.scores.resize(Eigen::Index(lines.size() - 1), Eigen::Index(k));
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    if (fields.size() != k + 1)
      throw ParseError("expected " + std::to_string(k + 1) + " fields, found " + std::to_string(fields.size()), i + 1);
    std::string id(fields[0]);
    if (id.empty()) throw ParseError("empty id", i + 1);
    if (!seen.insert(id).second) throw ParseError("duplicate id '" + id + "'", i + 1);
    m.ids.push_back(std::move(id));
    for (std::size_t y = 0; y < k; ++y) m.scores(Eigen::Index(i - 1), Eigen::Index(y)) = parse_score(fields[y + 1], i + 1);
  }
  return m;
}

std::string serialize_score_matrix(const ScoreMatrix& matrix) {
  validate(matrix);
  std::string out = "id";
  for (Eigen::Index y = 0; y < matrix.num_classes(); ++y) out += ",label_" + std::to_string(y);
  out += '\n';
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    out += matrix.ids[std::size_t(i)];
    for (Eigen::Index y = 0; y < matrix.num_classes(); ++y) {
      out += ',';
      out += format_double(matrix.scores(i, y));
    }
    out += '\n';
  }
  return out;
}

LabelFile parse_labels(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.empty() || lines[0] != "id,label") throw ParseError("expected header 'id,label'", 1);
  LabelFile out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    if (fields.size() != 2) throw ParseError("expected 2 fields", i + 1);
    int label = 0;
    const auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), label);
    if (ec != std::errc() || ptr != fields[1].data() + fields[1].size() || label < 0)
      throw ParseError("invalid label '" + std::string(fields[1]) + "'", i + 1);
    out.ids.emplace_back(fields[0]);
    out.labels.push_back(label);
  }
  return out;
}

std::string serialize_labels(const LabelFile& labels) {
  if (labels.ids.size() != labels.labels.size()) throw ShapeError("label file ids and labels differ in length");
  std::string out = "id,label\n";
  for (std::size_t i = 0; i < labels.ids.size(); ++i) out += labels.ids[i] + "," + std::to_string(labels.labels[i]) + "\n";
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

namespace {
template <typename Parse>
auto read_with(const std::filesystem::path& path, Parse parse) {
  std::istringstream in(read_text(path));
  try {
    return parse(in);
  } catch (const ParseError& e) {
    throw ParseError::with_context(path.string(), e);
  }
}
}  // namespace

ScoreVectorXd read_calibration(const std::filesystem::path& path) { return read_with(path, parse_calibration); }
ScoreMatrix read_score_matrix(const std::filesystem::path& path) { return read_with(path, parse_score_matrix); }
LabelFile read_labels(const std::filesystem::path& path) { return read_with(path, parse_labels); }

DistributionSpec parse_distribution_spec(std::string_view text) {
  if (text.starts_with("pool:")) {
    const auto body = text.substr(5);
    if (body.starts_with("@")) {
      const ScoreVectorXd v = read_calibration(std::filesystem::path(std::string(body.substr(1))));
      return {PermutedPool{std::vector<double>(v.data(), v.data() + v.size())}};
    }
    return {PermutedPool{parse_number_list(body)}};
  }
  if (text.starts_with("mix:")) {
    const auto body = text.substr(4);
    const auto slash = body.rfind('/');
    if (slash == std::string_view::npos) throw ParseError("mix needs BASE/SCALE", 0);
    auto base = std::make_shared<const DistributionSpec>(parse_distribution_spec(body.substr(0, slash)));
    return {ScaleMixture{std::move(base), parse_law(body.substr(slash + 1))}};
  }
  return std::visit([](auto law) { return DistributionSpec{law}; }, parse_law(text));
}

Json to_json(const CalibratedPredictor& pred) {
  Json j;
  j["method"] = to_string(pred.method);
  j["level"] = pred.level;
  j["threshold"] = json_double(pred.threshold);
  j["n_calib"] = pred.n_calib;
  if (pred.calib_mean) j["calib_mean"] = *pred.calib_mean;
  j["calib_digest"] = pred.calib_digest;
  return j;
}

CalibratedPredictor predictor_from_json(const Json& doc) {
  try {
    CalibratedPredictor p;
    p.method = method_from_string(doc.at("method").get<std::string>());
    p.level = doc.at("level").get<double>();
    check_level(p.method, p.level);
    p.threshold = double_from_json(doc, "threshold");
    p.n_calib = doc.at("n_calib").get<std::size_t>();
    if (p.n_calib < 1) throw ParseError("n_calib must be >= 1", 0);
    if (doc.contains("calib_mean")) p.calib_mean = doc.at("calib_mean").get<double>();
    p.calib_digest = doc.value("calib_digest", "");
    return p;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed predictor document: ") + e.what(), 0);
  } catch (const DomainError& e) {
    throw ParseError(std::string("malformed predictor document: ") + e.what(), 0);
  }
}

RunReport make_run_report(const CalibratedPredictor& pred, std::vector<PredictionSet> sets) {
  RunReport r{pred, std::move(sets), {}, std::nullopt};
  r.summary = summarize(r.sets);
  return r;
}

Json to_json(const RunReport& report) {
  Json j;
  const Json pred = to_json(report.predictor);
  for (const auto& [key, value] : pred.items()) j[key] = value;
  j["summary"] = {{"empty", report.summary.empty_count},
                  {"singleton", report.summary.singleton_count},
                  {"multiple", report.summary.multiple_count},
                  {"total", report.summary.total}};
  if (report.coverage) j["coverage"] = *report.coverage;
  Json sets = Json::array();
  for (const auto& s : report.sets) sets.push_back({{"id", s.id}, {"labels", s.labels}});
  j["sets"] = std::move(sets);
  return j;
}

RunReport run_report_from_json(const Json& doc) {
  RunReport r;
  r.predictor = predictor_from_json(doc);
  try {
    for (const auto& s : doc.at("sets")) r.sets.push_back({s.at("id").get<std::string>(), s.at("labels").get<std::vector<int>>()});
    const Json& sum = doc.at("summary");
    r.summary = {sum.at("empty").get<std::size_t>(), sum.at("singleton").get<std::size_t>(),
                 sum.at("multiple").get<std::size_t>(), sum.at("total").get<std::size_t>()};
    if (doc.contains("coverage")) r.coverage = doc.at("coverage").get<double>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed run report: ") + e.what(), 0);
  }
  if (!(r.summary == summarize(r.sets))) throw ParseError("run report summary does not match its sets", 0);
  return r;
}

Json to_json(const CoverageReport& report) {
  Json j;
  j["method"] = to_string(report.method);
  j["level"] = report.level;
  j["n"] = report.n;
  j["trials"] = report.trials;
  j["violations"] = report.violations;
  j["rate"] = report.rate;
  j["std_err"] = report.std_err;
  j["bound"] = report.bound;
  j["pass"] = report.pass;
  return j;
}

}  // namespace conformal
