#pragma once

// Plain-text score files, JSON documents and the distribution mini-grammar.
//
// Calibration file:    "score" header, then one non-negative decimal per line.
// Score-matrix file:   "id,label_0,...,label_{K-1}" header, one row per example.
// Labels file:         "id,label" header, one integer label per example.
// Doubles are written in shortest round-trip form; +inf is written as "inf".

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conformal/predictors.hpp"
#include "conformal/simulation.hpp"

namespace conformal {

using Json = nlohmann::ordered_json;

std::string format_double(double value);

/// Parses a whole field; rejects trailing garbage and non-finite values.
double parse_double(std::string_view field, std::size_t line);

ScoreVectorXd parse_calibration(std::istream& in);
std::string serialize_calibration(const ScoreVectorXd& scores);

ScoreMatrix parse_score_matrix(std::istream& in);
std::string serialize_score_matrix(const ScoreMatrix& matrix);

struct LabelFile {
  std::vector<std::string> ids;
  std::vector<int> labels;
};
LabelFile parse_labels(std::istream& in);
std::string serialize_labels(const LabelFile& labels);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

ScoreVectorXd read_calibration(const std::filesystem::path& path);
ScoreMatrix read_score_matrix(const std::filesystem::path& path);
LabelFile read_labels(const std::filesystem::path& path);

/// Mini-grammar:
///   exp:RATE            i.i.d. exponential
///   lognorm:MU,SIGMA    i.i.d. lognormal
///   unif:A,B            i.i.d. uniform on [A, B), A >= 0
///   pool:V1,V2,...      permuted pool, values inline
///   pool:@PATH          permuted pool read from a calibration-format file
///   mix:BASE/SCALE      scale mixture; SCALE is one of exp, lognorm, unif
DistributionSpec parse_distribution_spec(std::string_view text);

Json to_json(const CalibratedPredictor& pred);
CalibratedPredictor predictor_from_json(const Json& doc);

struct RunReport {
  CalibratedPredictor predictor;
  std::vector<PredictionSet> sets;
  SetSummary summary;
  std::optional<double> coverage;  // present when true labels were supplied
};

RunReport make_run_report(const CalibratedPredictor& pred, std::vector<PredictionSet> sets);
Json to_json(const RunReport& report);
/// Throws ParseError if the stored summary does not recompute from the listed sets.
RunReport run_report_from_json(const Json& doc);

Json to_json(const CoverageReport& report);

}  // namespace conformal
