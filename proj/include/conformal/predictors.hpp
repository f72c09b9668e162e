#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conformal/core_stats.hpp"

namespace conformal {

/// Per-example, per-candidate-label nonconformity scores. Entry (i, y) is the
/// score of example i if its label were y.
struct ScoreMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd scores;

  Eigen::Index num_classes() const { return scores.cols(); }
  Eigen::Index rows() const { return scores.rows(); }
};

/// Throws ShapeError/DomainError unless K >= 2, ids match rows and are unique,
/// and every entry is finite and non-negative.
void validate(const ScoreMatrix& matrix);

struct CalibratedPredictor {
  Method method = Method::bb;
  double level = 0;  // alpha for bb, epsilon for p_value
  double threshold = 0;
  std::size_t n_calib = 0;
  std::optional<double> calib_mean;  // bb only
  std::string calib_digest;
};

struct PredictionSet {
  std::string id;
  std::vector<int> labels;  // ascending
};

struct SetSummary {
  std::size_t empty_count = 0;
  std::size_t singleton_count = 0;
  std::size_t multiple_count = 0;
  std::size_t total = 0;

  friend bool operator==(const SetSummary&, const SetSummary&) = default;
};

/// Hex FNV-1a 64 digest of the canonical calibration-file text for `calib`.
std::string calibration_digest(const ScoreVectorXd& calib);

CalibratedPredictor calibrate(Method method, double level, const ScoreVectorXd& calib);

PredictionSet predict_set(const CalibratedPredictor& pred, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                          std::string id = {});

/// Row-wise predict_set over a whole matrix. Rows may be processed concurrently
/// (`threads` > 1); output order always follows the matrix.
std::vector<PredictionSet> predict_sets(const CalibratedPredictor& pred, const ScoreMatrix& matrix,
                                        unsigned threads = 1);

SetSummary summarize(std::span<const PredictionSet> sets);

/// Fraction of rows whose true label lands in the prediction set.
double coverage_on_labeled(const CalibratedPredictor& pred, const ScoreMatrix& matrix,
                           std::span<const int> true_labels);

}  // namespace conformal
