#include "conformal/predictors.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <thread>
#include <unordered_set>

#include "conformal/io.hpp"

namespace conformal {

void validate(const ScoreMatrix& matrix) {
  if (matrix.num_classes() < 2) throw ShapeError("score matrix needs at least two label columns");
  if (static_cast<Eigen::Index>(matrix.ids.size()) != matrix.rows())
    throw ShapeError("score matrix has " + std::to_string(matrix.rows()) + " rows but " +
                     std::to_string(matrix.ids.size()) + " ids");
  std::unordered_set<std::string> seen;
  for (const auto& id : matrix.ids)
    if (!seen.insert(id).second) throw DomainError("duplicate example id '" + id + "'");
  if (!(matrix.scores.array() >= 0).all() || !matrix.scores.allFinite())
    throw DomainError("score matrix has a negative or non-finite entry");
}

std::string calibration_digest(const ScoreVectorXd& calib) {
  const std::string text = serialize_calibration(calib);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CalibratedPredictor calibrate(Method method, double level, const ScoreVectorXd& calib) {
  check_level(method, level);
  check_scores(calib, "calibration set");
  CalibratedPredictor pred;
  pred.method = method;
  pred.level = level;
  pred.threshold = method_threshold(method, level, calib);
  pred.n_calib = static_cast<std::size_t>(calib.size());
  if (method == Method::bb) pred.calib_mean = compensated_mean(calib);
  pred.calib_digest = calibration_digest(calib);
  return pred;
}

PredictionSet predict_set(const CalibratedPredictor& pred, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                          std::string id) {
  PredictionSet set{std::move(id), {}};
  for (Eigen::Index y = 0; y < row.size(); ++y) {
    if (!(row(y) >= 0)) throw DomainError("prediction row has a negative or NaN score");
    if (accepts(pred.method, pred.threshold, row(y))) set.labels.push_back(static_cast<int>(y));
  }
  return set;
}

std::vector<PredictionSet> predict_sets(const CalibratedPredictor& pred, const ScoreMatrix& matrix,
                                        unsigned threads) {
  validate(matrix);
  const auto rows = static_cast<std::size_t>(matrix.rows());
  std::vector<PredictionSet> out(rows);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out[i] = predict_set(pred, matrix.scores.row(Eigen::Index(i)), matrix.ids[i]);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(rows, 1))));
  if (threads == 1) {
    work(0, rows);
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (rows + threads - 1) / threads;
  for (std::size_t begin = 0; begin < rows; begin += chunk)
    pool.emplace_back(work, begin, std::min(rows, begin + chunk));
  return out;
}

SetSummary summarize(std::span<const PredictionSet> sets) {
  SetSummary s;
  for (const auto& set : sets) {
    switch (set.labels.size()) {
      case 0: ++s.empty_count; break;
      case 1: ++s.singleton_count; break;
      default: ++s.multiple_count; break;
    }
  }
  s.total = sets.size();
  return s;
}

double coverage_on_labeled(const CalibratedPredictor& pred, const ScoreMatrix& matrix,
                           std::span<const int> true_labels) {
  if (static_cast<Eigen::Index>(true_labels.size()) != matrix.rows())
    throw ShapeError("true label count does not match score matrix rows");
  if (matrix.rows() == 0) throw DomainError("coverage of an empty batch is undefined");
  std::size_t covered = 0;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    const int y = true_labels[std::size_t(i)];
    if (y < 0 || y >= matrix.num_classes()) throw DomainError("true label out of range");
    if (accepts(pred.method, pred.threshold, matrix.scores(i, y))) ++covered;
  }
  return double(covered) / double(matrix.rows());
}

}  // namespace conformal
