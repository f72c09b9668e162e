#pragma once

// Desk-scale classifier that produces genuine cross-entropy nonconformity scores:
// Gaussian blobs, multinomial logistic regression by full-batch gradient descent,
// and per-candidate-label losses.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "conformal/predictors.hpp"

namespace conformal {

enum class Split { train, calibration, cp_test };

struct LabeledRows {
  Eigen::MatrixXd points;  // rows x d
  Eigen::VectorXi labels;
};

struct BlobDataset {
  Eigen::MatrixXd points;
  Eigen::VectorXi labels;
  std::vector<Split> split;
  int num_classes = 0;

  LabeledRows subset(Split which) const;
};

/// Cluster centres with pairwise distance >= separation (on a circle for d >= 2,
/// on a line for d == 1). Returns K x d.
Eigen::MatrixXd blob_centres(int num_classes, int dim, double separation);

/// Unit-variance Gaussian clusters around blob_centres, rows shuffled, split 60/20/20.
BlobDataset gen_blobs(int num_classes, int per_class, int dim, double separation, std::uint64_t seed);

struct LogRegModel {
  Eigen::MatrixXd weights;  // K x d, acting on standardized features
  Eigen::VectorXd biases;   // K
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_scale;
  std::vector<double> training_log;  // mean loss before the first epoch and after each epoch

  int num_classes() const { return int(weights.rows()); }
  int dim() const { return int(weights.cols()); }
};

struct LogRegGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd biases;
};

/// All-zero parameters with identity standardization.
LogRegModel zero_model(int num_classes, int dim);

Eigen::MatrixXd logits(const LogRegModel& model, const Eigen::MatrixXd& points);
double mean_cross_entropy(const LogRegModel& model, const LabeledRows& data);
LogRegGradient cross_entropy_gradient(const LogRegModel& model, const LabeledRows& data);
double accuracy(const LogRegModel& model, const LabeledRows& data);

/// Full-batch gradient descent on mean cross-entropy from zero parameters.
/// Features are standardized with train-split statistics first.
/// Throws TrainingError if the loss becomes non-finite.
LogRegModel train_logreg(const LabeledRows& train, int num_classes, int epochs, double step);

inline constexpr double kProbabilityFloor = 1e-12;

/// Entry (i, y) = -log(max(softmax_y(x_i), 1e-12)). Ids default to the row index.
ScoreMatrix score_matrix(const LogRegModel& model, const Eigen::MatrixXd& points,
                         std::vector<std::string> ids = {});

/// True-label scores, i.e. the calibration vector for `data`.
ScoreVectorXd true_label_scores(const LogRegModel& model, const LabeledRows& data);

struct DemoConfig {
  int num_classes = 3;
  int per_class = 1000;
  int dim = 2;
  double separation = 4;
  int epochs = 200;
  double step = 0.5;
  double alpha = 0.05;
  double epsilon = 0.05;
  std::uint64_t seed = 2024;
};

struct DemoData {
  LogRegModel model;
  ScoreVectorXd calibration;
  ScoreMatrix test_scores;
  std::vector<int> test_labels;
};

/// gen_blobs -> train_logreg -> calibration scores and cp_test score matrix.
DemoData make_demo_data(const DemoConfig& config);

}  // namespace conformal
