#include "conformal/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace conformal {
namespace {

Eigen::MatrixXd standardize(const LogRegModel& model, const Eigen::MatrixXd& points) {
  if (points.cols() != model.dim())
    throw ShapeError("feature dimension " + std::to_string(points.cols()) + " does not match model dimension " +
                     std::to_string(model.dim()));
  return (points.rowwise() - model.feature_mean).array().rowwise() / model.feature_scale.array();
}

/// Row-wise log-softmax.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& z) {
  const Eigen::VectorXd max = z.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = z.colwise() - max;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

void check_labels(const LabeledRows& data, int num_classes) {
  if (data.points.rows() != data.labels.size()) throw ShapeError("label count does not match row count");
  if (data.labels.size() > 0 && (data.labels.minCoeff() < 0 || data.labels.maxCoeff() >= num_classes))
    throw DomainError("label out of range");
}

}  // namespace

LabeledRows BlobDataset::subset(Split which) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == which) rows.push_back(Eigen::Index(i));
  LabeledRows out{points(rows, Eigen::all), labels(rows)};
  return out;
}

Eigen::MatrixXd blob_centres(int num_classes, int dim, double separation) {
  Eigen::MatrixXd centres = Eigen::MatrixXd::Zero(num_classes, dim);
  if (dim == 1) {
    for (int k = 0; k < num_classes; ++k) centres(k, 0) = separation * k;
    return centres;
  }
  // Adjacent chord = separation; every other chord on the circle is longer.
  const double radius = separation / (2 * std::sin(std::numbers::pi / num_classes));
  for (int k = 0; k < num_classes; ++k) {
    const double angle = 2 * std::numbers::pi * k / num_classes;
    centres(k, 0) = radius * std::cos(angle);
    centres(k, 1) = radius * std::sin(angle);
  }
  return centres;
}

BlobDataset gen_blobs(int num_classes, int per_class, int dim, double separation, std::uint64_t seed) {
  if (num_classes < 2) throw DomainError("need at least two classes");
  if (per_class < 1) throw DomainError("per_class must be at least 1");
  if (dim < 1) throw DomainError("dimension must be at least 1");
  if (!(separation > 0) || !std::isfinite(separation)) throw DomainError("separation must be > 0");

  const Eigen::MatrixXd centres = blob_centres(num_classes, dim, separation);
  const Eigen::Index n = Eigen::Index(num_classes) * per_class;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  BlobDataset data;
  data.num_classes = num_classes;
  data.points.resize(n, dim);
  data.labels.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int k = int(order[std::size_t(r)] / per_class);
    data.labels(r) = k;
    for (int j = 0; j < dim; ++j) data.points(r, j) = centres(k, j) + noise(rng);
  }
  const Eigen::Index n_train = n * 6 / 10;
  const Eigen::Index n_calib = n * 2 / 10;
  data.split.resize(std::size_t(n));
  for (Eigen::Index r = 0; r < n; ++r)
    data.split[std::size_t(r)] = r < n_train ? Split::train : r < n_train + n_calib ? Split::calibration : Split::cp_test;
  return data;
}

LogRegModel zero_model(int num_classes, int dim) {
  LogRegModel m;
  m.weights = Eigen::MatrixXd::Zero(num_classes, dim);
  m.biases = Eigen::VectorXd::Zero(num_classes);
  m.feature_mean = Eigen::RowVectorXd::Zero(dim);
  m.feature_scale = Eigen::RowVectorXd::Ones(dim);
  return m;
}

Eigen::MatrixXd logits(const LogRegModel& model, const Eigen::MatrixXd& points) {
  Eigen::MatrixXd z = standardize(model, points) * model.weights.transpose();
  z.rowwise() += model.biases.transpose();
  return z;
}

double mean_cross_entropy(const LogRegModel& model, const LabeledRows& data) {
  check_labels(data, model.num_classes());
  if (data.labels.size() == 0) throw DomainError("empty data set");
  const Eigen::MatrixXd ls = log_softmax(logits(model, data.points));
  double total = 0;
  for (Eigen::Index i = 0; i < ls.rows(); ++i) total -= ls(i, data.labels(i));
  return total / double(ls.rows());
}

LogRegGradient cross_entropy_gradient(const LogRegModel& model, const LabeledRows& data) {
  check_labels(data, model.num_classes());
  if (data.labels.size() == 0) throw DomainError("empty data set");
  const Eigen::MatrixXd x = standardize(model, data.points);
  Eigen::MatrixXd z = x * model.weights.transpose();
  z.rowwise() += model.biases.transpose();
  // d(mean CE)/dz = (softmax - onehot) / n
  Eigen::MatrixXd residual = log_softmax(z).array().exp().matrix();
  for (Eigen::Index i = 0; i < residual.rows(); ++i) residual(i, data.labels(i)) -= 1.0;
  residual /= double(residual.rows());
  return {residual.transpose() * x, residual.colwise().sum().transpose()};
}

double accuracy(const LogRegModel& model, const LabeledRows& data) {
  check_labels(data, model.num_classes());
  if (data.labels.size() == 0) throw DomainError("empty data set");
  const Eigen::MatrixXd z = logits(model, data.points);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best;
    z.row(i).maxCoeff(&best);
    if (best == data.labels(i)) ++hits;
  }
  return double(hits) / double(z.rows());
}

LogRegModel train_logreg(const LabeledRows& train, int num_classes, int epochs, double step) {
  if (train.points.rows() == 0) throw DomainError("training split is empty");
  if (!(step > 0)) throw DomainError("step must be > 0");
  if (epochs < 0) throw DomainError("epochs must be >= 0");
  check_labels(train, num_classes);

  LogRegModel model = zero_model(num_classes, int(train.points.cols()));
  model.feature_mean = train.points.colwise().mean();
  const Eigen::RowVectorXd centred_sq =
      (train.points.rowwise() - model.feature_mean).array().square().colwise().mean();
  model.feature_scale = centred_sq.array().sqrt().unaryExpr([](double s) { return s > 0 ? s : 1.0; });

  model.training_log.push_back(mean_cross_entropy(model, train));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const LogRegGradient g = cross_entropy_gradient(model, train);
    model.weights -= step * g.weights;
    model.biases -= step * g.biases;
    const double loss = mean_cross_entropy(model, train);
    if (!std::isfinite(loss) || !model.weights.allFinite())
      throw TrainingError("loss diverged at epoch " + std::to_string(epoch + 1));
    model.training_log.push_back(loss);
  }
  return model;
}

ScoreMatrix score_matrix(const LogRegModel& model, const Eigen::MatrixXd& points, std::vector<std::string> ids) {
  if (ids.empty()) {
    ids.reserve(std::size_t(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) ids.push_back(std::to_string(i));
  }
  if (static_cast<Eigen::Index>(ids.size()) != points.rows()) throw ShapeError("id count does not match row count");
  const double floor = std::log(kProbabilityFloor);
  ScoreMatrix out{std::move(ids), (-(log_softmax(logits(model, points)).array().max(floor))).matrix()};
  // -0.0 and rounding just below zero both print oddly; scores are >= 0 by definition.
  out.scores = out.scores.cwiseMax(0.0);
  return out;
}

ScoreVectorXd true_label_scores(const LogRegModel& model, const LabeledRows& data) {
  check_labels(data, model.num_classes());
  const ScoreMatrix m = score_matrix(model, data.points);
  ScoreVectorXd out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out(i) = m.scores(i, data.labels(i));
  return out;
}

DemoData make_demo_data(const DemoConfig& config) {
  const BlobDataset blobs =
      gen_blobs(config.num_classes, config.per_class, config.dim, config.separation, config.seed);
  DemoData demo;
  demo.model = train_logreg(blobs.subset(Split::train), config.num_classes, config.epochs, config.step);
  demo.calibration = true_label_scores(demo.model, blobs.subset(Split::calibration));
  const LabeledRows test = blobs.subset(Split::cp_test);
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < test.points.rows(); ++i) ids.push_back("test_" + std::to_string(i));
  demo.test_scores = score_matrix(demo.model, test.points, std::move(ids));
  demo.test_labels.assign(test.labels.data(), test.labels.data() + test.labels.size());
  return demo;
}

}  // namespace conformal
