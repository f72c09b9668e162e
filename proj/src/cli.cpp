#include "conformal/cli.hpp"

#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "conformal/io.hpp"
#include "conformal/predictors.hpp"
#include "conformal/simulation.hpp"
#include "conformal/toy_model.hpp"

namespace conformal::cli {
namespace {

namespace fs = std::filesystem;

const std::map<std::string, Method> kMethodNames{{"bb", Method::bb}, {"p", Method::p_value}, {"p_value", Method::p_value}};

struct LevelFlags {
  Method method = Method::bb;
  std::optional<double> alpha;
  std::optional<double> epsilon;

  void attach(CLI::App& app) {
    app.add_option("--method", method, "Predictor: bb (e-statistic) or p (rank p-value)")
        ->required()
        ->transform(CLI::CheckedTransformer(kMethodNames, CLI::ignore_case));
    app.add_option("--alpha", alpha, "Level for --method bb, in (0, 1]");
    app.add_option("--epsilon", epsilon, "Level for --method p, in [0, 1]");
  }

  double level() const {
    const auto& chosen = method == Method::bb ? alpha : epsilon;
    if (!chosen) throw CLI::ValidationError(method == Method::bb ? "--method bb requires --alpha" : "--method p requires --epsilon");
    check_level(method, *chosen);
    return *chosen;
  }
};

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty() || out_path == "-")
    out << text;
  else
    write_text(out_path, text);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Split conformal prediction with rank p-values and the e-statistic bb rule"};
  app.require_subcommand(1);

  // calibrate
  LevelFlags cal_level;
  std::string cal_file, cal_out;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Compute a predictor threshold from a calibration file");
  cal_level.attach(*calibrate_cmd);
  calibrate_cmd->add_option("calibration", cal_file, "Calibration file ('score' header, one score per line)")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate_cmd->add_option("--out", cal_out, "Predictor document path (default stdout)");

  // predict
  std::string pred_doc, pred_scores, pred_out, pred_calib, pred_labels;
  unsigned pred_threads = 1;
  auto* predict_cmd = app.add_subcommand("predict", "Apply a predictor document to a score-matrix file");
  predict_cmd->add_option("--predictor", pred_doc, "Predictor document from 'calibrate'")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("scores", pred_scores, "Score-matrix file (id,label_0,...)")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--calibration", pred_calib, "Calibration file to check against the stored digest")
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--labels", pred_labels, "True labels (id,label) for an empirical coverage figure")
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--threads", pred_threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  predict_cmd->add_option("--out", pred_out, "Run report path (default stdout)");

  // validate
  LevelFlags val_level;
  std::string val_spec, val_out;
  Eigen::Index val_n = 100;
  std::uint64_t val_trials = 10000, val_seed = 1;
  unsigned val_threads = 1;
  auto* validate_cmd = app.add_subcommand("validate", "Monte Carlo coverage check; exit 2 if the bound is violated");
  val_level.attach(*validate_cmd);
  validate_cmd->add_option("--spec", val_spec,
                           "Score distribution: exp:RATE | lognorm:MU,SIGMA | unif:A,B | pool:V1,V2,... | "
                           "pool:@FILE | mix:BASE/SCALE")
      ->required();
  validate_cmd->add_option("--n", val_n, "Calibration size")->check(CLI::PositiveNumber);
  validate_cmd->add_option("--trials", val_trials, "Number of trials")->check(CLI::PositiveNumber);
  validate_cmd->add_option("--seed", val_seed, "Master seed");
  validate_cmd->add_option("--threads", val_threads, "Worker threads (result does not depend on this)")
      ->check(CLI::Range(1u, 1024u));
  validate_cmd->add_option("--out", val_out, "Coverage report path (default stdout)");

  // simulate
  std::string sim_spec, sim_out;
  Eigen::Index sim_n = 100;
  std::uint64_t sim_seed = 1;
  auto* simulate_cmd = app.add_subcommand("simulate", "Write an exchangeable score sequence as a calibration file");
  simulate_cmd->add_option("--spec", sim_spec, "Score distribution (see 'validate --help')")->required();
  simulate_cmd->add_option("--n", sim_n, "Sequence length (>= 2)")->check(CLI::Range(Eigen::Index{2}, Eigen::Index{1} << 40));
  simulate_cmd->add_option("--seed", sim_seed, "Seed");
  simulate_cmd->add_option("--out", sim_out, "Output path (default stdout)");

  // demo
  DemoConfig demo;
  std::string demo_out = "demo_out";
  auto* demo_cmd = app.add_subcommand("demo", "Train the toy classifier and run both predictors end to end");
  demo_cmd->add_option("--classes", demo.num_classes, "Number of classes K")->check(CLI::Range(2, 1000))->capture_default_str();
  demo_cmd->add_option("--per-class", demo.per_class, "Points per class")->check(CLI::PositiveNumber)->capture_default_str();
  demo_cmd->add_option("--dim", demo.dim, "Feature dimension")->check(CLI::PositiveNumber)->capture_default_str();
  demo_cmd->add_option("--separation", demo.separation, "Distance between cluster centres")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  demo_cmd->add_option("--epochs", demo.epochs, "Gradient descent epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  demo_cmd->add_option("--step", demo.step, "Gradient descent step size")->check(CLI::PositiveNumber)->capture_default_str();
  demo_cmd->add_option("--alpha", demo.alpha, "bb level")->capture_default_str();
  demo_cmd->add_option("--epsilon", demo.epsilon, "p-value level")->capture_default_str();
  demo_cmd->add_option("--seed", demo.seed, "Seed for data generation")->capture_default_str();
  demo_cmd->add_option("--out", demo_out, "Output directory")->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (calibrate_cmd->parsed()) {
      const double level = cal_level.level();
      const auto pred = calibrate(cal_level.method, level, read_calibration(cal_file));
      emit(dump(to_json(pred)), cal_out, out);
    } else if (predict_cmd->parsed()) {
      const auto pred = predictor_from_json(Json::parse(read_text(pred_doc)));
      const ScoreMatrix matrix = read_score_matrix(pred_scores);
      if (!pred_calib.empty() && calibration_digest(read_calibration(pred_calib)) != pred.calib_digest)
        diagnostics::warn("calibration file digest does not match the predictor document");
      RunReport report = make_run_report(pred, predict_sets(pred, matrix, pred_threads));
      if (!pred_labels.empty()) {
        const LabelFile labels = read_labels(pred_labels);
        if (labels.ids != matrix.ids) throw ShapeError("labels file ids do not match score-matrix ids");
        report.coverage = coverage_on_labeled(pred, matrix, labels.labels);
      }
      emit(dump(to_json(report)), pred_out, out);
    } else if (validate_cmd->parsed()) {
      const double level = val_level.level();
      const auto spec = parse_distribution_spec(val_spec);
      const auto report = monte_carlo_coverage(val_level.method, level, spec, val_n, val_trials, val_seed, val_threads);
      Json j = to_json(report);
      j["spec"] = val_spec;
      j["seed"] = val_seed;
      emit(dump(j), val_out, out);
      return report.pass ? kOk : kBoundViolated;
    } else if (simulate_cmd->parsed()) {
      emit(serialize_calibration(gen_exchangeable(parse_distribution_spec(sim_spec), sim_n, sim_seed)), sim_out, out);
    } else if (demo_cmd->parsed()) {
      check_alpha(demo.alpha);
      check_epsilon(demo.epsilon);
      const DemoData data = make_demo_data(demo);
      const fs::path dir(demo_out);
      fs::create_directories(dir);
      write_text(dir / "calibration.csv", serialize_calibration(data.calibration));
      write_text(dir / "scores.csv", serialize_score_matrix(data.test_scores));
      write_text(dir / "labels.csv", serialize_labels({data.test_scores.ids, data.test_labels}));
      for (const auto& [method, level, name] : {std::tuple{Method::bb, demo.alpha, "bb"},
                                                std::tuple{Method::p_value, demo.epsilon, "p"}}) {
        const auto pred = calibrate(method, level, data.calibration);
        RunReport report = make_run_report(pred, predict_sets(pred, data.test_scores));
        report.coverage = coverage_on_labeled(pred, data.test_scores, data.test_labels);
        write_text(dir / (std::string("predictor_") + name + ".json"), dump(to_json(pred)));
        write_text(dir / (std::string("report_") + name + ".json"), dump(to_json(report)));
        out << name << ": threshold=" << format_double(pred.threshold) << " empty=" << report.summary.empty_count
            << " singleton=" << report.summary.singleton_count << " multiple=" << report.summary.multiple_count
            << " coverage=" << format_double(*report.coverage) << '\n';
      }
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kOk;
}

}  // namespace conformal::cli
