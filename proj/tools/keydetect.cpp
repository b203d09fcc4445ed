// keydetect command-line front end.
// Exit codes: 0 success, 1 usage, 2 data error, 3 runtime failure.

#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "keydetect/dataset.hpp"
#include "keydetect/errors.hpp"
#include "keydetect/eval.hpp"
#include "keydetect/exec.hpp"
#include "keydetect/experiments.hpp"
#include "keydetect/http_api.hpp"
#include "keydetect/model_io.hpp"
#include "keydetect/service.hpp"
#include "keydetect/synthetic.hpp"
#include "keydetect/text.hpp"

// After Eigen: see the note in http_api.cpp.
#include <CLI11.hpp>
#include <json.hpp>

namespace kd = keydetect;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int exit_code_for(const kd::Error& e) {
  static const std::set<std::string> data_codes = {
      "schema_error",      "value_error",     "format_error",   "subject_too_small",
      "malformed_trace",   "insufficient_data", "empty_set",    "dimension_mismatch",
      "degenerate_norm",   "shape_mismatch",  "bad_request"};
  return data_codes.count(e.code()) ? kData : kRuntime;
}

struct Common {
  std::uint64_t seed = 42;
  bool serial = false;

  kd::Exec exec() const { return serial ? kd::Exec::serial : kd::Exec::parallel; }
};

struct DataSource {
  std::string path;
  bool synthetic = false;
  std::size_t synthetic_subjects = 51;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--data", path, "Benchmark CSV or normalized dataset file");
    cmd->add_flag("--synthetic", synthetic,
                  "Use generated benchmark-shaped data instead of --data");
    cmd->add_option("--synthetic-subjects", synthetic_subjects,
                    "Subjects in the generated dataset")
        ->capture_default_str()
        ->check(CLI::Range(2, 1000));
  }

  json describe() const {
    return synthetic ? json{{"synthetic", true}, {"synthetic_subjects", synthetic_subjects}}
                     : json{{"data", path}};
  }

  kd::Dataset load(std::uint64_t seed) const {
    if (synthetic) {
      if (!path.empty()) throw UsageError("--data and --synthetic are mutually exclusive");
      kd::SyntheticOptions o;
      o.subjects = synthetic_subjects;
      o.seed = kd::derive_seed(seed, 0x73796e);
      return kd::make_synthetic_dataset(o);
    }
    if (path.empty()) throw UsageError("either --data PATH or --synthetic is required");
    if (!std::filesystem::exists(path)) throw kd::SchemaError("no such file: " + path);
    return kd::load_dataset(path);
  }
};

void print_config(const std::string& command, const Common& common, json fields) {
  fields["command"] = command;
  fields["seed"] = common.seed;
  fields["exec"] = common.serial ? "serial" : "parallel";
  fields["threads"] = kd::max_threads();
  std::cout << "config " << fields.dump() << std::endl;
}

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

void print_table(std::ostream& out, const std::vector<kd::DetectorTableRow>& rows, bool by_zfr,
                 bool markdown) {
  const char* metric = by_zfr ? "ZFR" : "EER";
  if (markdown) {
    out << "| Detector | Mean " << metric << " | SD |\n|---|---|---|\n";
  } else {
    out << std::left << std::setw(26) << "detector" << std::setw(10) << (std::string("mean_") + metric)
        << std::setw(10) << "sd" << "subjects  failed\n";
  }
  for (const auto& r : rows) {
    const double mean = by_zfr ? r.mean_zfr : r.mean_eer;
    const double sd = by_zfr ? r.sd_zfr : r.sd_eer;
    if (markdown) {
      out << "| " << r.display << " | " << fixed(mean, 3) << " | " << fixed(sd, 3) << " |\n";
    } else {
      out << std::left << std::setw(26) << r.display << std::setw(10) << fixed(mean) << std::setw(10)
          << fixed(sd) << std::setw(10) << r.subjects << r.failed << '\n';
    }
  }
}

// ---- ingest ----

struct IngestArgs {
  DataSource source;
  std::string out;
  std::optional<double> outlier_z;
  std::string trace;
};

int cmd_ingest(const Common& common, const IngestArgs& a) {
  print_config("ingest", common,
               {{"source", a.source.describe()},
                {"out", a.out},
                {"outlier_z", a.outlier_z ? json(*a.outlier_z) : json(nullptr)},
                {"trace", a.trace}});
  if (!a.trace.empty()) {
    std::ifstream in(a.trace);
    if (!in) throw kd::SchemaError("cannot open " + a.trace);
    std::stringstream text;
    text << in.rdbuf();
    const auto v = kd::extract_features(kd::parse_trace_json(text.str()));
    const auto& labels = kd::feature_labels();
    for (std::size_t i = 0; i < kd::kFeatureCount; ++i) {
      std::cout << labels[i] << (i + 1 < kd::kFeatureCount ? ',' : '\n');
    }
    for (std::size_t i = 0; i < kd::kFeatureCount; ++i) {
      std::cout << kd::format_double(v[i]) << (i + 1 < kd::kFeatureCount ? ',' : '\n');
    }
    return kOk;
  }
  kd::Dataset ds = a.source.load(common.seed);
  std::size_t removed = 0;
  if (a.outlier_z) {
    auto f = kd::filter_outliers(ds, *a.outlier_z);
    removed = f.removed;
    ds = std::move(f.dataset);
  }
  std::cout << "subjects " << ds.subjects.size() << "\nsamples " << ds.samples.size()
            << "\nremoved " << removed << '\n';
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw kd::Error("cannot write " + a.out);
    kd::write_dataset(out, ds);
    if (!out) throw kd::Error("failed writing " + a.out);
    std::cout << "wrote " << a.out << '\n';
  }
  return kOk;
}

// ---- eval-anomaly ----

struct EvalArgs {
  DataSource source;
  std::vector<std::string> detectors;
  std::vector<std::string> subjects;
  std::size_t train_reps = 200;
  std::size_t genuine_reps = 200;
  std::size_t impostor_reps = 5;
  double z_threshold = kd::kDefaultZThreshold;
  std::optional<double> nu;
  std::optional<double> outlier_z;
  std::string out;
  bool roc = false;
  bool markdown = false;
};

int cmd_eval_anomaly(const Common& common, const EvalArgs& a) {
  std::vector<kd::BenchmarkDetector> detectors;
  for (const auto& name : a.detectors) detectors.push_back(kd::parse_benchmark_detector(name));
  if (detectors.empty()) detectors = kd::default_benchmark_detectors();
  json det_names = json::array();
  for (const auto& d : detectors) det_names.push_back(d.id());
  print_config("eval-anomaly", common,
               {{"source", a.source.describe()},
                {"detectors", det_names},
                {"subjects", a.subjects},
                {"train_reps", a.train_reps},
                {"genuine_reps", a.genuine_reps},
                {"impostor_reps", a.impostor_reps},
                {"z_threshold", a.z_threshold},
                {"nu", a.nu ? json(*a.nu) : json("grid")},
                {"outlier_z", a.outlier_z ? json(*a.outlier_z) : json(nullptr)},
                {"out", a.out},
                {"roc", a.roc}});

  kd::Dataset ds = a.source.load(common.seed);
  if (a.outlier_z) ds = kd::filter_outliers(ds, *a.outlier_z).dataset;
  for (const auto& s : a.subjects) {
    if (std::find(ds.subjects.begin(), ds.subjects.end(), s) == ds.subjects.end()) {
      throw kd::ValueError("subject '" + s + "' is not in the dataset");
    }
  }
  kd::BenchmarkOptions opt;
  opt.protocol = {a.train_reps, a.genuine_reps, a.impostor_reps};
  opt.stat.z_threshold = a.z_threshold;
  opt.ocsvm_nu = a.nu;
  opt.seed = common.seed;
  opt.keep_roc = a.roc || !a.out.empty();
  opt.subjects = a.subjects;

  const auto start = std::chrono::steady_clock::now();
  const auto result = kd::run_anomaly_benchmark(ds, detectors, opt, common.exec());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::cout << "\nmean equal error rate (descending)\n";
  print_table(std::cout, kd::sorted_by_mean_eer_desc(result.rows), false, a.markdown);
  std::cout << "\nmean zero-miss false-alarm rate (ascending)\n";
  print_table(std::cout, kd::sorted_by_mean_zfr_asc(result.rows), true, a.markdown);
  for (const auto& c : result.cells) {
    if (c.error) std::cerr << "warning: " << c.subject << '/' << c.detector << ": " << *c.error << '\n';
  }
  std::cout << "\nelapsed_seconds " << fixed(seconds, 3) << '\n';
  if (!a.out.empty()) {
    kd::export_report(result, a.out);
    std::cout << "wrote report to " << a.out << '\n';
  }
  return kOk;
}

// ---- train ----

struct TrainArgs {
  DataSource source;
  std::string model;
  std::string out;
  int epochs = 200;
  std::size_t trees = 100;
  int svm_epochs = 30;
  double outlier_z = 4.0;
  bool no_outlier_filter = false;
  bool verbose = false;
  std::string confusion;
};

void write_confusion(const std::string& path, const kd::ExperimentResult& r) {
  std::ofstream out(path);
  if (!out) throw kd::Error("cannot write " + path);
  out << "true\\predicted";
  for (const auto& n : r.class_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < r.test.confusion.size(); ++i) {
    out << r.class_names[i];
    for (long c : r.test.confusion[i]) out << ',' << c;
    out << '\n';
  }
}

int cmd_train(const Common& common, const TrainArgs& a) {
  const auto kind = kd::parse_classifier_model(a.model);
  const std::string out_path = a.out.empty() ? a.model + ".model" : a.out;
  kd::ExperimentOptions opt;
  opt.seed = common.seed;
  opt.exec = common.exec();
  opt.max_epochs = a.epochs;
  opt.n_trees = a.trees;
  opt.svm_epochs = a.svm_epochs;
  if (a.no_outlier_filter) opt.outlier_z.reset();
  else opt.outlier_z = a.outlier_z;
  if (a.verbose) {
    opt.on_epoch = [](const kd::EpochRecord& e) {
      std::cout << "epoch " << e.epoch << " train_loss " << fixed(e.train_loss, 6) << " val_loss "
                << fixed(e.validation_loss, 6) << " lr " << e.lr << std::endl;
    };
  }
  print_config("train", common,
               {{"source", a.source.describe()},
                {"model", a.model},
                {"out", out_path},
                {"max_epochs", a.epochs},
                {"batch_size", 64},
                {"early_stop_patience", 20},
                {"trees", a.trees},
                {"max_features", 5},
                {"svm_lambdas", opt.svm_lambdas},
                {"svm_epochs", a.svm_epochs},
                {"outlier_z", opt.outlier_z ? json(*opt.outlier_z) : json(nullptr)},
                {"split", {{"test", 0.25}, {"validation", 0.10}}}});

  const kd::Dataset ds = a.source.load(common.seed);
  const auto start = std::chrono::steady_clock::now();
  const auto r = kd::run_classifier_experiment(kind, ds, opt);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::cout << "outliers_removed " << r.outliers_removed << "\nclasses " << r.class_names.size()
            << "\ntrain_rows " << r.train_rows << "\nvalidation_rows " << r.validation_rows
            << "\ntest_rows " << r.test_rows << '\n';
  if (kind == kd::ClassifierModel::svm) std::cout << "selected_lambda " << r.svm_lambda << '\n';
  if (r.best_epoch > 0) std::cout << "best_epoch " << r.best_epoch << '\n';
  std::cout << "accuracy " << fixed(r.test.accuracy) << '\n';
  if (r.negative) {
    std::cout << "negative_accuracy " << fixed(r.negative->accuracy) << "\nnegative_recall "
              << fixed(r.negative->recall) << "\nnegative_precision " << fixed(r.negative->precision)
              << "\nnegative_f_score " << fixed(r.negative->f_score) << '\n';
  }
  std::cout << "elapsed_seconds " << fixed(seconds, 3) << '\n';
  kd::save_model(out_path, r.model);
  std::cout << "wrote " << out_path << '\n';
  if (!a.confusion.empty()) {
    write_confusion(a.confusion, r);
    std::cout << "wrote " << a.confusion << '\n';
  }
  return kOk;
}

// ---- serve ----

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store = "keydetect-store";
  std::string detector = "scaled_manhattan";
  std::size_t min_enroll = 10;
  double threshold_sd = 3.0;
};

int cmd_serve(const Common& common, const ServeArgs& a) {
  print_config("serve", common,
               {{"host", a.host},
                {"port", a.port},
                {"store", a.store},
                {"detector", a.detector},
                {"min_enroll", a.min_enroll},
                {"threshold_sd", a.threshold_sd}});
  // Signals are taken synchronously by this thread; worker threads inherit
  // the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGUSR1);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  kd::ServiceConfig cfg;
  cfg.store_dir = a.store;
  cfg.default_detector = kd::parse_detector_kind(a.detector);
  cfg.min_enroll = a.min_enroll;
  cfg.threshold_sd = a.threshold_sd;
  kd::VerificationService service(cfg);
  kd::HttpApi api(service);
  const int port = api.bind(a.host, a.port);

  std::thread server([&] {
    api.serve();
    kill(getpid(), SIGUSR1);  // wake the signal wait if serving ends on its own
  });
  api.wait_until_ready();
  std::cout << "listening on http://" << a.host << ':' << port << " users " << service.list_users().size()
            << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  api.stop();
  server.join();
  if (sig == SIGUSR1) {
    std::cerr << "error: server stopped unexpectedly\n";
    return kRuntime;
  }
  std::cout << "shutting down (" << (sig == SIGINT ? "SIGINT" : "SIGTERM") << ")" << std::endl;
  return kOk;
}

// ---- report ----

struct ReportArgs {
  std::string results;
  bool markdown = false;
  DataSource source;
  std::string plot_data;
};

// Per subject and feature: mean and population SD, for external plotting.
void write_plot_data(const std::string& path, const kd::Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw kd::Error("cannot write " + path);
  out << "subject,feature,mean,sd\n";
  const auto& labels = kd::feature_labels();
  for (const auto& s : ds.subjects) {
    const auto st = kd::column_stats(ds.rows_of(s));
    for (std::size_t f = 0; f < kd::kFeatureCount; ++f) {
      const auto i = static_cast<Eigen::Index>(f);
      out << s << ',' << labels[f] << ',' << kd::format_double(st.mean[i]) << ','
          << kd::format_double(st.std[i]) << '\n';
    }
  }
}

int cmd_report(const Common& common, const ReportArgs& a) {
  print_config("report", common,
               {{"results", a.results},
                {"markdown", a.markdown},
                {"plot_data", a.plot_data},
                {"source", a.plot_data.empty() ? json(nullptr) : a.source.describe()}});
  if (a.results.empty() && a.plot_data.empty()) {
    throw UsageError("report needs --results DIR and/or --plot-data FILE");
  }
  if (!a.results.empty()) {
    const auto table = std::filesystem::path(a.results) / "detector_table.csv";
    std::ifstream in(table);
    if (!in) throw kd::SchemaError("cannot open " + table.string());
    const auto rows = kd::read_detector_table(in);
    std::cout << "\nmean equal error rate (descending)\n";
    print_table(std::cout, kd::sorted_by_mean_eer_desc(rows), false, a.markdown);
    std::cout << "\nmean zero-miss false-alarm rate (ascending)\n";
    print_table(std::cout, kd::sorted_by_mean_zfr_asc(rows), true, a.markdown);
  }
  if (!a.plot_data.empty()) {
    write_plot_data(a.plot_data, a.source.load(common.seed));
    std::cout << "wrote " << a.plot_data << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"keydetect: keystroke-dynamics detectors, classifiers and verification service"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random choice")->capture_default_str();
  app.add_flag("--serial", common.serial, "Use the serial reference kernels instead of OpenMP");

  std::vector<std::string> detector_names = {"euclidean", "manhattan", "scaled_manhattan",
                                             "mahalanobis", "mahalanobis_normed", "zscore"};
  std::vector<std::string> benchmark_names = detector_names;
  benchmark_names.push_back("ocsvm");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate a benchmark CSV and write a normalized dataset");
  ingest.source.add_to(c_ingest);
  c_ingest->add_option("--out", ingest.out, "Normalized dataset output file");
  c_ingest->add_option("--outlier-z", ingest.outlier_z, "Drop samples with any |z| above this")
      ->check(CLI::PositiveNumber);
  c_ingest->add_option("--trace", ingest.trace, "Print the timing vector of a JSON key-event trace")
      ->check(CLI::ExistingFile);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval-anomaly", "Run the anomaly-detector benchmark (EER and ZFR)");
  eval.source.add_to(c_eval);
  c_eval->add_option("--detectors", eval.detectors, "Comma-separated detectors (default: the six distance detectors)")
      ->delimiter(',')
      ->check(CLI::IsMember(benchmark_names));
  c_eval->add_option("--subjects", eval.subjects, "Comma-separated subject ids (default: all)")->delimiter(',');
  c_eval->add_option("--train-reps", eval.train_reps, "Training samples per subject")->capture_default_str();
  c_eval->add_option("--genuine-reps", eval.genuine_reps, "Genuine test samples per subject")->capture_default_str();
  c_eval->add_option("--impostor-reps", eval.impostor_reps, "Impostor samples from each other subject")
      ->capture_default_str();
  c_eval->add_option("--z-threshold", eval.z_threshold, "Per-feature cut for the z-score detector")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_eval->add_option("--nu", eval.nu, "Fixed one-class SVM nu (default: chosen from a grid)")
      ->check(CLI::Range(1e-6, 1.0));
  c_eval->add_option("--outlier-z", eval.outlier_z, "Filter outliers first (off by default)")
      ->check(CLI::PositiveNumber);
  c_eval->add_option("--out", eval.out, "Directory for detector_table.csv, subject_results.csv and roc/");
  c_eval->add_flag("--roc", eval.roc, "Keep ROC curves (always on with --out)");
  c_eval->add_flag("--markdown", eval.markdown, "Print tables as markdown");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train and evaluate a subject classifier");
  train.source.add_to(c_train);
  c_train->add_option("--model", train.model, "fc | cnn1d | cnn1d-neg | rf | svm")
      ->required()
      ->check(CLI::IsMember({"fc", "cnn1d", "cnn1d-neg", "rf", "svm"}));
  c_train->add_option("--out", train.out, "Model file (default: <model>.model)");
  c_train->add_option("--epochs", train.epochs, "Maximum epochs for neural models")
      ->capture_default_str()
      ->check(CLI::Range(1, 100000));
  c_train->add_option("--trees", train.trees, "Random forest size")->capture_default_str()->check(CLI::Range(1, 100000));
  c_train->add_option("--svm-epochs", train.svm_epochs, "Passes over the data per SVM fit")
      ->capture_default_str()
      ->check(CLI::Range(1, 100000));
  c_train->add_option("--outlier-z", train.outlier_z, "Outlier filter cut")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_train->add_flag("--no-outlier-filter", train.no_outlier_filter, "Keep every sample");
  c_train->add_flag("--verbose", train.verbose, "Log every epoch");
  c_train->add_option("--confusion", train.confusion, "Write the test confusion matrix CSV");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the enrollment and verification HTTP service");
  c_serve->add_option("--host", serve.host, "Address to bind")->capture_default_str();
  c_serve->add_option("--port", serve.port, "TCP port (0 picks a free one)")
      ->capture_default_str()
      ->check(CLI::Range(0, 65535));
  c_serve->add_option("--store", serve.store, "Directory of per-user store files")->capture_default_str();
  c_serve->add_option("--detector", serve.detector, "Default detector for training")
      ->capture_default_str()
      ->check(CLI::IsMember(detector_names));
  c_serve->add_option("--min-enroll", serve.min_enroll, "Attempts required before training")
      ->capture_default_str()
      ->check(CLI::Range(3, 100000));
  c_serve->add_option("--threshold-sd", serve.threshold_sd, "Threshold = mean + k * SD of leave-one-out scores")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "Print tables from an eval-anomaly output directory");
  c_report->add_option("--results", report.results, "Directory written by eval-anomaly --out");
  c_report->add_flag("--markdown", report.markdown, "Print tables as markdown");
  c_report->add_option("--plot-data", report.plot_data, "Write per-subject feature means and SDs to this CSV");
  report.source.add_to(c_report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(common, ingest);
    if (c_eval->parsed()) return cmd_eval_anomaly(common, eval);
    if (c_train->parsed()) return cmd_train(common, train);
    if (c_serve->parsed()) return cmd_serve(common, serve);
    if (c_report->parsed()) return cmd_report(common, report);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nrun with --help for usage\n";
    return kUsage;
  } catch (const kd::Error& e) {
    const std::string code = e.code();
    std::cerr << "error" << (code == "error" ? "" : " (" + code + ")") << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
