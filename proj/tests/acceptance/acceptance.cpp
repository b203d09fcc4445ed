// Acceptance runner: one PASS/FAIL/BLOCKED line per criterion.
// Exit status: 0 all selected criteria passed, 1 a criterion failed,
// 77 nothing failed but a criterion needed the benchmark CSV and it is absent.
//
// The benchmark CSV path comes from $KEYDETECT_BENCHMARK_CSV when set, else
// from the path configured at build time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../support.hpp"
#include "keydetect/classifiers.hpp"
#include "keydetect/dataset.hpp"
#include "keydetect/detectors.hpp"
#include "keydetect/errors.hpp"
#include "keydetect/eval.hpp"
#include "keydetect/experiments.hpp"
#include "keydetect/http_api.hpp"
#include "keydetect/nn/network.hpp"
#include "keydetect/ocsvm.hpp"
#include "keydetect/service.hpp"
#include "keydetect/synthetic.hpp"

// After Eigen: <resolv.h> (pulled in by httplib) defines a _res macro.
#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#ifndef KEYDETECT_BENCHMARK_CSV_DEFAULT
#define KEYDETECT_BENCHMARK_CSV_DEFAULT ""
#endif

namespace kd = keydetect;
using nlohmann::json;

namespace {

enum class Status { pass, fail, blocked };

struct Outcome {
  Status status = Status::pass;
  std::string summary;
};

// Collects sub-check results; the criterion passes iff every check passed.
class Checks {
 public:
  void check(bool ok, const std::string& what) {
    std::cout << "  [" << (ok ? "ok" : "FAILED") << "] " << what << '\n';
    if (!ok) failed_.push_back(what);
    ++total_;
  }
  Outcome outcome(const std::string& label) const {
    std::ostringstream s;
    s << label << ": " << (total_ - failed_.size()) << '/' << total_ << " checks passed";
    if (!failed_.empty()) s << "; first failure: " << failed_.front();
    return {failed_.empty() ? Status::pass : Status::fail, s.str()};
  }

 private:
  std::size_t total_ = 0;
  std::vector<std::string> failed_;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

std::filesystem::path benchmark_csv() {
  if (const char* env = std::getenv("KEYDETECT_BENCHMARK_CSV"); env && *env) return env;
  return KEYDETECT_BENCHMARK_CSV_DEFAULT;
}

// Loads and shape-checks the benchmark once. Empty when the file is absent.
class BenchmarkData {
 public:
  const kd::Dataset* get() {
    if (!loaded_) {
      loaded_ = true;
      const auto path = benchmark_csv();
      if (!path.empty() && std::filesystem::exists(path)) {
        data_ = kd::load_dataset(path);
        std::size_t per_subject_ok = 0;
        for (const auto& s : data_->subjects) per_subject_ok += data_->indices_of(s).size() == 400;
        if (data_->subjects.size() != 51 || per_subject_ok != 51) {
          throw kd::SchemaError(path.string() + " is not the full 51 x 400 benchmark (" +
                                std::to_string(data_->subjects.size()) + " subjects)");
        }
      }
    }
    return data_ ? &*data_ : nullptr;
  }

 private:
  bool loaded_ = false;
  std::optional<kd::Dataset> data_;
};

Outcome blocked() {
  return {Status::blocked, "benchmark CSV not found at '" + benchmark_csv().string() +
                               "' (set KEYDETECT_BENCHMARK_CSV or the CMake cache variable)"};
}

void print_config(const std::string& criterion, json fields) {
  fields["criterion"] = criterion;
  fields["threads"] = kd::max_threads();
  std::cout << "  config " << fields.dump() << '\n';
}

// ---- anomaly detectors ----

const std::vector<std::pair<kd::DetectorKind, double>> kEerTargets = {
    {kd::DetectorKind::euclidean, 0.265},        {kd::DetectorKind::manhattan, 0.206},
    {kd::DetectorKind::mahalanobis, 0.193},      {kd::DetectorKind::mahalanobis_normed, 0.166},
    {kd::DetectorKind::scaled_manhattan, 0.141}, {kd::DetectorKind::zscore, 0.135}};

const std::map<kd::DetectorKind, double> kZfrTargets = {
    {kd::DetectorKind::zscore, 0.535},    {kd::DetectorKind::scaled_manhattan, 0.540},
    {kd::DetectorKind::mahalanobis, 0.645}, {kd::DetectorKind::mahalanobis_normed, 0.666},
    {kd::DetectorKind::manhattan, 0.711}, {kd::DetectorKind::euclidean, 0.753}};

struct AnomalyRun {
  std::vector<kd::DetectorTableRow> rows;
  double seconds = 0.0;
};

AnomalyRun run_anomaly(const kd::Dataset& ds, const std::string& criterion) {
  kd::BenchmarkOptions opt;
  print_config(criterion, {{"train_reps", opt.protocol.train_reps},
                           {"genuine_reps", opt.protocol.genuine_reps},
                           {"impostor_reps", opt.protocol.impostor_reps},
                           {"z_threshold", opt.stat.z_threshold},
                           {"outlier_filter", false},
                           {"exec", "parallel"}});
  const auto start = std::chrono::steady_clock::now();
  auto result = kd::run_anomaly_benchmark(ds, kd::default_benchmark_detectors(), opt, kd::Exec::parallel);
  AnomalyRun run;
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.rows = std::move(result.rows);
  return run;
}

const kd::DetectorTableRow& row_for(const std::vector<kd::DetectorTableRow>& rows, kd::DetectorKind k) {
  for (const auto& r : rows) {
    if (r.detector == kd::to_string(k)) return r;
  }
  throw kd::Error("detector row missing");
}

Outcome anomaly_eer(BenchmarkData& data) {
  const auto* ds = data.get();
  if (!ds) return blocked();
  const auto run = run_anomaly(*ds, "anomaly_eer");
  Checks c;
  for (const auto& [kind, target] : kEerTargets) {
    const auto& r = row_for(run.rows, kind);
    c.check(r.failed == 0 && r.subjects == 51, r.display + ": 51 subjects evaluated");
    c.check(std::abs(r.mean_eer - target) <= 0.06,
            r.display + " mean EER " + fmt(r.mean_eer) + " (SD " + fmt(r.sd_eer) + ") within 0.06 of " + fmt(target, 3));
  }
  const auto sorted = kd::sorted_by_mean_eer_desc(run.rows);
  std::string got, want;
  for (const auto& r : sorted) got += r.detector + " ";
  for (const auto& [kind, target] : kEerTargets) want += std::string(kd::to_string(kind)) + " ";
  c.check(got == want, "ranking by mean EER (descending): " + got);
  c.check(run.seconds <= 120.0, "runtime " + fmt(run.seconds, 2) + " s <= 120 s");
  return c.outcome("mean EER per detector");
}

Outcome anomaly_zfr(BenchmarkData& data) {
  const auto* ds = data.get();
  if (!ds) return blocked();
  const auto run = run_anomaly(*ds, "anomaly_zfr");
  Checks c;
  for (const auto& [kind, target] : kZfrTargets) {
    const auto& r = row_for(run.rows, kind);
    c.check(std::abs(r.mean_zfr - target) <= 0.10,
            r.display + " mean ZFR " + fmt(r.mean_zfr) + " (SD " + fmt(r.sd_zfr) + ") within 0.10 of " + fmt(target, 3));
  }
  const auto sorted = kd::sorted_by_mean_zfr_asc(run.rows);
  const std::set<std::string> best = {sorted[0].detector, sorted[1].detector};
  c.check(best == std::set<std::string>{"zscore", "scaled_manhattan"},
          "two lowest mean ZFRs: " + sorted[0].detector + ", " + sorted[1].detector);
  return c.outcome("mean ZFR per detector");
}

// ---- classifiers ----

const std::vector<std::uint64_t> kSeeds = {42, 43, 44};

kd::ExperimentResult run_experiment(kd::ClassifierModel m, const kd::Dataset& ds, std::uint64_t seed,
                                    const std::string& criterion) {
  kd::ExperimentOptions opt;
  opt.seed = seed;
  print_config(criterion, {{"model", kd::to_string(m)},
                           {"seed", seed},
                           {"outlier_z", *opt.outlier_z},
                           {"max_epochs", opt.max_epochs},
                           {"batch_size", 64},
                           {"early_stop_patience", 20},
                           {"trees", opt.n_trees},
                           {"svm_lambdas", opt.svm_lambdas},
                           {"svm_epochs", opt.svm_epochs},
                           {"split", {{"test", 0.25}, {"validation", 0.10}}}});
  const auto start = std::chrono::steady_clock::now();
  auto r = kd::run_classifier_experiment(m, ds, opt);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "  " << kd::to_string(m) << " seed " << seed << ": accuracy " << fmt(r.test.accuracy)
            << " (" << fmt(s, 1) << " s)" << std::endl;
  return r;
}

Outcome classifier_accuracy(BenchmarkData& data) {
  const auto* ds = data.get();
  if (!ds) return blocked();
  struct Target {
    kd::ClassifierModel model;
    double accuracy;
    double tolerance;
  };
  const std::vector<Target> targets = {{kd::ClassifierModel::cnn1d, 0.946, 0.03},
                                       {kd::ClassifierModel::fc, 0.922, 0.03},
                                       {kd::ClassifierModel::rf, 0.9366, 0.03},
                                       {kd::ClassifierModel::svm, 0.756, 0.05}};
  Checks c;
  for (const auto& t : targets) {
    double sum = 0.0;
    for (auto seed : kSeeds) sum += run_experiment(t.model, *ds, seed, "classifier_accuracy").test.accuracy;
    const double mean = sum / static_cast<double>(kSeeds.size());
    c.check(std::abs(mean - t.accuracy) <= t.tolerance,
            std::string(kd::to_string(t.model)) + " mean accuracy over 3 seeds " + fmt(mean) + " within " +
                fmt(t.tolerance, 2) + " of " + fmt(t.accuracy));
  }
  return c.outcome("classifier accuracy");
}

Outcome negative_class(BenchmarkData& data) {
  const auto* ds = data.get();
  if (!ds) return blocked();
  double acc = 0, rec = 0, prec = 0, f = 0;
  for (auto seed : kSeeds) {
    const auto r = run_experiment(kd::ClassifierModel::cnn1d_neg, *ds, seed, "negative_class");
    std::cout << "    negative recall " << fmt(r.negative->recall) << " precision " << fmt(r.negative->precision)
              << " f-score " << fmt(r.negative->f_score) << '\n';
    acc += r.negative->accuracy;
    rec += r.negative->recall;
    prec += r.negative->precision;
    f += r.negative->f_score;
  }
  const double n = static_cast<double>(kSeeds.size());
  Checks c;
  c.check(std::abs(acc / n - 0.9505) <= 0.03, "overall accuracy " + fmt(acc / n) + " within 0.03 of 0.9505");
  c.check(std::abs(rec / n - 0.809) <= 0.08, "negative recall " + fmt(rec / n) + " within 0.08 of 0.809");
  c.check(std::abs(prec / n - 0.6722) <= 0.10, "negative precision " + fmt(prec / n) + " within 0.10 of 0.6722");
  c.check(std::abs(f / n - 0.733) <= 0.08, "negative f-score " + fmt(f / n) + " within 0.08 of 0.733");
  return c.outcome("negative-class experiment (mean of 3 seeds)");
}

// ---- properties ----

kd::nn::Tensor random_tensor(kd::nn::Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  kd::nn::Tensor t(std::move(shape));
  for (double& v : t.data) v = d(rng);
  return t;
}

std::vector<int> random_labels(std::size_t n, int k, std::mt19937_64& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
  return y;
}

kd::Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  kd::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

kd::ScoredTestSet random_scores(std::mt19937_64& rng, bool ties) {
  std::normal_distribution<double> a(0.0, 1.0), b(1.0, 1.0);
  const int ng = 3 + static_cast<int>(rng() % 15);
  const int ni = 3 + static_cast<int>(rng() % 15);
  kd::ScoredTestSet s;
  for (int i = 0; i < ng; ++i) s.genuine.push_back(ties ? std::round(a(rng) * 2) : a(rng));
  for (int i = 0; i < ni; ++i) s.impostor.push_back(ties ? std::round(b(rng) * 2) : b(rng));
  return s;
}

// Zero-initialized biases can leave a ReLU input at exactly 0 (a conv window
// whose inputs are all clipped), where the loss has no derivative and central
// differences report half a one-sided slope. Small random biases move the
// check to a point where the gradient exists.
void randomize_biases(kd::nn::Network& net, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 0.1);
  for (auto& p : net.params()) {
    if (p.name.ends_with(".bias")) {
      for (double& v : p.value->data) v = d(rng);
    }
  }
}

std::string describe(const kd::nn::GradCheckResult& r) {
  std::ostringstream s;
  s << "max relative error " << r.max_relative_error << " at " << r.worst_param << '[' << r.worst_index
    << "] (analytic " << r.worst_analytic << ", numeric " << r.worst_numeric << ')';
  return s.str();
}

Outcome property_suites() {
  Checks c;
  std::mt19937_64 rng(20240601);

  {
    kd::nn::Network net;
    net.input_shape = {4};
    net.layers = {kd::nn::Dense(4, 5), kd::nn::Relu{}, kd::nn::Dense(5, 3)};
    net.init(4);
    randomize_biases(net, rng);
    const auto r = kd::nn::gradient_check(net, random_tensor({6, 4}, rng), random_labels(6, 3, rng));
    c.check(r.max_relative_error < 1e-4, "gradient check, dense-relu-dense on 4-dim input: " + describe(r));
  }
  {
    kd::nn::Network net;
    net.input_shape = {1, 8};
    net.layers = {kd::nn::Conv1d(1, 2, 3, 1), kd::nn::Flatten{}, kd::nn::Dense(16, 3)};
    net.init(5);
    randomize_biases(net, rng);
    const auto r = kd::nn::gradient_check(net, random_tensor({5, 1, 8}, rng), random_labels(5, 3, rng));
    c.check(r.max_relative_error < 1e-4, "gradient check, conv1d(1-2,k3,p1)-flatten-dense: " + describe(r));
  }
  {
    auto net = kd::build_fc(5);
    net.init(1);
    randomize_biases(net, rng);
    const auto r = kd::nn::gradient_check(net, random_tensor({8, kd::kFeatureCount}, rng), random_labels(8, 5, rng));
    c.check(r.max_relative_error < 1e-4, "gradient check, dense 31-80-60-5 (" + std::to_string(r.entries) +
                                             " entries): " + describe(r));
  }
  {
    // Same layer sequence as the classifier CNN at a width that keeps the
    // finite-difference sweep short.
    kd::nn::Network net;
    net.input_shape = {1, kd::kFeatureCount};
    net.layers = {kd::nn::Conv1d(1, 4, 3, 1), kd::nn::Relu{}, kd::nn::Conv1d(4, 6, 3, 1), kd::nn::Relu{},
                  kd::nn::Flatten{}, kd::nn::Dense(6 * kd::kFeatureCount, 12), kd::nn::Relu{},
                  kd::nn::Dense(12, 5)};
    net.init(2);
    randomize_biases(net, rng);
    const auto r = kd::nn::gradient_check(net, random_tensor({4, 1, kd::kFeatureCount}, rng), random_labels(4, 5, rng));
    c.check(r.max_relative_error < 1e-4, "gradient check, conv1d-relu-conv1d-relu-flatten-dense-relu-dense (" +
                                             std::to_string(r.entries) + " entries): " + describe(r));
  }
  {
    // Full-size classifier CNN: informational only. With 129k parameters,
    // many gradient entries are ~1e-8, the same order as the relative-error
    // floor, while central-difference roundoff is ~1e-11 absolute; the ratio
    // then measures float noise rather than backward correctness.
    auto net = kd::build_cnn(5);
    net.init(3);
    randomize_biases(net, rng);
    const auto r = kd::nn::gradient_check(net, random_tensor({2, 1, kd::kFeatureCount}, rng), random_labels(2, 5, rng));
    std::cout << "  [info] gradient check, full classifier CNN (" << r.entries << " entries): " << describe(r) << '\n';
  }
  {
    const auto shapes = kd::build_cnn(51).layer_shapes();
    std::size_t flatten_width = 0;
    const auto& layers = kd::build_cnn(51).layers;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (std::holds_alternative<kd::nn::Flatten>(layers[i])) flatten_width = kd::nn::element_count(shapes[i]);
    }
    c.check(flatten_width == 992, "CNN flatten width " + std::to_string(flatten_width) + " == 992");
  }
  {
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      kd::StatDetectorModel m;
      m.kind = kd::DetectorKind::mahalanobis;
      m.stats.mean = random_vector(rng, kd::kFeatureCount);
      m.stats.std = kd::Vector::Ones(kd::kFeatureCount);
      m.stats.mad = kd::Vector::Ones(kd::kFeatureCount);
      m.cov_inverse = kd::Matrix::Identity(kd::kFeatureCount, kd::kFeatureCount);
      const kd::Vector x = random_vector(rng, kd::kFeatureCount, 3.0);
      worst = std::max(worst, std::abs(kd::score_mahalanobis(m, x) - kd::score_euclidean(m, x)));
    }
    c.check(worst <= 1e-9, "Mahalanobis with identity covariance vs Euclidean: max |diff| " + std::to_string(worst));
  }
  {
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
      kd::StatDetectorModel m;
      m.kind = kd::DetectorKind::scaled_manhattan;
      m.stats.mean = random_vector(rng, kd::kFeatureCount);
      m.stats.std = kd::Vector::Ones(kd::kFeatureCount);
      m.stats.mad = kd::Vector::Ones(kd::kFeatureCount);
      const kd::Vector x = random_vector(rng, kd::kFeatureCount, 3.0);
      mismatches += kd::score_scaled_manhattan(m, x) != kd::score_manhattan(m, x);
    }
    c.check(mismatches == 0, "scaled Manhattan with unit MAD == Manhattan exactly (" + std::to_string(mismatches) +
                                 " of 1000 differ)");
  }
  {
    int bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const auto s = random_scores(rng, trial % 2 == 0);
      bool ok = true;
      for (const auto& p : kd::build_roc(s).points) {
        if (std::isinf(p.threshold)) {
          ok = ok && p.false_alarm_rate == 0.0 && p.hit_rate == 0.0;
          continue;
        }
        const auto [fa, miss] = test_support::brute_rates(s.genuine, s.impostor, p.threshold);
        ok = ok && std::abs(p.false_alarm_rate - fa) < 1e-12 && std::abs(p.hit_rate - (1.0 - miss)) < 1e-12;
      }
      ok = ok && std::abs(kd::equal_error_rate(s) - test_support::brute_eer(s.genuine, s.impostor)) < 1e-12;
      ok = ok && std::abs(kd::zero_miss_false_alarm(s) - test_support::brute_zfr(s.genuine, s.impostor)) < 1e-12;
      bad += !ok;
    }
    c.check(bad == 0, "ROC/EER/ZFR vs threshold-enumeration oracle on 200 score sets (" + std::to_string(bad) +
                          " mismatches)");
  }
  {
    int bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto t = test_support::random_trace(rng);
      const auto f = kd::extract_features(t);
      const auto expect = test_support::brute_force_features(t);
      for (std::size_t i = 0; i < kd::kFeatureCount; ++i) {
        if (f[i] != expect[i]) {
          ++bad;
          break;
        }
      }
    }
    c.check(bad == 0, "extract_features vs brute-force extractor on 1000 random traces (" + std::to_string(bad) +
                          " mismatches)");
  }
  {
    const std::vector<std::function<double(double)>> transforms = {
        [](double x) { return std::exp(3.0 * x) + 7.0; }, [](double x) { return x * x * x; },
        [](double x) { return 2.5 * x - 4.0; }, [](double x) { return std::atan(x); }};
    int bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const auto s = random_scores(rng, trial % 3 == 0);
      const double eer = kd::equal_error_rate(s);
      for (const auto& tf : transforms) {
        kd::ScoredTestSet t = s;
        for (auto* v : {&t.genuine, &t.impostor})
          for (double& x : *v) x = tf(x);
        bad += std::abs(kd::equal_error_rate(t) - eer) > 1e-12;
      }
    }
    c.check(bad == 0, "EER unchanged by 4 strictly increasing transforms on 200 score sets (" +
                          std::to_string(bad) + " differ)");
  }
  return c.outcome("property suites");
}

// ---- one-class SVM ----

Outcome ocsvm_properties(BenchmarkData& data) {
  const kd::Dataset* ds = data.get();
  kd::Dataset synthetic;
  std::string source = "benchmark";
  if (!ds) {
    synthetic = kd::make_synthetic_dataset({});
    ds = &synthetic;
    source = "synthetic stand-in (benchmark CSV absent)";
  }
  const std::vector<double> grid = {0.05, 0.1, 0.2, 0.3, 0.5};
  print_config("ocsvm_properties", {{"source", source}, {"nu_grid", grid}, {"gamma", 1.0 / 31.0},
                                    {"train_reps", 200}, {"subjects", 10}, {"subject_seed", 42}});
  std::vector<std::string> subjects = ds->subjects;
  std::mt19937_64 rng(kd::derive_seed(42, 0x6f6373));
  std::shuffle(subjects.begin(), subjects.end(), rng);
  subjects.resize(10);
  Checks c;
  for (const auto& s : subjects) {
    const kd::Matrix train = ds->rows_of(s).topRows(200);
    for (double nu : grid) {
      kd::OcSvmOptions o;
      o.nu = nu;
      const auto m = kd::fit_ocsvm(train, o);
      long out = 0;
      for (Eigen::Index r = 0; r < train.rows(); ++r) out += m.is_outlier(train.row(r).transpose());
      const double frac = static_cast<double>(out) / static_cast<double>(train.rows());
      c.check(frac <= nu + 0.05 && m.kkt_gap < 1e-4,
              s + " nu " + fmt(nu, 2) + ": outlier fraction " + fmt(frac) + ", KKT residual " +
                  std::to_string(m.kkt_gap));
    }
  }
  return c.outcome("one-class SVM on 10 subjects, " + source);
}

// ---- service ----

json events_json(const kd::EventTrace& t) {
  json arr = json::array();
  for (const auto& e : t) {
    arr.push_back({{"key", e.key}, {"kind", e.action == kd::KeyAction::down ? "down" : "up"}, {"t_ms", e.t_ms}});
  }
  return arr;
}

Outcome service_roundtrip(BenchmarkData& data) {
  const auto* ds = data.get();
  if (!ds) return blocked();
  kd::ServiceConfig cfg;  // in-memory store, scaled Manhattan, min_enroll 10, mean + 3 SD
  print_config("service_roundtrip", {{"detector", kd::to_string(cfg.default_detector)},
                                     {"min_enroll", cfg.min_enroll},
                                     {"threshold_sd", cfg.threshold_sd}});
  kd::VerificationService service(cfg);
  kd::HttpApi api(service);
  const int port = api.bind("127.0.0.1", 0);
  std::thread server([&] { api.serve(); });
  api.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);
  Checks c;
  const std::string subject = ds->subjects.front();
  const auto own = ds->indices_of(subject);
  const std::string base = "/api/users/" + subject;

  auto post = [&](const std::string& path, const json& body) -> std::pair<int, json> {
    auto r = cli.Post(path, body.dump(), "application/json");
    if (!r) return {0, json::object()};
    return {r->status, json::parse(r->body, nullptr, false)};
  };

  bool enrolled = true;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto trace = kd::synthesize_trace(ds->samples[own[i]].vector);
    const auto [st, body] = post(base + "/enroll", {{"nonce", "genuine-" + std::to_string(i)}, {"events", events_json(trace)}});
    enrolled = enrolled && st == 200 && body.value("attempts", 0) == static_cast<int>(i + 1);
  }
  c.check(enrolled, "10 genuine rows of " + subject + " enrolled over HTTP");
  const auto [tst, tbody] = post(base + "/train", json::object());
  c.check(tst == 200 && tbody.contains("threshold"), "train returned a threshold");

  int accepted = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto trace = kd::synthesize_trace(ds->samples[own[i]].vector);
    const auto [st, body] = post(base + "/verify", {{"events", events_json(trace)}});
    accepted += st == 200 && body.value("accepted", false);
  }
  c.check(accepted == 10, std::to_string(accepted) + "/10 genuine replays accepted");

  int rejected = 0, impostors = 0;
  for (const auto& other : ds->subjects) {
    if (other == subject) continue;
    const auto trace = kd::synthesize_trace(ds->samples[ds->indices_of(other).front()].vector);
    const auto [st, body] = post(base + "/verify", {{"events", events_json(trace)}});
    rejected += st == 200 && !body.value("accepted", true);
    ++impostors;
  }
  c.check(impostors == 50 && rejected * 10 >= impostors * 8,
          std::to_string(rejected) + "/" + std::to_string(impostors) + " impostor fixtures rejected (>= 80%)");
  api.stop();
  server.join();
  return c.outcome("service round trip");
}

}  // namespace

int main(int argc, char** argv) {
  BenchmarkData data;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"anomaly_eer", [&] { return anomaly_eer(data); }},
      {"anomaly_zfr", [&] { return anomaly_zfr(data); }},
      {"classifier_accuracy", [&] { return classifier_accuracy(data); }},
      {"negative_class", [&] { return negative_class(data); }},
      {"property_suites", [] { return property_suites(); }},
      {"ocsvm_properties", [&] { return ocsvm_properties(data); }},
      {"service_roundtrip", [&] { return service_roundtrip(data); }},
  };
  std::vector<std::string> names;
  for (const auto& [n, f] : criteria) names.push_back(n);

  CLI::App app{"keydetect acceptance criteria"};
  std::vector<std::string> selected;
  bool list = false;
  app.add_option("--criterion", selected, "Criterion to run (repeatable; default: all)")->check(CLI::IsMember(names));
  app.add_flag("--list", list, "List criterion names");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (list) {
    for (const auto& n : names) std::cout << n << '\n';
    return 0;
  }
  if (selected.empty()) selected = names;

  bool any_fail = false, any_blocked = false;
  for (const auto& [name, run] : criteria) {
    if (std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    std::cout << "== " << name << std::endl;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("error: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "BLOCKED";
    std::cout << tag << ' ' << name << ": " << o.summary << std::endl;
    any_fail = any_fail || o.status == Status::fail;
    any_blocked = any_blocked || o.status == Status::blocked;
  }
  return any_fail ? 1 : any_blocked ? 77 : 0;
}
