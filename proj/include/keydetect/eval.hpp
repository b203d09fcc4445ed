#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "keydetect/dataset.hpp"
#include "keydetect/detectors.hpp"
#include "keydetect/exec.hpp"

namespace keydetect {

// Orientation: higher score = more anomalous. A test vector is flagged as an
// impostor when its score is >= the threshold, so a genuine score equal to
// the threshold counts as a false alarm.
struct ScoredTestSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

struct RocPoint {
  double threshold;  // +inf for the all-accept point
  double false_alarm_rate;
  double hit_rate;
};

// Points ordered by increasing false-alarm rate, from threshold +inf down to
// the smallest observed score.
struct RocCurve {
  std::vector<RocPoint> points;
};

// Throws EmptySet when either score set is empty.
RocCurve build_roc(const ScoredTestSet& s);

// Miss rate equals false-alarm rate; linear interpolation on the crossing
// segment between adjacent observed thresholds.
double equal_error_rate(const ScoredTestSet& s);

// Smallest false-alarm rate with zero misses: the fraction of genuine scores
// at or above the lowest impostor score.
double zero_miss_false_alarm(const ScoredTestSet& s);

// Detector selector for the benchmark: one of the six distance detectors or
// the one-class SVM.
struct BenchmarkDetector {
  std::optional<DetectorKind> stat;  // empty means one-class SVM
  std::string id() const;
  std::string display() const;
};

BenchmarkDetector parse_benchmark_detector(std::string_view name);
std::vector<BenchmarkDetector> default_benchmark_detectors();

struct BenchmarkOptions {
  AnomalyProtocol protocol;
  StatDetectorOptions stat;
  std::optional<double> ocsvm_nu;  // fixed nu; empty selects from the grid
  std::vector<double> ocsvm_nu_grid = {0.05, 0.1, 0.2, 0.3, 0.5};
  std::size_t ocsvm_selection_impostors = 50;
  std::uint64_t seed = 42;
  bool keep_roc = false;
  // Restrict to these subjects (all when empty). Impostors still come from
  // every other subject in the dataset.
  std::vector<std::string> subjects;
};

struct SubjectResult {
  std::string subject;
  std::string detector;
  double eer = 0.0;
  double zfr = 0.0;
  std::optional<std::string> error;  // cell failed; excluded from aggregates
  RocCurve roc;                      // filled when keep_roc
};

struct DetectorTableRow {
  std::string detector;  // identifier
  std::string display;
  double mean_eer = 0.0;
  double sd_eer = 0.0;
  double mean_zfr = 0.0;
  double sd_zfr = 0.0;
  std::size_t subjects = 0;
  std::size_t failed = 0;
};

struct BenchmarkResult {
  std::vector<SubjectResult> cells;  // subject-major, detector-minor
  std::vector<DetectorTableRow> rows;  // in detector order
};

// Per subject and detector: fit on train, score genuine and impostor sets,
// compute EER and ZFR; aggregate mean and population SD across subjects.
// Cell failures are recorded and the run continues.
BenchmarkResult run_anomaly_benchmark(const Dataset& ds,
                                      const std::vector<BenchmarkDetector>& detectors,
                                      const BenchmarkOptions& options = {},
                                      Exec exec = Exec::parallel);

// Aggregates mean/SD per detector; detectors listed in `order`.
std::vector<DetectorTableRow> aggregate(const std::vector<SubjectResult>& cells,
                                        const std::vector<BenchmarkDetector>& order);

std::vector<DetectorTableRow> sorted_by_mean_eer_desc(std::vector<DetectorTableRow> rows);
std::vector<DetectorTableRow> sorted_by_mean_zfr_asc(std::vector<DetectorTableRow> rows);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  long support = 0;
};

struct ClassifierMetrics {
  double accuracy = 0.0;
  // confusion[true][predicted]
  std::vector<std::vector<long>> confusion;
  std::vector<ClassMetrics> per_class;
};

// Undefined precision/recall (zero denominators) are reported as 0.
ClassifierMetrics classifier_metrics(std::span<const int> predictions,
                                     std::span<const int> labels, int n_classes);

// Report CSVs; headers documented in docs/formats.md.
void write_detector_table(std::ostream& out, const std::vector<DetectorTableRow>& rows);
std::vector<DetectorTableRow> read_detector_table(std::istream& in);
void write_subject_results(std::ostream& out, const std::vector<SubjectResult>& cells);
void write_roc_points(std::ostream& out, const std::string& subject,
                      const std::string& detector, const RocCurve& roc);

// Writes detector_table.csv (rows by descending mean EER),
// subject_results.csv and, when ROC curves were kept, roc/<subject>.csv.
void export_report(const BenchmarkResult& result, const std::filesystem::path& dir);

}  // namespace keydetect
