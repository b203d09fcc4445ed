#include "keydetect/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include "keydetect/errors.hpp"
#include "keydetect/ocsvm.hpp"
#include "keydetect/text.hpp"

namespace keydetect {

namespace {

struct SortedScores {
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::vector<double> thresholds;  // distinct, ascending

  explicit SortedScores(const ScoredTestSet& s) : genuine(s.genuine), impostor(s.impostor) {
    if (genuine.empty() || impostor.empty()) {
      throw EmptySet("ROC needs non-empty genuine and impostor score sets");
    }
    std::sort(genuine.begin(), genuine.end());
    std::sort(impostor.begin(), impostor.end());
    thresholds.reserve(genuine.size() + impostor.size());
    std::merge(genuine.begin(), genuine.end(), impostor.begin(), impostor.end(),
               std::back_inserter(thresholds));
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  }

  double false_alarm(double t) const {
    const auto below = std::lower_bound(genuine.begin(), genuine.end(), t) - genuine.begin();
    return static_cast<double>(static_cast<long>(genuine.size()) - below) /
           static_cast<double>(genuine.size());
  }
  double miss(double t) const {
    const auto below = std::lower_bound(impostor.begin(), impostor.end(), t) - impostor.begin();
    return static_cast<double>(below) / static_cast<double>(impostor.size());
  }
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double population_sd(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

RocCurve build_roc(const ScoredTestSet& s) {
  const SortedScores sorted(s);
  RocCurve roc;
  roc.points.reserve(sorted.thresholds.size() + 1);
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (auto it = sorted.thresholds.rbegin(); it != sorted.thresholds.rend(); ++it) {
    roc.points.push_back({*it, sorted.false_alarm(*it), 1.0 - sorted.miss(*it)});
  }
  return roc;
}

double equal_error_rate(const ScoredTestSet& s) {
  const SortedScores sorted(s);
  double prev_fa = 0.0;
  double prev_d = 0.0;
  const std::size_t m = sorted.thresholds.size();
  for (std::size_t k = 0; k <= m; ++k) {
    double fa = 0.0;
    double miss = 1.0;
    if (k < m) {
      fa = sorted.false_alarm(sorted.thresholds[k]);
      miss = sorted.miss(sorted.thresholds[k]);
    }
    const double d = fa - miss;
    if (d == 0.0) return fa;
    if (d < 0.0) {
      // k > 0 here: at the lowest threshold every genuine score is flagged
      // and no impostor is missed, so d starts at +1.
      const double frac = prev_d / (prev_d - d);
      return prev_fa + frac * (fa - prev_fa);
    }
    prev_fa = fa;
    prev_d = d;
  }
  return prev_fa;  // unreachable: d reaches -1 at +inf
}

double zero_miss_false_alarm(const ScoredTestSet& s) {
  const SortedScores sorted(s);
  return sorted.false_alarm(sorted.impostor.front());
}

std::string BenchmarkDetector::id() const {
  return stat ? std::string(to_string(*stat)) : std::string("ocsvm");
}

std::string BenchmarkDetector::display() const {
  return stat ? std::string(display_name(*stat)) : std::string("SVM (one-class)");
}

BenchmarkDetector parse_benchmark_detector(std::string_view name) {
  if (name == "ocsvm") return BenchmarkDetector{};
  return BenchmarkDetector{parse_detector_kind(name)};
}

std::vector<BenchmarkDetector> default_benchmark_detectors() {
  std::vector<BenchmarkDetector> out;
  for (auto k : kAllStatDetectors) out.push_back({k});
  return out;
}

namespace {

Matrix selection_impostors(const std::vector<Matrix>& per_subject, std::size_t self,
                           const BenchmarkOptions& opt) {
  const auto p = per_subject[self].cols();
  Matrix out(static_cast<Eigen::Index>(opt.ocsvm_selection_impostors), p);
  std::mt19937_64 rng(derive_seed(opt.seed, self));
  std::uniform_int_distribution<std::size_t> pick_subject(0, per_subject.size() - 2);
  const auto skip = static_cast<Eigen::Index>(opt.protocol.impostor_reps);
  Eigen::Index filled = 0;
  while (filled < out.rows()) {
    std::size_t other = pick_subject(rng);
    if (other >= self) ++other;
    const Matrix& rows = per_subject[other];
    if (rows.rows() <= skip) continue;
    std::uniform_int_distribution<Eigen::Index> pick_row(skip, rows.rows() - 1);
    out.row(filled++) = rows.row(pick_row(rng));
  }
  return out;
}

ScoredTestSet score_split(const AnomalySplit& split, const BenchmarkDetector& det,
                          const BenchmarkOptions& opt, const Matrix& ocsvm_impostors) {
  ScoredTestSet s;
  if (det.stat) {
    const StatDetectorModel m = fit_stat_detector(*det.stat, split.train, opt.stat);
    s.genuine = score_rows(m, split.genuine_test);
    s.impostor = score_rows(m, split.impostor_test);
    return s;
  }
  OcSvmOptions svm;
  svm.gamma = 1.0 / static_cast<double>(split.train.cols());
  svm.nu = opt.ocsvm_nu ? *opt.ocsvm_nu
                        : select_nu(split.train, ocsvm_impostors, opt.ocsvm_nu_grid, svm).nu;
  const OcSvmModel m = fit_ocsvm(split.train, svm);
  for (Eigen::Index r = 0; r < split.genuine_test.rows(); ++r) {
    s.genuine.push_back(score_ocsvm(m, split.genuine_test.row(r).transpose()));
  }
  for (Eigen::Index r = 0; r < split.impostor_test.rows(); ++r) {
    s.impostor.push_back(score_ocsvm(m, split.impostor_test.row(r).transpose()));
  }
  return s;
}

}  // namespace

BenchmarkResult run_anomaly_benchmark(const Dataset& ds,
                                      const std::vector<BenchmarkDetector>& detectors,
                                      const BenchmarkOptions& options, Exec exec) {
  const auto all_splits = make_anomaly_splits(ds, options.protocol);

  std::vector<std::size_t> chosen;
  for (std::size_t s = 0; s < all_splits.size(); ++s) {
    if (options.subjects.empty() ||
        std::find(options.subjects.begin(), options.subjects.end(), all_splits[s].subject) !=
            options.subjects.end()) {
      chosen.push_back(s);
    }
  }
  for (const auto& want : options.subjects) {
    if (std::find(ds.subjects.begin(), ds.subjects.end(), want) == ds.subjects.end()) {
      throw ValueError("unknown subject '" + want + "'");
    }
  }

  const bool needs_selection =
      !options.ocsvm_nu &&
      std::any_of(detectors.begin(), detectors.end(), [](const auto& d) { return !d.stat; });
  std::vector<Matrix> per_subject;
  if (needs_selection) {
    for (const auto& subj : ds.subjects) per_subject.push_back(ds.rows_of(subj));
  }

  BenchmarkResult result;
  result.cells.resize(chosen.size() * detectors.size());

  const auto run_cell = [&](std::size_t cell) {
    const std::size_t s = chosen[cell / detectors.size()];
    const BenchmarkDetector& det = detectors[cell % detectors.size()];
    SubjectResult& out = result.cells[cell];
    out.subject = all_splits[s].subject;
    out.detector = det.id();
    try {
      const Matrix sel = (needs_selection && !det.stat)
                             ? selection_impostors(per_subject, s, options)
                             : Matrix();
      const ScoredTestSet scored = score_split(all_splits[s], det, options, sel);
      out.eer = equal_error_rate(scored);
      out.zfr = zero_miss_false_alarm(scored);
      if (options.keep_roc) out.roc = build_roc(scored);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  };

  const auto n_cells = static_cast<long>(result.cells.size());
  if (exec == Exec::serial) {
    for (long c = 0; c < n_cells; ++c) run_cell(static_cast<std::size_t>(c));
  } else {
#pragma omp parallel for schedule(dynamic)
    for (long c = 0; c < n_cells; ++c) run_cell(static_cast<std::size_t>(c));
  }

  result.rows = aggregate(result.cells, detectors);
  return result;
}

std::vector<DetectorTableRow> aggregate(const std::vector<SubjectResult>& cells,
                                        const std::vector<BenchmarkDetector>& order) {
  std::vector<DetectorTableRow> rows;
  for (const auto& det : order) {
    std::vector<double> eers;
    std::vector<double> zfrs;
    DetectorTableRow row;
    row.detector = det.id();
    row.display = det.display();
    for (const auto& c : cells) {
      if (c.detector != row.detector) continue;
      if (c.error) {
        ++row.failed;
        continue;
      }
      eers.push_back(c.eer);
      zfrs.push_back(c.zfr);
    }
    row.subjects = eers.size();
    row.mean_eer = mean_of(eers);
    row.sd_eer = population_sd(eers);
    row.mean_zfr = mean_of(zfrs);
    row.sd_zfr = population_sd(zfrs);
    rows.push_back(row);
  }
  return rows;
}

std::vector<DetectorTableRow> sorted_by_mean_eer_desc(std::vector<DetectorTableRow> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.mean_eer > b.mean_eer; });
  return rows;
}

std::vector<DetectorTableRow> sorted_by_mean_zfr_asc(std::vector<DetectorTableRow> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.mean_zfr < b.mean_zfr; });
  return rows;
}

ClassifierMetrics classifier_metrics(std::span<const int> predictions,
                                     std::span<const int> labels, int n_classes) {
  if (predictions.size() != labels.size()) {
    throw DimensionMismatch("predictions and labels differ in length");
  }
  if (n_classes <= 0) throw ValueError("n_classes must be positive");
  ClassifierMetrics m;
  const auto k = static_cast<std::size_t>(n_classes);
  m.confusion.assign(k, std::vector<long>(k, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes || predictions[i] < 0 ||
        predictions[i] >= n_classes) {
      throw ValueError("class index out of range at position " + std::to_string(i));
    }
    ++m.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
  }
  long correct = 0;
  m.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    correct += m.confusion[c][c];
    long row = 0;
    long col = 0;
    for (std::size_t o = 0; o < k; ++o) {
      row += m.confusion[c][o];
      col += m.confusion[o][c];
    }
    ClassMetrics& cm = m.per_class[c];
    cm.support = row;
    const auto tp = static_cast<double>(m.confusion[c][c]);
    cm.recall = row > 0 ? tp / static_cast<double>(row) : 0.0;
    cm.precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    const double pr = cm.precision + cm.recall;
    cm.f_score = pr > 0.0 ? 2.0 * cm.precision * cm.recall / pr : 0.0;
  }
  m.accuracy = labels.empty() ? 0.0
                              : static_cast<double>(correct) / static_cast<double>(labels.size());
  return m;
}

void write_detector_table(std::ostream& out, const std::vector<DetectorTableRow>& rows) {
  out << "detector,display,mean_eer,sd_eer,mean_zfr,sd_zfr,subjects,failed\n";
  for (const auto& r : rows) {
    out << r.detector << ',' << r.display << ',' << format_double(r.mean_eer) << ','
        << format_double(r.sd_eer) << ',' << format_double(r.mean_zfr) << ','
        << format_double(r.sd_zfr) << ',' << r.subjects << ',' << r.failed << '\n';
  }
}

std::vector<DetectorTableRow> read_detector_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      trim(line) != "detector,display,mean_eer,sd_eer,mean_zfr,sd_zfr,subjects,failed") {
    throw FormatError("not a detector table CSV");
  }
  std::vector<DetectorTableRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != 8) throw FormatError("row " + std::to_string(line_no) + ": 8 columns expected");
    DetectorTableRow r;
    r.detector = std::string(cells[0]);
    r.display = std::string(cells[1]);
    const auto num = [&](std::size_t i) {
      const auto v = parse_double(cells[i]);
      if (!v) throw FormatError("row " + std::to_string(line_no) + ": bad number");
      return *v;
    };
    r.mean_eer = num(2);
    r.sd_eer = num(3);
    r.mean_zfr = num(4);
    r.sd_zfr = num(5);
    r.subjects = static_cast<std::size_t>(num(6));
    r.failed = static_cast<std::size_t>(num(7));
    rows.push_back(r);
  }
  return rows;
}

void write_subject_results(std::ostream& out, const std::vector<SubjectResult>& cells) {
  out << "subject,detector,eer,zfr,error\n";
  for (const auto& c : cells) {
    out << c.subject << ',' << c.detector << ',';
    if (c.error) {
      std::string msg = *c.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      out << ",," << msg << '\n';
    } else {
      out << format_double(c.eer) << ',' << format_double(c.zfr) << ",\n";
    }
  }
}

void write_roc_points(std::ostream& out, const std::string& subject,
                      const std::string& detector, const RocCurve& roc) {
  for (const auto& p : roc.points) {
    out << subject << ',' << detector << ','
        << (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) << ','
        << format_double(p.false_alarm_rate) << ',' << format_double(p.hit_rate) << '\n';
  }
}

void export_report(const BenchmarkResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "detector_table.csv");
    if (!out) throw ValueError("cannot write " + (dir / "detector_table.csv").string());
    write_detector_table(out, sorted_by_mean_eer_desc(result.rows));
  }
  {
    std::ofstream out(dir / "subject_results.csv");
    write_subject_results(out, result.cells);
  }
  const bool any_roc = std::any_of(result.cells.begin(), result.cells.end(),
                                   [](const auto& c) { return !c.roc.points.empty(); });
  if (!any_roc) return;
  std::filesystem::create_directories(dir / "roc");
  std::string open_subject;
  std::ofstream out;
  for (const auto& c : result.cells) {
    if (c.roc.points.empty()) continue;
    if (c.subject != open_subject) {
      out.close();
      out.open(dir / "roc" / (c.subject + ".csv"));
      out << "subject,detector,threshold,false_alarm_rate,hit_rate\n";
      open_subject = c.subject;
    }
    write_roc_points(out, c.subject, c.detector, c.roc);
  }
}

}  // namespace keydetect
