#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "keydetect/stats.hpp"
#include "keydetect/timing.hpp"

namespace keydetect {

// Samples are ordered by subject (lexicographic), then session, then
// repetition. `subjects` lists the distinct ids in the same order.
struct Dataset {
  std::vector<KeystrokeSample> samples;
  std::vector<std::string> subjects;

  // Indices into `samples` for one subject, in (session, rep) order.
  std::vector<std::size_t> indices_of(const std::string& subject) const;
  Matrix rows_of(const std::string& subject) const;
};

// Restores the canonical ordering and recomputes `subjects`.
void normalize_order(Dataset& ds);

// Benchmark CSV: header "subject,sessionIndex,rep,<31 feature labels>".
// Throws SchemaError for a bad header or column count (naming the row) and
// ValueError for non-numeric or out-of-range cells (naming the row).
Dataset parse_csv(std::istream& in);
Dataset parse_csv(const std::filesystem::path& path);

void write_csv(std::ostream& out, const Dataset& ds);

// Normalized dataset file; layout documented in docs/formats.md.
void write_dataset(std::ostream& out, const Dataset& ds);
Dataset read_dataset(std::istream& in);

// Loads either a benchmark CSV or a normalized dataset file.
Dataset load_dataset(const std::filesystem::path& path);

struct OutlierFilterResult {
  Dataset dataset;
  std::size_t removed = 0;
};

// Removes a sample when any feature's per-subject z-score (population std)
// has magnitude above z_cut. Single pass over the unfiltered statistics.
OutlierFilterResult filter_outliers(const Dataset& ds, double z_cut = 4.0);

struct AnomalyProtocol {
  std::size_t train_reps = 200;
  std::size_t genuine_reps = 200;
  std::size_t impostor_reps = 5;
};

struct AnomalySplit {
  std::string subject;
  Matrix train;
  Matrix genuine_test;
  Matrix impostor_test;
};

// Deterministic: first train_reps samples train, the next genuine_reps are
// the genuine test set, and the first impostor_reps samples of every other
// subject form the impostor set. Throws SubjectTooSmall.
std::vector<AnomalySplit> make_anomaly_splits(const Dataset& ds,
                                              const AnomalyProtocol& protocol = {});

struct LabeledSet {
  Matrix x;
  std::vector<int> y;
  std::vector<std::string> origin;  // subject each row came from

  std::size_t size() const { return y.size(); }
};

struct ClassSplit {
  LabeledSet train;
  LabeledSet validation;
  LabeledSet test;
  std::map<std::string, int> label_map;
  std::vector<std::string> class_names;  // index -> name

  int n_classes() const { return static_cast<int>(class_names.size()); }
};

struct SplitFractions {
  double test = 0.25;
  double validation = 0.10;  // fraction of the non-test part
};

// Stratified split of a labeled pool: per class, shuffle with a seeded RNG,
// take round(n * test) for test and round(rest * validation) for validation.
ClassSplit stratified_split(const LabeledSet& pool,
                            const std::vector<std::string>& class_names,
                            std::uint64_t seed, const SplitFractions& f = {});

// One class per subject, label indices follow the subject order.
ClassSplit make_class_split(const Dataset& ds, std::uint64_t seed,
                            const SplitFractions& f = {});

}  // namespace keydetect
