#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "keydetect/dataset.hpp"
#include "keydetect/eval.hpp"
#include "keydetect/nn/network.hpp"
#include "keydetect/nn/optim.hpp"

namespace keydetect {

// Per-column z-scaling fit on training rows only. Columns with a standard
// deviation below kDeviationFloor are divided by the floor instead.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& train);
  Matrix apply(const Matrix& rows) const;
  Vector apply(const Vector& x) const;
};

enum class NnArch { fc, cnn };

std::string_view to_string(NnArch arch);
NnArch parse_nn_arch(std::string_view name);  // "fc" | "cnn"; ValueError

// 31 -> 80 -> 60 -> n with relu between the dense layers.
nn::Network build_fc(std::size_t n_classes, std::size_t features = kFeatureCount);
// conv(1->16,k3,p1) relu conv(16->32,k3,p1) relu flatten dense(->128) relu dense(->n)
nn::Network build_cnn(std::size_t n_classes, std::size_t features = kFeatureCount);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double lr = 0.0;  // rate used during the epoch
};

struct TrainConfig {
  nn::AdamOptions adam;
  nn::PlateauOptions plateau;
  int max_epochs = 200;
  std::size_t batch_size = 64;
  int early_stop_patience = 20;  // epochs without validation improvement
  std::uint64_t seed = 42;
  Exec exec = Exec::parallel;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct NnClassifier {
  NnArch arch = NnArch::fc;
  Standardizer standardizer;
  nn::Network network;
  std::vector<std::string> class_names;

  // Logits, one row per input row.
  Matrix scores(const Matrix& rows, Exec exec = Exec::parallel);
  std::vector<int> predict_rows(const Matrix& rows, Exec exec = Exec::parallel);
};

struct NnTrainResult {
  NnClassifier model;  // weights from the epoch with the lowest validation loss
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  ClassifierMetrics test;
};

// Adam + plateau scheduler on the validation loss (train loss when the split
// has no validation rows), early stopping, best-epoch weights restored.
// Throws Divergence naming the epoch when the loss becomes NaN or infinite.
NnTrainResult train_nn(NnArch arch, const ClassSplit& split, const TrainConfig& config);

inline constexpr const char* kNegativeClassName = "negative";

struct NegativeClassOptions {
  std::size_t known_subjects = 31;
  std::size_t per_other_subject = 20;
  std::uint64_t seed = 42;
  SplitFractions fractions;
};

// The first `known_subjects` subjects (lexicographic) become classes
// 0..known-1; class `known` pools `per_other_subject` rows drawn without
// replacement from each remaining subject. Then the usual stratified split.
ClassSplit build_negative_dataset(const Dataset& ds, const NegativeClassOptions& options = {});

struct NegativeClassMetrics {
  double accuracy = 0.0;
  double recall = 0.0;     // of the negative class
  double precision = 0.0;
  double f_score = 0.0;
  ClassifierMetrics overall;
};

NegativeClassMetrics evaluate_negative_class(std::span<const int> predictions,
                                             std::span<const int> labels, int n_classes,
                                             int negative_class);

}  // namespace keydetect
