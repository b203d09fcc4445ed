#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "keydetect/classifiers.hpp"
#include "keydetect/model_io.hpp"

namespace keydetect {

// Classifier experiments on a subject-labeled dataset.
//   fc, cnn1d: one class per subject, stratified train/validation/test split
//   cnn1d-neg: first 31 subjects as classes plus a 400-row negative class
//   rf:        100-tree Gini forest on the train part
//   svm:       linear Crammer-Singer SVM, lambda chosen on validation
enum class ClassifierModel { fc, cnn1d, cnn1d_neg, rf, svm };

std::string_view to_string(ClassifierModel m);
ClassifierModel parse_classifier_model(std::string_view name);  // ValueError

struct ExperimentOptions {
  std::uint64_t seed = 42;
  std::optional<double> outlier_z = 4.0;  // per-subject z-score filter; empty disables
  Exec exec = Exec::parallel;
  int max_epochs = 200;          // neural models
  std::size_t n_trees = 100;     // forest
  std::vector<double> svm_lambdas = {0.1, 0.01, 0.001};
  int svm_epochs = 30;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct ExperimentResult {
  ClassifierModel model_kind = ClassifierModel::fc;
  AnyModel model;
  ClassifierMetrics test;
  std::optional<NegativeClassMetrics> negative;  // cnn1d-neg only
  std::vector<std::string> class_names;
  std::size_t outliers_removed = 0;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::size_t test_rows = 0;
  int best_epoch = 0;            // neural models
  double svm_lambda = 0.0;       // svm
};

// Every random choice (split, negative sampling, initialization, shuffling,
// bootstrap) derives from options.seed.
ExperimentResult run_classifier_experiment(ClassifierModel model, const Dataset& ds,
                                           const ExperimentOptions& options = {});

}  // namespace keydetect
