#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "keydetect/classifiers.hpp"

namespace keydetect {

// Crammer-Singer multiclass linear SVM on standardized features.
struct LinearSvmModel {
  Standardizer standardizer;
  Matrix weights;  // {n_classes, features}
  Vector bias;     // unregularized per-class offset
  double lambda = 0.01;

  int n_classes() const { return static_cast<int>(weights.rows()); }
  // w_j . x + b_j for every class, on raw (unstandardized) input.
  Vector scores(const Vector& x) const;
  // argmax of scores; ties go to the lowest class index.
  int predict(const Vector& x) const;
  std::vector<int> predict_rows(const Matrix& rows) const;
};

struct SvmOptions {
  double lambda = 0.01;  // weight of the summed hinge losses
  int epochs = 30;
  std::uint64_t seed = 42;
  // Called after every epoch with the objective of the averaged iterate.
  std::function<void(int epoch, double objective)> on_epoch;
};

// 0.5 * sum_j |w_j|^2 + lambda * sum_i max(0, 1 + max_{j != y_i} s_j(x_i) - s_{y_i}(x_i))
// evaluated on already standardized rows.
double svm_objective(const Matrix& weights, const Vector& bias, double lambda,
                     const Matrix& z, std::span<const int> y);

// Stochastic subgradient descent on the objective above divided by
// lambda * N (step 1/(mu t), mu = 1/(lambda N), weights projected onto the
// ball of radius 1/sqrt(mu)). Returns the t-weighted average of the iterates.
// Rows are visited in a seeded random order each epoch.
LinearSvmModel train_multiclass_svm(const LabeledSet& train, int n_classes,
                                    const SvmOptions& options = {});

struct SvmSelection {
  LinearSvmModel model;
  double lambda = 0.0;
  std::vector<double> validation_accuracy;  // one per grid value
};

// Trains one model per lambda on the train part and keeps the one with the
// best validation accuracy (earliest grid entry on ties).
SvmSelection select_svm_lambda(const ClassSplit& split, const std::vector<double>& grid = {0.1, 0.01, 0.001},
                               const SvmOptions& base = {});

}  // namespace keydetect
