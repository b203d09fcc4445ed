#include "keydetect/experiments.hpp"

#include "keydetect/errors.hpp"
#include "keydetect/forest.hpp"
#include "keydetect/linear_svm.hpp"

namespace keydetect {

std::string_view to_string(ClassifierModel m) {
  switch (m) {
    case ClassifierModel::fc: return "fc";
    case ClassifierModel::cnn1d: return "cnn1d";
    case ClassifierModel::cnn1d_neg: return "cnn1d-neg";
    case ClassifierModel::rf: return "rf";
    case ClassifierModel::svm: return "svm";
  }
  return "?";
}

ClassifierModel parse_classifier_model(std::string_view name) {
  for (auto m : {ClassifierModel::fc, ClassifierModel::cnn1d, ClassifierModel::cnn1d_neg,
                 ClassifierModel::rf, ClassifierModel::svm}) {
    if (to_string(m) == name) return m;
  }
  throw ValueError("unknown model '" + std::string(name) + "' (fc, cnn1d, cnn1d-neg, rf, svm)");
}

ExperimentResult run_classifier_experiment(ClassifierModel model, const Dataset& input,
                                           const ExperimentOptions& options) {
  ExperimentResult r;
  r.model_kind = model;
  Dataset filtered;
  if (options.outlier_z) {
    auto f = filter_outliers(input, *options.outlier_z);
    r.outliers_removed = f.removed;
    filtered = std::move(f.dataset);
  }
  const Dataset& ds = options.outlier_z ? filtered : input;
  ClassSplit split;
  if (model == ClassifierModel::cnn1d_neg) {
    NegativeClassOptions neg;
    neg.seed = options.seed;
    split = build_negative_dataset(ds, neg);
  } else {
    split = make_class_split(ds, options.seed);
  }
  r.class_names = split.class_names;
  r.train_rows = split.train.size();
  r.validation_rows = split.validation.size();
  r.test_rows = split.test.size();
  const int k = split.n_classes();

  std::vector<int> predictions;
  switch (model) {
    case ClassifierModel::fc:
    case ClassifierModel::cnn1d:
    case ClassifierModel::cnn1d_neg: {
      TrainConfig cfg;
      cfg.seed = options.seed;
      cfg.exec = options.exec;
      cfg.max_epochs = options.max_epochs;
      cfg.on_epoch = options.on_epoch;
      auto nn = train_nn(model == ClassifierModel::fc ? NnArch::fc : NnArch::cnn, split, cfg);
      r.best_epoch = nn.best_epoch;
      predictions = nn.model.predict_rows(split.test.x, options.exec);
      r.model = std::move(nn.model);
      break;
    }
    case ClassifierModel::rf: {
      ForestOptions fo;
      fo.n_trees = options.n_trees;
      fo.seed = options.seed;
      auto forest = train_random_forest(split.train, k, fo, options.exec);
      predictions = forest.predict_rows(split.test.x, options.exec);
      r.model = std::move(forest);
      break;
    }
    case ClassifierModel::svm: {
      SvmOptions so;
      so.seed = options.seed;
      so.epochs = options.svm_epochs;
      auto sel = select_svm_lambda(split, options.svm_lambdas, so);
      r.svm_lambda = sel.lambda;
      predictions = sel.model.predict_rows(split.test.x);
      r.model = std::move(sel.model);
      break;
    }
  }
  r.test = classifier_metrics(predictions, split.test.y, k);
  if (model == ClassifierModel::cnn1d_neg) {
    const int negative = split.label_map.at(kNegativeClassName);
    r.negative = evaluate_negative_class(predictions, split.test.y, k, negative);
  }
  return r;
}

}  // namespace keydetect
