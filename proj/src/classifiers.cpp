#include "keydetect/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "keydetect/detectors.hpp"
#include "keydetect/errors.hpp"

namespace keydetect {

using nn::Tensor;

Standardizer Standardizer::fit(const Matrix& train) {
  const ColumnStats st = column_stats(train);
  return {st.mean, st.std.cwiseMax(kDeviationFloor)};
}

Matrix Standardizer::apply(const Matrix& rows) const {
  if (rows.cols() != mean.size()) {
    throw DimensionMismatch("standardizer expects " + std::to_string(mean.size()) + " columns, got " +
                            std::to_string(rows.cols()));
  }
  return ((rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Vector Standardizer::apply(const Vector& x) const {
  if (x.size() != mean.size()) throw DimensionMismatch("standardizer dimension mismatch");
  return (x - mean).cwiseQuotient(scale);
}

std::string_view to_string(NnArch arch) { return arch == NnArch::fc ? "fc" : "cnn"; }

NnArch parse_nn_arch(std::string_view name) {
  if (name == "fc") return NnArch::fc;
  if (name == "cnn") return NnArch::cnn;
  throw ValueError("unknown network architecture '" + std::string(name) + "' (fc|cnn)");
}

nn::Network build_fc(std::size_t n_classes, std::size_t features) {
  nn::Network net;
  net.input_shape = {features};
  net.layers = {nn::Dense(features, 80), nn::Relu{}, nn::Dense(80, 60), nn::Relu{},
                nn::Dense(60, n_classes)};
  return net;
}

nn::Network build_cnn(std::size_t n_classes, std::size_t features) {
  nn::Network net;
  net.input_shape = {1, features};
  net.layers = {nn::Conv1d(1, 16, 3, 1),   nn::Relu{},       nn::Conv1d(16, 32, 3, 1),
                nn::Relu{},                nn::Flatten{},    nn::Dense(32 * features, 128),
                nn::Relu{},                nn::Dense(128, n_classes)};
  return net;
}

namespace {

Tensor gather(const Matrix& z, const nn::Shape& sample, std::span<const std::size_t> idx) {
  nn::Shape shape = {idx.size()};
  shape.insert(shape.end(), sample.begin(), sample.end());
  Tensor t(shape);
  const auto cols = static_cast<std::size_t>(z.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      t.data[i * cols + c] = z(static_cast<Eigen::Index>(idx[i]), static_cast<Eigen::Index>(c));
    }
  }
  return t;
}

constexpr std::size_t kEvalChunk = 512;

// Logits for every row, in chunks to bound activation memory.
Matrix logits_of(nn::Network& net, const Matrix& z, Exec exec) {
  const std::size_t n = static_cast<std::size_t>(z.rows());
  const std::size_t k = net.output_shape().at(0);
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t end = std::min(n, start + kEvalChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor y = net.forward(gather(z, net.input_shape, idx), exec);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        out(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(j)) = y.data[i * k + j];
      }
    }
  }
  return out;
}

double mean_loss(nn::Network& net, const Matrix& z, const std::vector<int>& y, Exec exec) {
  const Matrix logits = logits_of(net, z, exec);
  Tensor t({static_cast<std::size_t>(logits.rows()), static_cast<std::size_t>(logits.cols())});
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      t.data[static_cast<std::size_t>(r * logits.cols() + c)] = logits(r, c);
  return nn::softmax_cross_entropy(t, y).loss;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  std::vector<double> row(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    for (Eigen::Index c = 0; c < scores.cols(); ++c) row[static_cast<std::size_t>(c)] = scores(r, c);
    out[static_cast<std::size_t>(r)] = static_cast<int>(nn::argmax(row));
  }
  return out;
}

std::vector<std::vector<double>> snapshot(nn::Network& net) {
  std::vector<std::vector<double>> s;
  for (const auto& p : net.params()) s.push_back(p.value->data);
  return s;
}

void restore(nn::Network& net, const std::vector<std::vector<double>>& s) {
  auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value->data = s[i];
}

}  // namespace

Matrix NnClassifier::scores(const Matrix& rows, Exec exec) {
  return logits_of(network, standardizer.apply(rows), exec);
}

std::vector<int> NnClassifier::predict_rows(const Matrix& rows, Exec exec) {
  return argmax_rows(scores(rows, exec));
}

NnTrainResult train_nn(NnArch arch, const ClassSplit& split, const TrainConfig& config) {
  if (split.train.size() == 0) throw EmptySet("training split is empty");
  if (config.batch_size == 0) throw ValueError("batch size must be positive");
  if (config.max_epochs < 1) throw ValueError("max_epochs must be >= 1");
  const auto k = static_cast<std::size_t>(split.n_classes());
  if (k < 2) throw ValueError("need at least 2 classes");

  NnTrainResult result;
  NnClassifier& model = result.model;
  model.arch = arch;
  model.class_names = split.class_names;
  model.standardizer = Standardizer::fit(split.train.x);
  const auto features = static_cast<std::size_t>(split.train.x.cols());
  model.network = arch == NnArch::fc ? build_fc(k, features) : build_cnn(k, features);
  model.network.init(derive_seed(config.seed, 1));
  nn::Network& net = model.network;

  const Matrix z_train = model.standardizer.apply(split.train.x);
  const Matrix z_val = model.standardizer.apply(split.validation.x);
  const bool has_val = split.validation.size() > 0;

  nn::Adam adam(config.adam);
  nn::PlateauScheduler scheduler(config.plateau);
  const auto params = net.params();
  std::mt19937_64 order_rng(derive_seed(config.seed, 2));
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);

  double best = std::numeric_limits<double>::infinity();
  auto best_weights = snapshot(net);
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (auto i : idx) labels.push_back(split.train.y[i]);
      const Tensor logits = net.forward(gather(z_train, net.input_shape, idx), config.exec);
      const auto loss = nn::softmax_cross_entropy(logits, labels);
      if (!std::isfinite(loss.loss)) {
        throw Divergence("training loss became non-finite in epoch " + std::to_string(epoch));
      }
      loss_sum += loss.loss * static_cast<double>(idx.size());
      net.backward(loss.grad, config.exec);
      adam.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = adam.lr();
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.validation_loss = has_val ? mean_loss(net, z_val, split.validation.y, config.exec) : rec.train_loss;
    if (!std::isfinite(rec.validation_loss)) {
      throw Divergence("validation loss became non-finite in epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (config.on_epoch) config.on_epoch(rec);

    adam.set_lr(scheduler.step(rec.validation_loss, adam.lr()));
    if (rec.validation_loss < best) {
      best = rec.validation_loss;
      best_weights = snapshot(net);
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  restore(net, best_weights);
  if (split.test.size() > 0) {
    result.test = classifier_metrics(model.predict_rows(split.test.x, config.exec), split.test.y,
                                     split.n_classes());
  }
  return result;
}

ClassSplit build_negative_dataset(const Dataset& ds, const NegativeClassOptions& options) {
  std::vector<std::string> subjects = ds.subjects;
  std::sort(subjects.begin(), subjects.end());
  if (options.known_subjects == 0 || subjects.size() <= options.known_subjects) {
    throw InsufficientData("negative-class dataset needs more than " +
                           std::to_string(options.known_subjects) + " subjects, have " +
                           std::to_string(subjects.size()));
  }
  const std::size_t known = options.known_subjects;
  std::vector<std::string> names(subjects.begin(), subjects.begin() + static_cast<long>(known));
  names.emplace_back(kNegativeClassName);

  std::vector<std::pair<std::size_t, int>> picks;  // sample index, label
  for (std::size_t s = 0; s < known; ++s) {
    for (auto i : ds.indices_of(subjects[s])) picks.emplace_back(i, static_cast<int>(s));
  }
  std::mt19937_64 rng(derive_seed(options.seed, 0x6e6567));
  for (std::size_t s = known; s < subjects.size(); ++s) {
    auto idx = ds.indices_of(subjects[s]);
    if (idx.size() < options.per_other_subject) {
      throw InsufficientData("subject " + subjects[s] + " has " + std::to_string(idx.size()) +
                             " rows, negative class needs " + std::to_string(options.per_other_subject));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < options.per_other_subject; ++j) {
      picks.emplace_back(idx[j], static_cast<int>(known));
    }
  }

  LabeledSet pool;
  pool.x.resize(static_cast<Eigen::Index>(picks.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t r = 0; r < picks.size(); ++r) {
    const auto& sample = ds.samples[picks[r].first];
    pool.x.row(static_cast<Eigen::Index>(r)) = to_vector(sample.vector).transpose();
    pool.y.push_back(picks[r].second);
    pool.origin.push_back(sample.subject);
  }
  return stratified_split(pool, names, derive_seed(options.seed, 1), options.fractions);
}

NegativeClassMetrics evaluate_negative_class(std::span<const int> predictions,
                                             std::span<const int> labels, int n_classes,
                                             int negative_class) {
  if (negative_class < 0 || negative_class >= n_classes) {
    throw ValueError("negative class index outside the label range");
  }
  NegativeClassMetrics m;
  m.overall = classifier_metrics(predictions, labels, n_classes);
  const auto& c = m.overall.per_class[static_cast<std::size_t>(negative_class)];
  m.accuracy = m.overall.accuracy;
  m.recall = c.recall;
  m.precision = c.precision;
  m.f_score = c.f_score;
  return m;
}

}  // namespace keydetect
