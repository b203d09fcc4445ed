#include "keydetect/linear_svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "keydetect/errors.hpp"
#include "keydetect/nn/network.hpp"

namespace keydetect {

Vector LinearSvmModel::scores(const Vector& x) const {
  return weights * standardizer.apply(x) + bias;
}

int LinearSvmModel::predict(const Vector& x) const {
  const Vector s = scores(x);
  return static_cast<int>(nn::argmax(std::span<const double>(s.data(), static_cast<std::size_t>(s.size()))));
}

std::vector<int> LinearSvmModel::predict_rows(const Matrix& rows) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) out.push_back(predict(Vector(rows.row(r).transpose())));
  return out;
}

namespace {

// Highest-scoring wrong class; ties go to the lowest index.
Eigen::Index rival(const Vector& s, int y) {
  Eigen::Index best = -1;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (j == y) continue;
    if (best < 0 || s[j] > s[best]) best = j;
  }
  return best;
}

}  // namespace

double svm_objective(const Matrix& weights, const Vector& bias, double lambda, const Matrix& z,
                     std::span<const int> y) {
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Vector s = weights * z.row(i).transpose() + bias;
    const int yi = y[static_cast<std::size_t>(i)];
    const Eigen::Index j = rival(s, yi);
    hinge += std::max(0.0, 1.0 + s[j] - s[yi]);
  }
  return 0.5 * weights.squaredNorm() + lambda * hinge;
}

LinearSvmModel train_multiclass_svm(const LabeledSet& train, int n_classes, const SvmOptions& options) {
  if (train.size() == 0) throw EmptySet("training set is empty");
  if (n_classes < 2) throw ValueError("multiclass SVM needs at least 2 classes");
  if (!(options.lambda > 0.0)) throw ValueError("lambda must be positive");
  if (options.epochs < 1) throw ValueError("epochs must be >= 1");
  for (int label : train.y) {
    if (label < 0 || label >= n_classes) throw ValueError("label outside [0, n_classes)");
  }

  LinearSvmModel model;
  model.lambda = options.lambda;
  model.standardizer = Standardizer::fit(train.x);
  const Matrix z = model.standardizer.apply(train.x);
  const auto n = train.size();
  const Eigen::Index p = z.cols();
  const double mu = 1.0 / (options.lambda * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(mu);

  Matrix w = Matrix::Zero(n_classes, p);
  Vector b = Vector::Zero(n_classes);
  Matrix w_avg = w;
  Vector b_avg = b;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(options.seed, 0x73766d));

  long t = 0;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      ++t;
      const double eta = 1.0 / (mu * static_cast<double>(t));
      const auto zi = z.row(static_cast<Eigen::Index>(i));
      const int yi = train.y[i];
      const Vector s = w * zi.transpose() + b;
      const Eigen::Index j = rival(s, yi);
      const bool violated = 1.0 + s[j] - s[yi] > 0.0;
      w *= 1.0 - eta * mu;
      if (violated) {
        w.row(yi) += eta * zi;
        w.row(j) -= eta * zi;
        b[yi] += eta;
        b[j] -= eta;
      }
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
      const double rate = 2.0 / static_cast<double>(t + 1);
      w_avg += rate * (w - w_avg);
      b_avg += rate * (b - b_avg);
    }
    if (options.on_epoch) options.on_epoch(epoch, svm_objective(w_avg, b_avg, options.lambda, z, train.y));
  }
  model.weights = w_avg;
  model.bias = b_avg;
  return model;
}

SvmSelection select_svm_lambda(const ClassSplit& split, const std::vector<double>& grid,
                               const SvmOptions& base) {
  if (grid.empty()) throw ValueError("empty lambda grid");
  if (split.validation.size() == 0) throw EmptySet("lambda selection needs validation rows");
  SvmSelection sel;
  double best = -1.0;
  for (double lambda : grid) {
    SvmOptions o = base;
    o.lambda = lambda;
    LinearSvmModel m = train_multiclass_svm(split.train, split.n_classes(), o);
    const auto pred = m.predict_rows(split.validation.x);
    long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == split.validation.y[i];
    const double acc = static_cast<double>(correct) / static_cast<double>(pred.size());
    sel.validation_accuracy.push_back(acc);
    if (acc > best) {
      best = acc;
      sel.lambda = lambda;
      sel.model = std::move(m);
    }
  }
  return sel;
}

}  // namespace keydetect
