#include "keydetect/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "keydetect/detectors.hpp"
#include "keydetect/errors.hpp"
#include "keydetect/eval.hpp"

namespace keydetect {

namespace {

constexpr double kTau = 1e-12;

Vector standardized(const OcSvmModel& m, const Vector& x) {
  if (m.shift.size() == 0) return x;
  return (x - m.shift).cwiseQuotient(m.scale);
}

double rbf(double gamma, const auto& a, const auto& b) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

}  // namespace

double OcSvmModel::decision_value(const Vector& x) const {
  if (x.size() != support_vectors.cols()) {
    throw DimensionMismatch("vector has " + std::to_string(x.size()) +
                            " entries, model expects " +
                            std::to_string(support_vectors.cols()));
  }
  const Vector z = standardized(*this, x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
    sum += alphas[static_cast<std::size_t>(i)] *
           rbf(gamma, support_vectors.row(i).transpose(), z);
  }
  return sum - rho;
}

double score_ocsvm(const OcSvmModel& m, const Vector& x) { return -m.decision_value(x); }

OcSvmModel fit_ocsvm(const Matrix& train, const OcSvmOptions& options) {
  if (!(options.nu > 0.0 && options.nu <= 1.0)) throw ValueError("nu must lie in (0, 1]");
  if (!(options.gamma > 0.0)) throw ValueError("gamma must be positive");
  if (train.rows() < 2) throw InsufficientData("one-class SVM needs at least 2 rows");

  OcSvmModel model;
  model.nu = options.nu;
  model.gamma = options.gamma;
  model.tolerance = options.tolerance;

  Matrix x = train;
  if (options.standardize) {
    const ColumnStats st = column_stats(train);
    model.shift = st.mean;
    model.scale = st.std.cwiseMax(kDeviationFloor);
    x = (x.rowwise() - model.shift.transpose()).array().rowwise() /
        model.scale.transpose().array();
  }

  const Eigen::Index n = x.rows();
  Matrix q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    q(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      q(i, j) = q(j, i) = rbf(options.gamma, x.row(i), x.row(j));
    }
  }

  const double upper = 1.0 / (options.nu * static_cast<double>(n));
  Vector alpha = Vector::Zero(n);
  double remaining = 1.0;
  for (Eigen::Index i = 0; i < n && remaining > 0.0; ++i) {
    alpha[i] = std::min(upper, remaining);
    remaining -= alpha[i];
  }
  Vector grad = q * alpha;

  const auto below_upper = [&](Eigen::Index t) { return alpha[t] < upper; };
  const auto above_zero = [&](Eigen::Index t) { return alpha[t] > 0.0; };

  long iter = 0;
  double gap = 0.0;
  while (true) {
    // i: most negative gradient among variables that may grow.
    Eigen::Index i = -1;
    double g_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (below_upper(t) && grad[t] < g_min) {
        g_min = grad[t];
        i = t;
      }
    }
    // j: second-order choice among variables that may shrink.
    Eigen::Index j = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    double best_gain = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!above_zero(t)) continue;
      g_max = std::max(g_max, grad[t]);
      if (i < 0) continue;
      const double b = grad[t] - g_min;
      if (b <= 0.0) continue;
      const double a = std::max(q(i, i) + q(t, t) - 2.0 * q(i, t), kTau);
      const double gain = b * b / a;
      if (gain > best_gain) {
        best_gain = gain;
        j = t;
      }
    }
    gap = (i < 0) ? 0.0 : g_max - g_min;
    if (gap < options.tolerance || j < 0) break;
    if (iter >= options.max_iterations) {
      throw NonConvergence("one-class SVM did not converge after " +
                           std::to_string(iter) + " iterations (gap " +
                           std::to_string(gap) + ")");
    }
    ++iter;

    const double a = std::max(q(i, i) + q(j, j) - 2.0 * q(i, j), kTau);
    double delta = (grad[j] - grad[i]) / a;
    delta = std::min({delta, upper - alpha[i], alpha[j]});
    if (upper - alpha[i] == delta) {
      alpha[j] -= delta;
      alpha[i] = upper;
    } else if (alpha[j] == delta) {
      alpha[i] += delta;
      alpha[j] = 0.0;
    } else {
      alpha[i] += delta;
      alpha[j] -= delta;
    }
    grad += delta * (q.col(i) - q.col(j));
  }

  // Offset: mean gradient over free multipliers, else the bound midpoint.
  double free_sum = 0.0;
  long free_count = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] >= upper) {
      lb = std::max(lb, grad[t]);
    } else if (alpha[t] <= 0.0) {
      ub = std::min(ub, grad[t]);
    } else {
      free_sum += grad[t];
      ++free_count;
    }
  }
  model.rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
  model.iterations = iter;
  model.kkt_gap = gap;

  std::vector<Eigen::Index> support;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) support.push_back(t);
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), x.cols());
  for (std::size_t s = 0; s < support.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(support[s]);
    model.alphas.push_back(alpha[support[s]]);
  }
  return model;
}

NuSelection select_nu(const Matrix& train, const Matrix& impostors,
                      const std::vector<double>& grid, const OcSvmOptions& base) {
  if (grid.empty()) throw ValueError("empty nu grid");
  const Eigen::Index half = train.rows() / 2;
  const Matrix fit_rows = train.topRows(half);
  const Matrix held_out = train.bottomRows(train.rows() - half);

  NuSelection sel;
  double best = std::numeric_limits<double>::infinity();
  for (double nu : grid) {
    OcSvmOptions opt = base;
    opt.nu = nu;
    const OcSvmModel m = fit_ocsvm(fit_rows, opt);
    ScoredTestSet s;
    for (Eigen::Index r = 0; r < held_out.rows(); ++r) {
      s.genuine.push_back(score_ocsvm(m, held_out.row(r).transpose()));
    }
    for (Eigen::Index r = 0; r < impostors.rows(); ++r) {
      s.impostor.push_back(score_ocsvm(m, impostors.row(r).transpose()));
    }
    const double eer = equal_error_rate(s);
    sel.eers.push_back(eer);
    if (eer < best) {
      best = eer;
      sel.nu = nu;
    }
  }
  return sel;
}

}  // namespace keydetect
