#pragma once

#include <vector>

#include "keydetect/stats.hpp"

namespace keydetect {

struct OcSvmOptions {
  double nu = 0.1;
  double gamma = 1.0 / 31.0;  // RBF width on standardized features
  double tolerance = 1e-4;    // KKT gap at which SMO stops
  long max_iterations = 10'000'000;
  bool standardize = true;
};

// nu-one-class SVM with an RBF kernel, normalized so that the multipliers
// sum to 1 and each lies in [0, 1/(nu*n)].
struct OcSvmModel {
  Matrix support_vectors;  // in the standardized space when shift/scale set
  std::vector<double> alphas;
  double rho = 0.0;
  double gamma = 1.0 / 31.0;
  double nu = 0.1;
  Vector shift;  // per-feature mean; empty when not standardized
  Vector scale;  // per-feature std (floored)
  long iterations = 0;
  double kkt_gap = 0.0;    // max violation at termination
  double tolerance = 1e-4; // solver KKT tolerance

  // sum alpha_i K(sv_i, x) - rho; negative outside the support region.
  double decision_value(const Vector& x) const;
  // Margin support vectors sit on the boundary only to within the solver
  // tolerance, so "outside" means a decision value below -tolerance.
  bool is_outlier(const Vector& x) const { return decision_value(x) < -tolerance; }
};

// SMO with second-order working-set selection over the full kernel matrix.
// Throws NonConvergence when max_iterations is reached and ValueError for
// nu outside (0, 1] or non-positive gamma.
OcSvmModel fit_ocsvm(const Matrix& train, const OcSvmOptions& options = {});

// rho - sum alpha_i K(sv_i, x): higher = more anomalous.
double score_ocsvm(const OcSvmModel& m, const Vector& x);

struct NuSelection {
  double nu = 0.1;
  std::vector<double> eers;  // one per grid value
};

// Fits on the first half of `train`, scores the second half against
// `impostors` and keeps the grid value with the lowest EER (first on ties).
NuSelection select_nu(const Matrix& train, const Matrix& impostors,
                      const std::vector<double>& grid, const OcSvmOptions& base = {});

}  // namespace keydetect
