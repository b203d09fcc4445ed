#include "keydetect/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "keydetect/errors.hpp"

namespace keydetect {

namespace {

struct KindName {
  DetectorKind kind;
  std::string_view id;
  std::string_view display;
};

constexpr KindName kKindNames[] = {
    {DetectorKind::euclidean, "euclidean", "Euclidean"},
    {DetectorKind::manhattan, "manhattan", "Manhattan"},
    {DetectorKind::scaled_manhattan, "scaled_manhattan", "Manhattan (Scaled)"},
    {DetectorKind::mahalanobis, "mahalanobis", "Mahalanobis"},
    {DetectorKind::mahalanobis_normed, "mahalanobis_normed", "Mahalanobis (Normed)"},
    {DetectorKind::zscore, "zscore", "Z-Score"},
};

bool is_mahalanobis(DetectorKind k) {
  return k == DetectorKind::mahalanobis || k == DetectorKind::mahalanobis_normed;
}

void check_dim(const StatDetectorModel& m, const Vector& x) {
  if (x.size() != m.dim()) {
    throw DimensionMismatch("vector has " + std::to_string(x.size()) +
                            " entries, model expects " + std::to_string(m.dim()));
  }
}

const Matrix& inverse_of(const StatDetectorModel& m) {
  if (!m.cov_inverse) throw ValueError("model has no inverse covariance");
  return *m.cov_inverse;
}

}  // namespace

std::string_view to_string(DetectorKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.id;
  }
  return "unknown";
}

std::string_view display_name(DetectorKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.display;
  }
  return "unknown";
}

DetectorKind parse_detector_kind(std::string_view name) {
  for (const auto& k : kKindNames) {
    if (k.id == name) return k.kind;
  }
  throw ValueError("unknown detector '" + std::string(name) + "'");
}

StatDetectorModel fit_stat_detector(DetectorKind kind, const Matrix& train,
                                    const StatDetectorOptions& options) {
  if (!(options.z_threshold > 0.0)) throw ValueError("z_threshold must be positive");
  StatDetectorModel m;
  m.kind = kind;
  m.z_threshold = options.z_threshold;
  m.stats = column_stats(train);
  if (is_mahalanobis(kind)) {
    Matrix s = covariance_matrix(train);
    s.diagonal().array() += options.covariance_epsilon;
    const Eigen::LDLT<Matrix> ldlt(s);
    if (ldlt.info() != Eigen::Success) {
      throw InsufficientData("regularized covariance is not invertible");
    }
    Matrix inv = ldlt.solve(Matrix::Identity(s.rows(), s.cols()));
    m.cov_inverse = (inv + inv.transpose()) * 0.5;
  }
  return m;
}

double score_euclidean(const StatDetectorModel& m, const Vector& x) {
  check_dim(m, x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - m.stats.mean[i];
    total += d * d;
  }
  return total;
}

double score_manhattan(const StatDetectorModel& m, const Vector& x) {
  check_dim(m, x);
  // Same loop as scaled Manhattan so unit MAD reproduces it bit for bit.
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) total += std::abs(x[i] - m.stats.mean[i]);
  return total;
}

double score_scaled_manhattan(const StatDetectorModel& m, const Vector& x) {
  check_dim(m, x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    total += std::abs(x[i] - m.stats.mean[i]) / std::max(m.stats.mad[i], kDeviationFloor);
  }
  return total;
}

double score_mahalanobis(const StatDetectorModel& m, const Vector& x) {
  check_dim(m, x);
  const Vector d = x - m.stats.mean;
  return d.dot(inverse_of(m) * d);
}

double score_mahalanobis_normed(const StatDetectorModel& m, const Vector& x) {
  check_dim(m, x);
  const double denom = x.norm() * m.stats.mean.norm();
  if (!(denom > 0.0)) throw DegenerateNorm("zero-norm test or mean vector");
  return score_mahalanobis(m, x) / denom;
}

double score_zscore_count(const StatDetectorModel& m, const Vector& x) {
  check_dim(m, x);
  int count = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double z = std::abs(x[i] - m.stats.mean[i]) / std::max(m.stats.std[i], kDeviationFloor);
    if (z > m.z_threshold) ++count;
  }
  return count;
}

double score(const StatDetectorModel& m, const Vector& x) {
  switch (m.kind) {
    case DetectorKind::euclidean: return score_euclidean(m, x);
    case DetectorKind::manhattan: return score_manhattan(m, x);
    case DetectorKind::scaled_manhattan: return score_scaled_manhattan(m, x);
    case DetectorKind::mahalanobis: return score_mahalanobis(m, x);
    case DetectorKind::mahalanobis_normed: return score_mahalanobis_normed(m, x);
    case DetectorKind::zscore: return score_zscore_count(m, x);
  }
  throw ValueError("unknown detector kind");
}

std::vector<double> score_rows(const StatDetectorModel& m, const Matrix& rows,
                               Exec exec) {
  const auto n = rows.rows();
  std::vector<double> out(static_cast<std::size_t>(n));
  if (exec == Exec::serial) {
    for (Eigen::Index r = 0; r < n; ++r) {
      out[static_cast<std::size_t>(r)] = score(m, rows.row(r).transpose());
    }
    return out;
  }
  // Exceptions may not cross the OpenMP region boundary.
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < n; ++r) {
    try {
      out[static_cast<std::size_t>(r)] = score(m, rows.row(r).transpose());
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace keydetect
