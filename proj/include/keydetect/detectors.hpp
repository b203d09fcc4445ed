#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "keydetect/exec.hpp"
#include "keydetect/stats.hpp"

namespace keydetect {

enum class DetectorKind {
  euclidean,
  manhattan,
  scaled_manhattan,
  mahalanobis,
  mahalanobis_normed,
  zscore,
};

inline constexpr DetectorKind kAllStatDetectors[] = {
    DetectorKind::euclidean,   DetectorKind::manhattan,
    DetectorKind::scaled_manhattan, DetectorKind::mahalanobis,
    DetectorKind::mahalanobis_normed, DetectorKind::zscore};

std::string_view to_string(DetectorKind kind);
// Accepts the identifiers returned by to_string. Throws ValueError.
DetectorKind parse_detector_kind(std::string_view name);
// Human label used in report tables ("Manhattan (Scaled)", ...).
std::string_view display_name(DetectorKind kind);

inline constexpr double kCovarianceEpsilon = 1e-6;
inline constexpr double kDeviationFloor = 1e-6;
inline constexpr double kDefaultZThreshold = 1.96;

struct StatDetectorOptions {
  double z_threshold = kDefaultZThreshold;
  double covariance_epsilon = kCovarianceEpsilon;
};

// Trained per-subject statistics. Scores are oriented so that higher means
// more anomalous.
struct StatDetectorModel {
  DetectorKind kind = DetectorKind::euclidean;
  ColumnStats stats;
  std::optional<Matrix> cov_inverse;  // present iff a Mahalanobis kind
  double z_threshold = kDefaultZThreshold;

  Eigen::Index dim() const { return stats.mean.size(); }
};

// Throws InsufficientData for fewer than 2 rows.
StatDetectorModel fit_stat_detector(DetectorKind kind, const Matrix& train,
                                    const StatDetectorOptions& options = {});

// Each throws DimensionMismatch when x does not match the model.
double score_euclidean(const StatDetectorModel& m, const Vector& x);
double score_manhattan(const StatDetectorModel& m, const Vector& x);
double score_scaled_manhattan(const StatDetectorModel& m, const Vector& x);
double score_mahalanobis(const StatDetectorModel& m, const Vector& x);
// Throws DegenerateNorm when x or the mean is the zero vector.
double score_mahalanobis_normed(const StatDetectorModel& m, const Vector& x);
double score_zscore_count(const StatDetectorModel& m, const Vector& x);

// Dispatches on m.kind.
double score(const StatDetectorModel& m, const Vector& x);

// Scores every row; the parallel path splits rows across OpenMP threads.
std::vector<double> score_rows(const StatDetectorModel& m, const Matrix& rows,
                               Exec exec = Exec::serial);

}  // namespace keydetect
