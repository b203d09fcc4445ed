#include "keydetect/stats.hpp"

#include <string>

#include "keydetect/errors.hpp"

namespace keydetect {

namespace {

// x0 + mean(x - x0): exact for constant columns, unlike sum / n.
Vector shifted_mean(const Matrix& rows) {
  const double n = static_cast<double>(rows.rows());
  const Vector first = rows.row(0).transpose();
  return first + ((rows.rowwise() - first.transpose()).colwise().sum().transpose() / n);
}

void require_rows(const Matrix& rows) {
  if (rows.rows() < 2) {
    throw InsufficientData("need at least 2 rows, got " +
                           std::to_string(rows.rows()));
  }
}

}  // namespace

ColumnStats column_stats(const Matrix& rows) {
  require_rows(rows);
  const double n = static_cast<double>(rows.rows());
  ColumnStats s;
  s.count = rows.rows();
  s.mean = shifted_mean(rows);
  const Matrix centered = rows.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().sum() / n).sqrt().transpose();
  s.mad = (centered.array().abs().colwise().sum() / n).transpose();
  return s;
}

Matrix covariance_matrix(const Matrix& rows) {
  require_rows(rows);
  const Vector mean = shifted_mean(rows);
  const Matrix centered = rows.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(rows.rows());
  // Exact symmetry regardless of summation order.
  return (cov + cov.transpose()) * 0.5;
}

Matrix to_matrix(std::span<const TimingVector> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

Vector to_vector(const TimingVector& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(kFeatureCount));
}

}  // namespace keydetect
