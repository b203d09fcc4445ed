#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "keydetect/timing.hpp"

namespace keydetect {

using Vector = Eigen::VectorXd;
// Row-major sample matrix: one observation per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-column statistics with population (divisor n) conventions.
struct ColumnStats {
  Vector mean;  // y_i
  Vector std;   // s_i
  Vector mad;   // a_i: mean absolute deviation about the mean
  long count = 0;
};

// Throws InsufficientData for fewer than 2 rows.
ColumnStats column_stats(const Matrix& rows);

// Population covariance (divisor n), not regularized.
// Throws InsufficientData for fewer than 2 rows.
Matrix covariance_matrix(const Matrix& rows);

Matrix to_matrix(std::span<const TimingVector> rows);
Vector to_vector(const TimingVector& v);

}  // namespace keydetect
