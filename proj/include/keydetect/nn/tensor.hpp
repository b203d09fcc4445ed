#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace keydetect::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

// Row-major dense array. The leading dimension of an activation tensor is
// the batch.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);  // ShapeMismatch on size

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  // Throws ValueError naming `what` on NaN / infinity.
  void require_finite(const std::string& what) const;
  void fill(double v);
};

}  // namespace keydetect::nn
