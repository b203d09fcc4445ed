#include "keydetect/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "keydetect/errors.hpp"

namespace keydetect::nn {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "{";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "}";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(element_count(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != element_count(shape)) {
    throw ShapeMismatch("tensor " + shape_string(shape) + " given " +
                        std::to_string(data.size()) + " values");
  }
}

void Tensor::require_finite(const std::string& what) const {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ValueError(what + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

}  // namespace keydetect::nn
