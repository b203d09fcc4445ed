#pragma once

#include <random>
#include <string>
#include <variant>
#include <vector>

#include "keydetect/exec.hpp"
#include "keydetect/nn/tensor.hpp"

namespace keydetect::nn {

// A trainable array together with its gradient buffer.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

// y = W x + b with W of shape {out, in}. Input {batch, in}.
struct Dense {
  std::size_t in = 0, out = 0;
  Tensor weight, bias, grad_weight, grad_bias;
  Tensor input;  // cached by forward

  Dense() = default;
  Dense(std::size_t in_features, std::size_t out_features);
  Shape output_shape(const Shape& sample) const;
  Tensor forward(const Tensor& x, Exec exec);
  Tensor backward(const Tensor& grad_out, Exec exec);
  void init(std::mt19937_64& rng);
  std::vector<ParamRef> params(const std::string& prefix);
};

// Cross-correlation with zero padding, stride 1. Input {batch, in_ch, len},
// weight {out_ch, in_ch, kernel}; output length len + 2*padding - kernel + 1.
struct Conv1d {
  std::size_t in_channels = 0, out_channels = 0, kernel = 1, padding = 0;
  Tensor weight, bias, grad_weight, grad_bias;
  Tensor input;

  Conv1d() = default;
  Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel_size, std::size_t pad);
  Shape output_shape(const Shape& sample) const;
  Tensor forward(const Tensor& x, Exec exec);
  Tensor backward(const Tensor& grad_out, Exec exec);
  void init(std::mt19937_64& rng);
  std::vector<ParamRef> params(const std::string& prefix);
};

struct Relu {
  Tensor input;
  Shape output_shape(const Shape& sample) const { return sample; }
  Tensor forward(const Tensor& x, Exec exec);
  Tensor backward(const Tensor& grad_out, Exec exec);
};

// {batch, d1, d2, ...} -> {batch, d1*d2*...}
struct Flatten {
  Shape input_shape;
  Shape output_shape(const Shape& sample) const;
  Tensor forward(const Tensor& x, Exec exec);
  Tensor backward(const Tensor& grad_out, Exec exec);
};

using Layer = std::variant<Dense, Conv1d, Relu, Flatten>;

// "dense", "conv1d", "relu" or "flatten".
std::string layer_kind(const Layer& layer);

}  // namespace keydetect::nn
