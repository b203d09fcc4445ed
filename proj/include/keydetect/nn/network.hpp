#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "keydetect/nn/layers.hpp"

namespace keydetect::nn {

// Sequential stack. input_shape is the per-sample shape, e.g. {31} for a
// dense stack or {1, 31} for a conv stack.
struct Network {
  Shape input_shape;
  std::vector<Layer> layers;

  // Per-sample output shape after each layer; ShapeMismatch if the stack is
  // inconsistent.
  std::vector<Shape> layer_shapes() const;
  Shape output_shape() const;

  // Glorot-uniform weights, zero biases.
  void init(std::uint64_t seed);
  // batch: {batch, input_shape...}. Caches activations for backward.
  Tensor forward(const Tensor& batch, Exec exec = Exec::parallel);
  // Accumulates nothing: parameter gradients are overwritten. Returns the
  // gradient with respect to the network input.
  Tensor backward(const Tensor& grad_out, Exec exec = Exec::parallel);
  std::vector<ParamRef> params();
  std::size_t parameter_count();
};

struct LossResult {
  double loss = 0.0;  // mean over the batch
  Tensor grad;        // d loss / d logits
};

// Mean of -log softmax(logits)[label] over the batch, stabilized by
// max-subtraction. logits {batch, classes}.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Softmax of each row of {batch, classes}.
Tensor softmax(const Tensor& logits);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> scores);

struct GradCheckOptions {
  double step = 1e-5;
  // Called on the analytic gradients before comparison; lets tests corrupt
  // them to prove the check can fail.
  std::function<void(std::vector<ParamRef>&)> tamper;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;  // gradients at the worst entry
  double worst_numeric = 0.0;
  std::size_t entries = 0;
};

// Central finite differences of the softmax cross-entropy loss against
// backward, over every parameter entry:
//   max |g_an - g_fd| / max(|g_an|, |g_fd|, 1e-8).
GradCheckResult gradient_check(Network& net, const Tensor& batch, std::span<const int> labels,
                               const GradCheckOptions& options = {});

// Versioned text layout (see docs/formats.md). Round-trip is exact.
void write_network(std::ostream& out, const Network& net);
Network read_network(std::istream& in);

}  // namespace keydetect::nn
