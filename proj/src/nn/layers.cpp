#include "keydetect/nn/layers.hpp"

#include <cmath>

#include "keydetect/errors.hpp"

namespace keydetect::nn {

namespace {

using idx = std::ptrdiff_t;

void glorot(Tensor& w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (auto& v : w.data) v = u(rng);
}

void require_batch_shape(const Tensor& x, const Shape& sample, const char* layer) {
  bool ok = x.rank() == sample.size() + 1;
  for (std::size_t i = 0; ok && i < sample.size(); ++i) ok = x.shape[i + 1] == sample[i];
  if (!ok) {
    throw ShapeMismatch(std::string(layer) + " expects {batch}+" + shape_string(sample) +
                        ", got " + shape_string(x.shape));
  }
}

}  // namespace

// Dense

Dense::Dense(std::size_t in_features, std::size_t out_features)
    : in(in_features), out(out_features),
      weight({out_features, in_features}), bias({out_features}),
      grad_weight({out_features, in_features}), grad_bias({out_features}) {
  if (in == 0 || out == 0) throw ValueError("dense layer needs positive dimensions");
}

Shape Dense::output_shape(const Shape& sample) const {
  if (sample != Shape{in}) {
    throw ShapeMismatch("dense(" + std::to_string(in) + "->" + std::to_string(out) +
                        ") cannot take " + shape_string(sample));
  }
  return {out};
}

void Dense::init(std::mt19937_64& rng) {
  glorot(weight, in, out, rng);
  bias.fill(0.0);
}

Tensor Dense::forward(const Tensor& x, Exec exec) {
  require_batch_shape(x, {in}, "dense");
  input = x;
  const idx batch = static_cast<idx>(x.dim(0));
  Tensor y({x.dim(0), out});
  const double* w = weight.ptr();
  const double* b = bias.ptr();
  const double* xp = x.ptr();
  double* yp = y.ptr();
  const std::size_t ni = in, no = out;
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (idx s = 0; s < batch; ++s) {
    const double* xs = xp + static_cast<std::size_t>(s) * ni;
    for (std::size_t o = 0; o < no; ++o) {
      const double* wo = w + o * ni;
      double acc = b[o];
      for (std::size_t i = 0; i < ni; ++i) acc += wo[i] * xs[i];
      yp[static_cast<std::size_t>(s) * no + o] = acc;
    }
  }
  return y;
}

Tensor Dense::backward(const Tensor& grad_out, Exec exec) {
  require_batch_shape(grad_out, {out}, "dense backward");
  if (input.rank() != 2 || input.dim(0) != grad_out.dim(0)) {
    throw ShapeMismatch("dense backward without a matching forward");
  }
  const std::size_t batch = grad_out.dim(0), ni = in, no = out;
  const double* g = grad_out.ptr();
  const double* xp = input.ptr();
  double* gw = grad_weight.ptr();
  double* gb = grad_bias.ptr();
  // Each output unit owns its row of the weight gradient, so the batch sum
  // runs in the same order whichever path is taken.
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (idx o = 0; o < static_cast<idx>(no); ++o) {
    double* row = gw + static_cast<std::size_t>(o) * ni;
    for (std::size_t i = 0; i < ni; ++i) row[i] = 0.0;
    double bsum = 0.0;
    for (std::size_t s = 0; s < batch; ++s) {
      const double go = g[s * no + static_cast<std::size_t>(o)];
      bsum += go;
      const double* xs = xp + s * ni;
      for (std::size_t i = 0; i < ni; ++i) row[i] += go * xs[i];
    }
    gb[o] = bsum;
  }
  Tensor dx({batch, ni});
  const double* w = weight.ptr();
  double* dxp = dx.ptr();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (idx s = 0; s < static_cast<idx>(batch); ++s) {
    double* d = dxp + static_cast<std::size_t>(s) * ni;
    for (std::size_t o = 0; o < no; ++o) {
      const double go = g[static_cast<std::size_t>(s) * no + o];
      const double* wo = w + o * ni;
      for (std::size_t i = 0; i < ni; ++i) d[i] += go * wo[i];
    }
  }
  return dx;
}

std::vector<ParamRef> Dense::params(const std::string& prefix) {
  return {{prefix + ".weight", &weight, &grad_weight}, {prefix + ".bias", &bias, &grad_bias}};
}

// Conv1d

Conv1d::Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel_size, std::size_t pad)
    : in_channels(in_ch), out_channels(out_ch), kernel(kernel_size), padding(pad),
      weight({out_ch, in_ch, kernel_size}), bias({out_ch}),
      grad_weight({out_ch, in_ch, kernel_size}), grad_bias({out_ch}) {
  if (in_ch == 0 || out_ch == 0) throw ValueError("conv1d needs positive channel counts");
  if (kernel_size == 0) throw ValueError("conv1d kernel must be >= 1");
}

Shape Conv1d::output_shape(const Shape& sample) const {
  if (sample.size() != 2 || sample[0] != in_channels) {
    throw ShapeMismatch("conv1d(" + std::to_string(in_channels) + "->" +
                        std::to_string(out_channels) + ") cannot take " + shape_string(sample));
  }
  if (sample[1] + 2 * padding < kernel) {
    throw ShapeMismatch("conv1d kernel longer than padded input " + shape_string(sample));
  }
  return {out_channels, sample[1] + 2 * padding - kernel + 1};
}

void Conv1d::init(std::mt19937_64& rng) {
  glorot(weight, in_channels * kernel, out_channels * kernel, rng);
  bias.fill(0.0);
}

Tensor Conv1d::forward(const Tensor& x, Exec exec) {
  if (x.rank() != 3) throw ShapeMismatch("conv1d expects {batch, channels, length}, got " + shape_string(x.shape));
  const Shape os = output_shape({x.dim(1), x.dim(2)});
  input = x;
  const std::size_t batch = x.dim(0), len = x.dim(2), olen = os[1];
  const std::size_t ci_n = in_channels, co_n = out_channels, k_n = kernel;
  const idx pad = static_cast<idx>(padding);
  Tensor y({batch, co_n, olen});
  const double* xp = x.ptr();
  const double* w = weight.ptr();
  const double* b = bias.ptr();
  double* yp = y.ptr();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (idx s = 0; s < static_cast<idx>(batch); ++s) {
    for (std::size_t co = 0; co < co_n; ++co) {
      double* yo = yp + (static_cast<std::size_t>(s) * co_n + co) * olen;
      for (std::size_t t = 0; t < olen; ++t) yo[t] = b[co];
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        const double* xc = xp + (static_cast<std::size_t>(s) * ci_n + ci) * len;
        for (std::size_t k = 0; k < k_n; ++k) {
          const double wk = w[(co * ci_n + ci) * k_n + k];
          // input index = t + k - pad must lie in [0, len)
          const idx off = static_cast<idx>(k) - pad;
          const idx t0 = std::max<idx>(0, -off);
          const idx t1 = std::min<idx>(static_cast<idx>(olen), static_cast<idx>(len) - off);
          for (idx t = t0; t < t1; ++t) yo[t] += wk * xc[t + off];
        }
      }
    }
  }
  return y;
}

Tensor Conv1d::backward(const Tensor& grad_out, Exec exec) {
  if (input.rank() != 3) throw ShapeMismatch("conv1d backward without a forward");
  const std::size_t batch = input.dim(0), len = input.dim(2);
  const Shape os = output_shape({input.dim(1), len});
  require_batch_shape(grad_out, os, "conv1d backward");
  if (grad_out.dim(0) != batch) throw ShapeMismatch("conv1d backward batch differs from forward");
  const std::size_t olen = os[1], ci_n = in_channels, co_n = out_channels, k_n = kernel;
  const idx pad = static_cast<idx>(padding);
  const double* g = grad_out.ptr();
  const double* xp = input.ptr();
  double* gw = grad_weight.ptr();
  double* gb = grad_bias.ptr();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (idx co = 0; co < static_cast<idx>(co_n); ++co) {
    const std::size_t c = static_cast<std::size_t>(co);
    double bsum = 0.0;
    for (std::size_t i = 0; i < ci_n * k_n; ++i) gw[c * ci_n * k_n + i] = 0.0;
    for (std::size_t s = 0; s < batch; ++s) {
      const double* go = g + (s * co_n + c) * olen;
      for (std::size_t t = 0; t < olen; ++t) bsum += go[t];
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        const double* xc = xp + (s * ci_n + ci) * len;
        for (std::size_t k = 0; k < k_n; ++k) {
          const idx off = static_cast<idx>(k) - pad;
          const idx t0 = std::max<idx>(0, -off);
          const idx t1 = std::min<idx>(static_cast<idx>(olen), static_cast<idx>(len) - off);
          double acc = 0.0;
          for (idx t = t0; t < t1; ++t) acc += go[t] * xc[t + off];
          gw[(c * ci_n + ci) * k_n + k] += acc;
        }
      }
    }
    gb[c] = bsum;
  }
  Tensor dx({batch, ci_n, len});
  const double* w = weight.ptr();
  double* dxp = dx.ptr();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (idx s = 0; s < static_cast<idx>(batch); ++s) {
    for (std::size_t co = 0; co < co_n; ++co) {
      const double* go = g + (static_cast<std::size_t>(s) * co_n + co) * olen;
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        double* dc = dxp + (static_cast<std::size_t>(s) * ci_n + ci) * len;
        for (std::size_t k = 0; k < k_n; ++k) {
          const double wk = w[(co * ci_n + ci) * k_n + k];
          const idx off = static_cast<idx>(k) - pad;
          const idx t0 = std::max<idx>(0, -off);
          const idx t1 = std::min<idx>(static_cast<idx>(olen), static_cast<idx>(len) - off);
          for (idx t = t0; t < t1; ++t) dc[t + off] += wk * go[t];
        }
      }
    }
  }
  return dx;
}

std::vector<ParamRef> Conv1d::params(const std::string& prefix) {
  return {{prefix + ".weight", &weight, &grad_weight}, {prefix + ".bias", &bias, &grad_bias}};
}

// Relu

Tensor Relu::forward(const Tensor& x, Exec exec) {
  input = x;
  Tensor y = x;
  const idx n = static_cast<idx>(y.size());
  double* p = y.ptr();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (idx i = 0; i < n; ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
  return y;
}

Tensor Relu::backward(const Tensor& grad_out, Exec exec) {
  if (grad_out.shape != input.shape) {
    throw ShapeMismatch("relu backward: " + shape_string(grad_out.shape) + " vs forward " +
                        shape_string(input.shape));
  }
  Tensor dx = grad_out;
  const idx n = static_cast<idx>(dx.size());
  double* d = dx.ptr();
  const double* x = input.ptr();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (idx i = 0; i < n; ++i) {
    if (!(x[i] > 0.0)) d[i] = 0.0;
  }
  return dx;
}

// Flatten

Shape Flatten::output_shape(const Shape& sample) const { return {element_count(sample)}; }

Tensor Flatten::forward(const Tensor& x, Exec) {
  if (x.rank() < 1) throw ShapeMismatch("flatten needs a batch dimension");
  input_shape = x.shape;
  Tensor y = x;
  y.shape = {x.dim(0), x.dim(0) ? x.size() / x.dim(0) : 0};
  return y;
}

Tensor Flatten::backward(const Tensor& grad_out, Exec) {
  if (grad_out.size() != element_count(input_shape)) {
    throw ShapeMismatch("flatten backward: " + shape_string(grad_out.shape) + " vs forward " +
                        shape_string(input_shape));
  }
  Tensor dx = grad_out;
  dx.shape = input_shape;
  return dx;
}

std::string layer_kind(const Layer& layer) {
  struct {
    std::string operator()(const Dense&) const { return "dense"; }
    std::string operator()(const Conv1d&) const { return "conv1d"; }
    std::string operator()(const Relu&) const { return "relu"; }
    std::string operator()(const Flatten&) const { return "flatten"; }
  } v;
  return std::visit(v, layer);
}

}  // namespace keydetect::nn
