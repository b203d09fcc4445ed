#include "keydetect/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "keydetect/errors.hpp"
#include "keydetect/exec.hpp"
#include "keydetect/record_io.hpp"

namespace keydetect::nn {

namespace {

constexpr std::string_view kMagic = "KEYDETECT-NN";
constexpr int kVersion = 1;

template <class F>
decltype(auto) visit_layer(Layer& layer, F&& f) {
  return std::visit(std::forward<F>(f), layer);
}

}  // namespace

std::vector<Shape> Network::layer_shapes() const {
  if (input_shape.empty()) throw ShapeMismatch("network input shape is empty");
  std::vector<Shape> shapes;
  Shape s = input_shape;
  for (const auto& layer : layers) {
    s = std::visit([&](const auto& l) { return l.output_shape(s); }, layer);
    shapes.push_back(s);
  }
  return shapes;
}

Shape Network::output_shape() const {
  const auto shapes = layer_shapes();
  return shapes.empty() ? input_shape : shapes.back();
}

void Network::init(std::uint64_t seed) {
  layer_shapes();
  std::mt19937_64 rng(derive_seed(seed, 0x6e6e));
  for (auto& layer : layers) {
    if (auto* d = std::get_if<Dense>(&layer)) d->init(rng);
    if (auto* c = std::get_if<Conv1d>(&layer)) c->init(rng);
  }
}

Tensor Network::forward(const Tensor& batch, Exec exec) {
  bool ok = batch.rank() == input_shape.size() + 1;
  for (std::size_t i = 0; ok && i < input_shape.size(); ++i) ok = batch.shape[i + 1] == input_shape[i];
  if (!ok) {
    throw ShapeMismatch("network expects {batch}+" + shape_string(input_shape) + ", got " +
                        shape_string(batch.shape));
  }
  Tensor x = batch;
  for (auto& layer : layers) {
    x = visit_layer(layer, [&](auto& l) { return l.forward(x, exec); });
  }
  return x;
}

Tensor Network::backward(const Tensor& grad_out, Exec exec) {
  Tensor g = grad_out;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    g = visit_layer(*it, [&](auto& l) { return l.backward(g, exec); });
  }
  return g;
}

std::vector<ParamRef> Network::params() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    if (auto* d = std::get_if<Dense>(&layers[i])) {
      for (auto& p : d->params(prefix)) out.push_back(p);
    } else if (auto* c = std::get_if<Conv1d>(&layers[i])) {
      for (auto& p : c->params(prefix)) out.push_back(p);
    }
  }
  return out;
}

std::size_t Network::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.value->size();
  return n;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeMismatch("softmax expects {batch, classes}");
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  Tensor p(logits.shape);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* z = logits.ptr() + s * k;
    double* ps = p.ptr() + s * k;
    const double m = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += (ps[j] = std::exp(z[j] - m));
    for (std::size_t j = 0; j < k; ++j) ps[j] /= sum;
  }
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeMismatch("loss expects logits {batch, classes}");
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeMismatch("loss: " + std::to_string(labels.size()) + " labels for batch of " +
                        std::to_string(batch));
  }
  if (batch == 0) throw EmptySet("loss over an empty batch");
  LossResult r;
  r.grad = Tensor(logits.shape);
  const double inv = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t s = 0; s < batch; ++s) {
    const int y = labels[s];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ValueError("label " + std::to_string(y) + " outside [0," + std::to_string(k) + ")");
    }
    const double* z = logits.ptr() + s * k;
    double* g = r.grad.ptr() + s * k;
    const double m = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - m);
    const double log_sum = std::log(sum);
    total += -(z[y] - m - log_sum);
    for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(z[j] - m - log_sum) * inv;
    g[y] -= inv;
  }
  r.loss = total * inv;
  return r;
}

std::size_t argmax(std::span<const double> scores) {
  if (scores.empty()) throw EmptySet("argmax of an empty score vector");
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[best]) best = j;
  }
  return best;
}

GradCheckResult gradient_check(Network& net, const Tensor& batch, std::span<const int> labels,
                               const GradCheckOptions& options) {
  auto params = net.params();
  const Tensor logits = net.forward(batch, Exec::serial);
  net.backward(softmax_cross_entropy(logits, labels).grad, Exec::serial);

  std::vector<Tensor> analytic;
  for (const auto& p : params) analytic.push_back(*p.grad);
  if (options.tamper) {
    std::vector<ParamRef> refs;
    for (std::size_t i = 0; i < params.size(); ++i) refs.push_back({params[i].name, params[i].value, &analytic[i]});
    options.tamper(refs);
  }

  const auto loss_at = [&]() {
    return softmax_cross_entropy(net.forward(batch, Exec::serial), labels).loss;
  };
  const double h = options.step;
  GradCheckResult r;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& value = params[pi].value->data;
    for (std::size_t e = 0; e < value.size(); ++e) {
      const double saved = value[e];
      value[e] = saved + h;
      const double up = loss_at();
      value[e] = saved - h;
      const double down = loss_at();
      value[e] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[pi].data[e];
      const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
      ++r.entries;
      if (rel > r.max_relative_error) {
        r.max_relative_error = rel;
        r.worst_param = params[pi].name;
        r.worst_index = e;
        r.worst_analytic = an;
        r.worst_numeric = fd;
      }
    }
  }
  return r;
}

void write_network(std::ostream& out, const Network& net) {
  net.layer_shapes();
  out << kMagic << ' ' << kVersion << '\n';
  out << "input " << net.input_shape.size();
  for (auto d : net.input_shape) out << ' ' << d;
  out << '\n' << "layers " << net.layers.size() << '\n';
  for (const auto& layer : net.layers) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      out << "dense " << d->in << ' ' << d->out << '\n';
      write_array(out, "weight", d->weight.data);
      write_array(out, "bias", d->bias.data);
    } else if (const auto* c = std::get_if<Conv1d>(&layer)) {
      out << "conv1d " << c->in_channels << ' ' << c->out_channels << ' ' << c->kernel << ' '
          << c->padding << '\n';
      write_array(out, "weight", c->weight.data);
      write_array(out, "bias", c->bias.data);
    } else {
      out << layer_kind(layer) << '\n';
    }
  }
}

Network read_network(std::istream& in) {
  RecordReader rd(in, "network");
  const auto version = rd.expect(kMagic, 1);
  if (rd.to_int(version[0]) != kVersion) rd.fail("unsupported network version " + version[0]);
  Network net;
  const auto dims = rd.expect("input");
  if (dims.empty() || rd.to_int(dims[0]) != static_cast<long long>(dims.size() - 1)) {
    rd.fail("malformed input shape");
  }
  for (std::size_t i = 1; i < dims.size(); ++i) {
    const long long d = rd.to_int(dims[i]);
    if (d <= 0) rd.fail("input dimensions must be positive");
    net.input_shape.push_back(static_cast<std::size_t>(d));
  }
  const long long count = rd.expect_int("layers");
  if (count < 0) rd.fail("negative layer count");
  const auto positive = [&](const std::string& t) {
    const long long v = rd.to_int(t);
    if (v < 0) rd.fail("negative layer dimension");
    return static_cast<std::size_t>(v);
  };
  for (long long i = 0; i < count; ++i) {
    const auto tokens = rd.next();
    const std::string& kind = tokens[0];
    try {
      if (kind == "dense" && tokens.size() == 3) {
        Dense d(positive(tokens[1]), positive(tokens[2]));
        d.weight.data = rd.expect_array("weight", d.weight.size());
        d.bias.data = rd.expect_array("bias", d.bias.size());
        net.layers.emplace_back(std::move(d));
      } else if (kind == "conv1d" && tokens.size() == 5) {
        Conv1d c(positive(tokens[1]), positive(tokens[2]), positive(tokens[3]), positive(tokens[4]));
        c.weight.data = rd.expect_array("weight", c.weight.size());
        c.bias.data = rd.expect_array("bias", c.bias.size());
        net.layers.emplace_back(std::move(c));
      } else if (kind == "relu" && tokens.size() == 1) {
        net.layers.emplace_back(Relu{});
      } else if (kind == "flatten" && tokens.size() == 1) {
        net.layers.emplace_back(Flatten{});
      } else {
        rd.fail("unknown layer record '" + kind + "'");
      }
    } catch (const ValueError& e) {
      rd.fail(e.what());
    }
  }
  try {
    net.layer_shapes();
  } catch (const ShapeMismatch& e) {
    rd.fail(e.what());
  }
  return net;
}

}  // namespace keydetect::nn
