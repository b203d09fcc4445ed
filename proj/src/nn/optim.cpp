#include "keydetect/nn/optim.hpp"

#include <cmath>
#include <limits>

#include "keydetect/errors.hpp"

namespace keydetect::nn {

Adam::Adam(AdamOptions options) : options_(options) {
  if (!(options.lr > 0.0)) throw ValueError("adam learning rate must be positive");
  if (!(options.beta1 >= 0.0 && options.beta1 < 1.0) || !(options.beta2 >= 0.0 && options.beta2 < 1.0)) {
    throw ValueError("adam betas must lie in [0, 1)");
  }
}

void Adam::step(const std::vector<ParamRef>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->size(), 0.0);
      v_.emplace_back(p.value->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ShapeMismatch("adam: parameter list changed between steps");
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value->data;
    const auto& g = params[i].grad->data;
    auto& m = m_[i];
    auto& v = v_[i];
    if (w.size() != m.size() || g.size() != w.size()) {
      throw ShapeMismatch("adam: size of " + params[i].name + " changed");
    }
    for (std::size_t e = 0; e < w.size(); ++e) {
      m[e] = b1 * m[e] + (1.0 - b1) * g[e];
      v[e] = b2 * v[e] + (1.0 - b2) * g[e] * g[e];
      const double mh = m[e] / c1;
      const double vh = v[e] / c2;
      w[e] -= options_.lr * mh / (std::sqrt(vh) + options_.eps);
    }
  }
}

PlateauScheduler::PlateauScheduler(PlateauOptions options)
    : options_(options), best_(std::numeric_limits<double>::infinity()) {
  if (!(options.factor > 0.0 && options.factor < 1.0)) throw ValueError("plateau factor must lie in (0, 1)");
  if (options.patience < 1) throw ValueError("plateau patience must be >= 1");
}

double PlateauScheduler::step(double loss, double lr) {
  if (!started_ || loss < best_ - options_.threshold) {
    started_ = true;
    best_ = loss;
    bad_ = 0;
    return lr;
  }
  if (++bad_ >= options_.patience) {
    bad_ = 0;
    return std::max(lr * options_.factor, options_.min_lr);
  }
  return lr;
}

}  // namespace keydetect::nn
