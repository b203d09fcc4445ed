#pragma once

#include <vector>

#include "keydetect/nn/layers.hpp"

namespace keydetect::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment buffers are matched to parameters by position,
// so the same parameter list must be passed on every step.
class Adam {
 public:
  explicit Adam(AdamOptions options = {});
  void step(const std::vector<ParamRef>& params);
  double lr() const { return options_.lr; }
  void set_lr(double lr) { options_.lr = lr; }
  long steps() const { return t_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct PlateauOptions {
  double factor = 0.1;
  int patience = 5;
  double threshold = 1e-4;  // absolute improvement that counts
  double min_lr = 1e-6;
};

// Multiplies the learning rate by `factor` once the monitored loss has gone
// `patience` consecutive epochs without improving on the best value by at
// least `threshold`. The counter restarts after every reduction.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauOptions options = {});
  // Returns the learning rate to use from the next epoch on.
  double step(double loss, double lr);
  int bad_epochs() const { return bad_; }
  double best() const { return best_; }

 private:
  PlateauOptions options_;
  double best_;
  int bad_ = 0;
  bool started_ = false;
};

}  // namespace keydetect::nn
