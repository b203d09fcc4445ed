// Serial reference path vs OpenMP path for the hot kernels. Each benchmark
// takes the Exec mode as its first argument (0 = serial, 1 = parallel).

#include <benchmark/benchmark.h>

#include <random>

#include "keydetect/classifiers.hpp"
#include "keydetect/detectors.hpp"
#include "keydetect/eval.hpp"
#include "keydetect/forest.hpp"
#include "keydetect/nn/network.hpp"
#include "keydetect/synthetic.hpp"

namespace kd = keydetect;

namespace {

kd::Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? kd::Exec::serial : kd::Exec::parallel;
}

const kd::Dataset& dataset() {
  static const kd::Dataset ds = kd::make_synthetic_dataset({});
  return ds;
}

kd::Matrix random_rows(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  kd::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

void BM_ScoreRows(benchmark::State& state) {
  const auto& ds = dataset();
  const auto model = kd::fit_stat_detector(kd::DetectorKind::mahalanobis, ds.rows_of(ds.subjects[0]));
  const kd::Matrix rows = random_rows(20000, kd::kFeatureCount, 1).array().abs() * 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(kd::score_rows(model, rows, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * rows.rows());
}

void BM_AnomalyBenchmark(benchmark::State& state) {
  const auto& ds = dataset();
  const auto detectors = kd::default_benchmark_detectors();
  for (auto _ : state) {
    benchmark::DoNotOptimize(kd::run_anomaly_benchmark(ds, detectors, {}, exec_of(state)));
  }
}

void BM_DenseForward(benchmark::State& state) {
  auto net = kd::build_fc(51);
  net.init(1);
  kd::nn::Tensor x({512, kd::kFeatureCount}, 0.0);
  const auto m = random_rows(512, kd::kFeatureCount, 2);
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = m.data()[i];
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * 512);
}

void BM_ConvForwardBackward(benchmark::State& state) {
  auto net = kd::build_cnn(51);
  net.init(1);
  kd::nn::Tensor x({64, 1, kd::kFeatureCount}, 0.0);
  const auto m = random_rows(64, kd::kFeatureCount, 3);
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = m.data()[i];
  std::vector<int> labels(64);
  for (int i = 0; i < 64; ++i) labels[static_cast<std::size_t>(i)] = i % 51;
  for (auto _ : state) {
    const auto logits = net.forward(x, exec_of(state));
    const auto loss = kd::nn::softmax_cross_entropy(logits, labels);
    net.backward(loss.grad, exec_of(state));
    benchmark::DoNotOptimize(loss.loss);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}

void BM_ForestTraining(benchmark::State& state) {
  const auto split = kd::make_class_split(dataset(), 42);
  kd::ForestOptions opt;
  opt.n_trees = 20;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kd::train_random_forest(split.train, split.n_classes(), opt, exec_of(state)));
  }
}

}  // namespace

BENCHMARK(BM_ScoreRows)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AnomalyBenchmark)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseForward)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvForwardBackward)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestTraining)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
