#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "twinguard/classifier_suite.hpp"
#include "twinguard/synthetic.hpp"

namespace {

using namespace twinguard;

const FeatureSchema& schema() {
  static const FeatureSchema s = load_schema("synthetic-v1");
  return s;
}

const std::vector<FlowRecord>& pool() {
  static const std::vector<FlowRecord> p = [] {
    std::mt19937_64 rng(1);
    return TrafficGenerator(schema()).pool(100, 1000, 0, rng);
  }();
  return p;
}

void BM_Predict(benchmark::State& state) {
  const auto kind = kAllClassifierKinds[static_cast<std::size_t>(state.range(0))];
  std::vector<std::size_t> features(10);
  std::iota(features.begin(), features.end(), 0);
  const auto model = fit(kind, pool(), features, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict(pool()[i++ % pool().size()]));
  }
  state.SetLabel(std::string(id(kind)));
}
BENCHMARK(BM_Predict)->DenseRange(0, static_cast<int>(kAllClassifierKinds.size()) - 1);

void BM_Fit(benchmark::State& state) {
  const auto kind = kAllClassifierKinds[static_cast<std::size_t>(state.range(0))];
  std::vector<std::size_t> features(10);
  std::iota(features.begin(), features.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(fit(kind, pool(), features, 1));
  state.SetLabel(std::string(id(kind)));
}
BENCHMARK(BM_Fit)->DenseRange(0, static_cast<int>(kAllClassifierKinds.size()) - 1)->Unit(benchmark::kMillisecond);

}  // namespace
