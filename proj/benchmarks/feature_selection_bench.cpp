#include <benchmark/benchmark.h>

#include <random>

#include "twinguard/feature_selection.hpp"
#include "twinguard/synthetic.hpp"

namespace {

using namespace twinguard;

void BM_RankFeatures(benchmark::State& state) {
  static const FeatureSchema schema = load_schema("synthetic-v1");
  std::mt19937_64 rng(2);
  const auto data = TrafficGenerator(schema).pool(100, 1000, 0, rng);
  const auto kind = kAllFsKinds[static_cast<std::size_t>(state.range(0))];
  for (auto _ : state) benchmark::DoNotOptimize(rank_features(kind, data));
  state.SetLabel(std::string(id(kind)));
}
BENCHMARK(BM_RankFeatures)->DenseRange(0, static_cast<int>(kAllFsKinds.size()) - 1)->Unit(benchmark::kMicrosecond);

}  // namespace
