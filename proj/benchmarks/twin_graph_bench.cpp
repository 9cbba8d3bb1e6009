#include <benchmark/benchmark.h>

#include <random>

#include "twinguard/synthetic.hpp"
#include "twinguard/twin_graph.hpp"

namespace {

using namespace twinguard;

void BM_SyncUpdate(benchmark::State& state) {
  static const FeatureSchema schema = load_schema("synthetic-v1");
  std::mt19937_64 rng(3);
  const auto records = TrafficGenerator(schema).pool(10, 100, 0, rng);
  TwinGraph twin(static_cast<std::size_t>(state.range(0)));
  twin.register_node("edge-1");
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(twin.sync_update("edge-1", records[i++ % records.size()]));
}
BENCHMARK(BM_SyncUpdate)->Arg(100)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
