#include <benchmark/benchmark.h>

#include "mlock/tinynet.hpp"

using namespace mlock;

namespace {

void BM_Forward(benchmark::State& state) {
  const BlobTask task = make_blobs({});
  const TinyNet net(kDefaultWidths, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, task.test));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(task.test.size()));
}

// One call runs both kernels; the counters carry their median latencies.
void BM_SparseVsEmulated(benchmark::State& state) {
  const double sparsity = static_cast<double>(state.range(1)) / 1000.0;
  SparseBenchResult r;
  for (auto _ : state) r = bench_sparse_vs_emulated(static_cast<unsigned>(state.range(0)), sparsity, 16, 3);
  state.counters["csr_s"] = r.real.latency_s;
  state.counters["emulated_s"] = r.emulated.latency_s;
  state.counters["speedup"] = r.emulated.latency_s / r.real.latency_s;
}

}  // namespace

BENCHMARK(BM_Forward);
BENCHMARK(BM_SparseVsEmulated)->Args({512, 900})->Args({2048, 995})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
