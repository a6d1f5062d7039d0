#include <benchmark/benchmark.h>

#include <random>

#include "mlock/distinguisher.hpp"
#include "mlock/transform.hpp"

using namespace mlock;

namespace {

ParamStore gaussian_store(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> normal(0.0f, 0.05f);
  std::vector<float> v(n);
  for (auto& x : v) x = normal(rng);
  ParamStore s;
  s.add_fp32("w", {n}, v);
  return s;
}

const Key256 kKey = [] {
  Key256 k{};
  k[0] = 42;
  return k;
}();

void BM_Lock(benchmark::State& state, TransformKind kind) {
  const ParamStore s = gaussian_store(static_cast<std::size_t>(state.range(0)));
  std::optional<PreTransform> pre;
  if (kind == TransformKind::PretransformedAES) pre = build_empirical_pretransform(s, 32);
  for (auto _ : state) benchmark::DoNotOptimize(lock(s, kKey, kind, pre, Nonce{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Unlock(benchmark::State& state, TransformKind kind) {
  const ParamStore s = gaussian_store(static_cast<std::size_t>(state.range(0)));
  std::optional<PreTransform> pre;
  if (kind == TransformKind::PretransformedAES) pre = build_empirical_pretransform(s, 32);
  const LockedModel l = lock(s, kKey, kind, pre, Nonce{});
  for (auto _ : state) benchmark::DoNotOptimize(unlock(l, kKey));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Distinguish(benchmark::State& state) {
  const ParamStore s = gaussian_store(static_cast<std::size_t>(state.range(0)));
  const DistributionStats ref = compute_stats(s);
  for (auto _ : state) benchmark::DoNotOptimize(distinguish(s, ref));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Keystream(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(aes256_ctr_keystream(kKey, Nonce{}, state.range(0)));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Lock, aes, TransformKind::AES)->Arg(4096)->Arg(1 << 20);
BENCHMARK_CAPTURE(BM_Lock, shuffle, TransformKind::Shuffle)->Arg(4096)->Arg(1 << 20);
BENCHMARK_CAPTURE(BM_Lock, pt_aes, TransformKind::PretransformedAES)->Arg(4096)->Arg(1 << 20);
BENCHMARK_CAPTURE(BM_Unlock, aes, TransformKind::AES)->Arg(4096)->Arg(1 << 20);
BENCHMARK_CAPTURE(BM_Unlock, shuffle, TransformKind::Shuffle)->Arg(4096)->Arg(1 << 20);
BENCHMARK_CAPTURE(BM_Unlock, pt_aes, TransformKind::PretransformedAES)->Arg(4096)->Arg(1 << 20);
BENCHMARK(BM_Distinguish)->Arg(4096)->Arg(1 << 20);
BENCHMARK(BM_Keystream)->Arg(1 << 20);
