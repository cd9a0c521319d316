#include <random>

#include <benchmark/benchmark.h>

#include "volstream/fec.h"

namespace {

using volstream::Bytes;

Bytes RandomBytes(size_t n, uint32_t seed) {
  std::mt19937 rng(seed);
  Bytes b(n);
  for (auto& v : b) v = static_cast<uint8_t>(rng());
  return b;
}

// args: data shards, parity shards; shards are 1024 bytes.
void BM_RsEncode(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), r = static_cast<int>(state.range(1));
  const Bytes data = RandomBytes(static_cast<size_t>(n) * 1024, 1);
  for (auto _ : state) benchmark::DoNotOptimize(volstream::RsEncode(data, n, r));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(data.size()));
}
BENCHMARK(BM_RsEncode)->Args({10, 5})->Args({20, 4})->Args({100, 20});

// Worst case for the decoder: every missing shard is a data shard.
void BM_RsReconstruct(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), r = static_cast<int>(state.range(1));
  const Bytes data = RandomBytes(static_cast<size_t>(n) * 1024, 2);
  volstream::ShardSet set = volstream::RsEncode(data, n, r);
  for (int i = 0; i < r; ++i) set.present[i] = false;
  for (auto _ : state) benchmark::DoNotOptimize(volstream::RsReconstruct(set));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(data.size()));
}
BENCHMARK(BM_RsReconstruct)->Args({10, 5})->Args({20, 4})->Args({100, 20});

}  // namespace

BENCHMARK_MAIN();
