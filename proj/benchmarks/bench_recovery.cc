#include <random>

#include <benchmark/benchmark.h>

#include "volstream/recovery.h"
#include "volstream/synthetic.h"

namespace {

namespace vs = volstream;

// args: modality (0 rgb, 1 depth), masked block share in percent.
void BM_RecoverBaseline(benchmark::State& state) {
  vs::SyntheticOptions o;
  o.frames = 6;
  const auto clip = vs::TalkingMotionClip(o);
  const auto m = state.range(0) ? vs::Modality::kDepth : vs::Modality::kRgb;
  vs::RecoveryRequest req;
  req.modality = m;
  req.plane = clip[5].plane(m);
  for (int i = 0; i < 5; ++i) req.references.push_back(clip[i].plane(m));
  req.mask = vs::CorruptionMask::ForPlane(o.width, o.height, vs::kRecoveryBlock);
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> pct(0, 99);
  for (size_t i = 0; i < req.mask.block_count(); ++i) req.mask.set_index(i, pct(rng) < state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(vs::RecoverBaseline(req));
}
BENCHMARK(BM_RecoverBaseline)
    ->ArgsProduct({{0, 1}, {5, 25, 100}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
