#include <benchmark/benchmark.h>

#include "volstream/metrics.h"
#include "volstream/synthetic.h"

namespace {

namespace vs = volstream;

void BM_Ssim(benchmark::State& state) {
  vs::SyntheticOptions o;
  o.frames = 2;
  const auto clip = vs::TalkingMotionClip(o);
  const auto m = state.range(0) ? vs::Modality::kDepth : vs::Modality::kRgb;
  for (auto _ : state) benchmark::DoNotOptimize(vs::Ssim(clip[0].plane(m), clip[1].plane(m)));
}
BENCHMARK(BM_Ssim)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Psnr(benchmark::State& state) {
  vs::SyntheticOptions o;
  o.frames = 2;
  const auto clip = vs::TalkingMotionClip(o);
  for (auto _ : state) benchmark::DoNotOptimize(vs::Psnr(clip[0].rgb, clip[1].rgb));
}
BENCHMARK(BM_Psnr)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
