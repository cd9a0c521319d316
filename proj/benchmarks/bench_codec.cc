#include <benchmark/benchmark.h>

#include "volstream/codec.h"
#include "volstream/synthetic.h"

namespace {

namespace vs = volstream;

const std::vector<vs::RgbdFrame>& Clip() {
  static const std::vector<vs::RgbdFrame> clip = [] {
    vs::SyntheticOptions o;
    o.frames = 2;
    return vs::TalkingMotionClip(o);
  }();
  return clip;
}

vs::Modality ModalityArg(const benchmark::State& state) {
  return state.range(0) ? vs::Modality::kDepth : vs::Modality::kRgb;
}

void BM_EncodeI(benchmark::State& state) {
  vs::ReferenceCodec codec{vs::CodecConfig{}};
  const vs::Plane& p = Clip()[0].plane(ModalityArg(state));
  for (auto _ : state) benchmark::DoNotOptimize(codec.Encode(vs::FrameKind::kI, p, nullptr));
}
BENCHMARK(BM_EncodeI)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EncodeP(benchmark::State& state) {
  vs::ReferenceCodec codec{vs::CodecConfig{}};
  const vs::Modality m = ModalityArg(state);
  const auto i = codec.Encode(vs::FrameKind::kI, Clip()[0].plane(m), nullptr);
  for (auto _ : state) {
    benchmark::DoNotOptimize(codec.Encode(vs::FrameKind::kP, Clip()[1].plane(m), &i.reconstruction));
  }
}
BENCHMARK(BM_EncodeP)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DecodeP(benchmark::State& state) {
  vs::ReferenceCodec codec{vs::CodecConfig{}};
  const vs::Modality m = ModalityArg(state);
  const auto i = codec.Encode(vs::FrameKind::kI, Clip()[0].plane(m), nullptr);
  const auto p = codec.Encode(vs::FrameKind::kP, Clip()[1].plane(m), &i.reconstruction);
  for (auto _ : state) benchmark::DoNotOptimize(codec.Decode(p.frame, &i.reconstruction, {}));
}
BENCHMARK(BM_DecodeP)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
