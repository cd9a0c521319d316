#ifndef VOLSTREAM_SYNTHETIC_H_
#define VOLSTREAM_SYNTHETIC_H_

#include <cstdint>
#include <vector>

#include "volstream/frame.h"

namespace volstream {

// Integer-only generators, so output is identical on every platform.
struct SyntheticOptions {
  int width = 640;
  int height = 480;
  int frames = 900;
  double fps = 30.0;
  uint64_t seed = 1;
};

// Static textured backdrop with a swaying head and torso and a moving mouth.
// Depth has a floor ramp behind a rounded head.
std::vector<RgbdFrame> TalkingMotionClip(const SyntheticOptions& opts);

// A textured plane translating by a per-clip constant velocity (chosen from
// the seed, up to 3 px per frame on each axis). Depth is a planar ramp that
// moves with the texture.
std::vector<RgbdFrame> TranslatingTextureClip(const SyntheticOptions& opts);

// Smooth pseudo-random texture in [0, 255], stable for a given seed.
uint8_t ValueNoise(int64_t x, int64_t y, int cell, uint64_t seed);

}  // namespace volstream

#endif  // VOLSTREAM_SYNTHETIC_H_
