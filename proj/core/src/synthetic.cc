#include "volstream/synthetic.h"

#include <algorithm>

namespace volstream {
namespace {

uint64_t Mix(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

uint8_t Lattice(int64_t gx, int64_t gy, uint64_t seed) {
  return static_cast<uint8_t>(Mix(seed ^ Mix(static_cast<uint64_t>(gx) * 0x100000001B3ull ^
                                             static_cast<uint64_t>(gy))) >> 56);
}

int64_t FloorDiv(int64_t a, int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Symmetric triangle wave in [-amp, amp] with the given period in frames.
int Triangle(int t, int period, int amp) {
  const int phase = ((t % period) + period) % period;
  const int half = period / 2;
  const int v = phase < half ? phase : period - phase;  // 0..half
  return (4 * amp * v) / period - amp;
}

uint8_t Sat(int v) { return static_cast<uint8_t>(std::clamp(v, 0, 255)); }

void SetRgb(Plane& p, int x, int y, int r, int g, int b) {
  p.at(x, y, 0) = Sat(r);
  p.at(x, y, 1) = Sat(g);
  p.at(x, y, 2) = Sat(b);
}

RgbdFrame NewFrame(const SyntheticOptions& o, int i) {
  RgbdFrame f;
  f.frame_id = static_cast<uint32_t>(i);
  f.rgb = Plane(o.width, o.height, 3);
  f.depth = Plane(o.width, o.height, 1);
  f.capture_ts_ms = static_cast<double>(i) * 1000.0 / o.fps;
  return f;
}

void CheckOptions(const SyntheticOptions& o) {
  if (o.width < 16 || o.height < 16 || o.frames < 0 || !(o.fps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic clip needs >= 16x16 frames and fps > 0");
  }
}

}  // namespace

uint8_t ValueNoise(int64_t x, int64_t y, int cell, uint64_t seed) {
  const int64_t gx = FloorDiv(x, cell), gy = FloorDiv(y, cell);
  const int64_t fx = x - gx * cell, fy = y - gy * cell;
  const int64_t a = Lattice(gx, gy, seed), b = Lattice(gx + 1, gy, seed);
  const int64_t c = Lattice(gx, gy + 1, seed), d = Lattice(gx + 1, gy + 1, seed);
  const int64_t top = a * (cell - fx) + b * fx;
  const int64_t bottom = c * (cell - fx) + d * fx;
  return static_cast<uint8_t>((top * (cell - fy) + bottom * fy) / (static_cast<int64_t>(cell) * cell));
}

std::vector<RgbdFrame> TalkingMotionClip(const SyntheticOptions& o) {
  CheckOptions(o);
  const int w = o.width, h = o.height;
  const int64_t rx = w / 8, ry = h / 5;

  Plane bg_rgb(w, h, 3), bg_depth(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int n = ValueNoise(x, y, 16, o.seed) - 128;
      SetRgb(bg_rgb, x, y, 90 + (x * 60) / w + n / 4, 110 + n / 4, 140 - (y * 40) / h + n / 4);
      bg_depth.at(x, y) = Sat(230 - (y * 50) / h);
    }
  }

  std::vector<RgbdFrame> out;
  out.reserve(static_cast<size_t>(o.frames));
  for (int i = 0; i < o.frames; ++i) {
    RgbdFrame f = NewFrame(o, i);
    f.rgb = bg_rgb;
    f.depth = bg_depth;
    const int64_t cx = w / 2 + Triangle(i, 60, w / 40);
    const int64_t cy = h / 2 - h / 10 + Triangle(i, 90, h / 60);
    const int64_t mouth_h = 2 + (Triangle(i, 8, ry / 12) + ry / 12);
    const int64_t mx = cx, my = cy + ry / 2;

    // Torso: a rounded block under the head that sways with it.
    const int64_t torso_top = cy + (ry * 4) / 5, torso_half = (rx * 6) / 5;
    for (int64_t y = std::max<int64_t>(0, torso_top); y < h; ++y) {
      for (int64_t x = std::max<int64_t>(0, cx - torso_half); x < std::min<int64_t>(w, cx + torso_half); ++x) {
        const int n = ValueNoise(x - cx, y - cy, 6, o.seed + 7) - 128;
        SetRgb(f.rgb, static_cast<int>(x), static_cast<int>(y), 40 + n / 5, 60 + n / 5, 120 + n / 5);
        f.depth.at(static_cast<int>(x), static_cast<int>(y)) = Sat(120 + static_cast<int>((std::abs(x - cx) * 20) / torso_half));
      }
    }
    // Head: ellipse with texture attached to the head frame.
    for (int64_t y = std::max<int64_t>(0, cy - ry); y <= std::min<int64_t>(h - 1, cy + ry); ++y) {
      for (int64_t x = std::max<int64_t>(0, cx - rx); x <= std::min<int64_t>(w - 1, cx + rx); ++x) {
        const int64_t dx = x - cx, dy = y - cy;
        const int64_t num = dx * dx * ry * ry + dy * dy * rx * rx;
        const int64_t den = rx * rx * ry * ry;
        if (num > den) continue;
        const int n = ValueNoise(dx, dy, 4, o.seed + 3) - 128;
        SetRgb(f.rgb, static_cast<int>(x), static_cast<int>(y), 205 + n / 6, 160 + n / 6, 130 + n / 6);
        f.depth.at(static_cast<int>(x), static_cast<int>(y)) = Sat(static_cast<int>(80 + (40 * num) / den));
        const int64_t ex = x - mx, ey = y - my;
        const int64_t mrx = rx / 2;
        if (ex * ex * mouth_h * mouth_h + ey * ey * mrx * mrx <= mrx * mrx * mouth_h * mouth_h) {
          SetRgb(f.rgb, static_cast<int>(x), static_cast<int>(y), 120, 30, 40);
          f.depth.at(static_cast<int>(x), static_cast<int>(y)) = Sat(static_cast<int>(84 + (40 * num) / den));
        }
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<RgbdFrame> TranslatingTextureClip(const SyntheticOptions& o) {
  CheckOptions(o);
  const uint64_t s = Mix(o.seed);
  const int vx = static_cast<int>(s % 7) - 3;
  const int vy = static_cast<int>((s >> 8) % 7) - 3;
  // Ramp slope in 1/16 depth units per pixel; kept small enough to stay in range.
  const int ax = 1 + static_cast<int>((s >> 16) % 4);
  const int ay = 1 + static_cast<int>((s >> 24) % 4);
  const int span = (ax * o.width + ay * o.height) / 16;
  const int base = std::max(0, (255 - span) / 2);

  std::vector<RgbdFrame> out;
  out.reserve(static_cast<size_t>(o.frames));
  for (int i = 0; i < o.frames; ++i) {
    RgbdFrame f = NewFrame(o, i);
    const int ox = vx * i, oy = vy * i;
    for (int y = 0; y < o.height; ++y) {
      for (int x = 0; x < o.width; ++x) {
        const int64_t u = x - ox, v = y - oy;
        const int a = ValueNoise(u, v, 8, o.seed);
        const int b = ValueNoise(u, v, 5, o.seed + 1);
        SetRgb(f.rgb, x, y, a, (a + b) / 2, b);
        const int ramp = static_cast<int>((ax * std::clamp<int64_t>(u, -o.width, 2 * o.width) +
                                           ay * std::clamp<int64_t>(v, -o.height, 2 * o.height)) / 16);
        f.depth.at(x, y) = Sat(base + ramp);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace volstream
