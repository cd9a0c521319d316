#include "volstream/recovery.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <limits>

namespace volstream {
namespace {

constexpr int kSearchRadius = 8;
constexpr int kCoarseStep = 2;
constexpr int kSmoothBand = 2;

struct Offset {
  int dx = 0;
  int dy = 0;
};

// Per-pixel view of a block mask; block indices are tabulated per column
// and row so lookups avoid division.
class PixelMask {
 public:
  PixelMask(const CorruptionMask& mask, int block, int width, int height)
      : mask_(mask), col_(width), row_(height) {
    for (int x = 0; x < width; ++x) col_[x] = x / block;
    for (int y = 0; y < height; ++y) row_[y] = y / block;
  }
  bool operator()(int x, int y) const { return mask_.at(col_[x], row_[y]); }

 private:
  const CorruptionMask& mask_;
  std::vector<int> col_;
  std::vector<int> row_;
};

// True when any block in the 3x3 (or 4-neighbour) neighbourhood of (bx, by)
// inside the grid is unmasked.
bool HasUnmaskedNeighbour(const CorruptionMask& mask, int bx, int by, bool diagonal) {
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if ((dx == 0 && dy == 0) || (!diagonal && dx != 0 && dy != 0)) continue;
      const int nx = bx + dx, ny = by + dy;
      if (nx < 0 || ny < 0 || nx >= mask.blocks_x() || ny >= mask.blocks_y()) continue;
      if (!mask.at(nx, ny)) return true;
    }
  }
  return false;
}

double ElapsedMs(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

int Clamp(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

struct Ring {
  std::vector<int> xs;
  std::vector<int> ys;
  std::vector<size_t> offs;  // byte offset of (x, y, 0)
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
};

// One-pixel ring around the block; masked pixels are skipped unless
// |include_masked| is set.
Ring NeighbourRing(const Plane& plane, const PixelMask& masked, int x0, int y0, int x1, int y1,
                   bool include_masked) {
  Ring ring;
  const size_t cap = 2 * static_cast<size_t>(x1 - x0 + y1 - y0) + 4;
  ring.xs.reserve(cap);
  ring.ys.reserve(cap);
  ring.offs.reserve(cap);
  auto add = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= plane.width || y >= plane.height) return;
    if (!include_masked && masked(x, y)) return;
    ring.xs.push_back(x);
    ring.ys.push_back(y);
    ring.offs.push_back(static_cast<size_t>(y) * plane.stride() +
                        static_cast<size_t>(x) * plane.channels);
  };
  for (int x = x0 - 1; x <= x1; ++x) {
    add(x, y0 - 1);
    add(x, y1);
  }
  for (int y = y0; y < y1; ++y) {
    add(x0 - 1, y);
    add(x1, y);
  }
  if (!ring.xs.empty()) {
    const auto [xlo, xhi] = std::minmax_element(ring.xs.begin(), ring.xs.end());
    const auto [ylo, yhi] = std::minmax_element(ring.ys.begin(), ring.ys.end());
    ring.min_x = *xlo;
    ring.max_x = *xhi;
    ring.min_y = *ylo;
    ring.max_y = *yhi;
  }
  return ring;
}

uint64_t RingSad(const Plane& cur, const Plane& ref, const Ring& ring, Offset d, uint64_t cap) {
  const int c = cur.channels;
  const int xmax = ref.width - 1, ymax = ref.height - 1;
  uint64_t sad = 0;
  if (ring.min_x + d.dx >= 0 && ring.max_x + d.dx <= xmax && ring.min_y + d.dy >= 0 &&
      ring.max_y + d.dy <= ymax) {
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(d.dy) * static_cast<std::ptrdiff_t>(ref.stride()) +
                                 static_cast<std::ptrdiff_t>(d.dx) * c;
    const uint8_t* a = cur.data.data();
    const uint8_t* b = ref.data.data() + shift;
    for (size_t off : ring.offs) {
      for (int ch = 0; ch < c; ++ch) sad += std::abs(a[off + ch] - b[off + ch]);
      if (sad >= cap) return sad;
    }
    return sad;
  }
  for (size_t i = 0; i < ring.xs.size(); ++i) {
    const int x = ring.xs[i], y = ring.ys[i];
    const int rx = Clamp(x + d.dx, 0, xmax), ry = Clamp(y + d.dy, 0, ymax);
    for (int ch = 0; ch < c; ++ch) sad += std::abs(cur.at(x, y, ch) - ref.at(rx, ry, ch));
    if (sad >= cap) return sad;
  }
  return sad;
}

Offset SearchOffset(const Plane& cur, const Plane& ref, const Ring& ring) {
  Offset best;
  uint64_t best_sad = RingSad(cur, ref, ring, best, std::numeric_limits<uint64_t>::max());
  auto consider = [&](Offset d) {
    if (best_sad == 0) return;
    const uint64_t sad = RingSad(cur, ref, ring, d, best_sad);
    if (sad < best_sad) {
      best_sad = sad;
      best = d;
    }
  };
  for (int dy = -kSearchRadius; dy <= kSearchRadius; dy += kCoarseStep) {
    for (int dx = -kSearchRadius; dx <= kSearchRadius; dx += kCoarseStep) {
      if (dx != 0 || dy != 0) consider({dx, dy});
    }
  }
  const Offset centre = best;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const Offset d{centre.dx + dx, centre.dy + dy};
      if ((dx != 0 || dy != 0) && std::abs(d.dx) <= kSearchRadius &&
          std::abs(d.dy) <= kSearchRadius) {
        consider(d);
      }
    }
  }
  return best;
}

// Block matching shared by both modalities. Returns false when there is no
// reference to draw from.
bool BlockMatch(const RecoveryRequest& req, Plane& out) {
  if (req.references.empty()) return false;
  const Plane& cur = req.plane;
  const Plane& ref = req.references.back();
  const PixelMask masked(req.mask, kRecoveryBlock, req.plane.width, req.plane.height);
  const int xmax = cur.width - 1, ymax = cur.height - 1;
  for (int by = 0; by < req.mask.blocks_y(); ++by) {
    for (int bx = 0; bx < req.mask.blocks_x(); ++bx) {
      if (!req.mask.at(bx, by)) continue;
      const int x0 = bx * kRecoveryBlock, y0 = by * kRecoveryBlock;
      const int x1 = std::min(x0 + kRecoveryBlock, cur.width);
      const int y1 = std::min(y0 + kRecoveryBlock, cur.height);
      Ring ring = NeighbourRing(cur, masked, x0, y0, x1, y1, false);
      // No trusted surroundings: match on the decoded (stale) ring instead.
      if (ring.xs.empty()) ring = NeighbourRing(cur, masked, x0, y0, x1, y1, true);
      const Offset d = ring.xs.empty() ? Offset{} : SearchOffset(cur, ref, ring);
      for (int y = y0; y < y1; ++y) {
        const int ry = Clamp(y + d.dy, 0, ymax);
        for (int x = x0; x < x1; ++x) {
          const int rx = Clamp(x + d.dx, 0, xmax);
          for (int ch = 0; ch < cur.channels; ++ch) out.at(x, y, ch) = ref.at(rx, ry, ch);
        }
      }
    }
  }
  return true;
}

bool NearUnmasked(const PixelMask& masked, const Plane& p, int x, int y) {
  for (int dy = -kSmoothBand; dy <= kSmoothBand; ++dy) {
    for (int dx = -kSmoothBand; dx <= kSmoothBand; ++dx) {
      const int nx = x + dx, ny = y + dy;
      if (nx >= 0 && ny >= 0 && nx < p.width && ny < p.height && !masked(nx, ny)) return true;
    }
  }
  return false;
}

uint8_t Median3x3(const Plane& p, int x, int y) {
  std::array<uint8_t, 9> v{};
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      v[n++] = p.at(Clamp(x + dx, 0, p.width - 1), Clamp(y + dy, 0, p.height - 1));
    }
  }
  std::nth_element(v.begin(), v.begin() + 4, v.end());
  return v[4];
}

void SmoothDepthBoundary(const RecoveryRequest& req, Plane& out) {
  const PixelMask masked(req.mask, kRecoveryBlock, req.plane.width, req.plane.height);
  const Plane matched = out;
  // Pixels farther than the band from their own block edge cannot be near
  // an unmasked pixel, so only the block rim is visited.
  for (int by = 0; by < req.mask.blocks_y(); ++by) {
    for (int bx = 0; bx < req.mask.blocks_x(); ++bx) {
      if (!req.mask.at(bx, by) || !HasUnmaskedNeighbour(req.mask, bx, by, true)) continue;
      const int x0 = bx * kRecoveryBlock, y0 = by * kRecoveryBlock;
      const int x1 = std::min(x0 + kRecoveryBlock, out.width);
      const int y1 = std::min(y0 + kRecoveryBlock, out.height);
      for (int y = y0; y < y1; ++y) {
        const bool rim_row = y < y0 + kSmoothBand || y >= y1 - kSmoothBand;
        for (int x = x0; x < x1; ++x) {
          const bool rim = rim_row || x < x0 + kSmoothBand || x >= x1 - kSmoothBand;
          if (rim && NearUnmasked(masked, out, x, y)) out.at(x, y) = Median3x3(matched, x, y);
        }
      }
    }
  }

  const int limit = InteriorGradientP95(req.plane, req.mask, kRecoveryBlock);
  constexpr int kNx[] = {1, -1, 0, 0};
  constexpr int kNy[] = {0, 0, 1, -1};
  // Only masked blocks with an unmasked 4-neighbour block own boundary pixels.
  for (int by = 0; by < req.mask.blocks_y(); ++by) {
    for (int bx = 0; bx < req.mask.blocks_x(); ++bx) {
      if (!req.mask.at(bx, by) || !HasUnmaskedNeighbour(req.mask, bx, by, false)) continue;
      const int x0 = bx * kRecoveryBlock, y0 = by * kRecoveryBlock;
      const int x1 = std::min(x0 + kRecoveryBlock, out.width);
      const int y1 = std::min(y0 + kRecoveryBlock, out.height);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          int lo = 0, hi = 255;
          bool boundary = false;
          for (int k = 0; k < 4; ++k) {
            const int nx = x + kNx[k], ny = y + kNy[k];
            if (nx < 0 || ny < 0 || nx >= out.width || ny >= out.height || masked(nx, ny)) continue;
            const int q = out.at(nx, ny);
            lo = std::max(lo, q - limit);
            hi = std::min(hi, q + limit);
            boundary = true;
          }
          if (!boundary) continue;
          const int v = out.at(x, y);
          out.at(x, y) = static_cast<uint8_t>(lo <= hi ? Clamp(v, lo, hi) : (lo + hi) / 2);
        }
      }
    }
  }
}

RecoveryResponse RunBaseline(const RecoveryRequest& req, bool depth) {
  const auto start = std::chrono::steady_clock::now();
  req.Validate();
  RecoveryResponse resp;
  resp.plane = req.plane;
  if (!req.mask.Any()) {
    resp.latency_ms = ElapsedMs(start);
    return resp;
  }
  if (!BlockMatch(req, resp.plane)) {
    resp.status = RecoveryStatus::kPassthrough;
  } else if (depth) {
    SmoothDepthBoundary(req, resp.plane);
  }
  resp.latency_ms = ElapsedMs(start);
  return resp;
}

}  // namespace

std::string_view RecoveryStatusName(RecoveryStatus s) {
  switch (s) {
    case RecoveryStatus::kOk: return "ok";
    case RecoveryStatus::kPassthrough: return "passthrough";
    case RecoveryStatus::kTimeoutFallback: return "timeout_fallback";
    case RecoveryStatus::kFaultFallback: return "fault_fallback";
  }
  return "unknown";
}

void RecoveryRequest::Validate() const {
  const CorruptionMask expect = CorruptionMask::ForPlane(plane.width, plane.height, kRecoveryBlock);
  if (mask.blocks_x() != expect.blocks_x() || mask.blocks_y() != expect.blocks_y()) {
    throw Error(ErrorCode::kDimensionMismatch, "mask grid does not match the plane");
  }
  if (plane.channels != ChannelsFor(modality)) {
    throw Error(ErrorCode::kDimensionMismatch, "channel count does not match modality");
  }
  for (const auto& r : references) {
    if (!r.SameShape(plane)) {
      throw Error(ErrorCode::kDimensionMismatch, "reference plane shape differs");
    }
  }
}

ReferenceRing::ReferenceRing(int k) : k_(k) {
  if (k < 1) throw Error(ErrorCode::kConfig, "reference ring needs k >= 1");
}

void ReferenceRing::Push(const Plane& plane) {
  if (static_cast<int>(planes_.size()) == k_) planes_.pop_front();
  planes_.push_back(plane);
}

RecoveryResponse RecoverBaselineRgb(const RecoveryRequest& req) { return RunBaseline(req, false); }

RecoveryResponse RecoverBaselineDepth(const RecoveryRequest& req) {
  return RunBaseline(req, true);
}

RecoveryResponse RecoverBaseline(const RecoveryRequest& req) {
  return RunBaseline(req, req.modality == Modality::kDepth);
}

RecoveryResponse BaselineBackend::Recover(const RecoveryRequest& req, double /*budget_ms*/) {
  return RecoverBaseline(req);
}

Plane MergeMasked(const Plane& original, const Plane& candidate, const CorruptionMask& mask,
                  int block) {
  if (!original.SameShape(candidate)) {
    throw Error(ErrorCode::kDimensionMismatch, "candidate plane shape differs");
  }
  Plane out = original;
  const size_t px = static_cast<size_t>(original.channels);
  for (int y = 0; y < original.height; ++y) {
    const int by = y / block;
    for (int bx = 0; bx < mask.blocks_x(); ++bx) {
      if (!mask.at(bx, by)) continue;
      const int x0 = bx * block, x1 = std::min(x0 + block, original.width);
      const size_t off = static_cast<size_t>(y) * original.stride() + x0 * px;
      std::copy_n(candidate.data.begin() + static_cast<std::ptrdiff_t>(off), (x1 - x0) * px,
                  out.data.begin() + static_cast<std::ptrdiff_t>(off));
    }
  }
  return out;
}

int MaxBoundaryStep(const Plane& plane, const CorruptionMask& mask, int block) {
  const PixelMask masked(mask, block, plane.width, plane.height);
  int best = 0;
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) {
      const bool m = masked(x, y);
      if (x + 1 < plane.width && masked(x + 1, y) != m) {
        best = std::max(best, std::abs(plane.at(x, y) - plane.at(x + 1, y)));
      }
      if (y + 1 < plane.height && masked(x, y + 1) != m) {
        best = std::max(best, std::abs(plane.at(x, y) - plane.at(x, y + 1)));
      }
    }
  }
  return best;
}

int InteriorGradientP95(const Plane& plane, const CorruptionMask& mask, int block) {
  const PixelMask masked(mask, block, plane.width, plane.height);
  std::array<size_t, 256> hist{};
  size_t n = 0;
  std::vector<uint8_t> row(plane.width), next(plane.width);
  auto fill = [&](std::vector<uint8_t>& r, int y) {
    for (int x = 0; x < plane.width; ++x) r[x] = masked(x, y);
  };
  fill(row, 0);
  for (int y = 0; y < plane.height; ++y) {
    const bool has_next = y + 1 < plane.height;
    if (has_next) fill(next, y + 1);
    const uint8_t* p = plane.data.data() + static_cast<size_t>(y) * plane.stride();
    const uint8_t* q = p + plane.stride();
    const int c = plane.channels;
    for (int x = 0; x < plane.width; ++x) {
      if (row[x]) continue;
      if (x + 1 < plane.width && !row[x + 1]) {
        ++hist[std::abs(p[x * c] - p[(x + 1) * c])];
        ++n;
      }
      if (has_next && !next[x]) {
        ++hist[std::abs(p[x * c] - q[x * c])];
        ++n;
      }
    }
    row.swap(next);
  }
  if (n == 0) return 255;
  const size_t rank = (95 * n + 99) / 100;  // ceil(0.95 n)
  size_t seen = 0;
  for (int v = 0; v < 256; ++v) {
    seen += hist[v];
    if (seen >= rank) return v;
  }
  return 255;
}

}  // namespace volstream
