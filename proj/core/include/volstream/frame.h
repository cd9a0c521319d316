#ifndef VOLSTREAM_FRAME_H_
#define VOLSTREAM_FRAME_H_

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "volstream/common.h"

namespace volstream {

enum class Modality : uint8_t { kRgb = 0, kDepth = 1 };
enum class FrameKind : uint8_t { kI = 0, kP = 1 };

inline constexpr Modality kModalities[] = {Modality::kRgb, Modality::kDepth};

std::string_view ModalityName(Modality m);
std::string_view FrameKindName(FrameKind k);
inline int ChannelsFor(Modality m) { return m == Modality::kRgb ? 3 : 1; }

// An 8-bit image plane, row-major, channels interleaved.
struct Plane {
  int width = 0;
  int height = 0;
  int channels = 1;
  Bytes data;

  Plane() = default;
  Plane(int w, int h, int c, uint8_t fill = 0)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  size_t size() const { return data.size(); }
  size_t stride() const { return static_cast<size_t>(width) * channels; }
  uint8_t& at(int x, int y, int c = 0) {
    return data[static_cast<size_t>(y) * stride() + static_cast<size_t>(x) * channels + c];
  }
  uint8_t at(int x, int y, int c = 0) const {
    return data[static_cast<size_t>(y) * stride() + static_cast<size_t>(x) * channels + c];
  }
  bool SameShape(const Plane& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  friend bool operator==(const Plane&, const Plane&) = default;
};

struct RgbdFrame {
  uint32_t frame_id = 0;
  Plane rgb;    // width x height x 3
  Plane depth;  // width x height x 1, quantized depth
  double capture_ts_ms = 0.0;

  int width() const { return rgb.width; }
  int height() const { return rgb.height; }
  const Plane& plane(Modality m) const { return m == Modality::kRgb ? rgb : depth; }
  friend bool operator==(const RgbdFrame&, const RgbdFrame&) = default;
};

struct GopSpec {
  int gop_len = 30;
  double fps = 30.0;

  double frame_interval_ms() const { return 1000.0 / fps; }
  void Validate() const;
};

struct GopPosition {
  uint32_t gop_id = 0;
  FrameKind kind = FrameKind::kI;
  friend bool operator==(const GopPosition&, const GopPosition&) = default;
};

GopPosition GetGopPosition(uint32_t frame_id, const GopSpec& spec);

std::pair<Plane, Plane> SplitModalities(const RgbdFrame& frame);
RgbdFrame MergeModalities(uint32_t frame_id, Plane rgb, Plane depth,
                          double capture_ts_ms);

// Grows |plane| so both dimensions are multiples of |block|, replicating the
// last column/row into the new area.
Plane PadToBlock(const Plane& plane, int block);

struct ClipDescriptor {
  int width = 0;
  int height = 0;
  double fps = 30.0;
};

// Sidecar descriptor: "key=value" lines with keys width, height, fps.
ClipDescriptor LoadClipDescriptor(const std::filesystem::path& path);
void WriteClipDescriptor(const std::filesystem::path& path, const ClipDescriptor& desc);

// Raw clip format: concatenated frames, each an RGB plane (w*h*3) followed by
// a depth plane (w*h), both row-major. Planes are padded to |block| multiples.
std::vector<RgbdFrame> LoadRawVideo(const std::filesystem::path& path, int width,
                                    int height, double fps, int block = 16);
void WriteRawVideo(const std::filesystem::path& path,
                   const std::vector<RgbdFrame>& frames);

}  // namespace volstream

#endif  // VOLSTREAM_FRAME_H_
