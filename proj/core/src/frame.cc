#include "volstream/frame.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace volstream {

std::string_view ModalityName(Modality m) {
  return m == Modality::kRgb ? "rgb" : "depth";
}

std::string_view FrameKindName(FrameKind k) { return k == FrameKind::kI ? "I" : "P"; }

void GopSpec::Validate() const {
  if (gop_len < 1) throw Error(ErrorCode::kInvalidArgument, "gop_len must be >= 1");
  if (!(fps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "fps must be > 0");
}

GopPosition GetGopPosition(uint32_t frame_id, const GopSpec& spec) {
  const auto len = static_cast<uint32_t>(spec.gop_len);
  return {frame_id / len, frame_id % len == 0 ? FrameKind::kI : FrameKind::kP};
}

std::pair<Plane, Plane> SplitModalities(const RgbdFrame& frame) {
  return {frame.rgb, frame.depth};
}

RgbdFrame MergeModalities(uint32_t frame_id, Plane rgb, Plane depth,
                          double capture_ts_ms) {
  if (rgb.width != depth.width || rgb.height != depth.height || rgb.channels != 3 ||
      depth.channels != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "rgb/depth planes do not pair up");
  }
  return {frame_id, std::move(rgb), std::move(depth), capture_ts_ms};
}

Plane PadToBlock(const Plane& plane, int block) {
  if (block <= 0) throw Error(ErrorCode::kInvalidArgument, "block must be positive");
  const int w = (plane.width + block - 1) / block * block;
  const int h = (plane.height + block - 1) / block * block;
  if (w == plane.width && h == plane.height) return plane;
  Plane out(w, h, plane.channels);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(y, plane.height - 1);
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(x, plane.width - 1);
      for (int c = 0; c < plane.channels; ++c) out.at(x, y, c) = plane.at(sx, sy, c);
    }
  }
  return out;
}

ClipDescriptor LoadClipDescriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open descriptor " + path.string());
  ClipDescriptor desc;
  bool have_w = false, have_h = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kMalformedInput, "descriptor line without '=': " + line);
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "width") {
        desc.width = std::stoi(value);
        have_w = true;
      } else if (key == "height") {
        desc.height = std::stoi(value);
        have_h = true;
      } else if (key == "fps") {
        desc.fps = std::stod(value);
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::kMalformedInput, "bad descriptor value: " + line);
    }
  }
  if (!have_w || !have_h || desc.width <= 0 || desc.height <= 0 || !(desc.fps > 0)) {
    throw Error(ErrorCode::kMalformedInput, "descriptor needs positive width, height, fps");
  }
  return desc;
}

void WriteClipDescriptor(const std::filesystem::path& path, const ClipDescriptor& desc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write descriptor " + path.string());
  out << "width=" << desc.width << "\nheight=" << desc.height << "\nfps=" << desc.fps
      << "\n";
}

std::vector<RgbdFrame> LoadRawVideo(const std::filesystem::path& path, int width,
                                    int height, double fps, int block) {
  if (width <= 0 || height <= 0 || !(fps > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "clip dimensions and fps must be positive");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open clip " + path.string());
  const Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const size_t pixels = static_cast<size_t>(width) * height;
  const size_t frame_bytes = pixels * 4;
  if (raw.size() % frame_bytes != 0) {
    std::ostringstream msg;
    msg << "clip size " << raw.size() << " is not a multiple of frame size " << frame_bytes;
    throw Error(ErrorCode::kMalformedInput, msg.str());
  }

  std::vector<RgbdFrame> frames;
  const size_t count = raw.size() / frame_bytes;
  frames.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const uint8_t* base = raw.data() + i * frame_bytes;
    Plane rgb(width, height, 3);
    Plane depth(width, height, 1);
    std::memcpy(rgb.data.data(), base, pixels * 3);
    std::memcpy(depth.data.data(), base + pixels * 3, pixels);
    frames.push_back({static_cast<uint32_t>(i), PadToBlock(rgb, block),
                      PadToBlock(depth, block), static_cast<double>(i) * 1000.0 / fps});
  }
  return frames;
}

void WriteRawVideo(const std::filesystem::path& path,
                   const std::vector<RgbdFrame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write clip " + path.string());
  for (const auto& f : frames) {
    out.write(reinterpret_cast<const char*>(f.rgb.data.data()),
              static_cast<std::streamsize>(f.rgb.size()));
    out.write(reinterpret_cast<const char*>(f.depth.data.data()),
              static_cast<std::streamsize>(f.depth.size()));
  }
}

}  // namespace volstream
