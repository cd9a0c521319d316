#include "volstream/packbits.h"

#include <algorithm>
#include <cstring>

namespace volstream {
namespace {

constexpr size_t kMaxLiteral = 128;
constexpr size_t kMaxRepeat = 129;

size_t RunLength(std::span<const uint8_t> in, size_t pos) {
  size_t n = 1;
  while (pos + n < in.size() && n < kMaxRepeat && in[pos + n] == in[pos]) ++n;
  return n;
}

}  // namespace

void PackBitsEncode(std::span<const uint8_t> in, Bytes& out) {
  size_t i = 0;
  while (i < in.size()) {
    const size_t run = RunLength(in, i);
    if (run >= 2) {
      out.push_back(static_cast<uint8_t>(run + 126));
      out.push_back(in[i]);
      i += run;
      continue;
    }
    // Literal stretch: stop before the next run of three or more.
    size_t end = i + 1;
    while (end < in.size() && end - i < kMaxLiteral) {
      if (end + 2 < in.size() && in[end] == in[end + 1] && in[end] == in[end + 2]) break;
      ++end;
    }
    out.push_back(static_cast<uint8_t>(end - i - 1));
    out.insert(out.end(), in.begin() + static_cast<std::ptrdiff_t>(i),
               in.begin() + static_cast<std::ptrdiff_t>(end));
    i = end;
  }
}

void PackBitsDecode(std::span<const uint8_t> in, std::span<uint8_t> out) {
  size_t src = 0;
  size_t dst = 0;
  while (src < in.size()) {
    const uint8_t c = in[src++];
    if (c < 128) {
      const size_t n = static_cast<size_t>(c) + 1;
      if (src + n > in.size() || dst + n > out.size()) {
        throw Error(ErrorCode::kUndecodable, "run-length literal overruns block");
      }
      std::memcpy(out.data() + dst, in.data() + src, n);
      src += n;
      dst += n;
    } else {
      const size_t n = static_cast<size_t>(c) - 126;
      if (src >= in.size() || dst + n > out.size()) {
        throw Error(ErrorCode::kUndecodable, "run-length repeat overruns block");
      }
      std::fill_n(out.data() + dst, n, in[src++]);
      dst += n;
    }
  }
  if (dst != out.size()) throw Error(ErrorCode::kUndecodable, "run-length stream too short");
}

}  // namespace volstream
