#ifndef VOLSTREAM_PACKBITS_H_
#define VOLSTREAM_PACKBITS_H_

#include <cstdint>
#include <span>

#include "volstream/common.h"

namespace volstream {

// PackBits-style run-length coding. Control byte c < 128 introduces c+1
// literal bytes; c >= 128 repeats the following byte (c - 126) times.
void PackBitsEncode(std::span<const uint8_t> in, Bytes& out);

// Decodes exactly |out.size()| samples. Throws kUndecodable when the stream
// is short, overruns, or has trailing bytes.
void PackBitsDecode(std::span<const uint8_t> in, std::span<uint8_t> out);

}  // namespace volstream

#endif  // VOLSTREAM_PACKBITS_H_
