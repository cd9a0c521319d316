#ifndef VOLSTREAM_FEC_H_
#define VOLSTREAM_FEC_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "volstream/codec.h"
#include "volstream/common.h"

namespace volstream {

// Arithmetic in GF(2^8) with primitive polynomial x^8+x^4+x^3+x^2+1 (0x11D).
namespace gf256 {

inline constexpr unsigned kPolynomial = 0x11D;

uint8_t Mul(uint8_t a, uint8_t b);
uint8_t Div(uint8_t a, uint8_t b);  // b != 0
uint8_t Inv(uint8_t a);             // a != 0
uint8_t Pow(uint8_t a, unsigned e);
// Row of the full multiplication table: MulRow(c)[x] == Mul(c, x).
const uint8_t* MulRow(uint8_t c);

}  // namespace gf256

inline constexpr int kMaxShards = 255;

struct ShardSet {
  int n = 0;  // data shards
  int r = 0;  // parity shards
  size_t shard_len = 0;
  std::vector<Bytes> shards;  // n + r, each shard_len bytes
  std::vector<bool> present;

  int total() const { return n + r; }
  int present_count() const;
};

// Systematic Reed-Solomon encoding. |data| is split into n shards of
// ceil(size/n) bytes (zero padded); parity shards follow.
ShardSet RsEncode(std::span<const uint8_t> data, int n, int r);
// As above with an explicit shard length; requires data.size() <= n*shard_len.
ShardSet RsEncode(std::span<const uint8_t> data, int n, int r, size_t shard_len);

// Returns the n*shard_len data bytes. Throws kUnrecoverable with fewer than n
// present shards.
Bytes RsReconstruct(const ShardSet& set);

// r / (n + r)
double MaxTolerableLoss(int n, int r);

// A frame whose shard count exceeds the field limit is striped over
// interleaved RS groups: data shard i and parity shard j belong to groups
// i % G and j % G. G is 1 whenever n_data + n_parity <= 255.
int FecGroupCount(int n_data, int n_parity);

// Returns n_data + n_parity shards of |shard_len| bytes; data shards are the
// zero-padded split of |data|.
std::vector<Bytes> EncodeFrameShards(std::span<const uint8_t> data, int n_data,
                                     int n_parity, size_t shard_len);
bool FrameShardsRecoverable(const std::vector<bool>& present, int n_data, int n_parity);
// Returns n_data * shard_len bytes. Throws kUnrecoverable when any group has
// fewer survivors than data shards.
Bytes ReconstructFrameShards(const std::vector<Bytes>& shards,
                             const std::vector<bool>& present, int n_data, int n_parity,
                             size_t shard_len);

enum class ProtectionMode : uint8_t { kRevo, kL3Only, kL7Only, kReactive, kNone };

std::string_view ProtectionModeName(ProtectionMode mode);
ProtectionMode ParseProtectionMode(std::string_view name);

// Whether the mode runs application-layer recovery on partially received
// P-frames. Without it any damaged P-frame breaks the rest of its GoP.
bool ModeUsesRecovery(ProtectionMode mode);

struct ProtectionPolicy {
  double i_parity_ratio = 0.5;
  int p_header_copies = 2;
  ProtectionMode mode = ProtectionMode::kRevo;

  // Reactive mode only: parity ratio currently applied to every frame.
  double reactive_ratio = 0.0;

  void Validate() const;
};

struct ShardPlan {
  int n_data = 0;
  int n_parity = 0;
  int header_copies = 1;
  // Header-split layout: the first header_shards data shards carry the codec
  // header and are sent header_copies times; the body follows. Otherwise the
  // serialized frame is one contiguous run of data shards (RS protected when
  // n_parity > 0).
  int header_shards = 0;

  bool header_split() const { return header_shards > 0; }
  friend bool operator==(const ShardPlan&, const ShardPlan&) = default;
};

ShardPlan PlanProtection(const EncodedFrame& enc, const ProtectionPolicy& policy,
                         size_t payload_len);

// Reactive redundancy chosen from the trailing observed loss rate: the
// smallest of {0, 0.5, 1.0} whose tolerable loss exceeds the observation.
double ReactiveParityRatio(double observed_loss);

}  // namespace volstream

#endif  // VOLSTREAM_FEC_H_
