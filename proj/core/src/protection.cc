#include <algorithm>
#include <cmath>
#include <string>

#include "volstream/fec.h"

namespace volstream {
namespace {

// Group members never exceed ceil(n/G) + ceil(r/G) < 253 + 2 shards.
constexpr int kGroupBudget = 253;

int GroupMembers(int count, int groups, int g) {
  return count > g ? (count - g + groups - 1) / groups : 0;
}

int CeilDiv(size_t a, size_t b) { return static_cast<int>((a + b - 1) / b); }

}  // namespace

int FecGroupCount(int n_data, int n_parity) {
  const int total = n_data + n_parity;
  if (total <= kMaxShards) return 1;
  return std::min(n_data, (total + kGroupBudget - 1) / kGroupBudget);
}

std::vector<Bytes> EncodeFrameShards(std::span<const uint8_t> data, int n_data,
                                     int n_parity, size_t shard_len) {
  if (data.size() > static_cast<size_t>(n_data) * shard_len) {
    throw Error(ErrorCode::kInvalidArgument, "frame does not fit its data shards");
  }
  const int groups = FecGroupCount(n_data, n_parity);
  std::vector<Bytes> out(n_data + n_parity);
  for (int g = 0; g < groups; ++g) {
    const int n = GroupMembers(n_data, groups, g);
    const int r = GroupMembers(n_parity, groups, g);
    Bytes stripe(static_cast<size_t>(n) * shard_len, 0);
    for (int k = 0; k < n; ++k) {
      const size_t begin = static_cast<size_t>(g + k * groups) * shard_len;
      if (begin >= data.size()) continue;
      const size_t len = std::min(shard_len, data.size() - begin);
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(begin), len,
                  stripe.begin() + static_cast<std::ptrdiff_t>(k * shard_len));
    }
    ShardSet set = RsEncode(stripe, n, r, shard_len);
    for (int k = 0; k < n; ++k) out[g + k * groups] = std::move(set.shards[k]);
    for (int k = 0; k < r; ++k) out[n_data + g + k * groups] = std::move(set.shards[n + k]);
  }
  return out;
}

bool FrameShardsRecoverable(const std::vector<bool>& present, int n_data, int n_parity) {
  const int groups = FecGroupCount(n_data, n_parity);
  for (int g = 0; g < groups; ++g) {
    int have = 0;
    const int n = GroupMembers(n_data, groups, g);
    for (int i = g; i < n_data; i += groups) have += present[i] ? 1 : 0;
    for (int j = g; j < n_parity; j += groups) have += present[n_data + j] ? 1 : 0;
    if (have < n) return false;
  }
  return true;
}

Bytes ReconstructFrameShards(const std::vector<Bytes>& shards,
                             const std::vector<bool>& present, int n_data, int n_parity,
                             size_t shard_len) {
  if (static_cast<int>(shards.size()) != n_data + n_parity ||
      static_cast<int>(present.size()) != n_data + n_parity) {
    throw Error(ErrorCode::kInvalidArgument, "shard vector size mismatch");
  }
  const int groups = FecGroupCount(n_data, n_parity);
  Bytes out(static_cast<size_t>(n_data) * shard_len, 0);
  for (int g = 0; g < groups; ++g) {
    ShardSet set;
    set.n = GroupMembers(n_data, groups, g);
    set.r = GroupMembers(n_parity, groups, g);
    set.shard_len = shard_len;
    for (int k = 0; k < set.n; ++k) {
      const int i = g + k * groups;
      set.shards.push_back(present[i] ? shards[i] : Bytes(shard_len, 0));
      set.present.push_back(present[i]);
    }
    for (int k = 0; k < set.r; ++k) {
      const int j = n_data + g + k * groups;
      set.shards.push_back(present[j] ? shards[j] : Bytes(shard_len, 0));
      set.present.push_back(present[j]);
    }
    const Bytes stripe = RsReconstruct(set);
    for (int k = 0; k < set.n; ++k) {
      std::copy_n(stripe.begin() + static_cast<std::ptrdiff_t>(k * shard_len), shard_len,
                  out.begin() + static_cast<std::ptrdiff_t>((g + k * groups) * shard_len));
    }
  }
  return out;
}

std::string_view ProtectionModeName(ProtectionMode mode) {
  switch (mode) {
    case ProtectionMode::kRevo: return "revo";
    case ProtectionMode::kL3Only: return "l3_only";
    case ProtectionMode::kL7Only: return "l7_only";
    case ProtectionMode::kReactive: return "reactive";
    case ProtectionMode::kNone: return "none";
  }
  return "unknown";
}

ProtectionMode ParseProtectionMode(std::string_view name) {
  for (auto m : {ProtectionMode::kRevo, ProtectionMode::kL3Only, ProtectionMode::kL7Only,
                 ProtectionMode::kReactive, ProtectionMode::kNone}) {
    if (ProtectionModeName(m) == name) return m;
  }
  throw Error(ErrorCode::kConfig, "unknown mode '" + std::string(name) + "'");
}

bool ModeUsesRecovery(ProtectionMode mode) {
  return mode == ProtectionMode::kRevo || mode == ProtectionMode::kL7Only;
}

void ProtectionPolicy::Validate() const {
  if (!(i_parity_ratio >= 0.0 && i_parity_ratio <= 1.0)) {
    throw Error(ErrorCode::kConfig, "i_parity_ratio must be in [0,1]");
  }
  if (p_header_copies < 1) throw Error(ErrorCode::kConfig, "p_header_copies must be >= 1");
  if (!(reactive_ratio >= 0.0 && reactive_ratio <= 1.0)) {
    throw Error(ErrorCode::kConfig, "reactive_ratio must be in [0,1]");
  }
}

ShardPlan PlanProtection(const EncodedFrame& enc, const ProtectionPolicy& policy,
                         size_t payload_len) {
  if (payload_len == 0) throw Error(ErrorCode::kInvalidArgument, "payload_len must be positive");
  ShardPlan plan;
  const int whole = CeilDiv(enc.encoded_len, payload_len);
  const bool l3 = policy.mode == ProtectionMode::kRevo || policy.mode == ProtectionMode::kL3Only;

  if (policy.mode == ProtectionMode::kReactive && policy.reactive_ratio > 0.0) {
    plan.n_data = whole;
    plan.n_parity = static_cast<int>(std::ceil(policy.reactive_ratio * whole));
    return plan;
  }
  if (enc.kind == FrameKind::kI) {
    plan.n_data = whole;
    plan.n_parity = l3 ? static_cast<int>(std::ceil(policy.i_parity_ratio * whole)) : 0;
    return plan;
  }
  plan.header_shards = CeilDiv(enc.header.size(), payload_len);
  plan.n_data = plan.header_shards + CeilDiv(enc.payload.size(), payload_len);
  plan.header_copies = l3 ? policy.p_header_copies : 1;
  return plan;
}

double ReactiveParityRatio(double observed_loss) {
  if (observed_loss <= 0.0) return 0.0;
  if (observed_loss < MaxTolerableLoss(2, 1)) return 0.5;
  return 1.0;
}

}  // namespace volstream
