#include <algorithm>
#include <array>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "volstream/fec.h"

namespace volstream {
namespace gf256 {
namespace {

struct Tables {
  std::array<uint8_t, 512> exp{};
  std::array<int, 256> log{};
  std::vector<uint8_t> mul;  // 256 x 256

  Tables() : mul(256 * 256) {
    unsigned x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<uint8_t>(x);
      log[x] = i;
      x <<= 1;
      if (x & 0x100) x ^= kPolynomial;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
    log[0] = -1;
    for (int a = 0; a < 256; ++a) {
      for (int b = 0; b < 256; ++b) {
        mul[a * 256 + b] =
            (a == 0 || b == 0) ? 0 : exp[log[a] + log[b]];
      }
    }
  }
};

const Tables& T() {
  static const Tables tables;
  return tables;
}

}  // namespace

uint8_t Mul(uint8_t a, uint8_t b) { return T().mul[a * 256 + b]; }

uint8_t Inv(uint8_t a) {
  if (a == 0) throw Error(ErrorCode::kInvalidArgument, "gf256: inverse of zero");
  return T().exp[255 - T().log[a]];
}

uint8_t Div(uint8_t a, uint8_t b) { return Mul(a, Inv(b)); }

uint8_t Pow(uint8_t a, unsigned e) {
  if (e == 0) return 1;
  if (a == 0) return 0;
  return T().exp[(static_cast<unsigned>(T().log[a]) * e) % 255];
}

const uint8_t* MulRow(uint8_t c) { return &T().mul[c * 256]; }

}  // namespace gf256

namespace {

using Matrix = std::vector<std::vector<uint8_t>>;

// Gauss-Jordan inversion over GF(2^8). Throws if singular.
Matrix Invert(Matrix m) {
  const size_t n = m.size();
  Matrix inv(n, std::vector<uint8_t>(n, 0));
  for (size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    while (pivot < n && m[pivot][col] == 0) ++pivot;
    if (pivot == n) throw Error(ErrorCode::kUnrecoverable, "singular decoding matrix");
    std::swap(m[pivot], m[col]);
    std::swap(inv[pivot], inv[col]);
    const uint8_t scale = gf256::Inv(m[col][col]);
    for (size_t j = 0; j < n; ++j) {
      m[col][j] = gf256::Mul(m[col][j], scale);
      inv[col][j] = gf256::Mul(inv[col][j], scale);
    }
    for (size_t row = 0; row < n; ++row) {
      if (row == col || m[row][col] == 0) continue;
      const uint8_t f = m[row][col];
      for (size_t j = 0; j < n; ++j) {
        m[row][j] ^= gf256::Mul(f, m[col][j]);
        inv[row][j] ^= gf256::Mul(f, inv[col][j]);
      }
    }
  }
  return inv;
}

// (n+r) x n systematic generator: Vandermonde rows at points 0..n+r-1,
// right-multiplied by the inverse of the top n x n block.
std::shared_ptr<const Matrix> GeneratorMatrix(int n, int r) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const Matrix>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({n, r});
  if (it != cache.end()) return it->second;

  const int total = n + r;
  Matrix vander(total, std::vector<uint8_t>(n));
  for (int i = 0; i < total; ++i) {
    for (int j = 0; j < n; ++j) vander[i][j] = gf256::Pow(static_cast<uint8_t>(i), j);
  }
  const Matrix top_inv = Invert(Matrix(vander.begin(), vander.begin() + n));
  auto gen = std::make_shared<Matrix>(total, std::vector<uint8_t>(n, 0));
  for (int i = 0; i < total; ++i) {
    for (int j = 0; j < n; ++j) {
      uint8_t acc = 0;
      for (int k = 0; k < n; ++k) acc ^= gf256::Mul(vander[i][k], top_inv[k][j]);
      (*gen)[i][j] = acc;
    }
  }
  cache.emplace(std::make_pair(n, r), gen);
  return gen;
}

void MulAccumulate(uint8_t coef, const Bytes& src, Bytes& dst) {
  if (coef == 0) return;
  const uint8_t* row = gf256::MulRow(coef);
  for (size_t i = 0; i < src.size(); ++i) dst[i] ^= row[src[i]];
}

void CheckCounts(int n, int r) {
  if (n < 1 || r < 0 || n + r > kMaxShards) {
    throw Error(ErrorCode::kInvalidArgument,
                "invalid shard counts n=" + std::to_string(n) + " r=" + std::to_string(r));
  }
}

}  // namespace

int ShardSet::present_count() const {
  return static_cast<int>(std::count(present.begin(), present.end(), true));
}

ShardSet RsEncode(std::span<const uint8_t> data, int n, int r) {
  CheckCounts(n, r);
  return RsEncode(data, n, r, (data.size() + n - 1) / n);
}

ShardSet RsEncode(std::span<const uint8_t> data, int n, int r, size_t shard_len) {
  CheckCounts(n, r);
  if (data.size() > static_cast<size_t>(n) * shard_len) {
    throw Error(ErrorCode::kInvalidArgument, "data does not fit n * shard_len");
  }
  ShardSet set;
  set.n = n;
  set.r = r;
  set.shard_len = shard_len;
  set.shards.assign(n + r, Bytes(shard_len, 0));
  set.present.assign(n + r, true);
  for (int i = 0; i < n; ++i) {
    const size_t begin = static_cast<size_t>(i) * shard_len;
    if (begin >= data.size()) break;
    const size_t len = std::min(shard_len, data.size() - begin);
    std::memcpy(set.shards[i].data(), data.data() + begin, len);
  }
  if (r == 0) return set;
  const auto gen = GeneratorMatrix(n, r);
  for (int p = 0; p < r; ++p) {
    for (int j = 0; j < n; ++j) MulAccumulate((*gen)[n + p][j], set.shards[j], set.shards[n + p]);
  }
  return set;
}

Bytes RsReconstruct(const ShardSet& set) {
  CheckCounts(set.n, set.r);
  if (static_cast<int>(set.shards.size()) != set.total() ||
      static_cast<int>(set.present.size()) != set.total()) {
    throw Error(ErrorCode::kInvalidArgument, "shard set size mismatch");
  }
  Bytes out(static_cast<size_t>(set.n) * set.shard_len);
  const bool data_intact =
      std::all_of(set.present.begin(), set.present.begin() + set.n, [](bool b) { return b; });
  if (data_intact) {
    for (int i = 0; i < set.n; ++i) {
      std::memcpy(out.data() + static_cast<size_t>(i) * set.shard_len, set.shards[i].data(),
                  set.shard_len);
    }
    return out;
  }
  if (set.present_count() < set.n) {
    throw Error(ErrorCode::kUnrecoverable, "fewer than n shards present");
  }

  std::vector<int> rows;
  for (int i = 0; i < set.total() && static_cast<int>(rows.size()) < set.n; ++i) {
    if (set.present[i]) rows.push_back(i);
  }
  const auto gen = GeneratorMatrix(set.n, set.r);
  Matrix sub;
  sub.reserve(set.n);
  for (int row : rows) sub.push_back((*gen)[row]);
  const Matrix dec = Invert(std::move(sub));

  Bytes shard(set.shard_len);
  for (int i = 0; i < set.n; ++i) {
    std::fill(shard.begin(), shard.end(), 0);
    if (set.present[i]) {
      shard = set.shards[i];
    } else {
      for (int k = 0; k < set.n; ++k) MulAccumulate(dec[i][k], set.shards[rows[k]], shard);
    }
    std::memcpy(out.data() + static_cast<size_t>(i) * set.shard_len, shard.data(),
                set.shard_len);
  }
  return out;
}

double MaxTolerableLoss(int n, int r) {
  if (n < 1 || r < 0) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1 and r >= 0");
  return static_cast<double>(r) / static_cast<double>(n + r);
}

}  // namespace volstream
