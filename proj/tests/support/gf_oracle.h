#ifndef VOLSTREAM_TESTS_GF_ORACLE_H_
#define VOLSTREAM_TESTS_GF_ORACLE_H_

// Slow, table-free GF(2^8) arithmetic and Reed-Solomon helpers used as
// independent references for the library implementation.

#include <cstdint>
#include <optional>
#include <vector>

namespace volstream::oracle {

// Shift-and-add multiplication modulo x^8+x^4+x^3+x^2+1.
inline uint8_t GfMul(uint8_t a, uint8_t b) {
  unsigned acc = 0, x = a;
  for (unsigned y = b; y != 0; y >>= 1) {
    if (y & 1) acc ^= x;
    x <<= 1;
    if (x & 0x100) x ^= 0x11D;
  }
  return static_cast<uint8_t>(acc);
}

inline uint8_t GfPow(uint8_t a, unsigned e) {
  uint8_t r = 1;
  for (unsigned i = 0; i < e; ++i) r = GfMul(r, a);
  return r;
}

// Brute-force search; 0 has no inverse.
inline uint8_t GfInv(uint8_t a) {
  for (unsigned c = 1; c < 256; ++c) {
    if (GfMul(a, static_cast<uint8_t>(c)) == 1) return static_cast<uint8_t>(c);
  }
  return 0;
}

using Matrix = std::vector<std::vector<uint8_t>>;

// Gauss-Jordan inverse; nullopt when singular.
inline std::optional<Matrix> Invert(Matrix m) {
  const size_t n = m.size();
  Matrix inv(n, std::vector<uint8_t>(n, 0));
  for (size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (size_t c = 0; c < n; ++c) {
    size_t p = c;
    while (p < n && m[p][c] == 0) ++p;
    if (p == n) return std::nullopt;
    std::swap(m[p], m[c]);
    std::swap(inv[p], inv[c]);
    const uint8_t s = GfInv(m[c][c]);
    for (size_t j = 0; j < n; ++j) {
      m[c][j] = GfMul(m[c][j], s);
      inv[c][j] = GfMul(inv[c][j], s);
    }
    for (size_t r = 0; r < n; ++r) {
      if (r == c || m[r][c] == 0) continue;
      const uint8_t f = m[r][c];
      for (size_t j = 0; j < n; ++j) {
        m[r][j] ^= GfMul(f, m[c][j]);
        inv[r][j] ^= GfMul(f, inv[c][j]);
      }
    }
  }
  return inv;
}

inline Matrix Multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), std::vector<uint8_t>(b[0].size(), 0));
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = 0; j < b[0].size(); ++j) {
      uint8_t acc = 0;
      for (size_t k = 0; k < b.size(); ++k) acc ^= GfMul(a[i][k], b[k][j]);
      out[i][j] = acc;
    }
  }
  return out;
}

// Systematic (n+r) x n generator: Vandermonde rows x^j at x = 0..n+r-1,
// normalised so the top n rows are the identity.
inline Matrix SystematicGenerator(int n, int r) {
  Matrix v(n + r, std::vector<uint8_t>(n));
  for (int i = 0; i < n + r; ++i) {
    for (int j = 0; j < n; ++j) v[i][j] = GfPow(static_cast<uint8_t>(i), static_cast<unsigned>(j));
  }
  const auto top = Invert(Matrix(v.begin(), v.begin() + n));
  return Multiply(v, *top);
}

// Encodes shards (n x len) to n+r shards with |gen|.
inline std::vector<std::vector<uint8_t>> Encode(const Matrix& gen,
                                                const std::vector<std::vector<uint8_t>>& data) {
  const size_t len = data[0].size();
  std::vector<std::vector<uint8_t>> out(gen.size(), std::vector<uint8_t>(len, 0));
  for (size_t i = 0; i < gen.size(); ++i) {
    for (size_t k = 0; k < data.size(); ++k) {
      for (size_t b = 0; b < len; ++b) out[i][b] ^= GfMul(gen[i][k], data[k][b]);
    }
  }
  return out;
}

}  // namespace volstream::oracle

#endif  // VOLSTREAM_TESTS_GF_ORACLE_H_
