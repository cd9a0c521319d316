#include "volstream/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace volstream {
namespace {

constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

void CheckShapes(const Plane& a, const Plane& b) {
  if (!a.SameShape(b) || a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "planes differ in shape");
  }
}

double SsimFromMoments(double n, double sx, double sy, double sxx, double syy, double sxy) {
  const double mx = sx / n;
  const double my = sy / n;
  const double vx = sxx / n - mx * mx;
  const double vy = syy / n - my * my;
  const double cxy = sxy / n - mx * my;
  return ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
         ((mx * mx + my * my + kC1) * (vx + vy + kC2));
}

// Uniform 8x8 windows. Column sums slide down the plane and a running row
// sum slides across it; all sums are exact integers.
double SsimUniformChannel(const Plane& a, const Plane& b, int c) {
  const int w = a.width, h = a.height;
  const int win_x = std::min(8, w), win_y = std::min(8, h);
  const size_t stride = a.stride();
  const int ch = a.channels;
  // Per column: sum a, sum b, sum a^2, sum b^2, sum ab over win_y rows.
  std::vector<std::array<int64_t, 5>> col(static_cast<size_t>(w));
  auto add_row = [&](int y, int64_t sign) {
    const uint8_t* pa = a.data.data() + static_cast<size_t>(y) * stride + c;
    const uint8_t* pb = b.data.data() + static_cast<size_t>(y) * stride + c;
    for (int x = 0; x < w; ++x) {
      const int64_t va = pa[static_cast<size_t>(x) * ch], vb = pb[static_cast<size_t>(x) * ch];
      auto& s = col[x];
      s[0] += sign * va;
      s[1] += sign * vb;
      s[2] += sign * va * va;
      s[3] += sign * vb * vb;
      s[4] += sign * va * vb;
    }
  };
  for (int y = 0; y < win_y; ++y) add_row(y, 1);
  const double n = static_cast<double>(win_x) * win_y;
  double total = 0.0;
  size_t count = 0;
  for (int y = 0; y + win_y <= h; ++y) {
    if (y > 0) {
      add_row(y - 1, -1);
      add_row(y + win_y - 1, 1);
    }
    std::array<int64_t, 5> s{};
    for (int x = 0; x < win_x; ++x) {
      for (int k = 0; k < 5; ++k) s[k] += col[x][k];
    }
    for (int x = 0;; ++x) {
      total += SsimFromMoments(n, static_cast<double>(s[0]), static_cast<double>(s[1]),
                               static_cast<double>(s[2]), static_cast<double>(s[3]),
                               static_cast<double>(s[4]));
      ++count;
      if (x + win_x >= w) break;
      for (int k = 0; k < 5; ++k) s[k] += col[x + win_x][k] - col[x][k];
    }
  }
  return total / static_cast<double>(count);
}

// 11x11 Gaussian window, sigma 1.5, separable filtering over the valid area.
double SsimGaussianChannel(const Plane& a, const Plane& b, int c) {
  constexpr int kRadius = 5;
  constexpr int kTaps = 2 * kRadius + 1;
  std::array<double, kTaps> g{};
  double norm = 0.0;
  for (int i = 0; i < kTaps; ++i) {
    const double d = i - kRadius;
    g[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
    norm += g[i];
  }
  for (auto& v : g) v /= norm;
  const int w = a.width, h = a.height;
  if (w < kTaps || h < kTaps) return SsimUniformChannel(a, b, c);
  const int ow = w - kTaps + 1, oh = h - kTaps + 1;

  std::array<std::vector<double>, 5> horiz;
  for (auto& v : horiz) v.assign(static_cast<size_t>(ow) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      std::array<double, 5> acc{};
      for (int t = 0; t < kTaps; ++t) {
        const double va = a.at(x + t, y, c), vb = b.at(x + t, y, c);
        acc[0] += g[t] * va;
        acc[1] += g[t] * vb;
        acc[2] += g[t] * va * va;
        acc[3] += g[t] * vb * vb;
        acc[4] += g[t] * va * vb;
      }
      for (int k = 0; k < 5; ++k) horiz[k][static_cast<size_t>(y) * ow + x] = acc[k];
    }
  }
  double total = 0.0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      std::array<double, 5> m{};
      for (int t = 0; t < kTaps; ++t) {
        for (int k = 0; k < 5; ++k) m[k] += g[t] * horiz[k][static_cast<size_t>(y + t) * ow + x];
      }
      total += SsimFromMoments(1.0, m[0], m[1], m[2], m[3], m[4]);
    }
  }
  return total / (static_cast<double>(ow) * oh);
}

}  // namespace

double Ssim(const Plane& a, const Plane& b, const SsimOptions& opts) {
  CheckShapes(a, b);
  if (a.width == 0 || a.height == 0) return 1.0;
  double sum = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    sum += opts.window == SsimWindow::kUniform8 ? SsimUniformChannel(a, b, c)
                                                : SsimGaussianChannel(a, b, c);
  }
  return std::clamp(sum / a.channels, 0.0, 1.0);
}

double MeanSquaredError(const Plane& a, const Plane& b) {
  CheckShapes(a, b);
  if (a.size() == 0) return 0.0;
  uint64_t acc = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const int d = static_cast<int>(a.data[i]) - b.data[i];
    acc += static_cast<uint64_t>(d * d);
  }
  return static_cast<double>(acc) / static_cast<double>(a.size());
}

double Psnr(const Plane& a, const Plane& b) {
  const double mse = MeanSquaredError(a, b);
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double Median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FreezeStats ComputeFreezeStats(std::span<const FreezeEvent> log) {
  FreezeStats st;
  std::vector<double> durations;
  durations.reserve(log.size());
  for (const auto& e : log) {
    durations.push_back(e.duration_ms);
    st.total_ms += e.duration_ms;
  }
  st.count = log.size();
  st.median_ms = Median(std::move(durations));
  return st;
}

double Overhead(size_t bytes_data, size_t bytes_parity, size_t bytes_dup) {
  if (bytes_data == 0) throw Error(ErrorCode::kInvalidArgument, "overhead needs data bytes");
  return static_cast<double>(bytes_parity + bytes_dup) / static_cast<double>(bytes_data);
}

double NonRecoveredPercent(std::span<const Outcome> outcomes) {
  if (outcomes.empty()) return 0.0;
  const auto lost = std::count_if(outcomes.begin(), outcomes.end(), IsNonRecovered);
  return 100.0 * static_cast<double>(lost) / static_cast<double>(outcomes.size());
}

std::string_view OutcomeName(Outcome o) {
  switch (o) {
    case Outcome::kClean: return "clean";
    case Outcome::kPartialRecoverable: return "partial_recoverable";
    case Outcome::kLostFrame: return "lost_frame";
    case Outcome::kLostGop: return "lost_gop";
  }
  return "unknown";
}

Outcome ParseOutcome(std::string_view name) {
  for (auto o : {Outcome::kClean, Outcome::kPartialRecoverable, Outcome::kLostFrame,
                 Outcome::kLostGop}) {
    if (OutcomeName(o) == name) return o;
  }
  throw Error(ErrorCode::kParse, "unknown outcome '" + std::string(name) + "'");
}

}  // namespace volstream
