#ifndef VOLSTREAM_METRICS_H_
#define VOLSTREAM_METRICS_H_

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "volstream/frame.h"
#include "volstream/outcome.h"

namespace volstream {

enum class SsimWindow { kUniform8, kGaussian11 };

struct SsimOptions {
  SsimWindow window = SsimWindow::kUniform8;
};

// Mean SSIM over all full windows (stride 1), averaged across channels and
// clamped to [0,1]. C1 = (0.01*255)^2, C2 = (0.03*255)^2, population
// statistics. Planes smaller than the window are scored as one window.
double Ssim(const Plane& a, const Plane& b, const SsimOptions& opts = {});

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10*log10(255^2 / MSE); kPsnrIdentical when the planes are equal.
double Psnr(const Plane& a, const Plane& b);
double MeanSquaredError(const Plane& a, const Plane& b);

struct FreezeStats {
  double median_ms = 0.0;
  double total_ms = 0.0;
  size_t count = 0;
};

// Median of event durations; an even count averages the middle pair.
FreezeStats ComputeFreezeStats(std::span<const FreezeEvent> log);

// (parity + duplicated bytes) / data bytes. Throws on zero data bytes.
double Overhead(size_t bytes_data, size_t bytes_parity, size_t bytes_dup);

// 100 * |LostFrame or LostGoP| / total; 0 for an empty span.
double NonRecoveredPercent(std::span<const Outcome> outcomes);

double Median(std::vector<double> values);

}  // namespace volstream

#endif  // VOLSTREAM_METRICS_H_
