#ifndef VOLSTREAM_REPORT_H_
#define VOLSTREAM_REPORT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "volstream/config.h"
#include "volstream/outcome.h"
#include "volstream/receiver.h"

namespace volstream {

inline constexpr std::string_view kReportSchema = "volstream-report/1";

struct SessionSummary {
  size_t frames = 0;
  size_t records = 0;
  double i_loss_pct = 0.0;  // I records not clean
  double p_loss_pct = 0.0;  // P records lost (LostFrame or LostGop)
  double non_recovered_pct = 0.0;
  size_t freeze_count = 0;
  double median_freeze_ms = 0.0;
  double total_freeze_ms = 0.0;
  double overhead = 0.0;
  size_t corrupted_records = 0;
  size_t recovered_records = 0;
  size_t early_complete = 0;
  size_t deadline_misses = 0;
  // Medians over the quality set: every record, or only corrupted ones when
  // the filter is on. NaN when the set is empty or quality is off.
  size_t quality_records = 0;
  double median_ssim_rgb = 0.0;
  double median_ssim_depth = 0.0;
  double median_psnr_rgb = 0.0;
  double median_psnr_depth = 0.0;
};

struct SessionReport {
  std::string mode;
  uint64_t seed = 0;
  std::string config;  // ConfigEcho() output
  bool filter_corrupted = false;
  bool quality = true;
  std::vector<FrameRecord> records;  // frame order, rgb before depth
  std::vector<FreezeEvent> freeze_log;
  size_t bytes_data = 0;
  size_t bytes_parity = 0;
  size_t bytes_dup = 0;
  size_t packets_sent = 0;
  size_t packets_lost = 0;
  size_t packets_late = 0;
  SessionSummary summary;
};

// Records whose outcome is anything but clean.
std::vector<FrameRecord> CorruptedRecords(const std::vector<FrameRecord>& records);

// Freeze and loss figures always cover the whole session; only the quality
// medians honor filter_corrupted.
SessionSummary Summarize(const SessionReport& report);

// Deterministic text. Reals are rounded to 1e-6; +inf PSNR is written as
// the string "inf" and missing quality as null (empty in CSV).
std::string ReportToJson(const SessionReport& report);
std::string ReportToCsv(const SessionReport& report);
SessionReport ParseReport(std::string_view text);  // either format
void WriteReport(const SessionReport& report, const std::filesystem::path& path,
                 ReportFormat format);
SessionReport LoadReport(const std::filesystem::path& path);

// Columns t_ms,ssim_rgb,ssim_depth,frozen; one row per frame.
std::string SeriesCsv(const SessionReport& report);
void WriteSeries(const SessionReport& report, const std::filesystem::path& path);

// Side-by-side comparison of several runs, one row per report.
std::string SweepTable(const std::vector<SessionReport>& reports);

void WriteTextFile(const std::filesystem::path& path, std::string_view text);
std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace volstream

#endif  // VOLSTREAM_REPORT_H_
