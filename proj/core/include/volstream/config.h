#ifndef VOLSTREAM_CONFIG_H_
#define VOLSTREAM_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "volstream/channel.h"
#include "volstream/codec.h"
#include "volstream/fec.h"
#include "volstream/metrics.h"
#include "volstream/packet.h"
#include "volstream/recovery.h"
#include "volstream/udp.h"

namespace volstream {

enum class InputKind { kClip, kTalking, kTranslating };
enum class BackendKind { kBaseline, kRemote, kNone };
enum class Transport { kSim, kUdp };
enum class ReportFormat { kJson, kCsv };

struct InputConfig {
  InputKind kind = InputKind::kTalking;
  std::string clip;        // as written in the config
  std::string descriptor;  // defaults to "<clip>.desc"
  int width = 640;         // synthetic inputs only
  int height = 480;
  int frames = 900;
  uint64_t seed = 1;
};

struct BackendConfig {
  BackendKind kind = BackendKind::kBaseline;
  Endpoint endpoint;
  int reference_frames = kDefaultReferenceFrames;
};

struct UdpConfig {
  Endpoint peer{"127.0.0.1", 47000};
  // "both" runs sender and receiver in this process over loopback.
  std::string role = "both";
  double drop_probability = 0.0;
};

// One experiment. The JSON schema is documented in README.md. Relative paths are
// resolved against base_dir.
struct ExperimentConfig {
  InputConfig input;
  GopSpec gop;
  CodecConfig codec;
  std::string external_codec;  // shell command; empty selects the reference codec
  ProtectionPolicy protection;
  PayloadLimits payload;
  ChannelConfig channel;
  std::string trace;  // as written; loaded into channel.source
  BackendConfig backend;
  uint64_t seed = 1;
  std::string output;
  ReportFormat format = ReportFormat::kJson;
  bool filter_corrupted = false;
  bool compute_quality = true;
  bool realtime_budget = false;
  SsimWindow ssim_window = SsimWindow::kUniform8;
  std::string outcome_log;
  Transport transport = Transport::kSim;
  UdpConfig udp;
  std::filesystem::path base_dir = ".";

  std::filesystem::path Resolve(const std::string& p) const;
  // Throws kConfig (or kIo for missing files).
  void Validate() const;
};

ExperimentConfig ParseConfig(std::string_view json_text,
                             const std::filesystem::path& base_dir = ".");
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// Canonical JSON echo of everything that affects results (output paths
// excluded), stable key order.
std::string ConfigEcho(const ExperimentConfig& cfg);

// Command-line overrides.
void SetMode(ExperimentConfig& cfg, std::string_view mode);
void SetTrace(ExperimentConfig& cfg, const std::string& path);
// "baseline", "none" or "remote:HOST:PORT".
void SetBackend(ExperimentConfig& cfg, std::string_view spec);
void SetTransport(ExperimentConfig& cfg, std::string_view transport);

std::string_view ReportFormatName(ReportFormat f);

}  // namespace volstream

#endif  // VOLSTREAM_CONFIG_H_
