#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "volstream/config.h"
#include "volstream/external_codec.h"
#include "volstream/recovery_protocol.h"
#include "volstream/report.h"
#include "volstream/session.h"
#include "volstream/synthetic.h"

namespace vs = volstream;

namespace {

struct RunFlags {
  std::string config;
  std::string mode;
  std::string trace;
  std::string out;
  std::string format;
  std::string transport;
  std::string peer;
  std::string role;
  std::string backend;
  std::string outcome_log;
  int64_t seed = -1;
  bool filter_corrupted = false;
  bool no_quality = false;
};

void AddRunFlags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--trace", f.trace, "Network trace CSV (overrides channel.loss)");
  cmd->add_option("--seed", f.seed, "Session seed");
  cmd->add_option("--out", f.out, "Report path");
  cmd->add_option("--format", f.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--transport", f.transport, "sim or udp")->check(CLI::IsMember({"sim", "udp"}));
  cmd->add_option("--peer", f.peer, "UDP peer host:port");
  cmd->add_option("--role", f.role, "UDP role")->check(CLI::IsMember({"both", "sender", "receiver"}));
  cmd->add_option("--backend", f.backend, "baseline, none or remote:HOST:PORT");
  cmd->add_option("--outcome-log", f.outcome_log, "Per-frame outcome log (JSON lines)");
  cmd->add_flag("--filter-corrupted", f.filter_corrupted,
                "Quality medians over corrupted frames only");
  cmd->add_flag("--no-quality", f.no_quality, "Skip SSIM/PSNR");
}

// Paths given on the command line are relative to the working directory.
std::string FromCwd(const std::string& p) {
  return std::filesystem::absolute(p).lexically_normal().string();
}

vs::ExperimentConfig BuildConfig(const RunFlags& f) {
  vs::ExperimentConfig cfg = vs::LoadConfig(f.config);
  if (!f.mode.empty()) vs::SetMode(cfg, f.mode);
  if (!f.trace.empty()) vs::SetTrace(cfg, FromCwd(f.trace));
  if (f.seed >= 0) cfg.seed = static_cast<uint64_t>(f.seed);
  if (!f.out.empty()) cfg.output = FromCwd(f.out);
  if (!f.format.empty()) cfg.format = f.format == "csv" ? vs::ReportFormat::kCsv : vs::ReportFormat::kJson;
  if (!f.transport.empty()) vs::SetTransport(cfg, f.transport);
  if (!f.peer.empty()) cfg.udp.peer = vs::Endpoint::Parse(f.peer);
  if (!f.role.empty()) cfg.udp.role = f.role;
  if (!f.backend.empty()) vs::SetBackend(cfg, f.backend);
  if (!f.outcome_log.empty()) cfg.outcome_log = FromCwd(f.outcome_log);
  if (f.filter_corrupted) cfg.filter_corrupted = true;
  if (f.no_quality) cfg.compute_quality = false;
  return cfg;
}

std::vector<vs::ProtectionMode> ParseModes(const std::string& list) {
  std::vector<vs::ProtectionMode> modes;
  size_t start = 0;
  while (start <= list.size()) {
    const size_t comma = list.find(',', start);
    const std::string item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) modes.push_back(vs::ParseProtectionMode(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (modes.empty()) throw vs::Error(vs::ErrorCode::kConfig, "--modes is empty");
  return modes;
}

void PrintSummary(const vs::SessionReport& r) {
  const vs::SessionSummary& s = r.summary;
  std::printf("mode %s  frames %zu  non-recovered %.2f%%  I-loss %.2f%%  P-loss %.2f%%\n",
              r.mode.c_str(), s.frames, s.non_recovered_pct, s.i_loss_pct, s.p_loss_pct);
  std::printf("freezes %zu  median %.2f ms  total %.2f ms  overhead %.2f%%\n", s.freeze_count,
              s.median_freeze_ms, s.total_freeze_ms, 100.0 * s.overhead);
  if (r.quality) {
    std::printf("median ssim rgb %.4f depth %.4f  psnr rgb %.2f depth %.2f (%zu records%s)\n",
                s.median_ssim_rgb, s.median_ssim_depth, s.median_psnr_rgb, s.median_psnr_depth,
                s.quality_records, r.filter_corrupted ? ", corrupted only" : "");
  }
}

// Blocks SIGINT/SIGTERM in every thread and waits for one of them.
void WaitForSignal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

void BlockSignals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-D streaming over lossy links: experiments and tooling"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one session and write its report");
  AddRunFlags(run, run_flags);
  run->add_option("--mode", run_flags.mode, "revo, l3_only, l7_only, reactive or none");

  RunFlags sweep_flags;
  std::string modes = "revo,l3_only,l7_only";
  auto* sweep = app.add_subcommand("sweep", "Run several modes on the same input and channel");
  AddRunFlags(sweep, sweep_flags);
  sweep->add_option("--modes", modes, "Comma-separated modes");

  std::string series_report, series_out;
  auto* series = app.add_subcommand("series", "Per-frame time series from a report");
  series->add_option("--report", series_report, "Report (json or csv)")->required()->check(CLI::ExistingFile);
  series->add_option("--out", series_out, "Output CSV")->required();

  vs::SyntheticOptions synth_opts;
  std::string synth_kind = "talking", synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic raw clip and its descriptor");
  synth->add_option("--kind", synth_kind)->check(CLI::IsMember({"talking", "translating"}));
  synth->add_option("--width", synth_opts.width);
  synth->add_option("--height", synth_opts.height);
  synth->add_option("--frames", synth_opts.frames);
  synth->add_option("--fps", synth_opts.fps);
  synth->add_option("--seed", synth_opts.seed);
  synth->add_option("--out", synth_out, "Clip path; descriptor goes to <out>.desc")->required();

  vs::CodecConfig codec_cfg;
  auto* codec_serve = app.add_subcommand(
      "codec-serve", "Serve the reference codec over stdin/stdout (external codec protocol)");
  codec_serve->add_option("--block", codec_cfg.block);
  codec_serve->add_option("--quant", codec_cfg.quant);

  std::string listen = "127.0.0.1:47100", handler = "baseline";
  int delay_ms = 0;
  auto* rec_serve = app.add_subcommand("recovery-serve", "Serve the recovery wire protocol");
  rec_serve->add_option("--listen", listen, "host:port");
  rec_serve->add_option("--handler", handler)->check(CLI::IsMember({"echo", "baseline"}));
  rec_serve->add_option("--delay-ms", delay_ms, "Injected delay per response");

  std::string check_endpoint;
  int check_timeout = 2000;
  auto* check = app.add_subcommand("backend-check", "Run the backend conformance suite");
  check->add_option("--endpoint", check_endpoint, "host:port")->required();
  check->add_option("--timeout-ms", check_timeout);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run) {
      vs::ExperimentConfig cfg = BuildConfig(run_flags);
      spdlog::info("running {} ({})", vs::ProtectionModeName(cfg.protection.mode),
                   cfg.transport == vs::Transport::kSim ? "simulated" : "udp");
      const vs::SessionReport rep = vs::RunExperiment(cfg);
      PrintSummary(rep);
      if (!cfg.output.empty()) spdlog::info("report written to {}", cfg.output);
    } else if (*sweep) {
      vs::ExperimentConfig cfg = BuildConfig(sweep_flags);
      const auto reports = vs::RunSweep(cfg, ParseModes(modes));
      std::cout << vs::SweepTable(reports);
    } else if (*series) {
      vs::WriteSeries(vs::LoadReport(series_report), series_out);
    } else if (*synth) {
      const auto frames = synth_kind == "talking" ? vs::TalkingMotionClip(synth_opts)
                                                  : vs::TranslatingTextureClip(synth_opts);
      vs::WriteRawVideo(synth_out, frames);
      vs::WriteClipDescriptor(synth_out + ".desc",
                              {synth_opts.width, synth_opts.height, synth_opts.fps});
      spdlog::info("wrote {} frames to {}", frames.size(), synth_out);
    } else if (*codec_serve) {
      vs::ReferenceCodec codec(codec_cfg);
      vs::ServeCodec(STDIN_FILENO, STDOUT_FILENO, codec);
    } else if (*rec_serve) {
      BlockSignals();
      vs::RecoveryServer::Options opts;
      opts.delay_ms = delay_ms;
      vs::RecoveryServer server(vs::Endpoint::Parse(listen),
                                handler == "echo" ? vs::RecoveryServer::EchoHandler()
                                                  : vs::RecoveryServer::BaselineHandler(),
                                opts);
      spdlog::info("recovery backend ({}) listening on {}", handler, server.endpoint().ToString());
      WaitForSignal();
      server.Stop();
    } else if (*check) {
      const auto results = vs::RunBackendConformance(vs::Endpoint::Parse(check_endpoint), check_timeout);
      bool ok = true;
      for (const auto& c : results) {
        std::printf("%-36s %s%s%s\n", c.name.c_str(), c.passed ? "ok" : "FAILED",
                    c.detail.empty() ? "" : "  ", c.detail.c_str());
        ok = ok && c.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const vs::Error& e) {
    spdlog::error("{}: {}", vs::ErrorCodeName(e.code()), e.what());
    return e.code() == vs::ErrorCode::kConfig ? 2 : 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
