#include "volstream/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace volstream {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void Fail(const std::string& msg) { throw Error(ErrorCode::kConfig, msg); }

void CheckKeys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) Fail(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) Fail("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void Read(const json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    Fail(where + "." + key + " has the wrong type");
  }
}

InputKind ParseSyntheticKind(const std::string& s) {
  if (s == "talking") return InputKind::kTalking;
  if (s == "translating") return InputKind::kTranslating;
  Fail("unknown synthetic kind '" + s + "'");
}

std::string_view InputKindName(InputKind k) {
  switch (k) {
    case InputKind::kClip: return "clip";
    case InputKind::kTalking: return "talking";
    case InputKind::kTranslating: return "translating";
  }
  return "?";
}

SsimWindow ParseSsimWindow(const std::string& s) {
  if (s == "uniform8") return SsimWindow::kUniform8;
  if (s == "gaussian11") return SsimWindow::kGaussian11;
  Fail("unknown ssim_window '" + s + "'");
}

int ParseModalityName(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  const auto s = v.get<std::string>();
  if (s == "rgb") return 0;
  if (s == "depth") return 1;
  Fail("unknown modality '" + s + "'");
}

void ParseInput(const json& j, InputConfig& in) {
  CheckKeys(j, "input", {"clip", "descriptor", "synthetic"});
  if (j.contains("clip") == j.contains("synthetic")) {
    Fail("input needs exactly one of 'clip' or 'synthetic'");
  }
  if (j.contains("clip")) {
    in.kind = InputKind::kClip;
    Read(j, "clip", in.clip, "input");
    Read(j, "descriptor", in.descriptor, "input");
    if (in.descriptor.empty()) in.descriptor = in.clip + ".desc";
    return;
  }
  const json& s = j["synthetic"];
  CheckKeys(s, "input.synthetic", {"kind", "width", "height", "frames", "seed"});
  std::string kind = "talking";
  Read(s, "kind", kind, "input.synthetic");
  in.kind = ParseSyntheticKind(kind);
  Read(s, "width", in.width, "input.synthetic");
  Read(s, "height", in.height, "input.synthetic");
  Read(s, "frames", in.frames, "input.synthetic");
  Read(s, "seed", in.seed, "input.synthetic");
}

void ParseChannel(const json& j, ExperimentConfig& cfg) {
  CheckKeys(j, "channel", {"prop_delay_ms", "queue_bytes", "bandwidth_kbps", "loss", "forced_drops"});
  ChannelConfig& ch = cfg.channel;
  Read(j, "prop_delay_ms", ch.prop_delay_ms, "channel");
  Read(j, "queue_bytes", ch.queue_bytes, "channel");
  Read(j, "bandwidth_kbps", ch.bandwidth_kbps, "channel");
  if (auto it = j.find("loss"); it != j.end()) {
    const json& l = *it;
    if (!l.is_object() || !l.contains("type")) Fail("channel.loss needs a 'type'");
    const auto type = l["type"].get<std::string>();
    if (type == "none") {
      CheckKeys(l, "channel.loss", {"type"});
      ch.source = PerfectSource{};
    } else if (type == "trace") {
      CheckKeys(l, "channel.loss", {"type", "path"});
      Read(l, "path", cfg.trace, "channel.loss");
      if (cfg.trace.empty()) Fail("channel.loss.path is required for trace loss");
      ch.source = TraceSource{};
    } else if (type == "ge") {
      CheckKeys(l, "channel.loss", {"type", "p_gb", "p_bg", "loss_good", "loss_bad"});
      GeModel ge;
      Read(l, "p_gb", ge.p_gb, "channel.loss");
      Read(l, "p_bg", ge.p_bg, "channel.loss");
      Read(l, "loss_good", ge.loss_good, "channel.loss");
      Read(l, "loss_bad", ge.loss_bad, "channel.loss");
      ch.source = GeSource{ge};
    } else {
      Fail("unknown channel.loss.type '" + type + "'");
    }
  }
  if (auto it = j.find("forced_drops"); it != j.end()) {
    if (!it->is_array()) Fail("channel.forced_drops must be an array");
    for (const json& d : *it) {
      CheckKeys(d, "channel.forced_drops[]", {"frame_id", "modality", "shard_index", "copy"});
      DropRule r;
      Read(d, "frame_id", r.frame_id, "forced_drops");
      if (d.contains("modality")) r.modality = ParseModalityName(d["modality"]);
      Read(d, "shard_index", r.shard_index, "forced_drops");
      Read(d, "copy", r.copy, "forced_drops");
      ch.forced_drops.push_back(r);
    }
  }
}

ojson EchoChannel(const ExperimentConfig& cfg) {
  const ChannelConfig& ch = cfg.channel;
  ojson o;
  o["prop_delay_ms"] = ch.prop_delay_ms;
  o["queue_bytes"] = ch.queue_bytes;
  o["bandwidth_kbps"] = ch.bandwidth_kbps;
  ojson loss;
  if (std::holds_alternative<TraceSource>(ch.source)) {
    loss["type"] = "trace";
    loss["path"] = cfg.trace;
  } else if (const auto* ge = std::get_if<GeSource>(&ch.source)) {
    loss["type"] = "ge";
    loss["p_gb"] = ge->model.p_gb;
    loss["p_bg"] = ge->model.p_bg;
    loss["loss_good"] = ge->model.loss_good;
    loss["loss_bad"] = ge->model.loss_bad;
  } else {
    loss["type"] = "none";
  }
  o["loss"] = loss;
  ojson drops = ojson::array();
  for (const DropRule& r : ch.forced_drops) {
    drops.push_back({{"frame_id", r.frame_id},
                     {"modality", r.modality},
                     {"shard_index", r.shard_index},
                     {"copy", r.copy}});
  }
  o["forced_drops"] = drops;
  return o;
}

}  // namespace

std::filesystem::path ExperimentConfig::Resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

void ExperimentConfig::Validate() const {
  try {
    gop.Validate();
    CodecConfig c = codec;
    c.gop = gop;
    c.Validate();
    protection.Validate();
  } catch (const Error& e) {
    Fail(e.what());
  }
  if (payload.rgb == 0 || payload.depth == 0 || payload.rgb > kMaxDatagram - kDescHeaderSize ||
      payload.depth > kMaxDatagram - kDescHeaderSize) {
    Fail("payload sizes must be in [1, " + std::to_string(kMaxDatagram - kDescHeaderSize) + "]");
  }
  ChannelConfig ch = channel;
  if (std::holds_alternative<TraceSource>(ch.source)) ch.source = PerfectSource{};
  try {
    ch.Validate();
  } catch (const Error& e) {
    Fail(e.what());
  }
  if (backend.reference_frames < 1) Fail("recovery.reference_frames must be >= 1");
  if (backend.kind == BackendKind::kRemote && backend.endpoint.port == 0) {
    Fail("remote backend needs a port");
  }
  if (input.kind != InputKind::kClip) {
    if (input.width <= 0 || input.height <= 0 || input.frames < 0) {
      Fail("synthetic input needs positive width/height and frames >= 0");
    }
    if (input.width % codec.block != 0 || input.height % codec.block != 0) {
      Fail("synthetic dimensions must be multiples of codec.block");
    }
  }
  if (udp.role != "both" && udp.role != "sender" && udp.role != "receiver") {
    Fail("udp.role must be both, sender or receiver");
  }
  if (!(udp.drop_probability >= 0.0 && udp.drop_probability <= 1.0)) {
    Fail("udp.drop_probability must be in [0,1]");
  }
  auto must_exist = [&](const std::string& p, const char* what) {
    if (!std::filesystem::exists(Resolve(p))) {
      throw Error(ErrorCode::kIo, std::string(what) + " not found: " + Resolve(p).string());
    }
  };
  if (input.kind == InputKind::kClip) {
    must_exist(input.clip, "clip");
    must_exist(input.descriptor, "clip descriptor");
  }
  if (std::holds_alternative<TraceSource>(channel.source)) must_exist(trace, "trace");
}

namespace {

ExperimentConfig ParseConfigJson(const json& j, const std::filesystem::path& base_dir) {
  CheckKeys(j, "config",
            {"input", "fps", "gop_len", "codec", "protection", "payload", "channel", "recovery",
             "seed", "output", "report_format", "filter_corrupted", "compute_quality",
             "ssim_window", "realtime_budget", "outcome_log", "transport", "udp"});
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  if (j.contains("input")) ParseInput(j["input"], cfg.input);
  Read(j, "fps", cfg.gop.fps, "config");
  Read(j, "gop_len", cfg.gop.gop_len, "config");
  if (j.contains("codec")) {
    CheckKeys(j["codec"], "codec", {"block", "quant", "external"});
    Read(j["codec"], "block", cfg.codec.block, "codec");
    Read(j["codec"], "quant", cfg.codec.quant, "codec");
    Read(j["codec"], "external", cfg.external_codec, "codec");
  }
  if (j.contains("protection")) {
    const json& p = j["protection"];
    CheckKeys(p, "protection", {"mode", "i_parity_ratio", "p_header_copies"});
    if (p.contains("mode")) SetMode(cfg, p["mode"].get<std::string>());
    Read(p, "i_parity_ratio", cfg.protection.i_parity_ratio, "protection");
    Read(p, "p_header_copies", cfg.protection.p_header_copies, "protection");
  }
  if (j.contains("payload")) {
    CheckKeys(j["payload"], "payload", {"rgb", "depth"});
    Read(j["payload"], "rgb", cfg.payload.rgb, "payload");
    Read(j["payload"], "depth", cfg.payload.depth, "payload");
  }
  if (j.contains("channel")) ParseChannel(j["channel"], cfg);
  if (j.contains("recovery")) {
    const json& r = j["recovery"];
    CheckKeys(r, "recovery", {"backend", "reference_frames"});
    if (r.contains("backend")) SetBackend(cfg, r["backend"].get<std::string>());
    Read(r, "reference_frames", cfg.backend.reference_frames, "recovery");
  }
  Read(j, "seed", cfg.seed, "config");
  Read(j, "output", cfg.output, "config");
  if (j.contains("report_format")) {
    const auto f = j["report_format"].get<std::string>();
    if (f == "json") {
      cfg.format = ReportFormat::kJson;
    } else if (f == "csv") {
      cfg.format = ReportFormat::kCsv;
    } else {
      Fail("report_format must be json or csv");
    }
  }
  Read(j, "filter_corrupted", cfg.filter_corrupted, "config");
  Read(j, "compute_quality", cfg.compute_quality, "config");
  Read(j, "realtime_budget", cfg.realtime_budget, "config");
  if (j.contains("ssim_window")) cfg.ssim_window = ParseSsimWindow(j["ssim_window"].get<std::string>());
  Read(j, "outcome_log", cfg.outcome_log, "config");
  if (j.contains("transport")) SetTransport(cfg, j["transport"].get<std::string>());
  if (j.contains("udp")) {
    const json& u = j["udp"];
    CheckKeys(u, "udp", {"peer", "role", "drop_probability"});
    if (u.contains("peer")) cfg.udp.peer = Endpoint::Parse(u["peer"].get<std::string>());
    Read(u, "role", cfg.udp.role, "udp");
    Read(u, "drop_probability", cfg.udp.drop_probability, "udp");
  }
  cfg.codec.gop = cfg.gop;
  return cfg;
}

}  // namespace

ExperimentConfig ParseConfig(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    Fail(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return ParseConfigJson(j, base_dir);
  } catch (const json::exception& e) {
    Fail(std::string("config field has the wrong type: ") + e.what());
  }
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto dir = path.parent_path();
  return ParseConfig(buf.str(), dir.empty() ? std::filesystem::path(".") : dir);
}

std::string ConfigEcho(const ExperimentConfig& cfg) {
  ojson o;
  ojson in;
  in["kind"] = InputKindName(cfg.input.kind);
  if (cfg.input.kind == InputKind::kClip) {
    in["clip"] = cfg.input.clip;
    in["descriptor"] = cfg.input.descriptor;
  } else {
    in["width"] = cfg.input.width;
    in["height"] = cfg.input.height;
    in["frames"] = cfg.input.frames;
    in["seed"] = cfg.input.seed;
  }
  o["input"] = in;
  o["fps"] = cfg.gop.fps;
  o["gop_len"] = cfg.gop.gop_len;
  o["codec"] = {{"block", cfg.codec.block},
                {"quant", cfg.codec.quant},
                {"external", cfg.external_codec}};
  o["protection"] = {{"mode", ProtectionModeName(cfg.protection.mode)},
                     {"i_parity_ratio", cfg.protection.i_parity_ratio},
                     {"p_header_copies", cfg.protection.p_header_copies}};
  o["payload"] = {{"rgb", cfg.payload.rgb}, {"depth", cfg.payload.depth}};
  o["channel"] = EchoChannel(cfg);
  std::string backend = "baseline";
  if (cfg.backend.kind == BackendKind::kNone) backend = "none";
  if (cfg.backend.kind == BackendKind::kRemote) backend = "remote:" + cfg.backend.endpoint.ToString();
  o["recovery"] = {{"backend", backend}, {"reference_frames", cfg.backend.reference_frames}};
  o["seed"] = cfg.seed;
  o["filter_corrupted"] = cfg.filter_corrupted;
  o["compute_quality"] = cfg.compute_quality;
  o["ssim_window"] = cfg.ssim_window == SsimWindow::kUniform8 ? "uniform8" : "gaussian11";
  o["realtime_budget"] = cfg.realtime_budget;
  o["transport"] = cfg.transport == Transport::kSim ? "sim" : "udp";
  return o.dump();
}

void SetMode(ExperimentConfig& cfg, std::string_view mode) {
  try {
    cfg.protection.mode = ParseProtectionMode(mode);
  } catch (const Error& e) {
    Fail(e.what());
  }
}

void SetTrace(ExperimentConfig& cfg, const std::string& path) {
  cfg.trace = path;
  cfg.channel.source = TraceSource{};
}

void SetBackend(ExperimentConfig& cfg, std::string_view spec) {
  if (spec == "baseline") {
    cfg.backend.kind = BackendKind::kBaseline;
  } else if (spec == "none") {
    cfg.backend.kind = BackendKind::kNone;
  } else if (spec.substr(0, 7) == "remote:") {
    cfg.backend.kind = BackendKind::kRemote;
    cfg.backend.endpoint = Endpoint::Parse(std::string(spec.substr(7)));
  } else {
    Fail("backend must be baseline, none or remote:HOST:PORT");
  }
}

void SetTransport(ExperimentConfig& cfg, std::string_view transport) {
  if (transport == "sim") {
    cfg.transport = Transport::kSim;
  } else if (transport == "udp") {
    cfg.transport = Transport::kUdp;
  } else {
    Fail("transport must be sim or udp");
  }
}

std::string_view ReportFormatName(ReportFormat f) {
  return f == ReportFormat::kJson ? "json" : "csv";
}

}  // namespace volstream
