#include "volstream/report.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "volstream/metrics.h"

namespace volstream {
namespace {

using ojson = nlohmann::ordered_json;

double Round6(double v) {
  if (!std::isfinite(v)) return v;
  const double r = std::round(v * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // no "-0"
}

ojson Real(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return Round6(v);
}

double RealFrom(const ojson& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::kParse, "bad number '" + s + "'");
  }
  return j.get<double>();
}

// CSV cell text for a JSON scalar; strings are quoted when needed.
std::string Cell(const ojson& j) {
  if (j.is_null()) return "";
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  return j.dump();
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

ojson SummaryJson(const SessionSummary& s) {
  ojson o;
  o["frames"] = s.frames;
  o["records"] = s.records;
  o["i_loss_pct"] = Real(s.i_loss_pct);
  o["p_loss_pct"] = Real(s.p_loss_pct);
  o["non_recovered_pct"] = Real(s.non_recovered_pct);
  o["freeze_count"] = s.freeze_count;
  o["median_freeze_ms"] = Real(s.median_freeze_ms);
  o["total_freeze_ms"] = Real(s.total_freeze_ms);
  o["overhead"] = Real(s.overhead);
  o["corrupted_records"] = s.corrupted_records;
  o["recovered_records"] = s.recovered_records;
  o["early_complete"] = s.early_complete;
  o["deadline_misses"] = s.deadline_misses;
  o["quality_records"] = s.quality_records;
  o["median_ssim_rgb"] = Real(s.median_ssim_rgb);
  o["median_ssim_depth"] = Real(s.median_ssim_depth);
  o["median_psnr_rgb"] = Real(s.median_psnr_rgb);
  o["median_psnr_depth"] = Real(s.median_psnr_depth);
  return o;
}

// Header fields shared by both formats, in output order.
ojson HeaderJson(const SessionReport& r) {
  ojson o;
  o["schema"] = kReportSchema;
  o["mode"] = r.mode;
  o["seed"] = r.seed;
  o["filter_corrupted"] = r.filter_corrupted;
  o["quality"] = r.quality;
  o["bytes_data"] = r.bytes_data;
  o["bytes_parity"] = r.bytes_parity;
  o["bytes_dup"] = r.bytes_dup;
  o["packets_sent"] = r.packets_sent;
  o["packets_lost"] = r.packets_lost;
  o["packets_late"] = r.packets_late;
  return o;
}

const char* const kRecordColumns[] = {"frame_id", "modality",       "kind",       "outcome",
                                      "recovered", "displayed",     "deadline_miss",
                                      "early_complete", "display_ms", "ssim",       "psnr"};

ojson RecordJson(const FrameRecord& r, bool quality) {
  ojson o;
  o["frame_id"] = r.frame_id;
  o["modality"] = ModalityName(r.modality);
  o["kind"] = FrameKindName(r.kind);
  o["outcome"] = OutcomeName(r.outcome);
  o["recovered"] = r.recovered;
  o["displayed"] = r.displayed;
  o["deadline_miss"] = r.deadline_miss;
  o["early_complete"] = r.early_complete;
  o["display_ms"] = Real(r.display_ms);
  o["ssim"] = quality ? Real(r.ssim) : ojson(nullptr);
  o["psnr"] = quality ? Real(r.psnr) : ojson(nullptr);
  return o;
}

Modality ParseModality(const std::string& s) {
  if (s == "rgb") return Modality::kRgb;
  if (s == "depth") return Modality::kDepth;
  throw Error(ErrorCode::kParse, "bad modality '" + s + "'");
}

FrameKind ParseKind(const std::string& s) {
  if (s == "I") return FrameKind::kI;
  if (s == "P") return FrameKind::kP;
  throw Error(ErrorCode::kParse, "bad frame kind '" + s + "'");
}

FrameRecord RecordFrom(const ojson& o) {
  FrameRecord r;
  r.frame_id = o.at("frame_id").get<uint32_t>();
  r.modality = ParseModality(o.at("modality").get<std::string>());
  r.kind = ParseKind(o.at("kind").get<std::string>());
  r.outcome = ParseOutcome(o.at("outcome").get<std::string>());
  r.recovered = o.at("recovered").get<bool>();
  r.displayed = o.at("displayed").get<bool>();
  r.deadline_miss = o.at("deadline_miss").get<bool>();
  r.early_complete = o.at("early_complete").get<bool>();
  r.display_ms = RealFrom(o.at("display_ms"));
  r.ssim = RealFrom(o.at("ssim"));
  r.psnr = RealFrom(o.at("psnr"));
  return r;
}

void HeaderFrom(const ojson& o, SessionReport& r) {
  if (o.at("schema").get<std::string>() != kReportSchema) {
    throw Error(ErrorCode::kParse, "unsupported report schema");
  }
  r.mode = o.at("mode").get<std::string>();
  r.seed = o.at("seed").get<uint64_t>();
  r.filter_corrupted = o.at("filter_corrupted").get<bool>();
  r.quality = o.at("quality").get<bool>();
  r.bytes_data = o.at("bytes_data").get<size_t>();
  r.bytes_parity = o.at("bytes_parity").get<size_t>();
  r.bytes_dup = o.at("bytes_dup").get<size_t>();
  r.packets_sent = o.at("packets_sent").get<size_t>();
  r.packets_lost = o.at("packets_lost").get<size_t>();
  r.packets_late = o.at("packets_late").get<size_t>();
}

SessionReport FromJson(std::string_view text) {
  ojson j = ojson::parse(text);
  SessionReport r;
  HeaderFrom(j, r);
  r.config = j.at("config").dump();
  for (const auto& f : j.at("freeze_log")) {
    r.freeze_log.push_back({RealFrom(f.at("start_ms")), RealFrom(f.at("duration_ms"))});
  }
  for (const auto& rec : j.at("records")) r.records.push_back(RecordFrom(rec));
  r.summary = Summarize(r);
  return r;
}

// Cells are read back through the JSON parser so both formats agree.
ojson CellValue(const std::string& cell) {
  if (cell.empty()) return nullptr;
  try {
    return ojson::parse(cell);
  } catch (const ojson::parse_error&) {
    return cell;
  }
}

SessionReport FromCsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "# " + std::string(kReportSchema)) {
    throw Error(ErrorCode::kParse, "missing CSV schema line");
  }
  ojson header;
  header["schema"] = kReportSchema;
  std::string config;
  while (std::getline(in, line) && !line.empty()) {
    auto cells = SplitCsvLine(line);
    if (cells.size() != 2) throw Error(ErrorCode::kParse, "bad CSV key line: " + line);
    if (cells[0] == "config") {
      config = cells[1];
    } else if (cells[0] != "key") {
      header[cells[0]] = CellValue(cells[1]);
    }
  }
  SessionReport r;
  HeaderFrom(header, r);
  r.config = ojson::parse(config).dump();
  // Freeze table, blank line, record table.
  if (!std::getline(in, line) || line != "freeze_start_ms,freeze_duration_ms") {
    throw Error(ErrorCode::kParse, "missing freeze table");
  }
  while (std::getline(in, line) && !line.empty()) {
    auto cells = SplitCsvLine(line);
    if (cells.size() != 2) throw Error(ErrorCode::kParse, "bad freeze row: " + line);
    r.freeze_log.push_back({RealFrom(CellValue(cells[0])), RealFrom(CellValue(cells[1]))});
  }
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "missing record table");
  const auto columns = SplitCsvLine(line);
  while (std::getline(in, line) && !line.empty()) {
    auto cells = SplitCsvLine(line);
    if (cells.size() != columns.size()) throw Error(ErrorCode::kParse, "bad record row: " + line);
    ojson o;
    for (size_t i = 0; i < cells.size(); ++i) o[columns[i]] = CellValue(cells[i]);
    r.records.push_back(RecordFrom(o));
  }
  r.summary = Summarize(r);
  return r;
}

std::string Fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  if (std::isinf(v)) return "inf";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::vector<FrameRecord> CorruptedRecords(const std::vector<FrameRecord>& records) {
  std::vector<FrameRecord> out;
  for (const auto& r : records) {
    if (IsCorrupted(r.outcome)) out.push_back(r);
  }
  return out;
}

SessionSummary Summarize(const SessionReport& report) {
  SessionSummary s;
  const auto& recs = report.records;
  s.records = recs.size();
  std::map<uint32_t, int> frames;
  size_t i_total = 0, i_bad = 0, p_total = 0, p_lost = 0;
  std::vector<Outcome> outcomes;
  outcomes.reserve(recs.size());
  std::vector<double> ssim[2], psnr[2];
  for (const auto& r : recs) {
    frames[r.frame_id]++;
    outcomes.push_back(r.outcome);
    if (r.kind == FrameKind::kI) {
      ++i_total;
      if (r.outcome != Outcome::kClean) ++i_bad;
    } else {
      ++p_total;
      if (IsNonRecovered(r.outcome)) ++p_lost;
    }
    if (IsCorrupted(r.outcome)) ++s.corrupted_records;
    if (r.recovered) ++s.recovered_records;
    if (r.early_complete) ++s.early_complete;
    if (r.deadline_miss) ++s.deadline_misses;
    if (report.quality && (!report.filter_corrupted || IsCorrupted(r.outcome))) {
      ++s.quality_records;
      const int m = static_cast<int>(r.modality);
      ssim[m].push_back(r.ssim);
      psnr[m].push_back(r.psnr);
    }
  }
  s.frames = frames.size();
  s.i_loss_pct = i_total ? 100.0 * static_cast<double>(i_bad) / static_cast<double>(i_total) : 0.0;
  s.p_loss_pct = p_total ? 100.0 * static_cast<double>(p_lost) / static_cast<double>(p_total) : 0.0;
  s.non_recovered_pct = NonRecoveredPercent(outcomes);
  const FreezeStats fs = ComputeFreezeStats(report.freeze_log);
  s.freeze_count = fs.count;
  s.median_freeze_ms = fs.median_ms;
  s.total_freeze_ms = fs.total_ms;
  s.overhead = report.bytes_data ? Overhead(report.bytes_data, report.bytes_parity, report.bytes_dup)
                                 : 0.0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto med = [&](std::vector<double>& v) { return v.empty() ? nan : Median(v); };
  s.median_ssim_rgb = med(ssim[0]);
  s.median_ssim_depth = med(ssim[1]);
  s.median_psnr_rgb = med(psnr[0]);
  s.median_psnr_depth = med(psnr[1]);
  return s;
}

std::string ReportToJson(const SessionReport& report) {
  ojson j = HeaderJson(report);
  j["config"] = report.config.empty() ? ojson::object() : ojson::parse(report.config);
  j["summary"] = SummaryJson(Summarize(report));
  ojson freezes = ojson::array();
  for (const auto& f : report.freeze_log) {
    freezes.push_back({{"start_ms", Real(f.start_ms)}, {"duration_ms", Real(f.duration_ms)}});
  }
  j["freeze_log"] = freezes;
  ojson records = ojson::array();
  for (const auto& r : report.records) records.push_back(RecordJson(r, report.quality));
  j["records"] = records;
  return j.dump(2) + "\n";
}

std::string ReportToCsv(const SessionReport& report) {
  std::string out = "# " + std::string(kReportSchema) + "\nkey,value\n";
  const ojson header = HeaderJson(report);
  for (const auto& [k, v] : header.items()) {
    if (k == "schema") continue;
    out += k + "," + Cell(v) + "\n";
  }
  out += "config," + Cell(report.config.empty() ? "{}" : report.config) + "\n";
  const ojson summary = SummaryJson(Summarize(report));
  for (const auto& [k, v] : summary.items()) {
    out += "summary." + k + "," + Cell(v) + "\n";
  }
  out += "\nfreeze_start_ms,freeze_duration_ms\n";
  for (const auto& f : report.freeze_log) {
    out += Cell(Real(f.start_ms)) + "," + Cell(Real(f.duration_ms)) + "\n";
  }
  out += "\n";
  std::string head;
  for (const char* c : kRecordColumns) head += std::string(head.empty() ? "" : ",") + c;
  out += head + "\n";
  for (const auto& r : report.records) {
    const ojson o = RecordJson(r, report.quality);
    std::string row;
    for (const char* c : kRecordColumns) row += (row.empty() ? "" : ",") + Cell(o[c]);
    out += row + "\n";
  }
  return out;
}

SessionReport ParseReport(std::string_view text) {
  try {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') return FromJson(text);
    return FromCsv(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed report: ") + e.what());
  }
}

void WriteReport(const SessionReport& report, const std::filesystem::path& path,
                 ReportFormat format) {
  WriteTextFile(path, format == ReportFormat::kJson ? ReportToJson(report) : ReportToCsv(report));
}

SessionReport LoadReport(const std::filesystem::path& path) {
  return ParseReport(ReadTextFile(path));
}

std::string SeriesCsv(const SessionReport& report) {
  struct Row {
    double t_ms = 0.0;
    double ssim[2] = {std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN()};
    bool frozen = false;
  };
  std::map<uint32_t, Row> rows;
  for (const auto& r : report.records) {
    Row& row = rows[r.frame_id];
    row.t_ms = r.display_ms;
    row.ssim[static_cast<int>(r.modality)] = report.quality ? r.ssim : std::numeric_limits<double>::quiet_NaN();
    row.frozen = row.frozen || !r.displayed;
  }
  std::string out = "t_ms,ssim_rgb,ssim_depth,frozen\n";
  for (const auto& [id, row] : rows) {
    out += Cell(Real(row.t_ms)) + "," + Cell(Real(row.ssim[0])) + "," + Cell(Real(row.ssim[1])) +
           "," + (row.frozen ? "1" : "0") + "\n";
  }
  return out;
}

void WriteSeries(const SessionReport& report, const std::filesystem::path& path) {
  WriteTextFile(path, SeriesCsv(report));
}

std::string SweepTable(const std::vector<SessionReport>& reports) {
  std::ostringstream s;
  s << std::left << std::setw(10) << "mode" << std::right << std::setw(9) << "I-loss%"
    << std::setw(9) << "P-loss%" << std::setw(13) << "freeze_ms" << std::setw(10) << "nonrec%"
    << std::setw(10) << "overhead" << std::setw(10) << "ssim_rgb" << std::setw(12)
    << "ssim_depth" << "\n";
  for (const auto& r : reports) {
    const SessionSummary sm = Summarize(r);
    s << std::left << std::setw(10) << r.mode << std::right << std::setw(9)
      << Fixed(sm.i_loss_pct, 2) << std::setw(9) << Fixed(sm.p_loss_pct, 2) << std::setw(13)
      << Fixed(sm.median_freeze_ms, 2) << std::setw(10) << Fixed(sm.non_recovered_pct, 2)
      << std::setw(10) << Fixed(100.0 * sm.overhead, 2) + "%" << std::setw(10)
      << Fixed(sm.median_ssim_rgb, 4) << std::setw(12) << Fixed(sm.median_ssim_depth, 4) << "\n";
  }
  return s.str();
}

void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace volstream
