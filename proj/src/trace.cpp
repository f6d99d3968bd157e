#include "memshare/trace.hpp"

#include <fstream>

namespace memshare {

std::string to_string(TraceOp op) {
  switch (op) {
    case TraceOp::Get: return "GET";
    case TraceOp::Set: return "SET";
    case TraceOp::Del: return "DEL";
  }
  return "?";
}

TraceRecord parse_trace_line(const std::string& line, std::size_t lineno) {
  TraceRecord rec;
  std::size_t pos = 0;
  auto next_field = [&](bool last) {
    std::size_t comma = last ? line.size() : line.find(',', pos);
    if (comma == std::string::npos) throw TraceError("expected 5 comma-separated fields", lineno);
    std::string field = line.substr(pos, comma - pos);
    pos = comma + 1;
    return field;
  };
  try {
    rec.ts = std::stoull(next_field(false));
  } catch (const std::exception&) {
    throw TraceError("bad timestamp", lineno);
  }
  std::string op = next_field(false);
  if (op == "GET") rec.op = TraceOp::Get;
  else if (op == "SET") rec.op = TraceOp::Set;
  else if (op == "DEL") rec.op = TraceOp::Del;
  else throw TraceError("bad op '" + op + "'", lineno);
  try {
    rec.app = static_cast<AppId>(std::stoul(next_field(false)));
  } catch (const std::exception&) {
    throw TraceError("bad app id", lineno);
  }
  rec.key = next_field(false);
  if (rec.key.empty()) throw TraceError("empty key", lineno);
  std::string size = next_field(true);
  try {
    rec.size = static_cast<std::uint32_t>(std::stoul(size));
  } catch (const std::exception&) {
    throw TraceError("bad size '" + size + "'", lineno);
  }
  return rec;
}

std::string format_trace_record(const TraceRecord& rec) {
  return std::to_string(rec.ts) + "," + to_string(rec.op) + "," + std::to_string(rec.app) +
         "," + rec.key + "," + std::to_string(rec.size);
}

std::vector<TraceRecord> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path);
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  Timestamp prev = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    TraceRecord rec = parse_trace_line(line, lineno);
    if (rec.ts < prev) throw TraceError("non-monotonic timestamp", lineno);
    prev = rec.ts;
    out.push_back(std::move(rec));
  }
  return out;
}

void write_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open trace file for writing: " + path);
  for (const auto& rec : records) out << format_trace_record(rec) << "\n";
  if (!out) throw IoError("failed writing trace file: " + path);
}

}  // namespace memshare
