#pragma once

#include <string>
#include <vector>

#include "memshare/common.hpp"

namespace memshare {

enum class TraceOp { Get, Set, Del };

// One workload event: `ts,op,app,key,size` in the on-disk format, '#' starts
// a comment line. Timestamps are microseconds and must be nondecreasing.
struct TraceRecord {
  Timestamp ts = 0;
  TraceOp op = TraceOp::Get;
  AppId app = 0;
  std::string key;
  std::uint32_t size = 0;  // value bytes; GETs use it when fill-on-miss is on
};

TraceRecord parse_trace_line(const std::string& line, std::size_t lineno);
std::string format_trace_record(const TraceRecord& rec);

std::vector<TraceRecord> read_trace(const std::string& path);
void write_trace(const std::string& path, const std::vector<TraceRecord>& records);

std::string to_string(TraceOp op);

}  // namespace memshare
