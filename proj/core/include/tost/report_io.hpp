#pragma once

// CSV and JSON serialization for benchmark and layerwise reports. Formats are
// documented in docs/report_formats.md; both carry a schema_version field.

#include <cstdint>
#include <string>
#include <vector>

#include "tost/harness.hpp"

namespace tost {

inline constexpr int kReportSchemaVersion = 1;

struct TraceReport {
  std::uint64_t seed = 0;
  std::string mode;  // "oracle" or "fixed"
  double tau = 0.0;
  std::vector<double> trace;
};

// One row per grid cell; doubles printed with full round-trip precision.
std::string bench_csv(const BenchReport& report);
std::string bench_json(const BenchReport& report);

// One row per trace entry (layer index starts at 0).
std::string trace_csv(const TraceReport& report);
std::string trace_json(const TraceReport& report);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace tost
