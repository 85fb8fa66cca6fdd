#include "tost/report_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "tost/error.hpp"

namespace tost {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string bench_csv(const BenchReport& report) {
  std::string out =
      "schema_version,op,seed,threads,precision,d,K,p,reps,slope,n,median_s,iqr_s,"
      "peak_aux_bytes\n";
  for (const BenchCell& cell : report.cells) {
    out += std::to_string(kReportSchemaVersion) + ',' + report.op + ',' +
           std::to_string(report.seed) + ',' + std::to_string(report.threads) + ',' +
           report.precision + ',' + std::to_string(report.d) + ',' +
           std::to_string(report.heads) + ',' + std::to_string(report.p) + ',' +
           std::to_string(report.reps) + ',' + fmt_double(report.slope) + ',' +
           std::to_string(cell.n) + ',' + fmt_double(cell.median_s) + ',' +
           fmt_double(cell.iqr_s) + ',' + std::to_string(cell.peak_aux_bytes) + '\n';
  }
  return out;
}

std::string bench_json(const BenchReport& report) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "bench";
  j["op"] = report.op;
  j["seed"] = report.seed;
  j["threads"] = report.threads;
  j["precision"] = report.precision;
  j["d"] = report.d;
  j["K"] = report.heads;
  j["p"] = report.p;
  j["reps"] = report.reps;
  j["slope"] = report.slope;
  j["cells"] = nlohmann::json::array();
  for (const BenchCell& cell : report.cells)
    j["cells"].push_back({{"n", cell.n},
                          {"median_s", cell.median_s},
                          {"iqr_s", cell.iqr_s},
                          {"peak_aux_bytes", cell.peak_aux_bytes}});
  return j.dump(2) + "\n";
}

std::string trace_csv(const TraceReport& report) {
  std::string out = "schema_version,seed,mode,tau,layer,compression\n";
  for (std::size_t i = 0; i < report.trace.size(); ++i) {
    out += std::to_string(kReportSchemaVersion) + ',' + std::to_string(report.seed) +
           ',' + report.mode + ',' + fmt_double(report.tau) + ',' +
           std::to_string(i) + ',' + fmt_double(report.trace[i]) + '\n';
  }
  return out;
}

std::string trace_json(const TraceReport& report) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "layerwise";
  j["seed"] = report.seed;
  j["mode"] = report.mode;
  j["tau"] = report.tau;
  j["trace"] = report.trace;
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f << text;
  if (!f) throw ValidationError("write failed: " + path);
}

}  // namespace tost
