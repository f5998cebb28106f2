#include "smlrt/report.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "smlrt/error.hpp"

namespace smlrt {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

std::string to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["app"] = r.app;
  j["mode"] = r.mode;
  j["steps"] = r.steps;
  j["qoi_metric"] = r.metric;
  j["qoi_error"] = r.qoi_error;
  j["mape"] = r.mape;
  j["speedup"] = r.speedup;
  j["records_written"] = r.records_written;
  j["accurate_calls"] = r.accurate_calls;
  j["surrogate_calls"] = r.surrogate_calls;
  auto& b = j["breakdown"];
  b["time_map_to_ns"] = r.time_map_to_ns;
  b["time_map_from_ns"] = r.time_map_from_ns;
  b["time_infer_ns"] = r.time_infer_ns;
  b["time_surrogate_phase_ns"] = r.time_surrogate_phase_ns;
  b["time_accurate_ns"] = r.time_accurate_ns;
  b["time_collect_map_ns"] = r.time_collect_map_ns;
  b["time_total_ns"] = r.time_total_ns;
  b["time_reference_ns"] = r.time_reference_ns;
  b["mapping_share"] = r.mapping_share();
  j["per_step_rmse"] = r.per_step_rmse;
  auto& paths = j["per_step_path"] = nlohmann::ordered_json::array();
  for (auto p : r.per_step_path) paths.push_back(std::string(to_string(p)));
  return j.dump(2) + "\n";
}

std::string to_csv(const BenchReport& r) {
  std::string out = "step,path,rmse,map_to_ns,map_from_ns,infer_ns,total_ns,mapping_share\n";
  auto at = [](const std::vector<std::int64_t>& v, std::size_t s) {
    return s < v.size() ? v[s] : std::int64_t{0};
  };
  for (std::size_t s = 0; s < r.per_step_rmse.size(); ++s) {
    const auto path = s < r.per_step_path.size() ? to_string(r.per_step_path[s]) : "";
    const std::int64_t to = at(r.per_step_map_to_ns, s);
    const std::int64_t from = at(r.per_step_map_from_ns, s);
    const std::int64_t total = at(r.per_step_total_ns, s);
    // Share of the step spent mapping; only surrogate steps are counted, as in
    // the summary breakdown.
    const bool surrogate = s < r.per_step_path.size() && r.per_step_path[s] == PathTaken::Surrogate;
    const double share = surrogate && total > 0 ? double(to + from) / double(total) : 0.0;
    out += std::to_string(s) + "," + std::string(path) + "," + sci(r.per_step_rmse[s]) + "," +
           std::to_string(to) + "," + std::to_string(from) + "," +
           std::to_string(at(r.per_step_infer_ns, s)) + "," + std::to_string(total) + "," +
           fixed(share, 6) + "\n";
  }
  return out;
}

std::string to_text(const BenchReport& r) {
  auto ms = [](std::int64_t ns) { return fixed(static_cast<double>(ns) / 1e6, 3) + " ms"; };
  std::ostringstream o;
  o << "app              " << r.app << " (" << r.mode << ", " << r.steps << " steps)\n"
    << "qoi " << r.metric << "         " << sci(r.qoi_error) << "\n"
    << "mape             " << fixed(r.mape, 6) << " %\n"
    << "speedup          " << fixed(r.speedup, 3) << "x\n"
    << "calls            " << r.accurate_calls << " accurate, " << r.surrogate_calls
    << " surrogate\n"
    << "records written  " << r.records_written << "\n"
    << "total            " << ms(r.time_total_ns) << " (reference " << ms(r.time_reference_ns)
    << ")\n"
    << "accurate path    " << ms(r.time_accurate_ns) << " (+" << ms(r.time_collect_map_ns)
    << " collection mapping)\n"
    << "surrogate phase  " << ms(r.time_surrogate_phase_ns) << "\n"
    << "  map to         " << ms(r.time_map_to_ns) << "\n"
    << "  inference      " << ms(r.time_infer_ns) << "\n"
    << "  map from       " << ms(r.time_map_from_ns) << "\n"
    << "  mapping share  " << fixed(100.0 * r.mapping_share(), 2) << " %\n";
  return o.str();
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "text") return ReportFormat::Text;
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  throw Error(ErrorCode::SemanticError, "unknown report format '" + std::string(name) + "'");
}

ReportFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".json") return ReportFormat::Json;
  if (ext == ".csv") return ReportFormat::Csv;
  return ReportFormat::Text;
}

std::string emit_report(const BenchReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return to_json(report);
    case ReportFormat::Csv: return to_csv(report);
    case ReportFormat::Text: return to_text(report);
  }
  return {};
}

void write_report(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << emit_report(report, format_for_path(path));
  if (!out) throw Error(ErrorCode::IoError, "cannot write report " + path.string());
}

}  // namespace smlrt
