#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "smlrt/apps.hpp"

namespace smlrt {

enum class ReportFormat { Text, Json, Csv };

ReportFormat parse_report_format(std::string_view name);
/// Picks the format from a file extension (.json, .csv, anything else is text).
ReportFormat format_for_path(const std::filesystem::path& path);

/// Deterministic serialization.
///   json: summary fields, "breakdown" and the per-step series.
///   csv:  header `step,path,rmse,map_to_ns,map_from_ns,infer_ns,total_ns,mapping_share`,
///         one row per step; mapping_share is 0 on accurate steps.
///   text: human-readable summary.
std::string emit_report(const BenchReport& report, ReportFormat format);

void write_report(const BenchReport& report, const std::filesystem::path& path);

}  // namespace smlrt
