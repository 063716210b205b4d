#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "probekit/study.hpp"
#include "probekit/sweep.hpp"

namespace probekit {

inline constexpr int kReportSchemaVersion = 1;

enum class ReportFormat { csv, json };

std::string_view to_string(ReportFormat f);
ReportFormat report_format_from_string(std::string_view s);

using Report = std::variant<SweepReport, ControlReport, EmergenceCurve, StudyReport>;

// "sweep", "control", "emergence" or "study".
std::string_view report_type(const Report& report);

// CSV: a "# schema_version=1 report_type=<type>" line, a column header,
// then one row per cell / step / intervention. Missing values are empty
// fields; reals print with 17 significant digits.
// JSON: an object with report_type, schema_version and the report fields.
// Both are deterministic for equal reports.
std::string render_report(const Report& report, ReportFormat format);

// Parses the JSON rendering. Throws FormatError on malformed input.
Report report_from_json(std::string_view text);

void export_report(const Report& report, ReportFormat format, const std::filesystem::path& path);
Report import_report(const std::filesystem::path& path);

}  // namespace probekit
