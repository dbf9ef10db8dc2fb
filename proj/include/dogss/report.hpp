#pragma once

#include "dogss/dataset.hpp"
#include "dogss/metric.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace dogss {

inline constexpr const char* kGapReportSchema = "dogss.gap_report/1";
inline constexpr const char* kEvalReportSchema = "dogss.eval_report/1";

nlohmann::json to_json(const GapReport& report);
nlohmann::json to_json(const EvalReport& report);

// Inverse of to_json; throws kFormat naming the offending key path.
GapReport gap_report_from_json(const nlohmann::json& doc);
EvalReport eval_report_from_json(const nlohmann::json& doc);

// Two-space indented JSON with a trailing newline.
std::string dump_json(const nlohmann::json& doc);

// A report file holds one report object or an array of them (offset runs).
using AnyReport = std::variant<GapReport, EvalReport>;
std::vector<AnyReport> parse_reports(const nlohmann::json& doc);

void write_report(const GapReport& report, const std::filesystem::path& path);
void write_report(const EvalReport& report, const std::filesystem::path& path);
void write_reports(const std::vector<GapReport>& reports, const std::filesystem::path& path);
std::vector<AnyReport> read_reports(const std::filesystem::path& path);

}  // namespace dogss
