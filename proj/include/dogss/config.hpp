#pragma once

#include "dogss/dataset.hpp"
#include "dogss/metric.hpp"
#include "dogss/simulate.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

namespace dogss {

struct MixSettings {
  double real_fraction = 0.5;
  std::int64_t target_count = 0;

  friend bool operator==(const MixSettings&, const MixSettings&) = default;
};

// Everything a CLI run can be configured with. Paths are not part of it; they
// are command arguments.
struct RunConfig {
  MetricParams metric;
  ScanConfig scan;
  double noise_sigma_m = 0.02;
  std::optional<std::uint64_t> seed;
  MixSettings mix;
  std::optional<SplitSpec> split;
};

// Parses and validates a config document. Unknown keys, wrong types and
// out-of-range values throw kConfig naming the key path ("$.m3c2.max_depth_m").
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(std::string_view text);
RunConfig read_config(const std::filesystem::path& path);

// Full echo including defaults; parse_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const RunConfig& config);

// The metric-facing subset, as echoed in gap reports.
nlohmann::json metric_params_to_json(const MetricParams& params);
MetricParams metric_params_from_json(const nlohmann::json& doc);

}  // namespace dogss
