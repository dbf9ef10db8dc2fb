#pragma once

#include "dogss/core.hpp"
#include "dogss/simulate.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dogss {

// On-disk point cloud encodings.
//  - kXyzlText: one "x y z class_id" record per line ("x y z class_id ox oy oz"
//    when ray origins are stored); '#' starts a comment, blank lines skipped.
//  - kPlyAscii / kPlyBinaryLe: a vertex element with double x, y, z and uchar
//    class_id (optional double ox, oy, oz for ray origins).
enum class CloudFormat { kXyzlText, kPlyAscii, kPlyBinaryLe };

std::string_view to_string(CloudFormat format);
std::optional<CloudFormat> cloud_format_from_string(std::string_view s);
// .ply -> binary PLY, .xyzl/.xyz/.txt -> text. Empty for other extensions.
std::optional<CloudFormat> cloud_format_from_path(const std::filesystem::path& path);

// Non-fatal findings while reading.
struct ReadDiagnostics {
  std::vector<std::string> warnings;
  std::size_t coerced_labels = 0;
  std::size_t dropped_degenerate = 0;
};

// A cloud plus, when the file carries them, per-point ray origins.
struct CloudRecord {
  LabeledPointCloud cloud;
  std::vector<Vec3> ray_origins;  // index-aligned with cloud when present
  bool has_ray_origins = false;
};

// Parses an in-memory file image. Format detection without `format`: a "ply"
// magic line selects PLY, anything else is read as XYZL text. Throws kParse
// (with line number or byte offset) or kFormat.
CloudRecord parse_cloud(std::string_view bytes, std::optional<CloudFormat> format = std::nullopt,
                        ReadDiagnostics* diagnostics = nullptr);

std::string serialize_cloud(const LabeledPointCloud& cloud, CloudFormat format,
                            std::span<const Vec3> ray_origins = {});

CloudRecord read_cloud_record(const std::filesystem::path& path,
                              std::optional<CloudFormat> format = std::nullopt,
                              ReadDiagnostics* diagnostics = nullptr);

LabeledPointCloud read_cloud(const std::filesystem::path& path,
                             std::optional<CloudFormat> format = std::nullopt,
                             ReadDiagnostics* diagnostics = nullptr);

// Throws kIo naming the path on failure.
void write_cloud(const LabeledPointCloud& cloud, const std::filesystem::path& path,
                 CloudFormat format, std::span<const Vec3> ray_origins = {});

// ----------------------------------------------------------------------------

// Wavefront OBJ with class-named groups ("g WallSurface", "o Door_03").
// Polygons are fan-triangulated; degenerate triangles are dropped and counted.
ClassedMesh parse_mesh(std::string_view text, ReadDiagnostics* diagnostics = nullptr);
ClassedMesh read_mesh(const std::filesystem::path& path, ReadDiagnostics* diagnostics = nullptr);

std::string serialize_mesh(const ClassedMesh& mesh);
void write_mesh(const ClassedMesh& mesh, const std::filesystem::path& path);

// Class bound to an OBJ group name: the canonical name itself or the name
// followed by a '_' or '.' suffix. Empty when unrecognized.
std::optional<SemanticClass> class_from_group_name(std::string_view group);

// ----------------------------------------------------------------------------

// One integer label per line; out-of-range labels become Noise.
std::vector<SemanticClass> parse_labels(std::string_view text,
                                        ReadDiagnostics* diagnostics = nullptr);
std::vector<SemanticClass> read_labels(const std::filesystem::path& path,
                                       ReadDiagnostics* diagnostics = nullptr);
void write_labels(std::span<const SemanticClass> labels, const std::filesystem::path& path);

// JSON array of {t, x, y, z, yaw}.
Trajectory parse_trajectory(std::string_view text);
Trajectory read_trajectory(const std::filesystem::path& path);

// Whole-file helpers; throw kIo with the path in the message.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dogss
