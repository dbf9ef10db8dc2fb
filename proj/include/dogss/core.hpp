#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dogss {

using Vec3 = Eigen::Vector3d;

// Harmonized road-space taxonomy. Ids are stable and appear in files.
enum class SemanticClass : std::uint8_t {
  kRoadSurface = 1,
  kGroundSurface = 2,
  kCityFurniture = 3,
  kVehicle = 4,
  kPedestrian = 5,
  kWallSurface = 6,
  kRoofSurface = 7,
  kDoor = 8,
  kWindow = 9,
  kBuildingInstallation = 10,
  kSolitaryVegetationObject = 11,
  kNoise = 12,
};

inline constexpr int kClassCount = 12;

inline constexpr std::array<SemanticClass, kClassCount> kAllClasses = {
    SemanticClass::kRoadSurface,   SemanticClass::kGroundSurface,
    SemanticClass::kCityFurniture, SemanticClass::kVehicle,
    SemanticClass::kPedestrian,    SemanticClass::kWallSurface,
    SemanticClass::kRoofSurface,   SemanticClass::kDoor,
    SemanticClass::kWindow,        SemanticClass::kBuildingInstallation,
    SemanticClass::kSolitaryVegetationObject, SemanticClass::kNoise,
};

constexpr int class_id(SemanticClass c) { return static_cast<int>(c); }

// Zero-based slot for per-class arrays.
constexpr std::size_t class_index(SemanticClass c) {
  return static_cast<std::size_t>(c) - 1;
}

std::string_view class_name(SemanticClass c);

// Exact canonical name lookup (e.g. "WallSurface").
std::optional<SemanticClass> class_from_name(std::string_view name);

// Strict id lookup; nullopt when outside 1..12.
std::optional<SemanticClass> class_from_id(std::int64_t id);

// File-label coercion: anything outside 1..12 becomes Noise. `coerced` is set
// when that happened so callers can surface a warning.
SemanticClass class_from_label(std::int64_t label, bool* coerced = nullptr);

struct LabeledPoint {
  Vec3 position = Vec3::Zero();
  SemanticClass label = SemanticClass::kNoise;

  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

struct LabeledPointCloud {
  std::vector<LabeledPoint> points;
  std::string frame_note;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  // Copy with every point moved by `offset`.
  LabeledPointCloud translated(const Vec3& offset) const;

  friend bool operator==(const LabeledPointCloud&, const LabeledPointCloud&) = default;
};

// Per-class subclouds, indexed by class_index(); always 12 entries.
using ClassPartition = std::array<LabeledPointCloud, kClassCount>;

// Splits a cloud into homogeneous per-class clouds, preserving relative order.
ClassPartition partition_by_class(const LabeledPointCloud& cloud);

struct MeshTriangle {
  std::array<std::uint32_t, 3> vertices{};
  SemanticClass label = SemanticClass::kNoise;

  friend bool operator==(const MeshTriangle&, const MeshTriangle&) = default;
};

// Triangle soup where every triangle carries its semantic class.
struct ClassedMesh {
  std::vector<Vec3> vertices;
  std::vector<MeshTriangle> triangles;

  double triangle_area(std::size_t i) const;
  double total_area() const;

  friend bool operator==(const ClassedMesh&, const ClassedMesh&) = default;
};

inline constexpr double kMinTriangleArea = 1e-12;

// Per-class non-negative weights summing to one over the classes present.
class ClassWeights {
 public:
  ClassWeights() = default;

  // Throws kInvalidArgument on negative/non-finite weights or a sum that is
  // not 1 within 1e-9.
  explicit ClassWeights(const std::map<SemanticClass, double>& weights);

  double weight(SemanticClass c) const { return weights_[class_index(c)].value_or(0.0); }
  bool contains(SemanticClass c) const { return weights_[class_index(c)].has_value(); }

  // Classes present in the map, ascending by id.
  std::vector<SemanticClass> classes() const;
  std::map<SemanticClass, double> as_map() const;

  friend bool operator==(const ClassWeights&, const ClassWeights&) = default;

 private:
  std::array<std::optional<double>, kClassCount> weights_{};
};

// Emphasizes static building-related classes; dynamic objects, road,
// vegetation and noise get zero weight.
ClassWeights default_weights();

// ----------------------------------------------------------------------------
// Model-standard class mapping

enum class ModelStandard { kOpenDrive14, kCityGml20 };

std::string_view standard_name(ModelStandard s);
std::optional<ModelStandard> standard_from_name(std::string_view name);

using AttributeMap = std::map<std::string, std::string>;

struct ClassMappingEntry {
  ModelStandard standard = ModelStandard::kCityGml20;
  std::string descriptor;
  AttributeMap attributes;  // qualifiers that must all match
  SemanticClass target = SemanticClass::kNoise;
};

class ClassMapping {
 public:
  ClassMapping() = default;
  explicit ClassMapping(std::vector<ClassMappingEntry> entries);

  // The embedded OpenDRIVE 1.4 / CityGML 2.0 correspondence table.
  static const ClassMapping& builtin();

  // Parses an override document: a JSON array of
  // {standard, descriptor, attributes, target_id}.
  static ClassMapping from_json_text(std::string_view text);

  // Returns a mapping where `overrides` entries are consulted before ours.
  ClassMapping with_overrides(const ClassMapping& overrides) const;

  // Total: unmatched descriptors map to Noise. The most specific matching
  // entry wins; equally specific entries resolve to the earliest one.
  SemanticClass map(ModelStandard standard, std::string_view descriptor,
                    const AttributeMap& attributes = {}) const;

  const std::vector<ClassMappingEntry>& entries() const { return entries_; }

 private:
  std::vector<ClassMappingEntry> entries_;
};

inline SemanticClass map_class(ModelStandard standard, std::string_view descriptor,
                               const AttributeMap& attributes = {}) {
  return ClassMapping::builtin().map(standard, descriptor, attributes);
}

}  // namespace dogss
