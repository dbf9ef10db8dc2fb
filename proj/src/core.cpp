#include "dogss/core.hpp"

#include "dogss/error.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dogss {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kDegenerate: return "degenerate";
  }
  return "unknown";
}

namespace {

constexpr std::array<std::string_view, kClassCount> kClassNames = {
    "RoadSurface", "GroundSurface", "CityFurniture", "Vehicle",
    "Pedestrian",  "WallSurface",   "RoofSurface",   "Door",
    "Window",      "BuildingInstallation", "SolitaryVegetationObject", "Noise",
};

std::string normalize_token(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(begin, end - begin + 1));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

AttributeMap normalize_attributes(const AttributeMap& attributes) {
  AttributeMap out;
  for (const auto& [key, value] : attributes) {
    out[normalize_token(key)] = normalize_token(value);
  }
  return out;
}

}  // namespace

std::string_view class_name(SemanticClass c) { return kClassNames[class_index(c)]; }

std::optional<SemanticClass> class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return kAllClasses[i];
  }
  return std::nullopt;
}

std::optional<SemanticClass> class_from_id(std::int64_t id) {
  if (id < 1 || id > kClassCount) return std::nullopt;
  return static_cast<SemanticClass>(id);
}

SemanticClass class_from_label(std::int64_t label, bool* coerced) {
  auto c = class_from_id(label);
  if (coerced != nullptr) *coerced = !c.has_value();
  return c.value_or(SemanticClass::kNoise);
}

LabeledPointCloud LabeledPointCloud::translated(const Vec3& offset) const {
  LabeledPointCloud out = *this;
  for (auto& p : out.points) p.position += offset;
  return out;
}

ClassPartition partition_by_class(const LabeledPointCloud& cloud) {
  ClassPartition parts;
  std::array<std::size_t, kClassCount> counts{};
  for (const auto& p : cloud.points) ++counts[class_index(p.label)];
  for (std::size_t i = 0; i < parts.size(); ++i) {
    parts[i].points.reserve(counts[i]);
    parts[i].frame_note = cloud.frame_note;
  }
  for (const auto& p : cloud.points) parts[class_index(p.label)].points.push_back(p);
  return parts;
}

double ClassedMesh::triangle_area(std::size_t i) const {
  const auto& t = triangles.at(i);
  const Vec3& a = vertices.at(t.vertices[0]);
  const Vec3& b = vertices.at(t.vertices[1]);
  const Vec3& c = vertices.at(t.vertices[2]);
  return 0.5 * (b - a).cross(c - a).norm();
}

double ClassedMesh::total_area() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) sum += triangle_area(i);
  return sum;
}

ClassWeights::ClassWeights(const std::map<SemanticClass, double>& weights) {
  double sum = 0.0;
  for (const auto& [c, w] : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      fail(ErrorKind::kInvalidArgument,
           "class weight for " + std::string(class_name(c)) + " must be finite and non-negative");
    }
    weights_[class_index(c)] = w;
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorKind::kInvalidArgument,
         "class weights must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

std::vector<SemanticClass> ClassWeights::classes() const {
  std::vector<SemanticClass> out;
  for (auto c : kAllClasses) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

std::map<SemanticClass, double> ClassWeights::as_map() const {
  std::map<SemanticClass, double> out;
  for (auto c : classes()) out[c] = weight(c);
  return out;
}

ClassWeights default_weights() {
  return ClassWeights({
      {SemanticClass::kCityFurniture, 0.1},
      {SemanticClass::kGroundSurface, 0.1},
      {SemanticClass::kWallSurface, 0.2},
      {SemanticClass::kRoofSurface, 0.15},
      {SemanticClass::kDoor, 0.15},
      {SemanticClass::kWindow, 0.15},
      {SemanticClass::kBuildingInstallation, 0.15},
  });
}

// ----------------------------------------------------------------------------

std::string_view standard_name(ModelStandard s) {
  return s == ModelStandard::kOpenDrive14 ? "OpenDRIVE-1.4" : "CityGML-2.0";
}

std::optional<ModelStandard> standard_from_name(std::string_view name) {
  const std::string n = normalize_token(name);
  if (n == "opendrive-1.4" || n == "opendrive") return ModelStandard::kOpenDrive14;
  if (n == "citygml-2.0" || n == "citygml") return ModelStandard::kCityGml20;
  return std::nullopt;
}

ClassMapping::ClassMapping(std::vector<ClassMappingEntry> entries) : entries_(std::move(entries)) {
  for (auto& e : entries_) {
    e.descriptor = trim(e.descriptor);
    e.attributes = normalize_attributes(e.attributes);
  }
}

const ClassMapping& ClassMapping::builtin() {
  using S = SemanticClass;
  constexpr auto kOd = ModelStandard::kOpenDrive14;
  constexpr auto kCg = ModelStandard::kCityGml20;
  // Rows follow the published correspondence table top to bottom. Vehicle,
  // Pedestrian and Noise have no model-side source.
  static const ClassMapping mapping(std::vector<ClassMappingEntry>{
      {kOd, "LaneSectionLRLane", {{"type", "driving"}}, S::kRoadSurface},
      {kCg, "TrafficArea", {{"function", "1"}}, S::kRoadSurface},
      {kOd, "RoadObject", {{"type", "barrier"}, {"name", "raisedMedian"}}, S::kRoadSurface},
      {kOd, "RoadObject", {{"type", "barrier"}, {"name", "trafficIsland"}}, S::kRoadSurface},
      {kOd, "RoadObject", {{"type", "roadMark"}}, S::kRoadSurface},
      {kCg, "AuxiliaryTrafficArea", {}, S::kRoadSurface},

      {kOd, "LaneSectionLRLane", {{"type", "sidewalk"}}, S::kGroundSurface},
      {kCg, "TrafficArea", {{"function", "2"}}, S::kGroundSurface},
      {kOd, "LaneSectionLRLane", {{"type", "border"}}, S::kGroundSurface},
      {kOd, "LaneSectionLRLane", {{"type", "none"}, {"material", "grass"}}, S::kGroundSurface},
      {kCg, "OuterFloorSurface", {}, S::kGroundSurface},

      {kOd, "Signal", {{"name", "trafficLight"}}, S::kCityFurniture},
      {kOd, "Signal", {{"name", "traffic signs"}}, S::kCityFurniture},
      {kOd, "RoadObject", {{"type", "pole"}, {"name", "streetLamp"}}, S::kCityFurniture},
      {kOd, "RoadObject", {{"type", "pole"}, {"name", "trafficLight"}}, S::kCityFurniture},
      {kOd, "RoadObject", {{"type", "pole"}, {"name", "trafficSign"}}, S::kCityFurniture},
      {kOd, "RoadObject", {{"type", "barrier"}, {"name", "fence"}}, S::kCityFurniture},
      {kOd, "RoadObject", {{"type", "obstacle"}, {"name", "controllerBox"}}, S::kCityFurniture},
      {kOd, "RoadObject", {{"type", "obstacle"}, {"name", "bench"}}, S::kCityFurniture},
      {kOd, "RoadObject", {{"type", "barrier"}, {"name", "wall"}}, S::kCityFurniture},
      {kCg, "CityFurniture", {}, S::kCityFurniture},

      {kOd, "RoadObject", {{"type", "building"}, {"orientation", "side"}}, S::kWallSurface},
      {kCg, "WallSurface", {}, S::kWallSurface},

      {kOd, "RoadObject", {{"type", "building"}, {"orientation", "top"}}, S::kRoofSurface},
      {kCg, "RoofSurface", {}, S::kRoofSurface},

      {kCg, "Door", {}, S::kDoor},
      {kCg, "Window", {}, S::kWindow},

      {kCg, "BuildingInstallation", {}, S::kBuildingInstallation},
      {kCg, "OuterCeilingSurface", {}, S::kBuildingInstallation},

      {kOd, "RoadObject", {{"type", "tree"}}, S::kSolitaryVegetationObject},
      {kOd, "RoadObject", {{"type", "vegetation"}}, S::kSolitaryVegetationObject},
      {kCg, "SolitaryVegetationObject", {}, S::kSolitaryVegetationObject},
  });
  return mapping;
}

ClassMapping ClassMapping::from_json_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("class mapping: ") + e.what());
  }
  if (!doc.is_array()) fail(ErrorKind::kConfig, "$: class mapping must be a JSON array");

  std::vector<ClassMappingEntry> entries;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string path = "$[" + std::to_string(i) + "]";
    if (!item.is_object()) fail(ErrorKind::kConfig, path + ": expected object");
    for (const auto& [key, _] : item.items()) {
      if (key != "standard" && key != "descriptor" && key != "attributes" && key != "target_id") {
        fail(ErrorKind::kConfig, path + "." + key + ": unknown key");
      }
    }
    ClassMappingEntry e;
    if (!item.contains("standard") || !item["standard"].is_string()) {
      fail(ErrorKind::kConfig, path + ".standard: expected string");
    }
    auto standard = standard_from_name(item["standard"].get<std::string>());
    if (!standard) fail(ErrorKind::kConfig, path + ".standard: unknown standard");
    e.standard = *standard;
    if (!item.contains("descriptor") || !item["descriptor"].is_string()) {
      fail(ErrorKind::kConfig, path + ".descriptor: expected string");
    }
    e.descriptor = item["descriptor"].get<std::string>();
    if (item.contains("attributes")) {
      if (!item["attributes"].is_object()) {
        fail(ErrorKind::kConfig, path + ".attributes: expected object");
      }
      for (const auto& [key, value] : item["attributes"].items()) {
        if (!value.is_string()) {
          fail(ErrorKind::kConfig, path + ".attributes." + key + ": expected string");
        }
        e.attributes[key] = value.get<std::string>();
      }
    }
    if (!item.contains("target_id") || !item["target_id"].is_number_integer()) {
      fail(ErrorKind::kConfig, path + ".target_id: expected integer");
    }
    auto target = class_from_id(item["target_id"].get<std::int64_t>());
    if (!target) fail(ErrorKind::kConfig, path + ".target_id: must be in 1..12");
    e.target = *target;
    entries.push_back(std::move(e));
  }
  return ClassMapping(std::move(entries));
}

ClassMapping ClassMapping::with_overrides(const ClassMapping& overrides) const {
  std::vector<ClassMappingEntry> merged = overrides.entries_;
  merged.insert(merged.end(), entries_.begin(), entries_.end());
  ClassMapping out;
  out.entries_ = std::move(merged);
  return out;
}

SemanticClass ClassMapping::map(ModelStandard standard, std::string_view descriptor,
                                const AttributeMap& attributes) const {
  const std::string wanted = trim(descriptor);
  const AttributeMap query = normalize_attributes(attributes);

  const ClassMappingEntry* best = nullptr;
  for (const auto& e : entries_) {
    if (e.standard != standard || e.descriptor != wanted) continue;
    bool all_match = std::all_of(e.attributes.begin(), e.attributes.end(), [&](const auto& kv) {
      auto it = query.find(kv.first);
      return it != query.end() && it->second == kv.second;
    });
    if (!all_match) continue;
    if (best == nullptr || e.attributes.size() > best->attributes.size()) best = &e;
  }
  return best != nullptr ? best->target : SemanticClass::kNoise;
}

}  // namespace dogss
