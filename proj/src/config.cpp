#include "dogss/config.hpp"

#include "dogss/error.hpp"
#include "dogss/io.hpp"

#include <charconv>
#include <set>
#include <string>

namespace dogss {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  fail(ErrorKind::kConfig, path + ": " + what);
}

// Object accessor that remembers which keys were read so leftovers can be
// rejected as unknown.
class Fields {
 public:
  Fields(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) bad(path_, "expected an object");
  }

  std::string at(std::string_view key) const { return path_ + "." + std::string(key); }

  const json* find(std::string_view key) {
    seen_.emplace(key);
    const auto it = doc_.find(std::string(key));
    return it == doc_.end() ? nullptr : &*it;
  }

  void number(std::string_view key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) bad(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  void integer(std::string_view key, std::int64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) bad(at(key), "expected an integer");
      out = v->get<std::int64_t>();
    }
  }

  void text(std::string_view key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) bad(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) bad(path_ + "." + key, "unknown key");
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

Vec2 read_xy(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    bad(path, "expected [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

Vec3 read_xyz(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) bad(path, "expected [x, y, z]");
  for (const auto& c : v) {
    if (!c.is_number()) bad(path, "expected [x, y, z]");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

ClassWeights read_weights(const json& v, const std::string& path) {
  if (!v.is_object()) bad(path, "expected an object of class name to weight");
  std::map<SemanticClass, double> weights;
  for (const auto& [key, value] : v.items()) {
    auto c = class_from_name(key);
    if (!c) {
      std::int64_t id = 0;
      const auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
      if (ec == std::errc() && end == key.data() + key.size()) c = class_from_id(id);
    }
    if (!c) bad(path + "." + key, "unknown class");
    if (!value.is_number()) bad(path + "." + key, "expected a number");
    if (weights.contains(*c)) bad(path + "." + key, "class given twice");
    weights[*c] = value.get<double>();
  }
  try {
    return ClassWeights(weights);
  } catch (const Error& e) {
    bad(path, e.what());
  }
}

void read_metric(Fields& f, MetricParams& m) {
  f.number("voxel_size_m", m.voxel_edge);
  f.number("lambda1", m.lambda1);
  f.number("lambda2", m.lambda2);
  f.number("lambda3", m.lambda3);
  f.number("alpha", m.alpha);
  f.number("epsilon", m.epsilon);
  if (const json* v = f.find("class_weights")) m.weights = read_weights(*v, f.at("class_weights"));
  if (const json* v = f.find("m3c2")) {
    Fields g(*v, f.at("m3c2"));
    g.number("normal_scale_m", m.m3c2.normal_scale);
    g.number("projection_radius_m", m.m3c2.projection_radius);
    g.number("max_depth_m", m.m3c2.max_depth);
    g.finish();
  }
  std::string s;
  f.text("c2c_mode", s);
  if (!s.empty()) {
    const auto mode = c2c_mode_from_string(s);
    if (!mode) bad(f.at("c2c_mode"), "unknown mode \"" + s + "\"");
    m.c2c_mode = *mode;
  }
  s.clear();
  f.text("distance_weight_mode", s);
  if (!s.empty()) {
    const auto mode = weight_mode_from_string(s);
    if (!mode) bad(f.at("distance_weight_mode"), "unknown mode \"" + s + "\"");
    m.weight_mode = *mode;
  }
  s.clear();
  f.text("lambda_validation", s);
  if (!s.empty()) {
    const auto mode = lambda_validation_from_string(s);
    if (!mode) bad(f.at("lambda_validation"), "unknown mode \"" + s + "\"");
    m.lambda_validation = *mode;
  }
}

void read_scan(const json& v, ScanConfig& scan) {
  Fields f(v, "$.scan");
  std::int64_t channels = scan.channels;
  f.integer("channels", channels);
  if (channels < 1 || channels > 4096) bad(f.at("channels"), "must lie in [1, 4096]");
  scan.channels = static_cast<int>(channels);
  f.number("vertical_fov_min_deg", scan.vertical_fov_min_deg);
  f.number("vertical_fov_max_deg", scan.vertical_fov_max_deg);
  f.number("rotation_rate_hz", scan.rotation_rate_hz);
  f.number("points_per_second", scan.points_per_second);
  f.number("max_range_m", scan.max_range_m);
  if (const json* o = f.find("sensor_offset_m")) {
    scan.sensor_offset = read_xyz(*o, f.at("sensor_offset_m"));
  }
  f.finish();
}

SplitSpec read_split(const json& v) {
  Fields f(v, "$.split");
  const json* regions = f.find("regions");
  if (!regions || !regions->is_array()) bad(f.at("regions"), "expected an array");
  f.finish();
  SplitSpec spec;
  for (std::size_t i = 0; i < regions->size(); ++i) {
    const std::string path = "$.split.regions[" + std::to_string(i) + "]";
    Fields r((*regions)[i], path);
    Region region;
    r.text("name", region.name);
    const json* rect = r.find("rect");
    const json* polygon = r.find("polygon");
    if ((rect == nullptr) == (polygon == nullptr)) bad(path, "needs exactly one of rect, polygon");
    if (rect) {
      Fields box(*rect, path + ".rect");
      const json* lo = box.find("min");
      const json* hi = box.find("max");
      if (!lo || !hi) bad(path + ".rect", "needs min and max");
      box.finish();
      region.shape = Rect{read_xy(*lo, path + ".rect.min"), read_xy(*hi, path + ".rect.max")};
    } else {
      if (!polygon->is_array()) bad(path + ".polygon", "expected an array of [x, y]");
      Polygon poly;
      for (std::size_t k = 0; k < polygon->size(); ++k) {
        poly.vertices.push_back(
            read_xy((*polygon)[k], path + ".polygon[" + std::to_string(k) + "]"));
      }
      region.shape = std::move(poly);
    }
    r.finish();
    spec.regions.push_back(std::move(region));
  }
  spec.validate();
  return spec;
}

json xy(const Vec2& v) { return json::array({v.x(), v.y()}); }

}  // namespace

RunConfig parse_config(const json& doc) {
  RunConfig config;
  Fields f(doc, "$");
  read_metric(f, config.metric);
  if (const json* v = f.find("seed"); v && !v->is_null()) {
    if (!v->is_number_unsigned()) bad("$.seed", "expected a non-negative integer");
    config.seed = v->get<std::uint64_t>();
  }
  if (const json* v = f.find("scan")) read_scan(*v, config.scan);
  if (const json* v = f.find("noise")) {
    Fields g(*v, "$.noise");
    g.number("sigma_m", config.noise_sigma_m);
    g.finish();
    if (!(config.noise_sigma_m >= 0.0)) bad("$.noise.sigma_m", "must be non-negative");
  }
  if (const json* v = f.find("mix")) {
    Fields g(*v, "$.mix");
    g.number("real_fraction", config.mix.real_fraction);
    g.integer("target_count", config.mix.target_count);
    g.finish();
    if (!(config.mix.real_fraction >= 0.0 && config.mix.real_fraction <= 1.0)) {
      bad("$.mix.real_fraction", "must lie in [0, 1]");
    }
    if (config.mix.target_count < 0) bad("$.mix.target_count", "must be positive");
  }
  if (const json* v = f.find("split")) config.split = read_split(*v);
  f.finish();
  config.metric.validate();
  config.scan.validate();
  return config;
}

RunConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

RunConfig read_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_config_text(text);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

json metric_params_to_json(const MetricParams& m) {
  json weights = json::object();
  for (const auto& [c, w] : m.weights.as_map()) weights[std::string(class_name(c))] = w;
  return {
      {"voxel_size_m", m.voxel_edge},
      {"lambda1", m.lambda1},
      {"lambda2", m.lambda2},
      {"lambda3", m.lambda3},
      {"alpha", m.alpha},
      {"epsilon", m.epsilon},
      {"class_weights", weights},
      {"m3c2",
       {{"normal_scale_m", m.m3c2.normal_scale},
        {"projection_radius_m", m.m3c2.projection_radius},
        {"max_depth_m", m.m3c2.max_depth}}},
      {"c2c_mode", to_string(m.c2c_mode)},
      {"distance_weight_mode", to_string(m.weight_mode)},
      {"lambda_validation", to_string(m.lambda_validation)},
  };
}

MetricParams metric_params_from_json(const json& doc) {
  MetricParams m;
  Fields f(doc, "$.params");
  read_metric(f, m);
  f.finish();
  m.validate();
  return m;
}

json config_to_json(const RunConfig& c) {
  json doc = metric_params_to_json(c.metric);
  doc["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  doc["scan"] = {
      {"channels", c.scan.channels},
      {"vertical_fov_min_deg", c.scan.vertical_fov_min_deg},
      {"vertical_fov_max_deg", c.scan.vertical_fov_max_deg},
      {"rotation_rate_hz", c.scan.rotation_rate_hz},
      {"points_per_second", c.scan.points_per_second},
      {"max_range_m", c.scan.max_range_m},
      {"sensor_offset_m",
       json::array({c.scan.sensor_offset.x(), c.scan.sensor_offset.y(), c.scan.sensor_offset.z()})},
  };
  doc["noise"] = {{"sigma_m", c.noise_sigma_m}};
  doc["mix"] = {{"real_fraction", c.mix.real_fraction}, {"target_count", c.mix.target_count}};
  if (c.split) {
    json regions = json::array();
    for (const auto& r : c.split->regions) {
      json region = {{"name", r.name}};
      if (const auto* rect = std::get_if<Rect>(&r.shape)) {
        region["rect"] = {{"min", xy(rect->min)}, {"max", xy(rect->max)}};
      } else {
        json poly = json::array();
        for (const auto& v : std::get<Polygon>(r.shape).vertices) poly.push_back(xy(v));
        region["polygon"] = poly;
      }
      regions.push_back(region);
    }
    doc["split"] = {{"regions", regions}};
  }
  return doc;
}

}  // namespace dogss
