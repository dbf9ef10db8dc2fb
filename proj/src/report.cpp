#include "dogss/report.hpp"

#include "dogss/config.hpp"
#include "dogss/error.hpp"
#include "dogss/io.hpp"

#include <string>

namespace dogss {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// Typed access with a key path in every failure.
class Reader {
 public:
  Reader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) fail(ErrorKind::kFormat, path_ + ": expected an object");
  }

  const json& field(const char* key) const {
    const auto it = doc_.find(key);
    if (it == doc_.end()) fail(ErrorKind::kFormat, at(key) + ": missing");
    return *it;
  }

  double number(const char* key) const {
    const json& v = field(key);
    if (!v.is_number()) fail(ErrorKind::kFormat, at(key) + ": expected a number");
    return v.get<double>();
  }

  std::optional<double> maybe_number(const char* key) const {
    const json& v = field(key);
    if (v.is_null()) return std::nullopt;
    return number(key);
  }

  std::uint64_t count(const char* key) const {
    const json& v = field(key);
    if (!v.is_number_unsigned()) fail(ErrorKind::kFormat, at(key) + ": expected a count");
    return v.get<std::uint64_t>();
  }

  SemanticClass label(const char* key) const {
    const json& v = field(key);
    const auto c = v.is_number_integer() ? class_from_id(v.get<std::int64_t>()) : std::nullopt;
    if (!c) fail(ErrorKind::kFormat, at(key) + ": expected a class id in 1..12");
    return *c;
  }

  const json& array(const char* key, std::size_t size) const {
    const json& v = field(key);
    if (!v.is_array() || v.size() != size) {
      fail(ErrorKind::kFormat, at(key) + ": expected " + std::to_string(size) + " entries");
    }
    return v;
  }

  Vec3 vec(const char* key) const {
    const json& v = array(key, 3);
    for (const auto& c : v) {
      if (!c.is_number()) fail(ErrorKind::kFormat, at(key) + ": expected numbers");
    }
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }

  std::string at(const char* key) const { return path_ + "." + key; }

 private:
  const json& doc_;
  std::string path_;
};

void expect_schema(const json& doc, const char* schema, const std::string& path) {
  const auto it = doc.find("schema");
  if (it == doc.end() || !it->is_string() || it->get<std::string>() != schema) {
    fail(ErrorKind::kFormat, path + ".schema: expected \"" + std::string(schema) + "\"");
  }
}

GapReport gap_from(const json& doc, const std::string& path) {
  expect_schema(doc, kGapReportSchema, path);
  Reader r(doc, path);
  GapReport out;
  try {
    out.params = metric_params_from_json(r.field("params"));
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, path + ": " + e.what());
  }
  out.grid_origin = r.vec("grid_origin");
  if (!r.field("translation_m").is_null()) out.translation = r.vec("translation_m");
  out.real_points = r.count("real_points");
  out.synthetic_points = r.count("synthetic_points");
  out.d_c2c = r.number("d_c2c");
  const json& rows = r.array("per_class", kClassCount);
  for (std::size_t i = 0; i < kClassCount; ++i) {
    Reader row(rows[i], path + ".per_class[" + std::to_string(i) + "]");
    ClassGap& g = out.per_class[i];
    g.label = row.label("id");
    if (class_index(g.label) != i) fail(ErrorKind::kFormat, row.at("id") + ": out of order");
    g.weight = row.number("weight");
    g.real_points = row.count("real_points");
    g.synthetic_points = row.count("synthetic_points");
    g.m3c2.median = row.maybe_number("m3c2_median");
    g.m3c2.inliers = row.count("inlier_count");
    g.m3c2.outliers = row.count("outlier_count");
    g.iou = row.maybe_number("iou");
    g.voxel_intersection = row.count("voxel_intersection");
    g.voxel_union = row.count("voxel_union");
  }
  out.d_mm3c2 = r.number("d_mm3c2");
  out.miou = r.number("miou");
  out.f_miou = r.number("f_miou");
  out.d = r.number("d");
  out.m_dogss_pcl = r.number("m_dogss_pcl");
  return out;
}

EvalReport eval_from(const json& doc, const std::string& path) {
  expect_schema(doc, kEvalReportSchema, path);
  Reader r(doc, path);
  EvalReport out;
  const json& label = r.field("label");
  if (!label.is_string()) fail(ErrorKind::kFormat, r.at("label") + ": expected a string");
  out.label = label.get<std::string>();
  out.synthetic_ratio = r.maybe_number("synthetic_ratio");
  out.total_points = r.count("total_points");
  out.miou = r.number("miou");
  const json& rows = r.array("per_class", kClassCount);
  for (std::size_t i = 0; i < kClassCount; ++i) {
    Reader row(rows[i], path + ".per_class[" + std::to_string(i) + "]");
    if (class_index(row.label("id")) != i) fail(ErrorKind::kFormat, row.at("id") + ": out of order");
    ClassTally& t = out.per_class[i];
    t.tp = row.count("tp");
    t.fp = row.count("fp");
    t.fn = row.count("fn");
    t.iou = row.number("iou");
    const json& present = row.field("present");
    if (!present.is_boolean()) fail(ErrorKind::kFormat, row.at("present") + ": expected a bool");
    t.present = present.get<bool>();
  }
  const json& confusion = r.array("confusion", kClassCount);
  for (std::size_t i = 0; i < kClassCount; ++i) {
    const json& line = confusion[i];
    if (!line.is_array() || line.size() != kClassCount) {
      fail(ErrorKind::kFormat, path + ".confusion[" + std::to_string(i) + "]: expected 12 counts");
    }
    for (std::size_t j = 0; j < kClassCount; ++j) {
      if (!line[j].is_number_unsigned()) {
        fail(ErrorKind::kFormat, path + ".confusion[" + std::to_string(i) + "]: expected counts");
      }
      out.confusion[i][j] = line[j].get<std::uint64_t>();
    }
  }
  return out;
}

}  // namespace

json to_json(const GapReport& report) {
  json rows = json::array();
  for (const ClassGap& g : report.per_class) {
    rows.push_back({
        {"id", class_id(g.label)},
        {"name", class_name(g.label)},
        {"weight", g.weight},
        {"real_points", g.real_points},
        {"synthetic_points", g.synthetic_points},
        {"m3c2_median", optional_number(g.m3c2.median)},
        {"inlier_count", g.m3c2.inliers},
        {"outlier_count", g.m3c2.outliers},
        {"iou", optional_number(g.iou)},
        {"voxel_intersection", g.voxel_intersection},
        {"voxel_union", g.voxel_union},
    });
  }
  return {
      {"schema", kGapReportSchema},
      {"params", metric_params_to_json(report.params)},
      {"grid_origin", vec3(report.grid_origin)},
      {"translation_m", report.translation ? vec3(*report.translation) : json(nullptr)},
      {"real_points", report.real_points},
      {"synthetic_points", report.synthetic_points},
      {"d_c2c", report.d_c2c},
      {"per_class", rows},
      {"d_mm3c2", report.d_mm3c2},
      {"miou", report.miou},
      {"f_miou", report.f_miou},
      {"d", report.d},
      {"m_dogss_pcl", report.m_dogss_pcl},
  };
}

json to_json(const EvalReport& report) {
  json rows = json::array();
  for (std::size_t i = 0; i < kClassCount; ++i) {
    const ClassTally& t = report.per_class[i];
    rows.push_back({
        {"id", class_id(kAllClasses[i])},
        {"name", class_name(kAllClasses[i])},
        {"tp", t.tp},
        {"fp", t.fp},
        {"fn", t.fn},
        {"iou", t.iou},
        {"present", t.present},
    });
  }
  json confusion = json::array();
  for (const auto& line : report.confusion) confusion.push_back(line);
  json worst = json::array();
  for (const auto& m : most_misclassified(report)) {
    worst.push_back({
        {"true_id", class_id(m.true_class)},
        {"predicted_id", class_id(m.predicted)},
        {"count", m.count},
        {"wrong_total", m.wrong_total},
        {"proportion", m.proportion},
    });
  }
  return {
      {"schema", kEvalReportSchema},
      {"label", report.label},
      {"synthetic_ratio", optional_number(report.synthetic_ratio)},
      {"total_points", report.total_points},
      {"miou", report.miou},
      {"per_class", rows},
      {"confusion", confusion},
      {"most_misclassified", worst},
  };
}

GapReport gap_report_from_json(const json& doc) { return gap_from(doc, "$"); }

EvalReport eval_report_from_json(const json& doc) { return eval_from(doc, "$"); }

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

std::vector<AnyReport> parse_reports(const json& doc) {
  std::vector<AnyReport> out;
  auto one = [&](const json& item, const std::string& path) {
    const auto it = item.is_object() ? item.find("schema") : item.end();
    if (it != item.end() && *it == kEvalReportSchema) {
      out.emplace_back(eval_from(item, path));
    } else {
      out.emplace_back(gap_from(item, path));
    }
  };
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) one(doc[i], "$[" + std::to_string(i) + "]");
  } else {
    one(doc, "$");
  }
  return out;
}

void write_report(const GapReport& report, const std::filesystem::path& path) {
  write_file(path, dump_json(to_json(report)));
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  write_file(path, dump_json(to_json(report)));
}

void write_reports(const std::vector<GapReport>& reports, const std::filesystem::path& path) {
  json doc = json::array();
  for (const auto& r : reports) doc.push_back(to_json(r));
  write_file(path, dump_json(doc));
}

std::vector<AnyReport> read_reports(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_reports(json::parse(text));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace dogss
