#include "dogss/io.hpp"

#include "dogss/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dogss {

namespace {

// ---------------------------------------------------------------------------
// Text helpers

[[noreturn]] void parse_fail_line(std::size_t line, const std::string& message) {
  fail(ErrorKind::kParse, "line " + std::to_string(line) + ": " + message);
}

[[noreturn]] void parse_fail_byte(std::size_t offset, const std::string& message) {
  fail(ErrorKind::kParse, "byte " + std::to_string(offset) + ": " + message);
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Iterates '\n'-separated lines, reporting 1-based line numbers.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) {
      line = text_.substr(pos_);
      pos_ = text_.size();
    } else {
      line = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
    }
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number_;
    return true;
  }

  std::size_t number() const { return number_; }
  std::size_t offset() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

std::optional<double> to_double(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

std::optional<std::int64_t> to_int(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

double finite_or_fail(std::string_view token, std::size_t line, const char* what) {
  const auto v = to_double(token);
  if (!v) parse_fail_line(line, std::string("invalid ") + what + " '" + std::string(token) + "'");
  if (!std::isfinite(*v)) parse_fail_line(line, std::string("non-finite ") + what);
  return *v;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

void append_int(std::string& out, std::int64_t v) {
  char buf[24];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

std::string single_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

void note_coercions(ReadDiagnostics* diagnostics, std::size_t coerced) {
  if (diagnostics == nullptr || coerced == 0) return;
  diagnostics->coerced_labels += coerced;
  diagnostics->warnings.push_back(std::to_string(coerced) +
                                  " label(s) outside 1..12 coerced to Noise");
}

SemanticClass label_from_double(double v, std::size_t& coerced) {
  if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 1e15) {
    ++coerced;
    return SemanticClass::kNoise;
  }
  bool was_coerced = false;
  const SemanticClass c = class_from_label(static_cast<std::int64_t>(v), &was_coerced);
  if (was_coerced) ++coerced;
  return c;
}

constexpr std::string_view kFramePrefix = "frame: ";

// ---------------------------------------------------------------------------
// XYZL text

CloudRecord parse_xyzl(std::string_view text, ReadDiagnostics* diagnostics) {
  CloudRecord record;
  LineReader lines(text);
  std::string_view line;
  std::size_t fields_per_record = 0;
  std::size_t coerced = 0;
  bool seen_data = false;
  while (lines.next(line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) {
      const std::string_view comment = strip(line.substr(hash + 1));
      if (!seen_data && hash == 0 && comment.starts_with(kFramePrefix)) {
        record.cloud.frame_note = std::string(comment.substr(kFramePrefix.size()));
      }
      line = line.substr(0, hash);
    }
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 4 && tokens.size() != 7) {
      parse_fail_line(lines.number(), "expected 4 or 7 fields, got " + std::to_string(tokens.size()));
    }
    if (fields_per_record == 0) fields_per_record = tokens.size();
    if (tokens.size() != fields_per_record) {
      parse_fail_line(lines.number(), "record has " + std::to_string(tokens.size()) +
                                          " fields but earlier records have " +
                                          std::to_string(fields_per_record));
    }
    seen_data = true;
    LabeledPoint p;
    p.position = Vec3(finite_or_fail(tokens[0], lines.number(), "x"),
                      finite_or_fail(tokens[1], lines.number(), "y"),
                      finite_or_fail(tokens[2], lines.number(), "z"));
    const auto label = to_int(tokens[3]);
    if (!label) parse_fail_line(lines.number(), "class_id must be an integer");
    bool was_coerced = false;
    p.label = class_from_label(*label, &was_coerced);
    if (was_coerced) ++coerced;
    record.cloud.points.push_back(p);
    if (fields_per_record == 7) {
      record.ray_origins.emplace_back(finite_or_fail(tokens[4], lines.number(), "ox"),
                                      finite_or_fail(tokens[5], lines.number(), "oy"),
                                      finite_or_fail(tokens[6], lines.number(), "oz"));
    }
  }
  record.has_ray_origins = fields_per_record == 7;
  note_coercions(diagnostics, coerced);
  return record;
}

std::string serialize_xyzl(const LabeledPointCloud& cloud, std::span<const Vec3> origins) {
  std::string out;
  out.reserve(cloud.size() * 64 + 64);
  if (!cloud.frame_note.empty()) {
    out += "# ";
    out += kFramePrefix;
    out += single_line(cloud.frame_note);
    out += '\n';
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    append_double(out, p.position.x());
    out += ' ';
    append_double(out, p.position.y());
    out += ' ';
    append_double(out, p.position.z());
    out += ' ';
    append_int(out, class_id(p.label));
    if (!origins.empty()) {
      for (int k = 0; k < 3; ++k) {
        out += ' ';
        append_double(out, origins[i][k]);
      }
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// PLY

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<PlyType> ply_type(std::string_view name) {
  static const std::map<std::string_view, PlyType> kTypes = {
      {"char", PlyType::kInt8},     {"int8", PlyType::kInt8},       {"uchar", PlyType::kUint8},
      {"uint8", PlyType::kUint8},   {"short", PlyType::kInt16},     {"int16", PlyType::kInt16},
      {"ushort", PlyType::kUint16}, {"uint16", PlyType::kUint16},   {"int", PlyType::kInt32},
      {"int32", PlyType::kInt32},   {"uint", PlyType::kUint32},     {"uint32", PlyType::kUint32},
      {"float", PlyType::kFloat32}, {"float32", PlyType::kFloat32}, {"double", PlyType::kFloat64},
      {"float64", PlyType::kFloat64},
  };
  const auto it = kTypes.find(name);
  if (it == kTypes.end()) return std::nullopt;
  return it->second;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUint8: return 1;
    case PlyType::kInt16:
    case PlyType::kUint16: return 2;
    case PlyType::kInt32:
    case PlyType::kUint32:
    case PlyType::kFloat32: return 4;
    case PlyType::kFloat64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* bytes = reinterpret_cast<unsigned char*>(&value);
    std::reverse(bytes, bytes + sizeof(T));
  }
  return value;
}

template <typename T>
void store_le(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.append(bytes, sizeof(T));
}

double load_scalar(const char* p, PlyType t) {
  switch (t) {
    case PlyType::kInt8: return load_le<std::int8_t>(p);
    case PlyType::kUint8: return load_le<std::uint8_t>(p);
    case PlyType::kInt16: return load_le<std::int16_t>(p);
    case PlyType::kUint16: return load_le<std::uint16_t>(p);
    case PlyType::kInt32: return load_le<std::int32_t>(p);
    case PlyType::kUint32: return load_le<std::uint32_t>(p);
    case PlyType::kFloat32: return load_le<float>(p);
    case PlyType::kFloat64: return load_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat64;
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

enum class PlyEncoding { kAscii, kBinaryLe };

struct PlyHeader {
  PlyEncoding encoding = PlyEncoding::kAscii;
  std::vector<PlyElement> elements;
  std::string frame_note;
  std::size_t body_offset = 0;
  std::size_t body_line = 0;  // line number of the first body line
};

PlyHeader parse_ply_header(std::string_view bytes) {
  PlyHeader header;
  LineReader lines(bytes);
  std::string_view line;
  if (!lines.next(line) || line != "ply") parse_fail_line(1, "missing 'ply' magic");
  bool have_format = false;
  while (true) {
    if (!lines.next(line)) fail(ErrorKind::kParse, "PLY header is not terminated by end_header");
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string_view key = tokens[0];
    if (key == "end_header") {
      header.body_offset = lines.offset();
      header.body_line = lines.number() + 1;
      break;
    }
    if (key == "format") {
      if (tokens.size() != 3) parse_fail_line(lines.number(), "malformed format line");
      if (tokens[1] == "ascii") {
        header.encoding = PlyEncoding::kAscii;
      } else if (tokens[1] == "binary_little_endian") {
        header.encoding = PlyEncoding::kBinaryLe;
      } else {
        fail(ErrorKind::kFormat, "unsupported PLY encoding '" + std::string(tokens[1]) + "'");
      }
      have_format = true;
    } else if (key == "comment") {
      const std::string_view rest = strip(line.substr(line.find("comment") + 7));
      if (rest.starts_with(kFramePrefix)) header.frame_note = std::string(rest.substr(kFramePrefix.size()));
    } else if (key == "obj_info") {
      continue;
    } else if (key == "element") {
      if (tokens.size() != 3) parse_fail_line(lines.number(), "malformed element line");
      const auto count = to_int(tokens[2]);
      if (!count || *count < 0) parse_fail_line(lines.number(), "invalid element count");
      header.elements.push_back({std::string(tokens[1]), static_cast<std::size_t>(*count), {}});
    } else if (key == "property") {
      if (header.elements.empty()) parse_fail_line(lines.number(), "property before any element");
      PlyProperty prop;
      if (tokens.size() >= 2 && tokens[1] == "list") {
        if (tokens.size() != 5) parse_fail_line(lines.number(), "malformed list property");
        const auto ct = ply_type(tokens[2]);
        const auto it = ply_type(tokens[3]);
        if (!ct || !it) parse_fail_line(lines.number(), "unknown property type");
        if (*ct == PlyType::kFloat32 || *ct == PlyType::kFloat64) {
          parse_fail_line(lines.number(), "list count type must be integral");
        }
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tokens[4]);
      } else {
        if (tokens.size() != 3) parse_fail_line(lines.number(), "malformed property line");
        const auto t = ply_type(tokens[1]);
        if (!t) parse_fail_line(lines.number(), "unknown property type '" + std::string(tokens[1]) + "'");
        prop.type = *t;
        prop.name = std::string(tokens[2]);
      }
      header.elements.back().properties.push_back(std::move(prop));
    } else {
      parse_fail_line(lines.number(), "unknown header keyword '" + std::string(key) + "'");
    }
  }
  if (!have_format) fail(ErrorKind::kParse, "PLY header has no format line");
  return header;
}

struct VertexLayout {
  int x = -1, y = -1, z = -1, label = -1, ox = -1, oy = -1, oz = -1;
};

VertexLayout vertex_layout(const PlyElement& vertex) {
  VertexLayout layout;
  for (std::size_t i = 0; i < vertex.properties.size(); ++i) {
    const auto& p = vertex.properties[i];
    const int idx = static_cast<int>(i);
    if (p.is_list) continue;
    if (p.name == "x") layout.x = idx;
    else if (p.name == "y") layout.y = idx;
    else if (p.name == "z") layout.z = idx;
    else if (p.name == "class_id") layout.label = idx;
    else if (p.name == "scalar_Classification" && layout.label < 0) layout.label = idx;
    else if (p.name == "ox") layout.ox = idx;
    else if (p.name == "oy") layout.oy = idx;
    else if (p.name == "oz") layout.oz = idx;
  }
  if (layout.x < 0 || layout.y < 0 || layout.z < 0) {
    fail(ErrorKind::kFormat, "PLY vertex element lacks x, y, z properties");
  }
  return layout;
}

CloudRecord parse_ply(std::string_view bytes, ReadDiagnostics* diagnostics) {
  const PlyHeader header = parse_ply_header(bytes);
  CloudRecord record;
  record.cloud.frame_note = header.frame_note;

  std::size_t vertex_element = header.elements.size();
  for (std::size_t i = 0; i < header.elements.size(); ++i) {
    if (header.elements[i].name == "vertex") {
      vertex_element = i;
      break;
    }
  }
  if (vertex_element == header.elements.size()) {
    fail(ErrorKind::kFormat, "PLY file has no vertex element");
  }
  const PlyElement& vertex = header.elements[vertex_element];
  const VertexLayout layout = vertex_layout(vertex);
  const bool with_origins = layout.ox >= 0 && layout.oy >= 0 && layout.oz >= 0;
  if (layout.label < 0 && diagnostics != nullptr) {
    diagnostics->warnings.push_back("PLY has no class_id property; all points set to Noise");
  }
  record.has_ray_origins = with_origins;
  record.cloud.points.reserve(vertex.count);
  if (with_origins) record.ray_origins.reserve(vertex.count);

  std::size_t coerced = 0;
  std::vector<double> values(vertex.properties.size());
  auto emit = [&](std::size_t line_or_offset) {
    (void)line_or_offset;
    LabeledPoint p;
    p.position = Vec3(values[layout.x], values[layout.y], values[layout.z]);
    p.label = layout.label >= 0 ? label_from_double(values[layout.label], coerced)
                                : SemanticClass::kNoise;
    record.cloud.points.push_back(p);
    if (with_origins) record.ray_origins.emplace_back(values[layout.ox], values[layout.oy], values[layout.oz]);
  };
  auto check_finite = [&](auto&& on_error) {
    for (int idx : {layout.x, layout.y, layout.z}) {
      if (!std::isfinite(values[idx])) on_error("non-finite coordinate");
    }
    if (with_origins) {
      for (int idx : {layout.ox, layout.oy, layout.oz}) {
        if (!std::isfinite(values[idx])) on_error("non-finite ray origin");
      }
    }
  };

  if (header.encoding == PlyEncoding::kAscii) {
    LineReader lines(bytes.substr(header.body_offset));
    std::string_view line;
    const std::size_t line_base = header.body_line - 1;
    for (std::size_t e = 0; e <= vertex_element; ++e) {
      const PlyElement& element = header.elements[e];
      for (std::size_t n = 0; n < element.count; ++n) {
        std::vector<std::string_view> tokens;
        do {
          if (!lines.next(line)) {
            fail(ErrorKind::kParse, "element '" + element.name + "' declares " +
                                        std::to_string(element.count) + " records but file ends after " +
                                        std::to_string(n));
          }
          tokens = tokenize(line);
        } while (tokens.empty());
        const std::size_t line_no = line_base + lines.number();
        std::size_t t = 0;
        for (std::size_t k = 0; k < element.properties.size(); ++k) {
          const auto& prop = element.properties[k];
          if (t >= tokens.size()) parse_fail_line(line_no, "too few values");
          if (prop.is_list) {
            const auto count = to_int(tokens[t++]);
            if (!count || *count < 0) parse_fail_line(line_no, "invalid list length");
            if (tokens.size() - t < static_cast<std::size_t>(*count)) parse_fail_line(line_no, "too few list values");
            t += static_cast<std::size_t>(*count);
            continue;
          }
          const auto v = to_double(tokens[t++]);
          if (!v) parse_fail_line(line_no, "invalid value for property '" + prop.name + "'");
          if (e == vertex_element) values[k] = *v;
        }
        if (t != tokens.size()) parse_fail_line(line_no, "too many values");
        if (e == vertex_element) {
          check_finite([&](const char* what) { parse_fail_line(line_no, what); });
          emit(line_no);
        }
      }
    }
  } else {
    std::size_t pos = header.body_offset;
    auto need = [&](std::size_t n) {
      if (bytes.size() - pos < n) parse_fail_byte(pos, "unexpected end of binary PLY data");
    };
    for (std::size_t e = 0; e <= vertex_element; ++e) {
      const PlyElement& element = header.elements[e];
      for (std::size_t n = 0; n < element.count; ++n) {
        const std::size_t record_start = pos;
        for (std::size_t k = 0; k < element.properties.size(); ++k) {
          const auto& prop = element.properties[k];
          if (prop.is_list) {
            need(ply_size(prop.count_type));
            const double count = load_scalar(bytes.data() + pos, prop.count_type);
            pos += ply_size(prop.count_type);
            if (count < 0) parse_fail_byte(pos, "negative list length");
            const auto skip = static_cast<std::size_t>(count) * ply_size(prop.type);
            need(skip);
            pos += skip;
            continue;
          }
          need(ply_size(prop.type));
          if (e == vertex_element) values[k] = load_scalar(bytes.data() + pos, prop.type);
          pos += ply_size(prop.type);
        }
        if (e == vertex_element) {
          check_finite([&](const char* what) { parse_fail_byte(record_start, what); });
          emit(record_start);
        }
      }
    }
  }
  note_coercions(diagnostics, coerced);
  return record;
}

std::string serialize_ply(const LabeledPointCloud& cloud, std::span<const Vec3> origins,
                          bool binary) {
  std::string out;
  out += "ply\n";
  out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
  if (!cloud.frame_note.empty()) {
    out += "comment ";
    out += kFramePrefix;
    out += single_line(cloud.frame_note);
    out += '\n';
  }
  out += "element vertex ";
  append_int(out, static_cast<std::int64_t>(cloud.size()));
  out += "\nproperty double x\nproperty double y\nproperty double z\nproperty uchar class_id\n";
  if (!origins.empty()) out += "property double ox\nproperty double oy\nproperty double oz\n";
  out += "end_header\n";

  if (binary) {
    const std::size_t stride = 25 + (origins.empty() ? 0 : 24);
    out.reserve(out.size() + stride * cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      for (int k = 0; k < 3; ++k) store_le<double>(out, p.position[k]);
      store_le<std::uint8_t>(out, static_cast<std::uint8_t>(class_id(p.label)));
      if (!origins.empty()) {
        for (int k = 0; k < 3; ++k) store_le<double>(out, origins[i][k]);
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    append_double(out, p.position.x());
    out += ' ';
    append_double(out, p.position.y());
    out += ' ';
    append_double(out, p.position.z());
    out += ' ';
    append_int(out, class_id(p.label));
    if (!origins.empty()) {
      for (int k = 0; k < 3; ++k) {
        out += ' ';
        append_double(out, origins[i][k]);
      }
    }
    out += '\n';
  }
  return out;
}

bool looks_like_ply(std::string_view bytes) {
  return bytes.starts_with("ply\n") || bytes.starts_with("ply\r\n");
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(CloudFormat format) {
  switch (format) {
    case CloudFormat::kXyzlText: return "xyzl";
    case CloudFormat::kPlyAscii: return "ply-ascii";
    case CloudFormat::kPlyBinaryLe: return "ply-binary";
  }
  return "xyzl";
}

std::optional<CloudFormat> cloud_format_from_string(std::string_view s) {
  if (s == "xyzl") return CloudFormat::kXyzlText;
  if (s == "ply-ascii") return CloudFormat::kPlyAscii;
  if (s == "ply-binary" || s == "ply") return CloudFormat::kPlyBinaryLe;
  return std::nullopt;
}

std::optional<CloudFormat> cloud_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".ply") return CloudFormat::kPlyBinaryLe;
  if (ext == ".xyzl" || ext == ".xyz" || ext == ".txt") return CloudFormat::kXyzlText;
  return std::nullopt;
}

CloudRecord parse_cloud(std::string_view bytes, std::optional<CloudFormat> format,
                        ReadDiagnostics* diagnostics) {
  const bool ply = format ? *format != CloudFormat::kXyzlText : looks_like_ply(bytes);
  if (ply) {
    if (!looks_like_ply(bytes)) fail(ErrorKind::kFormat, "file is not PLY (missing 'ply' magic)");
    return parse_ply(bytes, diagnostics);
  }
  return parse_xyzl(bytes, diagnostics);
}

std::string serialize_cloud(const LabeledPointCloud& cloud, CloudFormat format,
                            std::span<const Vec3> ray_origins) {
  if (!ray_origins.empty() && ray_origins.size() != cloud.size()) {
    fail(ErrorKind::kInvalidArgument, "ray origin count does not match point count");
  }
  switch (format) {
    case CloudFormat::kXyzlText: return serialize_xyzl(cloud, ray_origins);
    case CloudFormat::kPlyAscii: return serialize_ply(cloud, ray_origins, false);
    case CloudFormat::kPlyBinaryLe: return serialize_ply(cloud, ray_origins, true);
  }
  return {};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) fail(ErrorKind::kIo, "failed reading '" + path.string() + "'");
  return std::move(buffer).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

namespace {

template <typename Fn>
auto with_path_context(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace

CloudRecord read_cloud_record(const std::filesystem::path& path, std::optional<CloudFormat> format,
                              ReadDiagnostics* diagnostics) {
  const std::string bytes = read_file(path);
  return with_path_context(path, [&] { return parse_cloud(bytes, format, diagnostics); });
}

LabeledPointCloud read_cloud(const std::filesystem::path& path, std::optional<CloudFormat> format,
                             ReadDiagnostics* diagnostics) {
  return read_cloud_record(path, format, diagnostics).cloud;
}

void write_cloud(const LabeledPointCloud& cloud, const std::filesystem::path& path,
                 CloudFormat format, std::span<const Vec3> ray_origins) {
  write_file(path, serialize_cloud(cloud, format, ray_origins));
}

// ---------------------------------------------------------------------------
// OBJ meshes

std::optional<SemanticClass> class_from_group_name(std::string_view group) {
  group = strip(group);
  if (auto c = class_from_name(group)) return c;
  const std::size_t cut = group.find_first_of("_.");
  if (cut == std::string_view::npos || cut == 0) return std::nullopt;
  return class_from_name(group.substr(0, cut));
}

ClassedMesh parse_mesh(std::string_view text, ReadDiagnostics* diagnostics) {
  ClassedMesh mesh;
  LineReader lines(text);
  std::string_view line;
  SemanticClass current = SemanticClass::kNoise;
  bool in_group = false;
  bool warned_ungrouped = false;
  std::set<std::string> warned_names;

  struct PendingFace {
    std::vector<std::int64_t> indices;  // zero-based, may be unresolved forward refs
    SemanticClass label;
    std::size_t line;
  };
  std::vector<PendingFace> faces;

  while (lines.next(line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string_view key = tokens[0];
    if (key == "v") {
      if (tokens.size() < 4 || tokens.size() > 5) parse_fail_line(lines.number(), "vertex needs 3 coordinates");
      mesh.vertices.emplace_back(finite_or_fail(tokens[1], lines.number(), "coordinate"),
                                 finite_or_fail(tokens[2], lines.number(), "coordinate"),
                                 finite_or_fail(tokens[3], lines.number(), "coordinate"));
    } else if (key == "g" || key == "o") {
      const std::string name = tokens.size() > 1 ? std::string(tokens[1]) : std::string();
      const auto c = class_from_group_name(name);
      current = c.value_or(SemanticClass::kNoise);
      in_group = true;
      if (!c && diagnostics != nullptr && warned_names.insert(name).second) {
        diagnostics->warnings.push_back("group '" + name + "' is not a class name; mapped to Noise");
      }
    } else if (key == "f") {
      if (tokens.size() < 4) {
        parse_fail_line(lines.number(), "face with fewer than 3 vertices cannot be triangulated");
      }
      if (!in_group && !warned_ungrouped && diagnostics != nullptr) {
        diagnostics->warnings.push_back("faces outside any class group mapped to Noise");
        warned_ungrouped = true;
      }
      PendingFace face{{}, current, lines.number()};
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        const std::string_view ref = tokens[k].substr(0, tokens[k].find('/'));
        const auto idx = to_int(ref);
        if (!idx || *idx == 0) parse_fail_line(lines.number(), "invalid vertex reference '" + std::string(tokens[k]) + "'");
        const std::int64_t resolved =
            *idx > 0 ? *idx - 1 : static_cast<std::int64_t>(mesh.vertices.size()) + *idx;
        if (resolved < 0) parse_fail_line(lines.number(), "vertex index out of range");
        face.indices.push_back(resolved);
      }
      faces.push_back(std::move(face));
    }
    // vt, vn, s, usemtl, mtllib, l, p: no bearing on classed geometry.
  }

  const auto vertex_count = static_cast<std::int64_t>(mesh.vertices.size());
  if (vertex_count > static_cast<std::int64_t>(std::numeric_limits<std::uint32_t>::max())) {
    fail(ErrorKind::kFormat, "mesh has too many vertices");
  }
  for (const auto& face : faces) {
    for (auto idx : face.indices) {
      if (idx >= vertex_count) parse_fail_line(face.line, "vertex index out of range");
    }
    for (std::size_t k = 1; k + 1 < face.indices.size(); ++k) {
      MeshTriangle tri;
      tri.vertices = {static_cast<std::uint32_t>(face.indices[0]),
                      static_cast<std::uint32_t>(face.indices[k]),
                      static_cast<std::uint32_t>(face.indices[k + 1])};
      tri.label = face.label;
      mesh.triangles.push_back(tri);
      if (!(mesh.triangle_area(mesh.triangles.size() - 1) > kMinTriangleArea)) {
        mesh.triangles.pop_back();
        if (diagnostics != nullptr) ++diagnostics->dropped_degenerate;
      }
    }
  }
  if (diagnostics != nullptr && diagnostics->dropped_degenerate > 0) {
    diagnostics->warnings.push_back(std::to_string(diagnostics->dropped_degenerate) +
                                    " degenerate triangle(s) dropped");
  }
  return mesh;
}

ClassedMesh read_mesh(const std::filesystem::path& path, ReadDiagnostics* diagnostics) {
  const std::string text = read_file(path);
  return with_path_context(path, [&] { return parse_mesh(text, diagnostics); });
}

std::string serialize_mesh(const ClassedMesh& mesh) {
  std::string out;
  for (const auto& v : mesh.vertices) {
    out += "v ";
    append_double(out, v.x());
    out += ' ';
    append_double(out, v.y());
    out += ' ';
    append_double(out, v.z());
    out += '\n';
  }
  std::optional<SemanticClass> group;
  for (const auto& tri : mesh.triangles) {
    if (group != tri.label) {
      out += "g ";
      out += class_name(tri.label);
      out += '\n';
      group = tri.label;
    }
    out += 'f';
    for (auto v : tri.vertices) {
      out += ' ';
      append_int(out, static_cast<std::int64_t>(v) + 1);
    }
    out += '\n';
  }
  return out;
}

void write_mesh(const ClassedMesh& mesh, const std::filesystem::path& path) {
  write_file(path, serialize_mesh(mesh));
}

// ---------------------------------------------------------------------------

std::vector<SemanticClass> parse_labels(std::string_view text, ReadDiagnostics* diagnostics) {
  std::vector<SemanticClass> labels;
  LineReader lines(text);
  std::string_view line;
  std::size_t coerced = 0;
  while (lines.next(line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 1) parse_fail_line(lines.number(), "expected one label per line");
    const auto v = to_int(tokens[0]);
    if (!v) parse_fail_line(lines.number(), "label must be an integer");
    bool was_coerced = false;
    labels.push_back(class_from_label(*v, &was_coerced));
    if (was_coerced) ++coerced;
  }
  note_coercions(diagnostics, coerced);
  return labels;
}

std::vector<SemanticClass> read_labels(const std::filesystem::path& path,
                                       ReadDiagnostics* diagnostics) {
  const std::string text = read_file(path);
  return with_path_context(path, [&] { return parse_labels(text, diagnostics); });
}

void write_labels(std::span<const SemanticClass> labels, const std::filesystem::path& path) {
  std::string out;
  out.reserve(labels.size() * 3);
  for (auto c : labels) {
    append_int(out, class_id(c));
    out += '\n';
  }
  write_file(path, out);
}

Trajectory parse_trajectory(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("trajectory: ") + e.what());
  }
  if (!doc.is_array()) fail(ErrorKind::kParse, "$: trajectory must be a JSON array");
  std::vector<TrajectorySample> samples;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string path = "$[" + std::to_string(i) + "]";
    if (!item.is_object()) fail(ErrorKind::kParse, path + ": expected object");
    auto number = [&](const char* key, double fallback, bool required) {
      if (!item.contains(key)) {
        if (required) fail(ErrorKind::kParse, path + "." + key + ": missing");
        return fallback;
      }
      if (!item[key].is_number()) fail(ErrorKind::kParse, path + "." + key + ": expected number");
      return item[key].get<double>();
    };
    for (const auto& [key, _] : item.items()) {
      if (key != "t" && key != "x" && key != "y" && key != "z" && key != "yaw") {
        fail(ErrorKind::kParse, path + "." + key + ": unknown key");
      }
    }
    samples.push_back({number("t", 0.0, true),
                       Vec3(number("x", 0.0, true), number("y", 0.0, true), number("z", 0.0, true)),
                       number("yaw", 0.0, false)});
  }
  if (samples.empty()) fail(ErrorKind::kInvalidArgument, "trajectory is empty");
  try {
    return Trajectory(std::move(samples));
  } catch (const Error& e) {
    fail(ErrorKind::kParse, e.what());
  }
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return with_path_context(path, [&] { return parse_trajectory(text); });
}

}  // namespace dogss
