#include "dogss/cli.hpp"

#include "dogss/config.hpp"
#include "dogss/dataset.hpp"
#include "dogss/io.hpp"
#include "dogss/metric.hpp"
#include "dogss/report.hpp"
#include "dogss/simulate.hpp"
#include "dogss/spatial.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <optional>
#include <sstream>

#ifndef DOGSS_VERSION
#define DOGSS_VERSION "0.0.0"
#endif

namespace dogss::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kIo:
    case ErrorKind::kParse:
    case ErrorKind::kFormat: return kExitIo;
    case ErrorKind::kDegenerate:
    case ErrorKind::kInvalidArgument: return kExitDegenerate;
  }
  return kExitFailure;
}

namespace {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::kIo, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string number(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// Command-line values that mirror config keys. Unset ones leave the file (or
// default) value in place.
struct Overrides {
  std::optional<double> voxel_size_m, lambda1, lambda2, lambda3, alpha, epsilon;
  std::optional<double> normal_scale_m, projection_radius_m, max_depth_m;
  std::optional<std::string> c2c_mode, distance_weight_mode, lambda_validation;
  std::optional<std::int64_t> channels;
  std::optional<double> fov_min, fov_max, rotation_rate_hz, points_per_second, max_range_m;
  std::optional<double> sigma_m;
  std::optional<double> real_fraction;
  std::optional<std::int64_t> target_count;
  std::optional<std::uint64_t> seed;

  json patch() const {
    json doc = json::object();
    auto put = [](json& at, const char* key, const auto& value) {
      if (value) at[key] = *value;
    };
    put(doc, "voxel_size_m", voxel_size_m);
    put(doc, "lambda1", lambda1);
    put(doc, "lambda2", lambda2);
    put(doc, "lambda3", lambda3);
    put(doc, "alpha", alpha);
    put(doc, "epsilon", epsilon);
    put(doc, "c2c_mode", c2c_mode);
    put(doc, "distance_weight_mode", distance_weight_mode);
    put(doc, "lambda_validation", lambda_validation);
    put(doc, "seed", seed);
    json m3c2 = json::object();
    put(m3c2, "normal_scale_m", normal_scale_m);
    put(m3c2, "projection_radius_m", projection_radius_m);
    put(m3c2, "max_depth_m", max_depth_m);
    if (!m3c2.empty()) doc["m3c2"] = m3c2;
    json scan = json::object();
    put(scan, "channels", channels);
    put(scan, "vertical_fov_min_deg", fov_min);
    put(scan, "vertical_fov_max_deg", fov_max);
    put(scan, "rotation_rate_hz", rotation_rate_hz);
    put(scan, "points_per_second", points_per_second);
    put(scan, "max_range_m", max_range_m);
    if (!scan.empty()) doc["scan"] = scan;
    json noise = json::object();
    put(noise, "sigma_m", sigma_m);
    if (!noise.empty()) doc["noise"] = noise;
    json mixing = json::object();
    put(mixing, "real_fraction", real_fraction);
    put(mixing, "target_count", target_count);
    if (!mixing.empty()) doc["mix"] = mixing;
    return doc;
  }
};

struct Common {
  std::string config_path;
  std::string output;
  std::string format;
  Overrides flags;
};

void add_config(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run configuration");
  cmd->add_option("--seed", c.flags.seed, "Random seed");
}

void add_metric_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--voxel-size-m", o.voxel_size_m);
  cmd->add_option("--lambda1", o.lambda1);
  cmd->add_option("--lambda2", o.lambda2);
  cmd->add_option("--lambda3", o.lambda3);
  cmd->add_option("--alpha", o.alpha);
  cmd->add_option("--epsilon", o.epsilon);
  cmd->add_option("--normal-scale-m", o.normal_scale_m);
  cmd->add_option("--projection-radius-m", o.projection_radius_m);
  cmd->add_option("--max-depth-m", o.max_depth_m);
  cmd->add_option("--c2c-mode", o.c2c_mode, "directed-max | directed-mean | symmetric-max");
  cmd->add_option("--distance-weight-mode", o.distance_weight_mode, "as-given | renormalized");
  cmd->add_option("--lambda-validation", o.lambda_validation, "strict | relaxed");
}

void add_scan_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--channels", o.channels);
  cmd->add_option("--vertical-fov-min-deg", o.fov_min);
  cmd->add_option("--vertical-fov-max-deg", o.fov_max);
  cmd->add_option("--rotation-rate-hz", o.rotation_rate_hz);
  cmd->add_option("--points-per-second", o.points_per_second);
  cmd->add_option("--max-range-m", o.max_range_m);
}

void add_cloud_format(CLI::App* cmd, Common& c) {
  cmd->add_option("--format", c.format, "xyzl | ply-ascii | ply-binary (default: from extension)");
}

RunConfig load_config(const Common& c) {
  json doc = json::object();
  if (!c.config_path.empty()) {
    const std::string text = read_file(c.config_path);
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kConfig, c.config_path + ": not valid JSON: " + e.what());
    }
    if (!doc.is_object()) fail(ErrorKind::kConfig, c.config_path + ": $: expected an object");
  }
  doc.merge_patch(c.flags.patch());
  return parse_config(doc);
}

std::uint64_t require_seed(const RunConfig& config) {
  if (!config.seed) fail(ErrorKind::kConfig, "--seed is required for this command");
  return *config.seed;
}

CloudFormat output_format(const Common& c, const fs::path& path) {
  if (!c.format.empty()) {
    const auto f = cloud_format_from_string(c.format);
    if (!f) fail(ErrorKind::kConfig, "unknown --format \"" + c.format + "\"");
    return *f;
  }
  const auto f = cloud_format_from_path(path);
  if (!f) fail(ErrorKind::kConfig, path.string() + ": cannot infer format, pass --format");
  return *f;
}

// Records everything needed to rerun a command: arguments, effective config,
// digests of every input and output, and the seed.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : command_(std::move(command)), args_(args.begin() + 1, args.end()) {}

  void config(json c) { config_ = std::move(c); }
  void seed(std::uint64_t s) { seed_ = s; }
  void result(json r) { result_ = std::move(r); }

  void input(const fs::path& path, std::string_view bytes) {
    inputs_.push_back({{"path", path.string()}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }

  void output(const fs::path& path, std::string_view bytes) {
    write_file(path, bytes);
    outputs_.push_back({{"path", path.string()}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }

  void write(const fs::path& path) const {
    json doc = {
        {"tool", "dogss"},
        {"version", DOGSS_VERSION},
        {"command", command_},
        {"arguments", args_},
        {"config", config_},
        {"seed", seed_ ? json(*seed_) : json(nullptr)},
        {"inputs", inputs_},
        {"outputs", outputs_},
    };
    if (!result_.is_null()) doc["result"] = result_;
    write_file(path, dump_json(doc));
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  json config_;
  std::optional<std::uint64_t> seed_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json result_;
};

fs::path manifest_path(const fs::path& output) {
  return fs::path(output.string() + ".manifest.json");
}

void warn(std::ostream& err, const ReadDiagnostics& diag) {
  for (const auto& w : diag.warnings) err << json{{"warning", w}}.dump() << "\n";
}

// Reads a cloud file and feeds it to the manifest.
CloudRecord load_cloud(const fs::path& path, Manifest& manifest, std::ostream& err) {
  const std::string bytes = read_file(path);
  manifest.input(path, bytes);
  ReadDiagnostics diag;
  CloudRecord record;
  try {
    record = parse_cloud(bytes, std::nullopt, &diag);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
  warn(err, diag);
  return record;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const char* first = item.data();
    while (first != item.data() + item.size() && *first == ' ') ++first;
    const auto [end, ec] = std::from_chars(first, item.data() + item.size(), v);
    if (ec != std::errc() || end != item.data() + item.size() || !std::isfinite(v)) {
      fail(ErrorKind::kConfig, std::string(flag) + ": \"" + item + "\" is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) fail(ErrorKind::kConfig, std::string(flag) + ": empty list");
  return out;
}

Vec3 offset_direction(const std::string& text) {
  if (text == "x") return Vec3::UnitX();
  if (text == "y") return Vec3::UnitY();
  if (text == "z") return Vec3::UnitZ();
  const auto v = parse_list(text, "--offset-dir");
  if (v.size() != 3) fail(ErrorKind::kConfig, "--offset-dir: expected x, y, z or \"a,b,c\"");
  const Vec3 dir(v[0], v[1], v[2]);
  if (!(dir.norm() > 0.0)) fail(ErrorKind::kConfig, "--offset-dir: zero vector");
  return dir.normalized();
}

// ----------------------------------------------------------------------------

struct CompareArgs {
  Common common;
  std::string real, synthetic;
  std::string offsets;
  std::string offset_dir = "x";
};

void cmd_compare(const CompareArgs& a, const std::vector<std::string>& args, std::ostream& err) {
  const RunConfig config = load_config(a.common);
  Manifest manifest("compare", args);
  manifest.config(config_to_json(config));
  if (config.seed) manifest.seed(*config.seed);
  const auto real = load_cloud(a.real, manifest, err);
  const auto synthetic = load_cloud(a.synthetic, manifest, err);
  std::string bytes;
  if (a.offsets.empty()) {
    bytes = dump_json(to_json(dogss_pcl(real.cloud, synthetic.cloud, config.metric)));
  } else {
    const Vec3 dir = offset_direction(a.offset_dir);
    std::vector<Vec3> offsets;
    for (double s : parse_list(a.offsets, "--offset")) offsets.push_back(s * dir);
    json doc = json::array();
    for (const auto& r : offset_sensitivity(real.cloud, synthetic.cloud, offsets, config.metric)) {
      doc.push_back(to_json(r));
    }
    bytes = dump_json(doc);
  }
  manifest.output(a.common.output, bytes);
  manifest.write(manifest_path(a.common.output));
}

struct SimulateArgs {
  Common common;
  std::string mesh, trajectory;
};

void cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& args, std::ostream& err) {
  const RunConfig config = load_config(a.common);
  const std::uint64_t seed = require_seed(config);
  const CloudFormat format = output_format(a.common, a.common.output);
  Manifest manifest("simulate", args);
  manifest.config(config_to_json(config));
  manifest.seed(seed);

  const std::string mesh_bytes = read_file(a.mesh);
  manifest.input(a.mesh, mesh_bytes);
  ReadDiagnostics diag;
  ClassedMesh mesh;
  try {
    mesh = parse_mesh(mesh_bytes, &diag);
  } catch (const Error& e) {
    fail(e.kind(), a.mesh + ": " + e.what());
  }
  warn(err, diag);
  const std::string trajectory_bytes = read_file(a.trajectory);
  manifest.input(a.trajectory, trajectory_bytes);
  Trajectory trajectory = [&] {
    try {
      return parse_trajectory(trajectory_bytes);
    } catch (const Error& e) {
      fail(e.kind(), a.trajectory + ": " + e.what());
    }
  }();

  const Bvh bvh(mesh);
  ScanResult scan = simulate_scan(bvh, trajectory, config.scan);
  const LabeledPointCloud noisy =
      apply_range_noise(scan.cloud, scan.ray_origins, NoiseModel{config.noise_sigma_m, seed});
  manifest.result({{"points", noisy.size()}, {"triangles", bvh.triangle_count()}});
  manifest.output(a.common.output, serialize_cloud(noisy, format, scan.ray_origins));
  manifest.write(manifest_path(a.common.output));
}

struct NoiseArgs {
  Common common;
  std::string cloud;
};

void cmd_noise(const NoiseArgs& a, const std::vector<std::string>& args, std::ostream& err) {
  const RunConfig config = load_config(a.common);
  const std::uint64_t seed = require_seed(config);
  const CloudFormat format = output_format(a.common, a.common.output);
  Manifest manifest("noise", args);
  manifest.config(config_to_json(config));
  manifest.seed(seed);
  const auto record = load_cloud(a.cloud, manifest, err);
  if (!record.has_ray_origins) {
    fail(ErrorKind::kFormat, a.cloud + ": cloud carries no ray origins (ox, oy, oz)");
  }
  const LabeledPointCloud noisy =
      apply_range_noise(record.cloud, record.ray_origins, NoiseModel{config.noise_sigma_m, seed});
  manifest.output(a.common.output, serialize_cloud(noisy, format, record.ray_origins));
  manifest.write(manifest_path(a.common.output));
}

struct MixArgs {
  Common common;
  std::string real, synthetic;
};

void cmd_mix(const MixArgs& a, const std::vector<std::string>& args, std::ostream& err) {
  const RunConfig config = load_config(a.common);
  const std::uint64_t seed = require_seed(config);
  const CloudFormat format = output_format(a.common, a.common.output);
  if (config.mix.target_count <= 0) fail(ErrorKind::kConfig, "$.mix.target_count: must be positive");
  Manifest manifest("mix", args);
  manifest.config(config_to_json(config));
  manifest.seed(seed);
  const auto real = load_cloud(a.real, manifest, err);
  const auto synthetic = load_cloud(a.synthetic, manifest, err);
  const MixResult mixed = mix(real.cloud, synthetic.cloud,
                              RatioMix{config.mix.real_fraction, config.mix.target_count, seed});
  std::string provenance;
  provenance.reserve(mixed.provenance.size() * 2);
  for (auto p : mixed.provenance) provenance += p == Provenance::kReal ? "0\n" : "1\n";
  manifest.result({{"real_points", mixed.real_count},
                   {"synthetic_points", mixed.synthetic_count},
                   {"real_with_replacement", mixed.real_with_replacement},
                   {"synthetic_with_replacement", mixed.synthetic_with_replacement},
                   {"provenance_codes", {{"real", 0}, {"synthetic", 1}}}});
  manifest.output(a.common.output, serialize_cloud(mixed.cloud, format));
  manifest.output(a.common.output + ".provenance", provenance);
  manifest.write(manifest_path(a.common.output));
}

struct SplitArgs {
  Common common;
  std::string cloud;
};

void cmd_split(const SplitArgs& a, const std::vector<std::string>& args, std::ostream& err) {
  const RunConfig config = load_config(a.common);
  if (!config.split) fail(ErrorKind::kConfig, "$.split: required by the split command");
  for (std::size_t i = 0; i < config.split->regions.size(); ++i) {
    const std::string& name = config.split->regions[i].name;
    if (name == "." || name == ".." || name.find_first_of("/\\") != std::string::npos) {
      fail(ErrorKind::kConfig, "$.split.regions[" + std::to_string(i) + "].name: not a file name");
    }
  }
  CloudFormat format = CloudFormat::kPlyBinaryLe;
  if (!a.common.format.empty()) {
    format = output_format(a.common, {});
  } else if (const auto f = cloud_format_from_path(a.cloud)) {
    format = *f;
  }
  const char* extension = format == CloudFormat::kXyzlText ? ".xyzl" : ".ply";

  Manifest manifest("split", args);
  manifest.config(config_to_json(config));
  const auto record = load_cloud(a.cloud, manifest, err);
  const fs::path dir(a.common.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, dir.string() + ": " + ec.message());
  json counts = json::object();
  for (const auto& part : split(record.cloud, *config.split)) {
    counts[part.name] = part.cloud.size();
    manifest.output(dir / (part.name + extension), serialize_cloud(part.cloud, format));
  }
  manifest.result({{"points", counts}});
  manifest.write(dir / "manifest.json");
}

struct EvalArgs {
  Common common;
  std::string ground_truth, predictions;
  std::optional<double> ratio;
  std::string label;
};

void cmd_eval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& err) {
  if (a.ratio && !(*a.ratio >= 0.0 && *a.ratio <= 1.0)) {
    fail(ErrorKind::kConfig, "--ratio: must lie in [0, 1]");
  }
  Manifest manifest("eval-seg", args);
  const auto gt = load_cloud(a.ground_truth, manifest, err);
  const std::string label_bytes = read_file(a.predictions);
  manifest.input(a.predictions, label_bytes);
  ReadDiagnostics diag;
  std::vector<SemanticClass> predictions;
  try {
    predictions = parse_labels(label_bytes, &diag);
  } catch (const Error& e) {
    fail(e.kind(), a.predictions + ": " + e.what());
  }
  warn(err, diag);
  EvalReport report = evaluate_segmentation(gt.cloud, predictions);
  report.synthetic_ratio = a.ratio;
  report.label = a.label.empty() ? fs::path(a.predictions).stem().string() : a.label;
  manifest.output(a.common.output, dump_json(to_json(report)));
  manifest.write(manifest_path(a.common.output));
}

struct ReportArgs {
  Common common;
  std::vector<std::string> inputs;
  std::string plot_data;
};

void cmd_report(const ReportArgs& a, const std::vector<std::string>& args) {
  Manifest manifest("report", args);
  struct Loaded {
    std::string path;
    AnyReport report;
  };
  std::vector<Loaded> loaded;
  for (const auto& path : a.inputs) {
    const std::string bytes = read_file(path);
    manifest.input(path, bytes);
    std::vector<AnyReport> reports;
    try {
      reports = parse_reports(json::parse(bytes));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kParse, path + ": " + e.what());
    } catch (const Error& e) {
      fail(e.kind(), path + ": " + e.what());
    }
    for (auto& r : reports) loaded.push_back({path, std::move(r)});
  }
  if (loaded.empty()) fail(ErrorKind::kFormat, "no reports given");

  const bool gap = std::holds_alternative<GapReport>(loaded.front().report);
  std::vector<std::string> offenders;
  for (const auto& l : loaded) {
    if (std::holds_alternative<GapReport>(l.report) != gap) offenders.push_back(l.path);
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& o : offenders) list += (list.empty() ? "" : ", ") + o;
    fail(ErrorKind::kFormat, std::string("mixed report schemas; expected ") +
                                 (gap ? kGapReportSchema : kEvalReportSchema) + " but got other in: " +
                                 list);
  }

  std::string csv;
  json series = json::array();
  if (gap) {
    csv = "source,offset_x,offset_y,offset_z,m,d,d_MM3C2,d_C2C,mIoU\n";
    std::vector<double> x;
    std::array<std::vector<double>, 5> y;
    for (const auto& l : loaded) {
      const auto& r = std::get<GapReport>(l.report);
      const Vec3 t = r.translation.value_or(Vec3::Zero());
      csv += l.path + "," + number(t.x()) + "," + number(t.y()) + "," + number(t.z()) + "," +
             number(r.m_dogss_pcl) + "," + number(r.d) + "," + number(r.d_mm3c2) + "," +
             number(r.d_c2c) + "," + number(r.miou) + "\n";
      x.push_back(t.norm());
      const double values[] = {r.m_dogss_pcl, r.d, r.d_mm3c2, r.d_c2c, r.miou};
      for (std::size_t k = 0; k < y.size(); ++k) y[k].push_back(values[k]);
    }
    const char* names[] = {"m", "d", "d_MM3C2", "d_C2C", "mIoU"};
    for (std::size_t k = 0; k < y.size(); ++k) {
      series.push_back({{"name", names[k]}, {"x", x}, {"y", y[k]}});
    }
  } else {
    // One column per report, one row per class; a Pearson column when every
    // report carries its synthetic ratio.
    bool ratios = true;
    std::vector<double> x;
    csv = "class";
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      const auto& r = std::get<EvalReport>(loaded[i].report);
      ratios = ratios && r.synthetic_ratio.has_value();
      x.push_back(r.synthetic_ratio.value_or(static_cast<double>(i)));
      csv += "," + (r.synthetic_ratio ? "ratio_" + number(*r.synthetic_ratio) : r.label);
    }
    csv += ratios ? ",corr\n" : "\n";
    auto row = [&](const std::string& name, auto&& value) {
      std::vector<double> y;
      std::vector<std::pair<double, double>> pairs;
      csv += name;
      for (std::size_t i = 0; i < loaded.size(); ++i) {
        const double v = value(std::get<EvalReport>(loaded[i].report));
        y.push_back(v);
        pairs.emplace_back(x[i], v);
        csv += "," + number(v);
      }
      if (ratios) {
        const auto corr = ratio_correlation(pairs);
        csv += "," + (corr ? number(*corr) : std::string("undefined"));
      }
      csv += "\n";
      series.push_back({{"name", name}, {"x", x}, {"y", y}});
    };
    for (int c = 0; c < kEvalClassCount; ++c) {
      row(std::string(class_name(kAllClasses[c])),
          [c](const EvalReport& r) { return r.per_class[c].iou; });
    }
    row("mIoU", [](const EvalReport& r) { return r.miou; });
  }
  manifest.output(a.common.output, csv);
  if (!a.plot_data.empty()) {
    json plot = {{"x_label", gap ? "offset_m" : "synthetic_ratio"}, {"series", series}};
    manifest.output(a.plot_data, dump_json(plot));
  }
  manifest.write(manifest_path(a.common.output));
}

void report_error(std::ostream& err, const std::string& kind, int code, const std::string& message) {
  err << json{{"error", kind}, {"exit_code", code}, {"message", message}}.dump(
             -1, ' ', false, json::error_handler_t::replace)
      << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain gap metrics for labeled point clouds", "dogss"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DOGSS_VERSION);

  CompareArgs compare;
  auto* c = app.add_subcommand("compare", "Score a synthetic cloud against a real one");
  c->add_option("real", compare.real, "Real cloud")->required();
  c->add_option("synthetic", compare.synthetic, "Synthetic cloud")->required();
  c->add_option("-o,--output", compare.common.output, "Gap report JSON")->required();
  c->add_option("--offset", compare.offsets, "Comma-separated translations in meters");
  c->add_option("--offset-dir", compare.offset_dir, "x, y, z or \"a,b,c\"");
  add_config(c, compare.common);
  add_metric_flags(c, compare.common.flags);

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "Scan a classed mesh along a trajectory");
  s->add_option("mesh", simulate.mesh, "Classed OBJ mesh")->required();
  s->add_option("trajectory", simulate.trajectory, "Trajectory JSON")->required();
  s->add_option("-o,--output", simulate.common.output, "Output cloud")->required();
  s->add_option("--sigma", simulate.common.flags.sigma_m, "Range noise sigma in meters");
  add_config(s, simulate.common);
  add_scan_flags(s, simulate.common.flags);
  add_cloud_format(s, simulate.common);

  NoiseArgs noise;
  auto* n = app.add_subcommand("noise", "Add range noise to a cloud with ray origins");
  n->add_option("cloud", noise.cloud, "Input cloud")->required();
  n->add_option("-o,--output", noise.common.output, "Output cloud")->required();
  n->add_option("--sigma", noise.common.flags.sigma_m, "Range noise sigma in meters");
  add_config(n, noise.common);
  add_cloud_format(n, noise.common);

  MixArgs mixing;
  auto* m = app.add_subcommand("mix", "Sample a real/synthetic mixture");
  m->add_option("real", mixing.real, "Real cloud")->required();
  m->add_option("synthetic", mixing.synthetic, "Synthetic cloud")->required();
  m->add_option("-o,--output", mixing.common.output, "Output cloud")->required();
  m->add_option("--real-fraction", mixing.common.flags.real_fraction);
  m->add_option("--target-count", mixing.common.flags.target_count);
  add_config(m, mixing.common);
  add_cloud_format(m, mixing.common);

  SplitArgs splitting;
  auto* sp = app.add_subcommand("split", "Cut a cloud into named xy regions");
  sp->add_option("cloud", splitting.cloud, "Input cloud")->required();
  sp->add_option("-o,--output", splitting.common.output, "Output directory")->required();
  add_config(sp, splitting.common);
  add_cloud_format(sp, splitting.common);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval-seg", "Score predicted labels against ground truth");
  e->add_option("ground_truth", eval.ground_truth, "Labeled cloud")->required();
  e->add_option("predictions", eval.predictions, "One label per line")->required();
  e->add_option("-o,--output", eval.common.output, "Eval report JSON")->required();
  e->add_option("--ratio", eval.ratio, "Synthetic share of the training data");
  e->add_option("--label", eval.label, "Report label");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Summarize reports as CSV");
  r->add_option("reports", report.inputs, "Report JSON files")->required();
  r->add_option("-o,--output", report.common.output, "CSV output")->required();
  r->add_option("--plot-data", report.plot_data, "Series JSON output");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForVersion& h) {
    return app.exit(h, out, err);
  } catch (const CLI::ParseError& p) {
    report_error(err, "usage", kExitConfig, p.what());
    return kExitConfig;
  }

  try {
    if (*c) cmd_compare(compare, args, err);
    if (*s) cmd_simulate(simulate, args, err);
    if (*n) cmd_noise(noise, args, err);
    if (*m) cmd_mix(mixing, args, err);
    if (*sp) cmd_split(splitting, args, err);
    if (*e) cmd_eval(eval, args, err);
    if (*r) cmd_report(report, args);
  } catch (const Error& x) {
    const int code = exit_code(x.kind());
    report_error(err, to_string(x.kind()), code, x.what());
    return code;
  } catch (const std::exception& x) {
    report_error(err, "internal", kExitFailure, x.what());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace dogss::cli
