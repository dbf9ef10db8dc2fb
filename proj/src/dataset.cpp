#include "dogss/dataset.hpp"

#include "dogss/error.hpp"

#include <algorithm>
#include <iterator>
#include <cmath>
#include <numeric>
#include <random>

namespace dogss {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  if (cross2(b - a, p - a) != 0.0) return false;
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool polygon_contains(const std::vector<Vec2>& poly, const Vec2& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if (on_segment(p, a, b)) return true;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

double Region::area() const {
  if (const auto* r = std::get_if<Rect>(&shape)) {
    return std::max(0.0, r->max.x() - r->min.x()) * std::max(0.0, r->max.y() - r->min.y());
  }
  const auto& v = std::get<Polygon>(shape).vertices;
  double twice = 0.0;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) twice += cross2(v[j], v[i]);
  return v.size() < 3 ? 0.0 : std::abs(0.5 * twice);
}

bool Region::contains(const Vec2& xy) const {
  if (const auto* r = std::get_if<Rect>(&shape)) {
    return r->min.x() <= xy.x() && xy.x() <= r->max.x() && r->min.y() <= xy.y() &&
           xy.y() <= r->max.y();
  }
  return polygon_contains(std::get<Polygon>(shape).vertices, xy);
}

void SplitSpec::validate() const {
  if (regions.empty()) fail(ErrorKind::kConfig, "split spec has no regions");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    const std::string where = "split.regions[" + std::to_string(i) + "]";
    if (r.name.empty()) fail(ErrorKind::kConfig, where + ".name: must not be empty");
    if (!(r.area() > 0.0)) fail(ErrorKind::kConfig, where + ": region has zero area");
  }
}

std::vector<NamedCloud> split(const LabeledPointCloud& cloud, const SplitSpec& spec) {
  spec.validate();
  std::vector<NamedCloud> out;
  out.reserve(spec.regions.size());
  for (const auto& r : spec.regions) out.push_back({r.name, LabeledPointCloud{{}, cloud.frame_note}});
  for (const auto& p : cloud.points) {
    const Vec2 xy = p.position.head<2>();
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
      if (spec.regions[i].contains(xy)) {
        out[i].cloud.points.push_back(p);
        break;
      }
    }
  }
  return out;
}

// ----------------------------------------------------------------------------

std::size_t real_share(double real_fraction, std::int64_t target_count) {
  return static_cast<std::size_t>(
      std::floor(static_cast<double>(target_count) * real_fraction + 0.5));
}

namespace {

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t wanted,
                                        std::mt19937_64& engine, bool& with_replacement) {
  std::vector<std::size_t> picked;
  if (wanted == 0) return picked;
  with_replacement = population < wanted;
  if (with_replacement) {
    std::uniform_int_distribution<std::size_t> pick(0, population - 1);
    picked.resize(wanted);
    for (auto& i : picked) i = pick(engine);
  } else {
    picked.reserve(wanted);
    std::vector<std::size_t> all(population);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::sample(all.begin(), all.end(), std::back_inserter(picked), wanted, engine);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

MixResult mix(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
              const RatioMix& spec) {
  if (spec.target_count <= 0) fail(ErrorKind::kInvalidArgument, "mix target_count must be positive");
  if (!(spec.real_fraction >= 0.0 && spec.real_fraction <= 1.0)) {
    fail(ErrorKind::kInvalidArgument, "mix real_fraction must lie in [0, 1]");
  }
  const std::size_t want_real = real_share(spec.real_fraction, spec.target_count);
  const std::size_t want_synthetic = static_cast<std::size_t>(spec.target_count) - want_real;
  if (want_real > 0 && real.empty()) fail(ErrorKind::kInvalidArgument, "real source is empty");
  if (want_synthetic > 0 && synthetic.empty()) {
    fail(ErrorKind::kInvalidArgument, "synthetic source is empty");
  }

  std::mt19937_64 engine(spec.seed);
  MixResult out;
  const auto real_idx = sample_indices(real.size(), want_real, engine, out.real_with_replacement);
  const auto synthetic_idx =
      sample_indices(synthetic.size(), want_synthetic, engine, out.synthetic_with_replacement);

  out.cloud.frame_note = real.frame_note.empty() ? synthetic.frame_note : real.frame_note;
  out.cloud.points.reserve(real_idx.size() + synthetic_idx.size());
  out.provenance.reserve(real_idx.size() + synthetic_idx.size());
  for (auto i : real_idx) {
    out.cloud.points.push_back(real.points[i]);
    out.provenance.push_back(Provenance::kReal);
  }
  for (auto i : synthetic_idx) {
    out.cloud.points.push_back(synthetic.points[i]);
    out.provenance.push_back(Provenance::kSynthetic);
  }
  out.real_count = real_idx.size();
  out.synthetic_count = synthetic_idx.size();
  return out;
}

// ----------------------------------------------------------------------------

EvalReport evaluate_segmentation(const LabeledPointCloud& ground_truth,
                                 std::span<const SemanticClass> predictions) {
  if (predictions.size() != ground_truth.size()) {
    fail(ErrorKind::kInvalidArgument,
         "prediction count " + std::to_string(predictions.size()) +
             " does not match ground truth count " + std::to_string(ground_truth.size()));
  }
  EvalReport report;
  report.total_points = ground_truth.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    ++report.confusion[class_index(ground_truth.points[i].label)][class_index(predictions[i])];
  }
  for (std::size_t c = 0; c < kClassCount; ++c) {
    ClassTally& t = report.per_class[c];
    t.tp = report.confusion[c][c];
    for (std::size_t o = 0; o < kClassCount; ++o) {
      if (o == c) continue;
      t.fn += report.confusion[c][o];
      t.fp += report.confusion[o][c];
    }
    const std::uint64_t denom = t.tp + t.fp + t.fn;
    t.present = denom > 0;
    t.iou = t.present ? static_cast<double>(t.tp) / static_cast<double>(denom) : 0.0;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < kEvalClassCount; ++c) sum += report.per_class[c].iou;
  report.miou = sum / kEvalClassCount;
  return report;
}

std::optional<double> ratio_correlation(std::span<const std::pair<double, double>> series) {
  if (series.size() < 2) return std::nullopt;
  const double n = static_cast<double>(series.size());
  double mean_p = 0.0;
  double mean_v = 0.0;
  for (const auto& [p, v] : series) {
    mean_p += p;
    mean_v += v;
  }
  mean_p /= n;
  mean_v /= n;
  double cov = 0.0;
  double var_p = 0.0;
  double var_v = 0.0;
  for (const auto& [p, v] : series) {
    cov += (p - mean_p) * (v - mean_v);
    var_p += (p - mean_p) * (p - mean_p);
    var_v += (v - mean_v) * (v - mean_v);
  }
  double scale_p = 0.0;
  double scale_v = 0.0;
  for (const auto& [p, v] : series) {
    scale_p = std::max(scale_p, std::abs(p));
    scale_v = std::max(scale_v, std::abs(v));
  }
  const double sigma_p = std::sqrt(var_p);
  const double sigma_v = std::sqrt(var_v);
  // Spread at round-off level means a constant series.
  if (!(sigma_p > 1e-12 * scale_p) || !(sigma_v > 1e-12 * scale_v)) return std::nullopt;
  if (!(sigma_p > 0.0) || !(sigma_v > 0.0)) return std::nullopt;
  return std::clamp(cov / (sigma_p * sigma_v), -1.0, 1.0);
}

std::vector<Misclassification> most_misclassified(const EvalReport& report) {
  std::vector<Misclassification> rows;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::uint64_t wrong = 0;
    std::size_t best = c;
    std::uint64_t best_count = 0;
    for (std::size_t o = 0; o < kClassCount; ++o) {
      if (o == c) continue;
      const std::uint64_t n = report.confusion[c][o];
      wrong += n;
      if (n > best_count) {
        best_count = n;
        best = o;
      }
    }
    if (wrong == 0) continue;
    rows.push_back({kAllClasses[c], kAllClasses[best], best_count, wrong,
                    static_cast<double>(best_count) / static_cast<double>(wrong)});
  }
  return rows;
}

}  // namespace dogss
