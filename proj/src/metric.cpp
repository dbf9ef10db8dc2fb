#include "dogss/metric.hpp"

#include "dogss/error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace dogss {

std::string_view to_string(C2cMode mode) {
  switch (mode) {
    case C2cMode::kDirectedMax: return "directed-max";
    case C2cMode::kDirectedMean: return "directed-mean";
    case C2cMode::kSymmetricMax: return "symmetric-max";
  }
  return "directed-max";
}

std::string_view to_string(WeightMode mode) {
  return mode == WeightMode::kAsGiven ? "as-given" : "renormalized";
}

std::string_view to_string(LambdaValidation mode) {
  return mode == LambdaValidation::kStrict ? "strict" : "relaxed";
}

std::optional<C2cMode> c2c_mode_from_string(std::string_view s) {
  if (s == "directed-max") return C2cMode::kDirectedMax;
  if (s == "directed-mean") return C2cMode::kDirectedMean;
  if (s == "symmetric-max") return C2cMode::kSymmetricMax;
  return std::nullopt;
}

std::optional<WeightMode> weight_mode_from_string(std::string_view s) {
  if (s == "as-given") return WeightMode::kAsGiven;
  if (s == "renormalized") return WeightMode::kRenormalized;
  return std::nullopt;
}

std::optional<LambdaValidation> lambda_validation_from_string(std::string_view s) {
  if (s == "strict") return LambdaValidation::kStrict;
  if (s == "relaxed") return LambdaValidation::kRelaxed;
  return std::nullopt;
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::kConfig, message);
}

std::string num(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

void MetricParams::validate() const {
  for (double v : {lambda1, lambda2, lambda3, alpha, epsilon, voxel_edge, m3c2.normal_scale,
                   m3c2.projection_radius, m3c2.max_depth}) {
    require(std::isfinite(v), "metric parameters must be finite");
  }
  require(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0, "lambdas must be non-negative");
  if (lambda_validation == LambdaValidation::kStrict) {
    const double sum = lambda1 + lambda2 + lambda3;
    require(std::abs(sum - 1.0) <= 1e-9,
            "lambda1 + lambda2 + lambda3 must equal 1 (got " + num(sum) + ")");
    require(lambda1 > lambda2 && lambda2 > lambda3,
            "lambdas must satisfy lambda1 > lambda2 > lambda3");
  }
  if (weight_mode == WeightMode::kRenormalized) {
    require(lambda1 + lambda2 > 0.0, "renormalized weight mode needs lambda1 + lambda2 > 0");
  }
  require(alpha < 0.0, "alpha must be negative (got " + num(alpha) + ")");
  require(epsilon > 0.0, "epsilon must be positive");
  require(voxel_edge > 0.0, "voxel_size_m must be positive");
  require(m3c2.normal_scale > 0.0, "m3c2.normal_scale_m must be positive");
  require(m3c2.projection_radius > 0.0, "m3c2.projection_radius_m must be positive");
  require(m3c2.max_depth > 0.0, "m3c2.max_depth_m must be positive");
}

// ----------------------------------------------------------------------------

namespace {

std::vector<double> nearest_distances(const LabeledPointCloud& from, const NnIndex& to) {
  std::vector<double> out(from.size());
  detail::parallel_for(from.size(), [&](std::size_t i) {
    out[i] = to.nearest(from.points[i].position).distance;
  });
  return out;
}

double directed_max(const LabeledPointCloud& from, const NnIndex& to) {
  const auto d = nearest_distances(from, to);
  return *std::max_element(d.begin(), d.end());
}

}  // namespace

double c2c_distance(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
                    C2cMode mode) {
  if (real.empty() || synthetic.empty()) {
    fail(ErrorKind::kInvalidArgument, "c2c distance needs two non-empty clouds");
  }
  const NnIndex synthetic_index(synthetic);
  switch (mode) {
    case C2cMode::kDirectedMax:
      return directed_max(real, synthetic_index);
    case C2cMode::kDirectedMean: {
      const auto d = nearest_distances(real, synthetic_index);
      double sum = 0.0;
      for (double v : d) sum += v;
      return sum / static_cast<double>(d.size());
    }
    case C2cMode::kSymmetricMax: {
      const NnIndex real_index(real);
      return std::max(directed_max(real, synthetic_index), directed_max(synthetic, real_index));
    }
  }
  return 0.0;
}

// ----------------------------------------------------------------------------

namespace {

struct CylinderMean {
  Vec3 sum = Vec3::Zero();
  std::size_t count = 0;
};

CylinderMean cylinder_mean(const NnIndex& index, const Vec3& center, const Vec3& axis,
                           const M3c2Params& params) {
  CylinderMean acc;
  const double bound = std::sqrt(params.projection_radius * params.projection_radius +
                                 params.max_depth * params.max_depth);
  const double r_sq = params.projection_radius * params.projection_radius;
  index.visit_radius(center, bound, [&](std::size_t i) {
    const Vec3& p = index.point(i);
    const Vec3 rel = p - center;
    const double along = rel.dot(axis);
    if (std::abs(along) > params.max_depth) return;
    if ((rel - along * axis).squaredNorm() > r_sq) return;
    acc.sum += p;
    ++acc.count;
  });
  return acc;
}

double median_of(std::vector<double> values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

std::vector<std::optional<double>> m3c2_point_distances(const LabeledPointCloud& real_class,
                                                        const LabeledPointCloud& synthetic_class,
                                                        const M3c2Params& params) {
  std::vector<std::optional<double>> out(real_class.size());
  if (real_class.empty() || synthetic_class.empty()) return out;

  const NnIndex real_index(real_class);
  const NnIndex synthetic_index(synthetic_class);
  detail::parallel_for(real_class.size(), [&](std::size_t i) {
    const Vec3& core = real_class.points[i].position;
    const auto normal = estimate_normal(real_index, core, params.normal_scale);
    if (!normal) return;
    const CylinderMean s = cylinder_mean(synthetic_index, core, *normal, params);
    if (s.count == 0) return;
    const CylinderMean r = cylinder_mean(real_index, core, *normal, params);
    if (r.count == 0) return;
    const Vec3 mean_r = r.sum / static_cast<double>(r.count);
    const Vec3 mean_s = s.sum / static_cast<double>(s.count);
    out[i] = normal->dot(mean_s - mean_r);
  });
  return out;
}

M3c2ClassResult m3c2_class_distance(const LabeledPointCloud& real_class,
                                    const LabeledPointCloud& synthetic_class,
                                    const M3c2Params& params) {
  const auto per_point = m3c2_point_distances(real_class, synthetic_class, params);
  M3c2ClassResult result;
  std::vector<double> inliers;
  inliers.reserve(per_point.size());
  for (const auto& d : per_point) {
    if (d) inliers.push_back(*d);
  }
  result.inliers = inliers.size();
  result.outliers = per_point.size() - inliers.size();
  if (!inliers.empty()) result.median = median_of(std::move(inliers));
  return result;
}

double weighted_median_mean(std::span<const M3c2ClassResult, kClassCount> per_class,
                            const ClassWeights& weights) {
  double weighted = 0.0;
  double total = 0.0;
  for (auto c : kAllClasses) {
    const double w = weights.weight(c);
    const auto& r = per_class[class_index(c)];
    if (w <= 0.0 || !r.median) continue;
    weighted += w * std::abs(*r.median);
    total += w;
  }
  if (total <= 0.0) {
    fail(ErrorKind::kDegenerate,
         "no comparable semantic content: no weighted class has M3C2 inliers");
  }
  return weighted / total;
}

double mm3c2_distance(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
                      const ClassWeights& weights, const M3c2Params& params) {
  const auto real_parts = partition_by_class(real);
  const auto synthetic_parts = partition_by_class(synthetic);
  std::array<M3c2ClassResult, kClassCount> per_class{};
  for (auto c : kAllClasses) {
    if (weights.weight(c) <= 0.0) continue;
    const auto i = class_index(c);
    per_class[i] = m3c2_class_distance(real_parts[i], synthetic_parts[i], params);
  }
  return weighted_median_mean(per_class, weights);
}

// ----------------------------------------------------------------------------

VoxelIou voxel_miou(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
                    double edge, const ClassWeights& weights) {
  VoxelIou out;
  out.origin = aligned_grid_origin(real, edge);
  const VoxelGrid real_grid = voxelize(real, edge, out.origin);
  const VoxelGrid synthetic_grid = voxelize(synthetic, edge, out.origin);

  double weighted = 0.0;
  double total = 0.0;
  for (auto c : kAllClasses) {
    const auto i = class_index(c);
    const auto a = real_grid.voxels_of(c);
    const auto b = synthetic_grid.voxels_of(c);
    std::size_t common = 0;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end() && ib != b.end();) {
      if (*ia < *ib) {
        ++ia;
      } else if (*ib < *ia) {
        ++ib;
      } else {
        ++common;
        ++ia;
        ++ib;
      }
    }
    const std::size_t unions = a.size() + b.size() - common;
    out.intersection[i] = common;
    out.unions[i] = unions;
    if (unions == 0) continue;
    out.iou[i] = static_cast<double>(common) / static_cast<double>(unions);
    const double w = weights.weight(c);
    if (w <= 0.0) continue;
    weighted += w * *out.iou[i];
    total += w;
  }
  if (total <= 0.0) {
    fail(ErrorKind::kDegenerate,
         "no comparable semantic content: no weighted class occupies any voxel");
  }
  out.miou = weighted / total;
  return out;
}

ScoreComponents compose_score(double d_mm3c2, double d_c2c, double miou,
                              const MetricParams& params) {
  ScoreComponents out;
  if (params.weight_mode == WeightMode::kAsGiven) {
    out.d = params.lambda1 * d_mm3c2 + params.lambda2 * d_c2c;
  } else {
    const double sum = params.lambda1 + params.lambda2;
    out.d = (params.lambda1 / sum) * d_mm3c2 + (params.lambda2 / sum) * d_c2c;
  }
  out.f_miou = 1.0 / (miou + params.epsilon);
  out.m = -std::expm1(params.alpha * (out.d + params.lambda3 * out.f_miou));
  return out;
}

GapReport dogss_pcl(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
                    const MetricParams& params) {
  params.validate();
  GapReport report;
  report.params = params;
  report.real_points = real.size();
  report.synthetic_points = synthetic.size();
  report.d_c2c = c2c_distance(real, synthetic, params.c2c_mode);

  const auto real_parts = partition_by_class(real);
  const auto synthetic_parts = partition_by_class(synthetic);
  std::array<M3c2ClassResult, kClassCount> m3c2{};
  for (auto c : kAllClasses) {
    const auto i = class_index(c);
    m3c2[i] = m3c2_class_distance(real_parts[i], synthetic_parts[i], params.m3c2);
  }
  report.d_mm3c2 = weighted_median_mean(m3c2, params.weights);

  const VoxelIou iou = voxel_miou(real, synthetic, params.voxel_edge, params.weights);
  report.grid_origin = iou.origin;
  report.miou = iou.miou;

  for (auto c : kAllClasses) {
    const auto i = class_index(c);
    ClassGap& g = report.per_class[i];
    g.label = c;
    g.weight = params.weights.weight(c);
    g.real_points = real_parts[i].size();
    g.synthetic_points = synthetic_parts[i].size();
    g.m3c2 = m3c2[i];
    g.iou = iou.iou[i];
    g.voxel_intersection = iou.intersection[i];
    g.voxel_union = iou.unions[i];
  }

  const ScoreComponents score = compose_score(report.d_mm3c2, report.d_c2c, report.miou, params);
  report.d = score.d;
  report.f_miou = score.f_miou;
  report.m_dogss_pcl = score.m;
  return report;
}

std::vector<GapReport> offset_sensitivity(const LabeledPointCloud& real,
                                          const LabeledPointCloud& synthetic,
                                          std::span<const Vec3> offsets,
                                          const MetricParams& params) {
  std::vector<GapReport> out;
  out.reserve(offsets.size());
  for (const auto& offset : offsets) {
    GapReport r = dogss_pcl(real, synthetic.translated(offset), params);
    r.translation = offset;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> minmax_rescale(std::span<const double> scores) {
  std::vector<double> out(scores.size(), 0.0);
  if (scores.empty()) return out;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) / range;
  return out;
}

}  // namespace dogss
