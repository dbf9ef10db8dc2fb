#pragma once

#include "dogss/core.hpp"
#include "dogss/spatial.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dogss {

enum class C2cMode { kDirectedMax, kDirectedMean, kSymmetricMax };
enum class WeightMode { kAsGiven, kRenormalized };
// Strict enforces lambda1 + lambda2 + lambda3 = 1 and lambda1 > lambda2 > lambda3.
enum class LambdaValidation { kStrict, kRelaxed };

std::string_view to_string(C2cMode mode);
std::string_view to_string(WeightMode mode);
std::string_view to_string(LambdaValidation mode);
std::optional<C2cMode> c2c_mode_from_string(std::string_view s);
std::optional<WeightMode> weight_mode_from_string(std::string_view s);
std::optional<LambdaValidation> lambda_validation_from_string(std::string_view s);

struct M3c2Params {
  double normal_scale = 0.5;       // neighborhood radius for normals
  double projection_radius = 0.25; // cylinder radius
  double max_depth = 1.0;          // cylinder half-length along the normal

  friend bool operator==(const M3c2Params&, const M3c2Params&) = default;
};

struct MetricParams {
  double lambda1 = 0.6;  // class-wise M3C2 term
  double lambda2 = 0.3;  // cloud-to-cloud term
  double lambda3 = 0.1;  // semantic term
  double alpha = -0.2;
  double epsilon = 1e-6;
  double voxel_edge = 0.5;
  ClassWeights weights = default_weights();
  M3c2Params m3c2;
  C2cMode c2c_mode = C2cMode::kDirectedMax;
  WeightMode weight_mode = WeightMode::kAsGiven;
  LambdaValidation lambda_validation = LambdaValidation::kStrict;

  // Throws kConfig describing the first violated constraint.
  void validate() const;

  friend bool operator==(const MetricParams&, const MetricParams&) = default;
};

struct M3c2ClassResult {
  std::optional<double> median;  // signed; empty without inliers
  std::size_t inliers = 0;
  std::size_t outliers = 0;
};

struct ClassGap {
  SemanticClass label = SemanticClass::kNoise;
  double weight = 0.0;
  std::size_t real_points = 0;
  std::size_t synthetic_points = 0;
  M3c2ClassResult m3c2;
  std::optional<double> iou;  // empty when neither cloud occupies a voxel
  std::size_t voxel_intersection = 0;
  std::size_t voxel_union = 0;
};

struct ScoreComponents {
  double d = 0.0;
  double f_miou = 0.0;
  double m = 0.0;
};

struct GapReport {
  MetricParams params;
  Vec3 grid_origin = Vec3::Zero();
  std::optional<Vec3> translation;  // set for offset-sensitivity rows
  std::size_t real_points = 0;
  std::size_t synthetic_points = 0;
  double d_c2c = 0.0;
  std::array<ClassGap, kClassCount> per_class{};
  double d_mm3c2 = 0.0;
  double miou = 0.0;
  double f_miou = 0.0;
  double d = 0.0;
  double m_dogss_pcl = 0.0;
};

// Cloud-to-cloud distance; labels are ignored. Throws kInvalidArgument when
// either cloud is empty.
double c2c_distance(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
                    C2cMode mode);

// Per-core-point M3C2 distances of a class pair. Core points are all real
// points; entries are empty for outliers.
std::vector<std::optional<double>> m3c2_point_distances(const LabeledPointCloud& real_class,
                                                        const LabeledPointCloud& synthetic_class,
                                                        const M3c2Params& params);

M3c2ClassResult m3c2_class_distance(const LabeledPointCloud& real_class,
                                    const LabeledPointCloud& synthetic_class,
                                    const M3c2Params& params);

// Weighted mean of |median| over weighted classes with a defined median, the
// weights renormalized over those classes. Throws kDegenerate when none is
// defined.
double weighted_median_mean(std::span<const M3c2ClassResult, kClassCount> per_class,
                            const ClassWeights& weights);

double mm3c2_distance(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
                      const ClassWeights& weights, const M3c2Params& params);

struct VoxelIou {
  Vec3 origin = Vec3::Zero();
  std::array<std::optional<double>, kClassCount> iou{};
  std::array<std::size_t, kClassCount> intersection{};
  std::array<std::size_t, kClassCount> unions{};
  double miou = 0.0;
};

// Grid anchored at aligned_grid_origin(real, edge). Throws kDegenerate when no
// weighted class occupies any voxel in either cloud.
VoxelIou voxel_miou(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
                    double edge, const ClassWeights& weights);

// Combines the three component values into the distance and score.
ScoreComponents compose_score(double d_mm3c2, double d_c2c, double miou,
                              const MetricParams& params);

GapReport dogss_pcl(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
                    const MetricParams& params);

// One report per translation applied to the synthetic cloud.
std::vector<GapReport> offset_sensitivity(const LabeledPointCloud& real,
                                          const LabeledPointCloud& synthetic,
                                          std::span<const Vec3> offsets,
                                          const MetricParams& params);

// Optional batch rescale of scores onto [0,1] by min-max over the batch. All
// zeros when every score is equal.
std::vector<double> minmax_rescale(std::span<const double> scores);

}  // namespace dogss
