#pragma once

#include "dogss/core.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dogss {

using Vec2 = Eigen::Vector2d;

// Closed axis-aligned rectangle in the xy-plane.
struct Rect {
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Zero();
};

// Simple polygon in the xy-plane; boundary points are inside.
struct Polygon {
  std::vector<Vec2> vertices;
};

struct Region {
  std::string name;
  std::variant<Rect, Polygon> shape;

  double area() const;
  bool contains(const Vec2& xy) const;
};

// Regions in priority order: a point belongs to the first region containing
// its xy projection; points outside every region are dropped.
struct SplitSpec {
  std::vector<Region> regions;

  // Throws kConfig for no regions, empty names or zero-area regions.
  void validate() const;
};

struct NamedCloud {
  std::string name;
  LabeledPointCloud cloud;
};

// One output per region, in region order.
std::vector<NamedCloud> split(const LabeledPointCloud& cloud, const SplitSpec& spec);

// ----------------------------------------------------------------------------

struct RatioMix {
  double real_fraction = 0.5;
  std::int64_t target_count = 0;
  std::uint64_t seed = 0;
};

enum class Provenance : std::uint8_t { kReal = 0, kSynthetic = 1 };

struct MixResult {
  LabeledPointCloud cloud;
  std::vector<Provenance> provenance;  // index-aligned with cloud
  std::size_t real_count = 0;
  std::size_t synthetic_count = 0;
  bool real_with_replacement = false;
  bool synthetic_with_replacement = false;
};

// Round-half-up share of real points.
std::size_t real_share(double real_fraction, std::int64_t target_count);

// Samples real then synthetic points uniformly without replacement (with
// replacement when a source is smaller than its share) and concatenates them.
MixResult mix(const LabeledPointCloud& real, const LabeledPointCloud& synthetic,
              const RatioMix& spec);

// ----------------------------------------------------------------------------

struct ClassTally {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double iou = 0.0;
  bool present = false;  // tp + fp + fn > 0
};

// Classes entering the unweighted stochastic mIoU: every class but Noise.
inline constexpr int kEvalClassCount = 11;

struct EvalReport {
  std::array<ClassTally, kClassCount> per_class{};
  // confusion[true][predicted], zero-based class slots.
  std::array<std::array<std::uint64_t, kClassCount>, kClassCount> confusion{};
  double miou = 0.0;
  std::uint64_t total_points = 0;
  std::optional<double> synthetic_ratio;  // training-set share of synthetic data
  std::string label;
};

// Throws kInvalidArgument when the lengths differ.
EvalReport evaluate_segmentation(const LabeledPointCloud& ground_truth,
                                 std::span<const SemanticClass> predictions);

// Pearson coefficient between ratios and values; empty when fewer than two
// samples or either series has zero spread.
std::optional<double> ratio_correlation(std::span<const std::pair<double, double>> series);

struct Misclassification {
  SemanticClass true_class = SemanticClass::kNoise;
  SemanticClass predicted = SemanticClass::kNoise;
  std::uint64_t count = 0;
  std::uint64_t wrong_total = 0;
  double proportion = 0.0;
};

// For every true class with errors: its most frequent wrong prediction (ties
// to the lower id) and that prediction's share of the class's errors.
std::vector<Misclassification> most_misclassified(const EvalReport& report);

}  // namespace dogss
