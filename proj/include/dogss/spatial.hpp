#pragma once

#include "dogss/core.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace dogss {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

// Static kd-tree over a point sequence. Exact nearest-neighbor and range
// queries; immutable after construction so queries may run concurrently.
class NnIndex {
 public:
  // Throws kInvalidArgument on an empty input.
  explicit NnIndex(std::vector<Vec3> points);
  explicit NnIndex(const LabeledPointCloud& cloud);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  // Closest point by Euclidean distance; equal distances resolve to the
  // lowest index.
  Neighbor nearest(const Vec3& query) const;

  // Indices within `radius` (inclusive), ascending.
  std::vector<std::size_t> within_radius(const Vec3& center, double radius) const;

  // Indices inside the closed cylinder around the axis through `axis_point`
  // with unit direction `axis_dir`, radius `radius`, extending `half_depth`
  // both ways along the axis. Ascending.
  std::vector<std::size_t> within_cylinder(const Vec3& axis_point, const Vec3& axis_dir,
                                           double radius, double half_depth) const;

  // Unordered visitation of every point within `radius`.
  template <typename Visitor>
  void visit_radius(const Vec3& center, double radius, Visitor&& visit) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = 0;   // 0 means leaf
    std::uint32_t right = 0;
    std::uint8_t axis = 0;
    double split = 0.0;
  };

  void build();
  void nearest_recursive(std::uint32_t node, const Vec3& q, Neighbor& best,
                         double& best_sq) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

inline NnIndex build_index(const LabeledPointCloud& cloud) { return NnIndex(cloud); }

template <typename Visitor>
void NnIndex::visit_radius(const Vec3& center, double radius, Visitor&& visit) const {
  const double r_sq = radius * radius;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.left == 0) {
      for (std::uint32_t k = node.begin; k < node.end; ++k) {
        const std::uint32_t idx = order_[k];
        if ((points_[idx] - center).squaredNorm() <= r_sq) visit(static_cast<std::size_t>(idx));
      }
      continue;
    }
    const double diff = center[node.axis] - node.split;
    if (diff - radius <= 0.0) stack[top++] = node.left;
    if (diff + radius >= 0.0) stack[top++] = node.right;
  }
}

// Unit normal of the local plane fitted to neighbors within `scale` of `at`:
// the covariance eigenvector of the smallest eigenvalue, oriented so that
// z >= 0 (then y >= 0, then x >= 0). Empty when fewer than three neighbors or
// the neighborhood has rank < 2.
std::optional<Vec3> estimate_normal(const NnIndex& index, const Vec3& at, double scale);

// Same fit over an explicit point set.
std::optional<Vec3> fit_normal(std::span<const Vec3> neighborhood);

// Flip `n` so that it satisfies the z/y/x sign convention.
Vec3 orient_normal(const Vec3& n);

// ----------------------------------------------------------------------------

struct VoxelKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) + 0x94D049BB133111EBULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

// Bit i set when class id i+1 has at least one point in the voxel.
using ClassMask = std::uint16_t;

constexpr ClassMask class_bit(SemanticClass c) {
  return static_cast<ClassMask>(1u << class_index(c));
}

struct VoxelCell {
  std::array<std::uint32_t, kClassCount> counts{};
  ClassMask mask = 0;

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (auto c : counts) sum += c;
    return sum;
  }
};

// Occupancy grid of half-open cubes [k*edge, (k+1)*edge) relative to origin.
class VoxelGrid {
 public:
  VoxelGrid(Vec3 origin, double edge);

  const Vec3& origin() const { return origin_; }
  double edge() const { return edge_; }

  VoxelKey key_of(const Vec3& p) const;
  void insert(const LabeledPoint& p);

  const std::unordered_map<VoxelKey, VoxelCell, VoxelKeyHash>& occupied() const {
    return occupied_;
  }
  std::size_t point_count() const { return point_count_; }

  // Voxels containing at least one point of class `c`, ascending.
  std::vector<VoxelKey> voxels_of(SemanticClass c) const;
  // All occupied keys, ascending.
  std::vector<VoxelKey> sorted_keys() const;

 private:
  Vec3 origin_;
  double edge_;
  std::size_t point_count_ = 0;
  std::unordered_map<VoxelKey, VoxelCell, VoxelKeyHash> occupied_;
};

// Throws kInvalidArgument when edge is not a positive finite value.
VoxelGrid voxelize(const LabeledPointCloud& cloud, double edge, const Vec3& origin);

// Componentwise floor of the bounding-box minimum onto multiples of `edge`.
// Zero vector for an empty cloud.
Vec3 aligned_grid_origin(const LabeledPointCloud& cloud, double edge);

// ----------------------------------------------------------------------------

inline constexpr double kMinRayT = 1e-6;

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length
};

struct RayHit {
  double t = 0.0;
  std::uint32_t triangle = 0;
  SemanticClass label = SemanticClass::kNoise;
};

// Watertight ray/triangle test. Returns t when the ray crosses the triangle at
// a parameter greater than kMinRayT; edges and vertices count as hits.
std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b,
                                         const Vec3& c);

// Bounding volume hierarchy over a ClassedMesh for nearest-hit queries.
class Bvh {
 public:
  explicit Bvh(const ClassedMesh& mesh);

  // Nearest hit with t > kMinRayT; equal t resolves to the lowest triangle id.
  std::optional<RayHit> raycast(const Ray& ray) const;
  std::optional<RayHit> raycast(const Vec3& origin, const Vec3& direction) const {
    return raycast(Ray{origin, direction});
  }

  std::size_t triangle_count() const { return triangles_.size(); }
  const ClassedMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
    std::uint32_t first = 0;  // leaf: first triangle slot; inner: right child
    std::uint32_t count = 0;  // 0 for inner nodes
  };

  struct Prim {
    Vec3 a;
    Vec3 b;
    Vec3 c;
  };

  std::uint32_t build_recursive(std::uint32_t begin, std::uint32_t end,
                                std::vector<Vec3>& centroids);

  ClassedMesh mesh_;
  std::vector<Prim> prims_;                // one per mesh triangle
  std::vector<std::uint32_t> triangles_;   // leaf slots -> triangle id
  std::vector<Node> nodes_;
};

inline Bvh build_bvh(const ClassedMesh& mesh) { return Bvh(mesh); }
inline std::optional<RayHit> raycast(const Bvh& bvh, const Vec3& origin, const Vec3& direction) {
  return bvh.raycast(origin, direction);
}

}  // namespace dogss
