#include "dogss/spatial.hpp"

#include "dogss/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dogss {

namespace {

constexpr std::uint32_t kLeafSize = 16;

std::vector<Vec3> positions_of(const LabeledPointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(p.position);
  return out;
}

}  // namespace

NnIndex::NnIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) fail(ErrorKind::kInvalidArgument, "cannot build index over an empty cloud");
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorKind::kInvalidArgument, "cloud too large for index");
  }
  build();
}

NnIndex::NnIndex(const LabeledPointCloud& cloud) : NnIndex(positions_of(cloud)) {}

void NnIndex::build() {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.clear();
  nodes_.reserve(2 * (points_.size() / kLeafSize + 1));

  struct Pending {
    std::uint32_t node;
    std::uint32_t begin;
    std::uint32_t end;
  };
  std::vector<Pending> work;
  nodes_.push_back(Node{});
  work.push_back({0, 0, static_cast<std::uint32_t>(points_.size())});

  while (!work.empty()) {
    const Pending job = work.back();
    work.pop_back();
    nodes_[job.node].begin = job.begin;
    nodes_[job.node].end = job.end;
    if (job.end - job.begin <= kLeafSize) continue;

    Vec3 lo = points_[order_[job.begin]];
    Vec3 hi = lo;
    for (std::uint32_t k = job.begin; k < job.end; ++k) {
      lo = lo.cwiseMin(points_[order_[k]]);
      hi = hi.cwiseMax(points_[order_[k]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) continue;  // all points identical

    const std::uint32_t mid = job.begin + (job.end - job.begin) / 2;
    std::nth_element(order_.begin() + job.begin, order_.begin() + mid, order_.begin() + job.end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    const auto left = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{});
    const auto right = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{});
    Node& parent = nodes_[job.node];
    parent.left = left;
    parent.right = right;
    parent.axis = static_cast<std::uint8_t>(axis);
    parent.split = points_[order_[mid]][axis];
    work.push_back({left, job.begin, mid});
    work.push_back({right, mid, job.end});
  }
}

void NnIndex::nearest_recursive(std::uint32_t node_id, const Vec3& q, Neighbor& best,
                                double& best_sq) const {
  const Node& node = nodes_[node_id];
  if (node.left == 0) {
    for (std::uint32_t k = node.begin; k < node.end; ++k) {
      const std::uint32_t idx = order_[k];
      const double sq = (points_[idx] - q).squaredNorm();
      if (sq < best_sq || (sq == best_sq && idx < best.index)) {
        best_sq = sq;
        best.index = idx;
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  nearest_recursive(near, q, best, best_sq);
  // Equal distances must still be explored for the lowest-index tie rule.
  if (diff * diff <= best_sq) nearest_recursive(far, q, best, best_sq);
}

Neighbor NnIndex::nearest(const Vec3& query) const {
  Neighbor best{std::numeric_limits<std::size_t>::max(), 0.0};
  double best_sq = std::numeric_limits<double>::infinity();
  nearest_recursive(0, query, best, best_sq);
  best.distance = std::sqrt(best_sq);
  return best;
}

std::vector<std::size_t> NnIndex::within_radius(const Vec3& center, double radius) const {
  std::vector<std::size_t> out;
  if (!(radius >= 0.0)) return out;
  visit_radius(center, radius, [&](std::size_t i) { out.push_back(i); });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> NnIndex::within_cylinder(const Vec3& axis_point, const Vec3& axis_dir,
                                                  double radius, double half_depth) const {
  std::vector<std::size_t> out;
  if (!(radius >= 0.0) || !(half_depth >= 0.0)) return out;
  const double bound = std::sqrt(radius * radius + half_depth * half_depth);
  const double r_sq = radius * radius;
  visit_radius(axis_point, bound, [&](std::size_t i) {
    const Vec3 rel = points_[i] - axis_point;
    const double along = rel.dot(axis_dir);
    if (std::abs(along) > half_depth) return;
    if ((rel - along * axis_dir).squaredNorm() <= r_sq) out.push_back(i);
  });
  std::sort(out.begin(), out.end());
  return out;
}

// ----------------------------------------------------------------------------

Vec3 orient_normal(const Vec3& n) {
  for (int axis : {2, 1, 0}) {
    if (n[axis] > 0.0) return n;
    if (n[axis] < 0.0) return -n;
  }
  return n;
}

std::optional<Vec3> fit_normal(std::span<const Vec3> neighborhood) {
  if (neighborhood.size() < 3) return std::nullopt;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : neighborhood) mean += p;
  mean /= static_cast<double>(neighborhood.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : neighborhood) {
    const Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(neighborhood.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) return std::nullopt;
  const Vec3 values = solver.eigenvalues();  // ascending
  const double largest = values[2];
  // Rank < 2: no spread at all, or spread along a single line.
  if (!(largest > 0.0) || values[1] <= 1e-12 * largest) return std::nullopt;
  Vec3 normal = solver.eigenvectors().col(0).normalized();
  return orient_normal(normal);
}

std::optional<Vec3> estimate_normal(const NnIndex& index, const Vec3& at, double scale) {
  std::vector<Vec3> local;
  index.visit_radius(at, scale, [&](std::size_t i) { local.push_back(index.point(i)); });
  return fit_normal(local);
}

// ----------------------------------------------------------------------------

VoxelGrid::VoxelGrid(Vec3 origin, double edge) : origin_(std::move(origin)), edge_(edge) {
  if (!(edge > 0.0) || !std::isfinite(edge)) {
    fail(ErrorKind::kInvalidArgument, "voxel edge must be a positive finite length");
  }
}

VoxelKey VoxelGrid::key_of(const Vec3& p) const {
  return VoxelKey{static_cast<std::int64_t>(std::floor((p.x() - origin_.x()) / edge_)),
                  static_cast<std::int64_t>(std::floor((p.y() - origin_.y()) / edge_)),
                  static_cast<std::int64_t>(std::floor((p.z() - origin_.z()) / edge_))};
}

void VoxelGrid::insert(const LabeledPoint& p) {
  VoxelCell& cell = occupied_[key_of(p.position)];
  ++cell.counts[class_index(p.label)];
  cell.mask |= class_bit(p.label);
  ++point_count_;
}

std::vector<VoxelKey> VoxelGrid::voxels_of(SemanticClass c) const {
  std::vector<VoxelKey> out;
  const ClassMask bit = class_bit(c);
  for (const auto& [key, cell] : occupied_) {
    if ((cell.mask & bit) != 0) out.push_back(key);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VoxelKey> VoxelGrid::sorted_keys() const {
  std::vector<VoxelKey> out;
  out.reserve(occupied_.size());
  for (const auto& [key, _] : occupied_) out.push_back(key);
  std::sort(out.begin(), out.end());
  return out;
}

VoxelGrid voxelize(const LabeledPointCloud& cloud, double edge, const Vec3& origin) {
  VoxelGrid grid(origin, edge);
  for (const auto& p : cloud.points) grid.insert(p);
  return grid;
}

Vec3 aligned_grid_origin(const LabeledPointCloud& cloud, double edge) {
  if (cloud.empty()) return Vec3::Zero();
  Vec3 lo = cloud.points.front().position;
  for (const auto& p : cloud.points) lo = lo.cwiseMin(p.position);
  return Vec3(std::floor(lo.x() / edge) * edge, std::floor(lo.y() / edge) * edge,
              std::floor(lo.z() / edge) * edge);
}

// ----------------------------------------------------------------------------

std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b,
                                         const Vec3& c) {
  const Vec3& d = ray.direction;
  int kz = 0;
  d.cwiseAbs().maxCoeff(&kz);
  int kx = (kz + 1) % 3;
  int ky = (kx + 1) % 3;
  if (d[kz] < 0.0) std::swap(kx, ky);
  const double sx = d[kx] / d[kz];
  const double sy = d[ky] / d[kz];
  const double sz = 1.0 / d[kz];

  const Vec3 pa = a - ray.origin;
  const Vec3 pb = b - ray.origin;
  const Vec3 pc = c - ray.origin;
  const double ax = pa[kx] - sx * pa[kz];
  const double ay = pa[ky] - sy * pa[kz];
  const double bx = pb[kx] - sx * pb[kz];
  const double by = pb[ky] - sy * pb[kz];
  const double cx = pc[kx] - sx * pc[kz];
  const double cy = pc[ky] - sy * pc[kz];

  double u = cx * by - cy * bx;
  double v = ax * cy - ay * cx;
  double w = bx * ay - by * ax;
  if (u == 0.0 || v == 0.0 || w == 0.0) {
    // Edge case: recompute the edge functions in extended precision.
    const long double lax = ax, lay = ay, lbx = bx, lby = by, lcx = cx, lcy = cy;
    u = static_cast<double>(lcx * lby - lcy * lbx);
    v = static_cast<double>(lax * lcy - lay * lcx);
    w = static_cast<double>(lbx * lay - lby * lax);
  }
  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return std::nullopt;
  const double det = u + v + w;
  if (det == 0.0) return std::nullopt;

  const double az = sz * pa[kz];
  const double bz = sz * pb[kz];
  const double cz = sz * pc[kz];
  const double t = (u * az + v * bz + w * cz) / det;
  if (!(t > kMinRayT) || !std::isfinite(t)) return std::nullopt;
  return t;
}

namespace {

constexpr std::uint32_t kBvhLeafSize = 4;

// Slab test widened so that it never rejects a ray the triangle test accepts.
bool ray_box(const Ray& ray, const Vec3& inv, const Vec3& lo, const Vec3& hi, double t_max,
             double& t_enter) {
  constexpr double kGamma3 = 3.0 * std::numeric_limits<double>::epsilon() /
                             (1.0 - 3.0 * std::numeric_limits<double>::epsilon());
  double t0 = 0.0;
  double t1 = t_max;
  for (int axis = 0; axis < 3; ++axis) {
    if (ray.direction[axis] == 0.0) {
      if (ray.origin[axis] < lo[axis] || ray.origin[axis] > hi[axis]) return false;
      continue;
    }
    double near = (lo[axis] - ray.origin[axis]) * inv[axis];
    double far = (hi[axis] - ray.origin[axis]) * inv[axis];
    if (near > far) std::swap(near, far);
    far *= 1.0 + 2.0 * kGamma3;
    t0 = near > t0 ? near : t0;
    t1 = far < t1 ? far : t1;
    if (t0 > t1) return false;
  }
  t_enter = t0;
  return true;
}

}  // namespace

Bvh::Bvh(const ClassedMesh& mesh) : mesh_(mesh) {
  const std::size_t n = mesh_.triangles.size();
  if (n >= std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorKind::kInvalidArgument, "mesh too large for BVH");
  }
  prims_.reserve(n);
  std::vector<Vec3> centroids;
  centroids.reserve(n);
  for (const auto& tri : mesh_.triangles) {
    for (auto v : tri.vertices) {
      if (v >= mesh_.vertices.size()) {
        fail(ErrorKind::kInvalidArgument, "triangle vertex index out of range");
      }
    }
    Prim p{mesh_.vertices[tri.vertices[0]], mesh_.vertices[tri.vertices[1]],
           mesh_.vertices[tri.vertices[2]]};
    centroids.push_back((p.a + p.b + p.c) / 3.0);
    prims_.push_back(p);
  }
  triangles_.resize(n);
  std::iota(triangles_.begin(), triangles_.end(), 0u);
  if (n > 0) {
    nodes_.reserve(2 * n / kBvhLeafSize + 2);
    build_recursive(0, static_cast<std::uint32_t>(n), centroids);
  }
}

std::uint32_t Bvh::build_recursive(std::uint32_t begin, std::uint32_t end,
                                   std::vector<Vec3>& centroids) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{});
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  Vec3 clo = lo;
  Vec3 chi = hi;
  for (std::uint32_t k = begin; k < end; ++k) {
    const Prim& p = prims_[triangles_[k]];
    lo = lo.cwiseMin(p.a).cwiseMin(p.b).cwiseMin(p.c);
    hi = hi.cwiseMax(p.a).cwiseMax(p.b).cwiseMax(p.c);
    clo = clo.cwiseMin(centroids[triangles_[k]]);
    chi = chi.cwiseMax(centroids[triangles_[k]]);
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;

  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  if (end - begin <= kBvhLeafSize || chi[axis] == clo[axis]) {
    nodes_[id].first = begin;
    nodes_[id].count = end - begin;
    return id;
  }
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(triangles_.begin() + begin, triangles_.begin() + mid, triangles_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return centroids[a][axis] < centroids[b][axis];
                   });
  build_recursive(begin, mid, centroids);  // left child is id + 1
  const std::uint32_t right = build_recursive(mid, end, centroids);
  nodes_[id].first = right;
  nodes_[id].count = 0;
  return id;
}

std::optional<RayHit> Bvh::raycast(const Ray& ray) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv = ray.direction.cwiseInverse();
  double best_t = std::numeric_limits<double>::infinity();
  std::uint32_t best_tri = std::numeric_limits<std::uint32_t>::max();

  std::vector<std::uint32_t> stack;
  stack.reserve(64);
  stack.push_back(0);
  while (!stack.empty()) {
    const std::uint32_t id = stack.back();
    stack.pop_back();
    const Node& node = nodes_[id];
    double t_enter = 0.0;
    if (!ray_box(ray, inv, node.lo, node.hi, best_t * (1.0 + 1e-9), t_enter)) continue;
    if (node.count == 0) {
      stack.push_back(node.first);
      stack.push_back(id + 1);
      continue;
    }
    for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
      const std::uint32_t tri = triangles_[k];
      const Prim& p = prims_[tri];
      auto t = intersect_triangle(ray, p.a, p.b, p.c);
      if (t && (*t < best_t || (*t == best_t && tri < best_tri))) {
        best_t = *t;
        best_tri = tri;
      }
    }
  }
  if (best_tri == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return RayHit{best_t, best_tri, mesh_.triangles[best_tri].label};
}

}  // namespace dogss
