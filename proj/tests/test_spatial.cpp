#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dogss/error.hpp"
#include "dogss/spatial.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <random>
#include <set>

using namespace dogss;
using S = SemanticClass;

namespace {

// Coordinates on a 1/64 m lattice keep every comparison exact, so points
// landing on voxel faces and duplicate points are common.
double lattice(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo * 64, hi * 64)(rng) / 64.0;
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n) {
  std::vector<Vec3> out(n);
  for (auto& p : out) p = Vec3(lattice(rng, -4, 4), lattice(rng, -4, 4), lattice(rng, -1, 1));
  return out;
}

Neighbor brute_nearest(const std::vector<Vec3>& pts, const Vec3& q) {
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - q).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best = {i, std::sqrt(d)};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("nearest neighbour equals brute force") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 2000)(rng);
    const auto pts = random_points(rng, n);
    const NnIndex index(pts);
    for (int q = 0; q < 8; ++q) {
      const Vec3 query = q % 2 ? pts[rng() % n] : Vec3(lattice(rng, -5, 5), lattice(rng, -5, 5),
                                                        lattice(rng, -2, 2));
      const auto got = index.nearest(query);
      const auto want = brute_nearest(pts, query);
      REQUIRE(got.index == want.index);
      REQUIRE(got.distance == want.distance);
    }
  }
}

TEST_CASE("radius and cylinder queries equal brute force") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pts = random_points(rng, 1 + rng() % 1500);
    const NnIndex index(pts);
    const Vec3 c = pts[rng() % pts.size()];
    const double r = lattice(rng, 0, 2);
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if ((pts[i] - c).squaredNorm() <= r * r) want.push_back(i);
    }
    CHECK(index.within_radius(c, r) == want);

    const Vec3 axis = Vec3(lattice(rng, -1, 1), lattice(rng, -1, 1), 1.0).normalized();
    const double radius = 0.25 + lattice(rng, 0, 1);
    const double depth = 0.5 + lattice(rng, 0, 1);
    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3 v = pts[i] - c;
      const double along = v.dot(axis);
      const double radial_sq = (v - along * axis).squaredNorm();
      if (std::abs(along) <= depth && radial_sq <= radius * radius) inside.push_back(i);
    }
    const auto got = index.within_cylinder(c, axis, radius, depth);
    CHECK(got == inside);
  }
}

TEST_CASE("empty index is rejected") {
  CHECK_THROWS_AS(NnIndex(std::vector<Vec3>{}), Error);
}

TEST_CASE("plane normals") {
  auto grid = [](auto&& f) {
    std::vector<Vec3> pts;
    for (int i = -5; i <= 5; ++i) {
      for (int j = -5; j <= 5; ++j) pts.push_back(f(0.1 * i, 0.1 * j));
    }
    return pts;
  };
  const auto horizontal = fit_normal(grid([](double u, double v) { return Vec3(u, v, 2.0); }));
  REQUIRE(horizontal);
  CHECK(std::atan2(horizontal->cross(Vec3::UnitZ()).norm(), horizontal->z()) < 1e-9);

  // x + z = 0 has normal (1, 0, 1)/sqrt(2) after orienting to +z.
  const auto tilted = fit_normal(grid([](double u, double v) { return Vec3(u, v, -u); }));
  REQUIRE(tilted);
  const Vec3 expected = Vec3(1, 0, 1).normalized();
  CHECK(std::atan2(tilted->cross(expected).norm(), tilted->dot(expected)) < 1e-9);

  // A vertical wall x = 3 orients towards +x.
  const auto wall = fit_normal(grid([](double u, double v) { return Vec3(3.0, u, v); }));
  REQUIRE(wall);
  CHECK(std::atan2(wall->cross(Vec3::UnitX()).norm(), wall->x()) < 1e-9);

  CHECK_FALSE(fit_normal(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0)}));
  // Collinear points leave the normal undetermined.
  CHECK_FALSE(fit_normal(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0),
                                           Vec3(3, 0, 0)}));
}

TEST_CASE("voxel occupancy equals a brute-force tally") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const double edge = (trial % 3 == 0) ? 0.5 : (trial % 3 == 1 ? 0.25 : 1.0);
    LabeledPointCloud cloud;
    const auto pts = random_points(rng, 1 + rng() % 2000);
    for (const auto& p : pts) cloud.points.push_back({p, *class_from_id(1 + rng() % 12)});
    const Vec3 origin = aligned_grid_origin(cloud, edge);
    const VoxelGrid grid = voxelize(cloud, edge, origin);

    // Integer oracle: scale the 1/64 lattice to integers and floor-divide.
    const auto cells = static_cast<std::int64_t>(edge * 64);
    auto floor_div = [](std::int64_t a, std::int64_t b) {
      return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
    };
    std::map<std::array<std::int64_t, 3>, std::array<std::uint32_t, kClassCount>> want;
    for (const auto& p : cloud.points) {
      std::array<std::int64_t, 3> key{};
      for (int k = 0; k < 3; ++k) {
        const auto q = static_cast<std::int64_t>(std::llround((p.position[k] - origin[k]) * 64));
        key[k] = floor_div(q, cells);
      }
      ++want[key][class_index(p.label)];
    }
    REQUIRE(grid.occupied().size() == want.size());
    for (const auto& [key, counts] : want) {
      const auto it = grid.occupied().find(VoxelKey{key[0], key[1], key[2]});
      REQUIRE(it != grid.occupied().end());
      REQUIRE(it->second.counts == counts);
    }
    CHECK(grid.point_count() == cloud.size());
  }
}

TEST_CASE("grid origin snaps the bounding box minimum down") {
  LabeledPointCloud cloud;
  cloud.points = {{Vec3(0.3, -0.2, 1.0), S::kDoor}, {Vec3(2.0, 1.0, 1.7), S::kDoor}};
  const Vec3 o = aligned_grid_origin(cloud, 0.5);
  CHECK(o == Vec3(0.0, -0.5, 1.0));
  CHECK_THROWS_AS(voxelize(cloud, 0.0, o), Error);
  const auto grid = voxelize(cloud, 0.5, o);
  CHECK(grid.key_of(Vec3(0.5, -0.5, 1.0)) == VoxelKey{1, 0, 0});
}

TEST_CASE("raycast equals brute force over all triangles") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 500; ++trial) {
    ClassedMesh mesh;
    const std::size_t n = 1 + rng() % 400;
    for (std::size_t t = 0; t < n; ++t) {
      const Vec3 c(u(rng), u(rng), u(rng));
      const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
      for (int k = 0; k < 3; ++k) {
        mesh.vertices.push_back(c + 0.5 * Vec3(u(rng), u(rng), u(rng)) / 3.0);
      }
      mesh.triangles.push_back({{base, base + 1, base + 2}, *class_from_id(1 + rng() % 12)});
    }
    // Exact duplicates exercise the lowest-id tie rule.
    if (trial % 5 == 0) {
      mesh.triangles.push_back(mesh.triangles.front());
      mesh.triangles.back().label = S::kNoise;
    }
    const Bvh bvh(mesh);
    for (int q = 0; q < 8; ++q) {
      const Vec3 origin(u(rng), u(rng), u(rng));
      Vec3 target = origin;
      if (q % 2 == 0) {
        // Aim at a triangle vertex or centroid so hits are common.
        const auto& tri = mesh.triangles[rng() % mesh.triangles.size()];
        target = q % 4 == 0 ? mesh.vertices[tri.vertices[0]]
                            : (mesh.vertices[tri.vertices[0]] + mesh.vertices[tri.vertices[1]] +
                               mesh.vertices[tri.vertices[2]]) / 3.0;
      } else {
        target = Vec3(u(rng), u(rng), u(rng));
      }
      if ((target - origin).norm() == 0.0) continue;
      const Ray ray{origin, (target - origin).normalized()};

      std::optional<RayHit> want;
      for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const auto hit = intersect_triangle(ray, mesh.vertices[tri.vertices[0]],
                                            mesh.vertices[tri.vertices[1]],
                                            mesh.vertices[tri.vertices[2]]);
        if (hit && (!want || *hit < want->t)) {
          want = RayHit{*hit, static_cast<std::uint32_t>(t), tri.label};
        }
      }
      const auto got = bvh.raycast(ray);
      REQUIRE(got.has_value() == want.has_value());
      if (got) {
        REQUIRE(got->t == want->t);
        REQUIRE(got->triangle == want->triangle);
        REQUIRE(got->label == want->label);
      }
    }
  }
}

TEST_CASE("watertight intersection on a shared edge") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(1, 1, 0), d(0, 1, 0);
  // The ray passes exactly through the diagonal shared by both triangles.
  const Ray ray{Vec3(0.5, 0.5, 1.0), Vec3(0, 0, -1)};
  const bool first = intersect_triangle(ray, a, b, c).has_value();
  const bool second = intersect_triangle(ray, a, c, d).has_value();
  CHECK((first || second));
  CHECK(intersect_triangle(ray, a, b, c).value_or(1.0) == doctest::Approx(1.0));
  // Behind the origin and parallel rays miss.
  CHECK_FALSE(intersect_triangle(Ray{Vec3(0.5, 0.2, -1), Vec3(0, 0, -1)}, a, b, c));
  CHECK_FALSE(intersect_triangle(Ray{Vec3(0.5, 0.2, 0), Vec3(1, 0, 0)}, a, b, c));
}
