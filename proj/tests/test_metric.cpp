#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dogss/error.hpp"
#include "dogss/metric.hpp"
#include "support/scenes.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace dogss;
using S = SemanticClass;

namespace {

MetricParams reference_params() {
  MetricParams p;
  p.lambda1 = 0.6;
  p.lambda2 = 0.4;
  p.lambda3 = 0.1;
  p.lambda_validation = LambdaValidation::kRelaxed;
  return p;
}

LabeledPointCloud with_label(LabeledPointCloud cloud, S label) {
  for (auto& p : cloud.points) p.label = label;
  return cloud;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_CASE("score composition reproduces the published aligned column") {
  const auto s = compose_score(0.04, 0.31, 0.2907, reference_params());
  CHECK(s.d == doctest::Approx(0.6 * 0.04 + 0.4 * 0.31).epsilon(1e-15));
  CHECK(s.d == doctest::Approx(0.148).epsilon(1e-12));
  CHECK(s.f_miou == doctest::Approx(1.0 / (0.2907 + 1e-6)));
  CHECK(s.m == doctest::Approx(1.0 - std::exp(-0.2 * (s.d + 0.1 * s.f_miou))));
  CHECK(std::abs(s.m - 0.09) <= 0.01);
}

TEST_CASE("score composition for the translated column") {
  const auto s = compose_score(1.01, 1.34, 0.02, reference_params());
  CHECK(std::abs(s.d - 1.14) <= 0.01);
  CHECK(std::abs(s.m - 0.73) <= 0.03);
}

TEST_CASE("renormalized mode divides by lambda1 + lambda2") {
  auto p = reference_params();
  p.weight_mode = WeightMode::kRenormalized;
  const auto s = compose_score(0.04, 0.31, 0.2907, p);
  CHECK(s.d == doctest::Approx((0.6 * 0.04 + 0.4 * 0.31) / 1.0));
  MetricParams q;
  q.weight_mode = WeightMode::kRenormalized;
  CHECK(compose_score(1.0, 2.0, 0.5, q).d == doctest::Approx((0.6 + 0.3 * 2.0) / 0.9));
}

TEST_CASE("parameter validation") {
  MetricParams p;
  CHECK_NOTHROW(p.validate());
  p.lambda1 = 0.5;  // sums to 0.9
  CHECK(kind_of([&] { p.validate(); }) == ErrorKind::kConfig);
  p = MetricParams{};
  p.lambda1 = 0.3;
  p.lambda2 = 0.6;
  CHECK(kind_of([&] { p.validate(); }) == ErrorKind::kConfig);
  CHECK_NOTHROW(reference_params().validate());
  auto strict = reference_params();
  strict.lambda_validation = LambdaValidation::kStrict;
  CHECK(kind_of([&] { strict.validate(); }) == ErrorKind::kConfig);
  p = MetricParams{};
  p.alpha = 0.2;
  CHECK(kind_of([&] { p.validate(); }) == ErrorKind::kConfig);
  p = MetricParams{};
  p.voxel_edge = 0.0;
  CHECK(kind_of([&] { p.validate(); }) == ErrorKind::kConfig);
}

TEST_CASE("mode names round-trip") {
  for (auto m : {C2cMode::kDirectedMax, C2cMode::kDirectedMean, C2cMode::kSymmetricMax}) {
    CHECK(c2c_mode_from_string(to_string(m)) == m);
  }
  CHECK(to_string(C2cMode::kDirectedMax) == "directed-max");
  CHECK(weight_mode_from_string("as-given") == WeightMode::kAsGiven);
  CHECK(weight_mode_from_string("renormalized") == WeightMode::kRenormalized);
  CHECK_FALSE(c2c_mode_from_string("hausdorff"));
}

TEST_CASE("cloud-to-cloud modes") {
  LabeledPointCloud real{{{Vec3(0, 0, 0), S::kDoor}, {Vec3(1, 0, 0), S::kDoor}}, ""};
  LabeledPointCloud synthetic{{{Vec3(0, 0, 0.1), S::kWindow}, {Vec3(5, 0, 0), S::kWindow}}, ""};
  // real -> synthetic nearest distances: 0.1 and sqrt(1.01)
  CHECK(c2c_distance(real, synthetic, C2cMode::kDirectedMax) == doctest::Approx(std::sqrt(1.01)));
  CHECK(c2c_distance(real, synthetic, C2cMode::kDirectedMean) ==
        doctest::Approx((0.1 + std::sqrt(1.01)) / 2));
  CHECK(c2c_distance(real, synthetic, C2cMode::kSymmetricMax) == doctest::Approx(4.0));
  CHECK(kind_of([&] { c2c_distance(real, LabeledPointCloud{}, C2cMode::kDirectedMax); }) ==
        ErrorKind::kInvalidArgument);
}

TEST_CASE("M3C2 on parallel planes") {
  const auto real = fixtures::plane_cloud(10000, 0.0, S::kWallSurface, 1);
  for (double offset : {0.0, 0.05, -0.05}) {
    const auto synthetic = fixtures::plane_cloud(10000, offset, S::kWallSurface, 2);
    const auto r = m3c2_class_distance(real, synthetic, M3c2Params{});
    REQUIRE(r.median);
    CHECK(std::abs(*r.median - offset) <= 1e-3);
    CHECK(r.inliers + r.outliers == real.size());
  }
  // Beyond the cylinder half-depth nothing is found.
  const auto far = fixtures::plane_cloud(2000, 3.0, S::kWallSurface, 3);
  const auto none = m3c2_class_distance(real, far, M3c2Params{});
  CHECK_FALSE(none.median);
  CHECK(none.outliers == real.size());
}

TEST_CASE("M3C2 point distances match a brute-force construction") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::normal_distribution<double> bump(0.0, 0.03);
  const M3c2Params params;
  for (int trial = 0; trial < 20; ++trial) {
    LabeledPointCloud real;
    LabeledPointCloud synthetic;
    for (int i = 0; i < 400; ++i) {
      const double x = u(rng), y = u(rng);
      real.points.push_back({Vec3(x, y, 0.2 * x + bump(rng)), S::kRoofSurface});
      const double a = u(rng), b = u(rng);
      synthetic.points.push_back({Vec3(a, b, 0.2 * a + 0.1 + bump(rng)), S::kRoofSurface});
    }
    const auto got = m3c2_point_distances(real, synthetic, params);
    for (std::size_t i = 0; i < real.size(); ++i) {
      const Vec3 core = real.points[i].position;
      std::vector<Vec3> hood;
      for (const auto& p : real.points) {
        if ((p.position - core).norm() <= params.normal_scale) hood.push_back(p.position);
      }
      const auto n = fit_normal(hood);
      auto mean_in = [&](const LabeledPointCloud& c, std::size_t& count) {
        Vec3 sum = Vec3::Zero();
        count = 0;
        for (const auto& p : c.points) {
          const Vec3 rel = p.position - core;
          const double along = rel.dot(*n);
          if (std::abs(along) <= params.max_depth &&
              (rel - along * *n).norm() <= params.projection_radius) {
            sum += p.position;
            ++count;
          }
        }
        return Vec3(sum / static_cast<double>(std::max<std::size_t>(count, 1)));
      };
      if (!n) {
        CHECK_FALSE(got[i]);
        continue;
      }
      std::size_t cr = 0, cs = 0;
      const Vec3 mr = mean_in(real, cr);
      const Vec3 ms = mean_in(synthetic, cs);
      if (cr == 0 || cs == 0) {
        CHECK_FALSE(got[i]);
        continue;
      }
      REQUIRE(got[i]);
      CHECK(*got[i] == doctest::Approx(n->dot(ms - mr)).epsilon(1e-9));
    }
  }
}

TEST_CASE("weighted median mean renormalizes over defined classes") {
  std::array<M3c2ClassResult, kClassCount> per_class{};
  per_class[class_index(S::kWallSurface)].median = -0.2;
  per_class[class_index(S::kDoor)].median = 0.1;
  per_class[class_index(S::kVehicle)].median = 9.0;  // weight 0
  const double got = weighted_median_mean(per_class, default_weights());
  CHECK(got == doctest::Approx((0.2 * 0.2 + 0.15 * 0.1) / (0.2 + 0.15)));

  std::array<M3c2ClassResult, kClassCount> empty{};
  empty[class_index(S::kVehicle)].median = 1.0;
  CHECK(kind_of([&] { weighted_median_mean(empty, default_weights()); }) == ErrorKind::kDegenerate);
}

TEST_CASE("voxel mIoU equals set arithmetic") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    LabeledPointCloud real;
    LabeledPointCloud synthetic;
    const S classes[] = {S::kWallSurface, S::kDoor, S::kWindow, S::kVehicle};
    for (int i = 0; i < 300; ++i) {
      auto pick = [&] {
        return Vec3(std::uniform_int_distribution<int>(0, 255)(rng) / 32.0,
                    std::uniform_int_distribution<int>(0, 255)(rng) / 32.0,
                    std::uniform_int_distribution<int>(0, 31)(rng) / 32.0);
      };
      real.points.push_back({pick(), classes[rng() % 4]});
      synthetic.points.push_back({pick(), classes[rng() % 4]});
    }
    const double edge = 1.0;
    const auto got = voxel_miou(real, synthetic, edge, default_weights());
    double weighted = 0.0, total = 0.0;
    for (S c : classes) {
      std::set<std::array<long, 3>> a, b;
      auto key = [&](const Vec3& p) {
        return std::array<long, 3>{std::lround(std::floor((p.x() - got.origin.x()) / edge)),
                                   std::lround(std::floor((p.y() - got.origin.y()) / edge)),
                                   std::lround(std::floor((p.z() - got.origin.z()) / edge))};
      };
      for (const auto& p : real.points) if (p.label == c) a.insert(key(p.position));
      for (const auto& p : synthetic.points) if (p.label == c) b.insert(key(p.position));
      std::set<std::array<long, 3>> both;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                            std::inserter(both, both.end()));
      const std::size_t unions = a.size() + b.size() - both.size();
      CHECK(got.intersection[class_index(c)] == both.size());
      CHECK(got.unions[class_index(c)] == unions);
      if (unions > 0 && default_weights().weight(c) > 0) {
        weighted += default_weights().weight(c) * double(both.size()) / double(unions);
        total += default_weights().weight(c);
      }
    }
    CHECK(got.miou == doctest::Approx(weighted / total).epsilon(1e-12));
  }
}

TEST_CASE("voxel mIoU without weighted content is degenerate") {
  LabeledPointCloud cars{{{Vec3(0, 0, 0), S::kVehicle}}, ""};
  CHECK(kind_of([&] { voxel_miou(cars, cars, 0.5, default_weights()); }) == ErrorKind::kDegenerate);
}

TEST_CASE("identical clouds score the floor of the metric") {
  auto cloud = fixtures::sample_mesh(fixtures::room_mesh(), 20000, 3);
  const auto report = dogss_pcl(cloud, cloud, MetricParams{});
  CHECK(report.d_c2c == 0.0);
  CHECK(report.d_mm3c2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(report.miou == doctest::Approx(1.0));
  const double floor = 1.0 - std::exp(-0.2 * 0.1 / (1.0 + 1e-6));
  CHECK(report.m_dogss_pcl == doctest::Approx(floor).epsilon(1e-9));
}

TEST_CASE("reports are self-consistent") {
  const auto mesh = fixtures::room_mesh();
  const auto real = fixtures::sample_mesh(mesh, 20000, 4);
  const auto synthetic = fixtures::sample_mesh(mesh, 20000, 5).translated(Vec3(0.05, 0, 0.02));
  const MetricParams params;
  const auto r = dogss_pcl(real, synthetic, params);
  const auto s = compose_score(r.d_mm3c2, r.d_c2c, r.miou, params);
  CHECK(std::abs(s.d - r.d) <= 1e-12);
  CHECK(std::abs(s.f_miou - r.f_miou) <= 1e-12);
  CHECK(std::abs(s.m - r.m_dogss_pcl) <= 1e-12);
  std::size_t real_total = 0;
  for (const auto& g : r.per_class) {
    real_total += g.real_points;
    CHECK(g.m3c2.inliers + g.m3c2.outliers == g.real_points);
    CHECK(g.weight == params.weights.weight(g.label));
  }
  CHECK(real_total == real.size());
  CHECK(r.m_dogss_pcl > 0.0);
  CHECK(r.m_dogss_pcl < 1.0);
}

TEST_CASE("offset sensitivity records translations and grows") {
  const auto mesh = fixtures::room_mesh();
  const auto real = fixtures::sample_mesh(mesh, 20000, 6);
  const auto synthetic = fixtures::sample_mesh(mesh, 20000, 7);
  const Vec3 dir = Vec3(1, 1, 1).normalized();
  const std::vector<Vec3> offsets = {0.0 * dir, 0.1 * dir, 0.3 * dir};
  const auto rows = offset_sensitivity(real, synthetic, offsets, MetricParams{});
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(rows[i].translation);
    CHECK(*rows[i].translation == offsets[i]);
  }
  CHECK(rows[0].m_dogss_pcl < rows[1].m_dogss_pcl);
  CHECK(rows[1].m_dogss_pcl < rows[2].m_dogss_pcl);
  CHECK(rows[0].miou > rows[1].miou);
  CHECK(rows[1].miou > rows[2].miou);
}

TEST_CASE("min-max rescale") {
  const std::vector<double> scores = {0.2, 0.6, 0.4};
  const auto out = minmax_rescale(scores);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 1.0);
  CHECK(out[2] == doctest::Approx(0.5));
  const std::vector<double> flat = {0.3, 0.3};
  CHECK(minmax_rescale(flat) == std::vector<double>{0.0, 0.0});
  CHECK(minmax_rescale(std::vector<double>{}).empty());
}
