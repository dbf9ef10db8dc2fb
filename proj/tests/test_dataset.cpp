#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dogss/dataset.hpp"
#include "dogss/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace dogss;
using S = SemanticClass;

namespace {

LabeledPointCloud grid_cloud(int n, double step) {
  LabeledPointCloud cloud;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) cloud.points.push_back({Vec3(i * step, j * step, 0.0), S::kRoadSurface});
  }
  return cloud;
}

Region rect(std::string name, double x0, double y0, double x1, double y1) {
  return Region{std::move(name), Rect{Vec2(x0, y0), Vec2(x1, y1)}};
}

double round_to(double v, int digits) {
  const double scale = std::pow(10.0, digits);
  return std::round(v * scale) / scale;
}

}  // namespace

TEST_CASE("split tiles and tie rule") {
  const auto cloud = grid_cloud(10, 1.0);  // 11 x 11 lattice on [0, 10]^2
  SplitSpec spec;
  spec.regions = {rect("train", 0, 0, 5, 10), rect("val", 5, 0, 10, 10)};
  const auto parts = split(cloud, spec);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].name == "train");
  // The shared edge x = 5 goes to the first region.
  CHECK(parts[0].cloud.size() == 6 * 11);
  CHECK(parts[1].cloud.size() == 5 * 11);

  // Splitting a part again with the same spec returns it unchanged.
  const auto again = split(parts[0].cloud, spec);
  CHECK(again[0].cloud == parts[0].cloud);
  CHECK(again[1].cloud.empty());
}

TEST_CASE("split rejects degenerate specs") {
  SplitSpec spec;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.regions = {rect("flat", 0, 0, 5, 0)};
  CHECK_THROWS_AS(split(LabeledPointCloud{}, spec), Error);
  spec.regions = {Region{"line", Polygon{{Vec2(0, 0), Vec2(1, 1), Vec2(2, 2)}}}};
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("split equals brute-force membership") {
  std::mt19937_64 rng(31);
  auto coord = [&] { return std::uniform_int_distribution<int>(-64, 64)(rng) / 8.0; };
  for (int trial = 0; trial < 500; ++trial) {
    SplitSpec spec;
    const int regions = 1 + static_cast<int>(rng() % 4);
    for (int r = 0; r < regions; ++r) {
      if (rng() % 2) {
        double x0 = coord(), x1 = coord(), y0 = coord(), y1 = coord();
        if (x0 == x1) x1 += 1.0;
        if (y0 == y1) y1 += 1.0;
        spec.regions.push_back(rect("r" + std::to_string(r), std::min(x0, x1), std::min(y0, y1),
                                    std::max(x0, x1), std::max(y0, y1)));
      } else {
        // Convex polygon from sorted angles around a centre.
        const Vec2 c(coord(), coord());
        const int k = 3 + static_cast<int>(rng() % 5);
        std::vector<double> angles(k);
        for (auto& a : angles) a = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(rng);
        std::sort(angles.begin(), angles.end());
        Polygon poly;
        for (double a : angles) {
          const double radius = 1.0 + static_cast<double>(rng() % 40) / 8.0;
          poly.vertices.push_back(c + Vec2(std::round(radius * std::cos(a) * 8) / 8,
                                           std::round(radius * std::sin(a) * 8) / 8));
        }
        spec.regions.push_back(Region{"p" + std::to_string(r), poly});
      }
    }
    try {
      spec.validate();
    } catch (const Error&) {
      continue;
    }
    LabeledPointCloud cloud;
    const int n = 1 + static_cast<int>(rng() % 2000);
    for (int i = 0; i < n; ++i) cloud.points.push_back({Vec3(coord(), coord(), coord()), S::kDoor});
    // Polygon vertices may also be hit exactly.
    for (const auto& reg : spec.regions) {
      if (const auto* p = std::get_if<Polygon>(&reg.shape)) {
        cloud.points.push_back({Vec3(p->vertices[0].x(), p->vertices[0].y(), 0.0), S::kDoor});
      }
    }

    // Oracle: closed rectangles by comparison; polygons by the winding
    // number, with boundary points detected separately.
    auto inside = [](const Region& reg, const Vec2& q) {
      if (const auto* r = std::get_if<Rect>(&reg.shape)) {
        return r->min.x() <= q.x() && q.x() <= r->max.x() && r->min.y() <= q.y() &&
               q.y() <= r->max.y();
      }
      const auto& v = std::get<Polygon>(reg.shape).vertices;
      int winding = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2& a = v[i];
        const Vec2& b = v[(i + 1) % v.size()];
        const double side = (b.x() - a.x()) * (q.y() - a.y()) - (q.x() - a.x()) * (b.y() - a.y());
        if (side == 0.0 && std::min(a.x(), b.x()) <= q.x() && q.x() <= std::max(a.x(), b.x()) &&
            std::min(a.y(), b.y()) <= q.y() && q.y() <= std::max(a.y(), b.y())) {
          return true;
        }
        if (a.y() <= q.y()) {
          if (b.y() > q.y() && side > 0) ++winding;
        } else if (b.y() <= q.y() && side < 0) {
          --winding;
        }
      }
      return winding != 0;
    };
    std::vector<LabeledPointCloud> want(spec.regions.size());
    for (const auto& p : cloud.points) {
      for (std::size_t r = 0; r < spec.regions.size(); ++r) {
        if (inside(spec.regions[r], p.position.head<2>())) {
          want[r].points.push_back(p);
          break;
        }
      }
    }
    const auto got = split(cloud, spec);
    for (std::size_t r = 0; r < spec.regions.size(); ++r) REQUIRE(got[r].cloud.points == want[r].points);
  }
}

TEST_CASE("mix counts follow round-half-up") {
  LabeledPointCloud real, synthetic;
  for (int i = 0; i < 20000; ++i) {
    real.points.push_back({Vec3(i, 0, 0), S::kWallSurface});
    synthetic.points.push_back({Vec3(i, 1, 0), S::kWindow});
  }
  const auto all_real = mix(real, synthetic, RatioMix{1.0, 1000, 1});
  CHECK(all_real.real_count == 1000);
  CHECK(all_real.synthetic_count == 0);
  const auto half = mix(real, synthetic, RatioMix{0.5, 10000, 1});
  CHECK(half.real_count == 5000);
  CHECK(half.synthetic_count == 5000);
  const auto small = mix(real, synthetic, RatioMix{0.75, 10, 1});
  CHECK(small.real_count == 8);
  CHECK(small.synthetic_count == 2);
  CHECK(real_share(0.25, 10) == 3);  // 2.5 rounds up
  CHECK(real_share(0.5, 3) == 2);

  // Real points first, then synthetic, and provenance says so.
  for (std::size_t i = 0; i < half.cloud.size(); ++i) {
    const bool is_real = i < half.real_count;
    CHECK((half.provenance[i] == Provenance::kReal) == is_real);
    CHECK((half.cloud.points[i].label == S::kWallSurface) == is_real);
  }
  CHECK_FALSE(half.real_with_replacement);

  const auto again = mix(real, synthetic, RatioMix{0.5, 10000, 1});
  CHECK(again.cloud == half.cloud);
  const auto other = mix(real, synthetic, RatioMix{0.5, 10000, 2});
  CHECK_FALSE(other.cloud == half.cloud);
}

TEST_CASE("mix without replacement picks distinct points") {
  LabeledPointCloud real, synthetic;
  for (int i = 0; i < 100; ++i) real.points.push_back({Vec3(i, 0, 0), S::kDoor});
  synthetic.points.push_back({Vec3(0, 0, 0), S::kWindow});
  const auto out = mix(real, synthetic, RatioMix{0.5, 200, 3});
  std::set<double> xs;
  for (std::size_t i = 0; i < out.real_count; ++i) xs.insert(out.cloud.points[i].position.x());
  CHECK(xs.size() == 100);
  CHECK_FALSE(out.real_with_replacement);
  CHECK(out.synthetic_with_replacement);
  CHECK(out.synthetic_count == 100);
}

TEST_CASE("mix preconditions") {
  LabeledPointCloud one{{{Vec3::Zero(), S::kDoor}}, ""};
  CHECK_THROWS_AS(mix(one, one, RatioMix{0.5, 0, 1}), Error);
  CHECK_THROWS_AS(mix(one, one, RatioMix{1.5, 10, 1}), Error);
  CHECK_THROWS_AS(mix(LabeledPointCloud{}, one, RatioMix{0.5, 10, 1}), Error);
  CHECK_NOTHROW(mix(LabeledPointCloud{}, one, RatioMix{0.0, 10, 1}));
}

TEST_CASE("segmentation IoU arithmetic") {
  // Road: tp 5, fp 3, fn 2.
  LabeledPointCloud gt;
  std::vector<S> pred;
  auto add = [&](S truth, S guess, int n) {
    for (int i = 0; i < n; ++i) {
      gt.points.push_back({Vec3::Zero(), truth});
      pred.push_back(guess);
    }
  };
  add(S::kRoadSurface, S::kRoadSurface, 5);
  add(S::kGroundSurface, S::kRoadSurface, 3);
  add(S::kRoadSurface, S::kWallSurface, 2);
  const auto r = evaluate_segmentation(gt, pred);
  const auto& road = r.per_class[class_index(S::kRoadSurface)];
  CHECK(road.tp == 5);
  CHECK(road.fp == 3);
  CHECK(road.fn == 2);
  CHECK(road.iou == 0.5);
  CHECK(r.per_class[class_index(S::kGroundSurface)].present);
  CHECK(r.per_class[class_index(S::kGroundSurface)].iou == 0.0);
  CHECK_FALSE(r.per_class[class_index(S::kDoor)].present);
  CHECK(r.miou == doctest::Approx(0.5 / 11));

  CHECK_THROWS_AS(evaluate_segmentation(gt, std::vector<S>{S::kDoor}), Error);
}

TEST_CASE("hand-tallied three-class fixture") {
  // truth:  1 1 1 1 6 6 6 9 9 12
  // pred:   1 1 6 9 6 6 1 9 6 12
  const S truth[] = {S::kRoadSurface, S::kRoadSurface, S::kRoadSurface, S::kRoadSurface,
                     S::kWallSurface, S::kWallSurface, S::kWallSurface, S::kWindow,
                     S::kWindow,      S::kNoise};
  const std::vector<S> pred = {S::kRoadSurface, S::kRoadSurface, S::kWallSurface, S::kWindow,
                               S::kWallSurface, S::kWallSurface, S::kRoadSurface, S::kWindow,
                               S::kWallSurface, S::kNoise};
  LabeledPointCloud gt;
  for (S t : truth) gt.points.push_back({Vec3::Zero(), t});
  const auto r = evaluate_segmentation(gt, pred);
  CHECK(r.confusion[0][0] == 2);
  CHECK(r.confusion[0][5] == 1);
  CHECK(r.confusion[0][8] == 1);
  CHECK(r.confusion[5][5] == 2);
  CHECK(r.confusion[5][0] == 1);
  CHECK(r.confusion[8][8] == 1);
  CHECK(r.confusion[8][5] == 1);
  CHECK(r.confusion[11][11] == 1);
  CHECK(r.per_class[0].iou == doctest::Approx(2.0 / 5));   // tp 2, fp 1, fn 2
  CHECK(r.per_class[5].iou == doctest::Approx(2.0 / 5));   // tp 2, fp 2, fn 1
  CHECK(r.per_class[8].iou == doctest::Approx(1.0 / 3));   // tp 1, fp 1, fn 1
  CHECK(r.per_class[11].iou == 1.0);
  CHECK(r.miou == doctest::Approx((0.4 + 0.4 + 1.0 / 3) / 11));

  const auto rows = most_misclassified(r);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].true_class == S::kRoadSurface);
  CHECK(rows[0].predicted == S::kWallSurface);  // tie with Window, lower id wins
  CHECK(rows[0].proportion == 0.5);
  CHECK(rows[1].true_class == S::kWallSurface);
  CHECK(rows[1].predicted == S::kRoadSurface);
  CHECK(rows[2].true_class == S::kWindow);
}

TEST_CASE("tallies conserve the point count") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    LabeledPointCloud gt;
    std::vector<S> pred;
    const int n = 1 + static_cast<int>(rng() % 3000);
    for (int i = 0; i < n; ++i) {
      gt.points.push_back({Vec3::Zero(), *class_from_id(1 + rng() % 12)});
      pred.push_back(rng() % 3 ? gt.points.back().label : *class_from_id(1 + rng() % 12));
    }
    const auto r = evaluate_segmentation(gt, pred);
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (const auto& t : r.per_class) {
      tp += t.tp;
      fp += t.fp;
      fn += t.fn;
    }
    CHECK(tp + fp == static_cast<std::uint64_t>(n));
    CHECK(tp + fn == static_cast<std::uint64_t>(n));

    // Brute-force argmax of wrong predictions per true class.
    for (const auto& row : most_misclassified(r)) {
      std::array<std::uint64_t, kClassCount> wrong{};
      for (int i = 0; i < n; ++i) {
        if (gt.points[i].label == row.true_class && pred[i] != row.true_class) {
          ++wrong[class_index(pred[i])];
        }
      }
      const auto best = std::max_element(wrong.begin(), wrong.end());
      CHECK(class_index(row.predicted) == static_cast<std::size_t>(best - wrong.begin()));
      CHECK(row.count == *best);
    }
  }
}

TEST_CASE("dominant confusion share") {
  LabeledPointCloud gt;
  std::vector<S> pred;
  for (int i = 0; i < 100; ++i) gt.points.push_back({Vec3::Zero(), S::kRoadSurface});
  for (int i = 0; i < 95; ++i) pred.push_back(S::kGroundSurface);
  for (int i = 0; i < 5; ++i) pred.push_back(S::kVehicle);
  const auto rows = most_misclassified(evaluate_segmentation(gt, pred));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].predicted == S::kGroundSurface);
  CHECK(rows[0].proportion == doctest::Approx(0.95));
}

TEST_CASE("Pearson correlation against ratios") {
  const double ratios[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  auto series = [&](std::initializer_list<double> values) {
    std::vector<std::pair<double, double>> s;
    auto it = values.begin();
    for (double r : ratios) s.emplace_back(r, *it++);
    return s;
  };
  const auto road = ratio_correlation(series({0.93, 0.94, 0.90, 0.92, 0.55}));
  REQUIRE(road);
  CHECK(std::abs(*road - (-0.74)) <= 0.01);
  CHECK(round_to(*road, 1) == doctest::Approx(-0.7));

  const auto miou = ratio_correlation(series({0.45, 0.45, 0.46, 0.39, 0.29}));
  REQUIRE(miou);
  CHECK(round_to(*miou, 1) == doctest::Approx(-0.8));

  CHECK_FALSE(ratio_correlation(series({0.0, 0.0, 0.0, 0.0, 0.0})));
  CHECK(*ratio_correlation(series({1.0, 0.75, 0.5, 0.25, 0.0})) == doctest::Approx(-1.0));

  // Percent instead of fraction changes nothing.
  auto percent = series({0.93, 0.94, 0.90, 0.92, 0.55});
  for (auto& [p, v] : percent) p *= 100.0;
  CHECK(*ratio_correlation(percent) == doctest::Approx(*road).epsilon(1e-12));
  CHECK_FALSE(ratio_correlation(std::vector<std::pair<double, double>>{{0.5, 1.0}}));
}
