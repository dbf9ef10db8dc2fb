#include "dogss/simulate.hpp"

#include "dogss/error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dogss {

void ScanConfig::validate() const {
  auto require = [](bool ok, const char* message) {
    if (!ok) fail(ErrorKind::kConfig, message);
  };
  require(channels >= 1, "scan.channels must be >= 1");
  require(std::isfinite(vertical_fov_min_deg) && std::isfinite(vertical_fov_max_deg),
          "scan vertical field of view must be finite");
  require(vertical_fov_min_deg < vertical_fov_max_deg,
          "scan.vertical_fov_min_deg must be below scan.vertical_fov_max_deg");
  require(vertical_fov_min_deg >= -90.0 && vertical_fov_max_deg <= 90.0,
          "scan vertical field of view must lie within [-90, 90] degrees");
  require(rotation_rate_hz > 0.0 && std::isfinite(rotation_rate_hz),
          "scan.rotation_rate_hz must be positive");
  require(points_per_second > 0.0 && std::isfinite(points_per_second),
          "scan.points_per_second must be positive");
  require(max_range_m > 0.0 && std::isfinite(max_range_m), "scan.max_range_m must be positive");
  require(sensor_offset.allFinite(), "scan.sensor_offset must be finite");
  require(azimuth_steps() >= 1,
          "scan.points_per_second is too low for one azimuth step per revolution");
}

std::size_t ScanConfig::azimuth_steps() const {
  const double per_rev = points_per_second / rotation_rate_hz / static_cast<double>(channels);
  return per_rev >= 1.0 ? static_cast<std::size_t>(std::floor(per_rev)) : 0;
}

std::vector<double> ScanConfig::elevations_rad() const {
  constexpr double kDeg = std::numbers::pi / 180.0;
  std::vector<double> out(static_cast<std::size_t>(channels));
  if (channels == 1) {
    out[0] = 0.5 * (vertical_fov_min_deg + vertical_fov_max_deg) * kDeg;
    return out;
  }
  const double step = (vertical_fov_max_deg - vertical_fov_min_deg) / (channels - 1);
  for (int k = 0; k < channels; ++k) out[k] = (vertical_fov_min_deg + k * step) * kDeg;
  return out;
}

// ----------------------------------------------------------------------------

Trajectory::Trajectory(std::vector<TrajectorySample> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) fail(ErrorKind::kInvalidArgument, "trajectory is empty");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.t) || !s.position.allFinite() || !std::isfinite(s.yaw)) {
      fail(ErrorKind::kInvalidArgument, "trajectory sample " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(s.t > samples_[i - 1].t)) {
      fail(ErrorKind::kInvalidArgument, "trajectory times must be strictly increasing");
    }
  }
}

Pose Trajectory::pose_at(double t) const {
  if (t <= samples_.front().t) return {samples_.front().position, samples_.front().yaw};
  if (t >= samples_.back().t) return {samples_.back().position, samples_.back().yaw};
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                   [](double v, const TrajectorySample& s) { return v < s.t; });
  const TrajectorySample& b = *it;
  const TrajectorySample& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  Pose pose;
  pose.position = a.position + u * (b.position - a.position);
  const double delta = std::remainder(b.yaw - a.yaw, 2.0 * std::numbers::pi);
  pose.yaw = a.yaw + u * delta;
  return pose;
}

// ----------------------------------------------------------------------------

ScanResult simulate_scan(const Bvh& bvh, const Trajectory& trajectory, const ScanConfig& scan) {
  scan.validate();
  if (bvh.triangle_count() == 0) fail(ErrorKind::kInvalidArgument, "mesh has no triangles");
  const double period = 1.0 / scan.rotation_rate_hz;
  if (trajectory.duration() < period) {
    fail(ErrorKind::kInvalidArgument, "trajectory must span at least one sensor revolution");
  }

  const std::size_t steps_per_rev = scan.azimuth_steps();
  const auto steps = static_cast<std::size_t>(std::floor(
      trajectory.duration() * scan.rotation_rate_hz * static_cast<double>(steps_per_rev)));
  const std::vector<double> elevations = scan.elevations_rad();
  const std::size_t channels = elevations.size();
  const double step_dt = period / static_cast<double>(steps_per_rev);
  const double step_angle = 2.0 * std::numbers::pi / static_cast<double>(steps_per_rev);

  struct Slot {
    bool hit = false;
    RayHit record;
    Vec3 origin;
    Vec3 point;
  };
  ScanResult result;
  result.cloud.frame_note = "simulated scan, mesh frame";

  constexpr std::size_t kChunkSteps = 4096;
  std::vector<Slot> slots;
  for (std::size_t first = 0; first < steps; first += kChunkSteps) {
    const std::size_t count = std::min(kChunkSteps, steps - first);
    slots.assign(count * channels, Slot{});
    detail::parallel_for(count, [&](std::size_t local) {
      const std::size_t s = first + local;
      const Pose pose = trajectory.pose_at(trajectory.start() + static_cast<double>(s) * step_dt);
      const double cy = std::cos(pose.yaw);
      const double sy = std::sin(pose.yaw);
      const Vec3 origin =
          pose.position + Vec3(cy * scan.sensor_offset.x() - sy * scan.sensor_offset.y(),
                               sy * scan.sensor_offset.x() + cy * scan.sensor_offset.y(),
                               scan.sensor_offset.z());
      const double azimuth = pose.yaw + static_cast<double>(s % steps_per_rev) * step_angle;
      const double ca = std::cos(azimuth);
      const double sa = std::sin(azimuth);
      for (std::size_t k = 0; k < channels; ++k) {
        const double ce = std::cos(elevations[k]);
        const Vec3 dir(ce * ca, ce * sa, std::sin(elevations[k]));
        const auto hit = bvh.raycast(Ray{origin, dir});
        if (!hit || hit->t > scan.max_range_m) continue;
        Slot& slot = slots[local * channels + k];
        slot.hit = true;
        slot.record = *hit;
        slot.origin = origin;
        slot.point = origin + hit->t * dir;
      }
    });
    for (const Slot& slot : slots) {
      if (!slot.hit) continue;
      result.cloud.points.push_back({slot.point, slot.record.label});
      result.ray_origins.push_back(slot.origin);
      result.triangle_ids.push_back(slot.record.triangle);
      result.ranges.push_back(slot.record.t);
    }
  }
  return result;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

LabeledPointCloud apply_range_noise(const LabeledPointCloud& cloud,
                                    const std::vector<Vec3>& ray_origins,
                                    const NoiseModel& noise) {
  if (ray_origins.size() != cloud.size()) {
    fail(ErrorKind::kInvalidArgument, "range noise needs one ray origin per point");
  }
  if (!(noise.sigma_m >= 0.0) || !std::isfinite(noise.sigma_m)) {
    fail(ErrorKind::kInvalidArgument, "noise sigma must be a non-negative finite length");
  }
  LabeledPointCloud out = cloud;
  if (noise.sigma_m == 0.0) return out;

  detail::parallel_for(cloud.size(), [&](std::size_t i) {
    const Vec3 ray = cloud.points[i].position - ray_origins[i];
    const double range = ray.norm();
    if (!(range > 0.0)) return;
    std::mt19937_64 engine(splitmix64(noise.seed ^ splitmix64(i)));
    std::normal_distribution<double> normal(0.0, noise.sigma_m);
    out.points[i].position = cloud.points[i].position + (normal(engine) / range) * ray;
  });
  return out;
}

}  // namespace dogss
