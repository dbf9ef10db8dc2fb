#pragma once

#include "dogss/core.hpp"
#include "dogss/spatial.hpp"

#include <cstdint>
#include <vector>

namespace dogss {

// Generic rotating multi-beam lidar.
struct ScanConfig {
  int channels = 64;
  double vertical_fov_min_deg = -25.0;
  double vertical_fov_max_deg = 15.0;
  double rotation_rate_hz = 10.0;
  double points_per_second = 600000.0;
  double max_range_m = 120.0;
  Vec3 sensor_offset = Vec3::Zero();  // vehicle frame

  // Throws kConfig on a violated invariant.
  void validate() const;

  // Azimuth steps per revolution; every step fires all channels at once.
  std::size_t azimuth_steps() const;
  // Channel elevations in radians, ascending. A single channel sits at the
  // middle of the field of view.
  std::vector<double> elevations_rad() const;

  friend bool operator==(const ScanConfig&, const ScanConfig&) = default;
};

struct TrajectorySample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;  // radians about +z

  friend bool operator==(const TrajectorySample&, const TrajectorySample&) = default;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

class Trajectory {
 public:
  // Throws kInvalidArgument when empty, not strictly increasing in t, or
  // non-finite.
  explicit Trajectory(std::vector<TrajectorySample> samples);

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  double start() const { return samples_.front().t; }
  double end() const { return samples_.back().t; }
  double duration() const { return end() - start(); }

  // Linear position and shortest-arc yaw interpolation; clamped at the ends.
  Pose pose_at(double t) const;

 private:
  std::vector<TrajectorySample> samples_;
};

struct NoiseModel {
  double sigma_m = 0.02;
  std::uint64_t seed = 0;
};

// Simulated points plus the emitter position of each ray, index-aligned.
struct ScanResult {
  LabeledPointCloud cloud;
  std::vector<Vec3> ray_origins;
  std::vector<std::uint32_t> triangle_ids;
  std::vector<double> ranges;
};

// Casts the rotating beam pattern along the trajectory. Throws
// kInvalidArgument for an empty mesh or a trajectory shorter than one
// revolution.
ScanResult simulate_scan(const Bvh& bvh, const Trajectory& trajectory, const ScanConfig& scan);

// Moves each point along its ray by an independent N(0, sigma) range error.
// The random stream is derived per point index. Throws kInvalidArgument when
// the origin count does not match the cloud.
LabeledPointCloud apply_range_noise(const LabeledPointCloud& cloud,
                                    const std::vector<Vec3>& ray_origins,
                                    const NoiseModel& noise);

}  // namespace dogss
