#pragma once

#include "vio/dataset.hpp"
#include "vio/types.hpp"

#include <string>
#include <vector>

namespace vio {

enum class TrajectoryKind { kCircle, kFigureEight, kWaypointSpline };

TrajectoryKind trajectory_kind_from_string(const std::string& s);
std::string to_string(TrajectoryKind k);

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kCircle;
  double duration_s = 60.0;
  double imu_rate_hz = 200.0;
  double cam_rate_hz = 10.0;
  uint64_t seed = 1;

  double circle_radius_m = 2.0;
  double circle_angular_speed = 0.35;  // rad/s; 0 gives a stationary body
  double eight_x_amplitude_m = 2.5;
  double eight_y_amplitude_m = 1.5;
  double eight_angular_speed = 0.3;
  std::vector<Vec3> waypoints;
  double height_m = 0.8;

  void validate() const;
  int imu_samples() const;
  int cam_frames() const;
  int imu_per_frame() const;
};

struct GroundTruthSample {
  int64_t t_ns = 0;
  Pose pose;               // body in world
  Vec3 v = Vec3::Zero();   // world frame
  Vec3 w_body = Vec3::Zero();
  Vec3 a_world = Vec3::Zero();  // kinematic acceleration, gravity excluded
};

// Analytic ground truth sampled at the IMU rate. C2-smooth paths; planar
// yaw follows the velocity direction.
std::vector<GroundTruthSample> generate_trajectory(const TrajectorySpec& spec);

struct DynamicClusterSpec {
  int count = 15;
  // "none" keeps the cluster still (dynamic-labeled but steady);
  // "linear" translates at `velocity`; "orbit" circles around `center`.
  std::string motion = "none";
  Vec3 center = Vec3::Zero();
  double extent_m = 0.6;
  Vec3 velocity = Vec3::Zero();
  double orbit_radius_m = 0.5;
  double orbit_rate = 0.5;
};

struct BlackoutEvent {
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  double coverage_fraction = 1.0;
};

struct SceneSpec {
  int static_count = 400;
  Vec3 bbox_min{-7.0, -7.0, -0.5};
  Vec3 bbox_max{7.0, 7.0, 3.0};
  std::vector<DynamicClusterSpec> clusters;
  std::vector<BlackoutEvent> events;

  double mask_disk_radius_px = 14.0;
  int occluder_grid_x = 9;
  int occluder_grid_y = 7;
  double occluder_depth_m = 1.2;
  double occluder_osc_amplitude_m = 0.35;
  double occluder_osc_period_s = 8.0;

  void validate(double duration_s) const;
};

// Inverse of the correction model: raw = (S*M)^-1 * true + bias(t) + white,
// with the accelerometer measuring specific force R_bw * (a_w - g_w).
std::vector<ImuRecord> synthesize_imu(
    const std::vector<GroundTruthSample>& truth, const ImuNoiseModel& noise,
    double imu_rate_hz, uint64_t seed);

struct ProjectedTracks {
  std::vector<std::vector<TrackObs>> frames;
  std::vector<MaskSource> mask_sources;
};

ProjectedTracks project_tracks(const std::vector<GroundTruthSample>& truth,
                               const TrajectorySpec& traj,
                               const SceneSpec& scene, const CameraModel& cam,
                               double pixel_sigma, uint64_t seed);

struct ScenarioSpec {
  TrajectorySpec traj;
  ImuNoiseModel noise;
  SceneSpec scene;
  CameraModel camera;
  double pixel_sigma_px = 0.5;

  std::vector<std::pair<std::string, std::string>> to_kv() const;
  static ScenarioSpec from_kv(
      const std::vector<std::pair<std::string, std::string>>& kv);
  static ScenarioSpec from_file(const std::string& path);
};

Dataset simulate_scenario(const ScenarioSpec& spec);

}  // namespace vio
