#pragma once

#include "vio/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vio {

struct CameraModel {
  double fx = 420.0;
  double fy = 420.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
  // Camera pose in the body frame: x_body = q * x_cam + p. Default mounts
  // the optical axis along body x (x right = -body y, y down = -body z).
  Pose cam_in_body = default_extrinsic();

  static Pose default_extrinsic() {
    Mat3 r;
    r.col(0) = Vec3(0, -1, 0);
    r.col(1) = Vec3(0, 0, -1);
    r.col(2) = Vec3(1, 0, 0);
    return Pose(Quat(r), Vec3(0.05, 0.0, 0.02));
  }

  Vec2 project(const Vec3& x_cam) const {
    return Vec2(fx * x_cam.x() / x_cam.z() + cx,
                fy * x_cam.y() / x_cam.z() + cy);
  }
  bool in_bounds(const Vec2& px, double margin = 0.0) const {
    return px.x() >= margin && px.x() <= width - 1 - margin &&
           px.y() >= margin && px.y() <= height - 1 - margin;
  }
  void validate() const;
};

// Unit bearing for a pixel; forward-projecting it reproduces the pixel.
Vec3 back_project(const Vec2& px, const CameraModel& cam);

struct ImuNoiseModel {
  Mat3 gyro_scale = Mat3::Identity();
  Mat3 gyro_misalignment = Mat3::Identity();
  Mat3 accel_scale = Mat3::Identity();
  Mat3 accel_misalignment = Mat3::Identity();
  double gyro_bias_init = 0.0;   // rad/s, magnitude of the seeded initial bias
  double accel_bias_init = 0.0;  // m/s^2
  // Identifies the sensor instance: bias directions derive from this, so
  // datasets sharing it model the same physical IMU. 0 falls back to the
  // stream seed.
  uint64_t bias_seed = 0;
  double gyro_white_sigma = 1e-3;   // rad/s/sqrt(Hz)
  double accel_white_sigma = 1e-2;  // m/s^2/sqrt(Hz)
  double gyro_walk_sigma = 1e-4;    // rad/s^2/sqrt(Hz)
  double accel_walk_sigma = 1e-3;   // m/s^3/sqrt(Hz)

  void validate() const;
  bool is_noiseless() const;
};

struct ImuRecord {
  int64_t t_ns = 0;
  Vec3 w = Vec3::Zero();  // rad/s
  Vec3 a = Vec3::Zero();  // m/s^2 (specific force)
};

struct TrackObs {
  int frame_id = 0;
  int64_t t_ns = 0;
  int64_t kp_id = 0;
  double u = 0.0;
  double v = 0.0;
  int semantic_label = 0;  // 0 = static, 1 = dynamic
};

struct GroundTruthRecord {
  int64_t t_ns = 0;
  Vec3 p = Vec3::Zero();
  Quat q{1.0, 0.0, 0.0, 0.0};
  Vec3 v = Vec3::Zero();
};

// Per-frame rasterization source for the binary mask: dynamic pixels are
// disks of `radius_px` around each listed point (0 = dynamic, 255 = static).
struct MaskSource {
  std::vector<Vec2> dynamic_px;
  double radius_px = 14.0;
};

std::vector<uint8_t> rasterize_mask(int width, int height,
                                    const MaskSource& source);

struct Dataset {
  std::vector<ImuRecord> imu;
  std::vector<GroundTruthRecord> groundtruth;  // one row per IMU sample
  std::vector<std::vector<TrackObs>> frames;   // indexed by frame_id
  std::vector<int64_t> frame_t_ns;
  CameraModel camera;
  ImuNoiseModel noise;
  std::vector<std::pair<std::string, std::string>> scenario_kv;

  // Set when loaded from disk; masks are then read lazily from `dir`.
  std::string dir;
  // Set when synthesized in memory; masks are rasterized on demand.
  std::vector<MaskSource> mask_sources;

  int num_frames() const { return static_cast<int>(frames.size()); }
  std::vector<uint8_t> mask(int frame_id) const;
  // Ground-truth record at a frame timestamp (frames align with IMU samples).
  const GroundTruthRecord& gt_at_frame(int frame_id) const;
};

void write_dataset(const Dataset& ds, const std::string& out_dir);
Dataset read_dataset(const std::string& in_dir);

}  // namespace vio
