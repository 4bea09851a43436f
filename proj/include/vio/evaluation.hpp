#pragma once

#include "vio/types.hpp"

#include <string>
#include <vector>

namespace vio {

struct TrajectoryRow {
  int64_t t_ns = 0;
  Pose pose;
};

using Trajectory = std::vector<TrajectoryRow>;

// t_ns,px,py,pz,qw,qx,qy,qz rows; extra columns (velocities) are ignored.
Trajectory read_trajectory_csv(const std::string& path);
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

struct AssociateResult {
  std::vector<std::pair<int, int>> pairs;  // (index in a, index in b)
  int dropped_a = 0;
  int dropped_b = 0;
};

// Nearest-timestamp pairing within max_dt; throws on zero pairs.
AssociateResult associate(const Trajectory& a, const Trajectory& b,
                          int64_t max_dt_ns);

struct AlignmentResult {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
};

// Least-squares similarity (or rigid) transform minimizing
// sum |a_i - (s R b_i + t)|^2. Needs >= 3 non-collinear pairs.
AlignmentResult umeyama_align(const std::vector<Vec3>& a,
                              const std::vector<Vec3>& b, bool with_scale);

enum class AlignMode { kNone, kSe3, kSim3 };

struct AteResult {
  double rms = 0.0;
  int pairs = 0;
  AlignmentResult alignment;
};

AteResult ate_rms(const Trajectory& estimate, const Trajectory& groundtruth,
                  AlignMode mode, bool normalize_by_path_length = false,
                  int64_t max_dt_ns = 5'000'000);

struct RpeResult {
  double trans_rms = 0.0;    // meters per interval
  double rot_rms_deg = 0.0;  // degrees per interval
  int pairs = 0;
};

RpeResult rpe_rms(const Trajectory& estimate, const Trajectory& groundtruth,
                  double delta_s, int64_t max_dt_ns = 5'000'000);

double path_length(const Trajectory& traj);

}  // namespace vio
