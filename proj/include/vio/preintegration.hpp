#pragma once

#include "vio/types.hpp"

#include <vector>

namespace vio {

struct ImuSample {
  int64_t t_ns = 0;
  Vec3 w = Vec3::Zero();  // corrected angular rate, rad/s
  Vec3 a = Vec3::Zero();  // corrected specific force, m/s^2
};

// Samples covering one inter-keyframe interval, boundary samples included on
// both ends (the closing sample of one buffer opens the next).
struct PreintegrationBuffer {
  std::vector<ImuSample> samples;
};

using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

struct PreintegratedDelta {
  Vec3 alpha = Vec3::Zero();   // position delta in the start body frame, m
  Vec3 beta = Vec3::Zero();    // velocity delta, m/s
  Quat gamma{1.0, 0.0, 0.0, 0.0};
  Mat9 covariance = Mat9::Zero();  // error order: d_alpha, d_beta, d_theta
  double dt = 0.0;
};

struct ImuNoiseDensities {
  double gyro_white = 1e-3;   // rad/s/sqrt(Hz)
  double accel_white = 1e-2;  // m/s^2/sqrt(Hz)
};

// Midpoint integration of the delta kinematics with first-order error-state
// covariance propagation. Biases are treated as zero (removed upstream).
PreintegratedDelta propagate(const PreintegrationBuffer& buffer,
                             const ImuNoiseDensities& noise);

// delta(t0,t2) from delta(t0,t1) and delta(t1,t2).
PreintegratedDelta compose(const PreintegratedDelta& d01,
                           const PreintegratedDelta& d12);

// Rows: position, velocity, orientation error (2 * vec part). `gravity_w` is
// the world gravity acceleration, (0,0,-9.81) by convention.
Vec9 imu_residual(const PreintegratedDelta& delta, const BodyState& state_k,
                  const BodyState& state_k1, const Vec3& gravity_w);

// The state that zeroes the residual: forward propagation through the delta.
BodyState propagate_state(const BodyState& state_k,
                          const PreintegratedDelta& delta,
                          const Vec3& gravity_w);

// Jacobians w.r.t. [p_k, v_k, theta_k, p_k1, v_k1, theta_k1] with quaternion
// perturbation on the left: q <- so3_exp(d_theta) * q.
struct ImuResidualJacobians {
  Eigen::Matrix<double, 9, 3> dp_k, dv_k, dtheta_k, dp_k1, dv_k1, dtheta_k1;
};

ImuResidualJacobians imu_residual_jacobians(const PreintegratedDelta& delta,
                                            const BodyState& state_k,
                                            const BodyState& state_k1,
                                            const Vec3& gravity_w);

}  // namespace vio
