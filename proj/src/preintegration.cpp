#include "vio/preintegration.hpp"

#include "vio/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace vio {

PreintegratedDelta propagate(const PreintegrationBuffer& buffer,
                             const ImuNoiseDensities& noise) {
  const auto& s = buffer.samples;
  if (s.empty()) {
    throw std::invalid_argument("propagate: empty preintegration buffer");
  }
  PreintegratedDelta d;
  const double qg = noise.gyro_white * noise.gyro_white;
  const double qa = noise.accel_white * noise.accel_white;

  for (size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i + 1].t_ns <= s[i].t_ns) {
      throw std::runtime_error("propagate: non-monotone IMU timestamps");
    }
    const double dt = (s[i + 1].t_ns - s[i].t_ns) * 1e-9;
    const Vec3 w_mid = 0.5 * (s[i].w + s[i + 1].w);
    const Quat gamma_next = (d.gamma * so3_exp(w_mid * dt)).normalized();
    // accelerations rotated into the start body frame
    const Vec3 a0 = d.gamma * s[i].a;
    const Vec3 a1 = gamma_next * s[i + 1].a;
    const Vec3 a_mid = 0.5 * (a0 + a1);

    // error-state transition (order: d_alpha, d_beta, d_theta; theta is the
    // left error in the start frame)
    Mat9 F = Mat9::Identity();
    F.block<3, 3>(0, 3) = dt * Mat3::Identity();
    F.block<3, 3>(0, 6) = -0.5 * dt * dt * skew(a_mid);
    F.block<3, 3>(3, 6) = -dt * skew(a_mid);
    Eigen::Matrix<double, 9, 6> G = Eigen::Matrix<double, 9, 6>::Zero();
    const Mat3 r0 = d.gamma.toRotationMatrix();
    G.block<3, 3>(0, 3) = 0.5 * dt * dt * r0;
    G.block<3, 3>(3, 3) = dt * r0;
    G.block<3, 3>(6, 0) = dt * r0;
    Eigen::Matrix<double, 6, 6> Q = Eigen::Matrix<double, 6, 6>::Zero();
    Q.topLeftCorner<3, 3>() = (qg / dt) * Mat3::Identity();
    Q.bottomRightCorner<3, 3>() = (qa / dt) * Mat3::Identity();
    d.covariance = F * d.covariance * F.transpose() + G * Q * G.transpose();
    d.covariance = 0.5 * (d.covariance + d.covariance.transpose()).eval();

    d.alpha += d.beta * dt + 0.5 * a_mid * dt * dt;
    d.beta += a_mid * dt;
    d.gamma = gamma_next;
    d.dt += dt;
  }
  return d;
}

PreintegratedDelta compose(const PreintegratedDelta& d01,
                           const PreintegratedDelta& d12) {
  PreintegratedDelta d;
  const Mat3 r01 = d01.gamma.toRotationMatrix();
  d.alpha = d01.alpha + d01.beta * d12.dt + r01 * d12.alpha;
  d.beta = d01.beta + r01 * d12.beta;
  d.gamma = (d01.gamma * d12.gamma).normalized();
  d.dt = d01.dt + d12.dt;

  Mat9 T = Mat9::Identity();
  T.block<3, 3>(0, 3) = d12.dt * Mat3::Identity();
  T.block<3, 3>(0, 6) = -skew(r01 * d12.alpha);
  T.block<3, 3>(3, 6) = -skew(r01 * d12.beta);
  Mat9 A = Mat9::Zero();
  A.block<3, 3>(0, 0) = r01;
  A.block<3, 3>(3, 3) = r01;
  A.block<3, 3>(6, 6) = r01;
  d.covariance = T * d01.covariance * T.transpose() +
                 A * d12.covariance * A.transpose();
  return d;
}

Vec9 imu_residual(const PreintegratedDelta& delta, const BodyState& state_k,
                  const BodyState& state_k1, const Vec3& gravity_w) {
  const double dt = delta.dt;
  const Mat3 r_wk = state_k.q.toRotationMatrix().transpose();
  Vec9 r;
  r.segment<3>(0) =
      r_wk * (state_k1.p - state_k.p - state_k.v * dt -
              0.5 * gravity_w * dt * dt) -
      delta.alpha;
  r.segment<3>(3) =
      r_wk * (state_k1.v - state_k.v - gravity_w * dt) - delta.beta;
  const Quat q_err =
      state_k.q.conjugate() * state_k1.q * delta.gamma.conjugate();
  const double sign = q_err.w() >= 0.0 ? 1.0 : -1.0;
  r.segment<3>(6) = 2.0 * sign * q_err.vec();
  return r;
}

BodyState propagate_state(const BodyState& state_k,
                          const PreintegratedDelta& delta,
                          const Vec3& gravity_w) {
  const double dt = delta.dt;
  BodyState out;
  out.p = state_k.p + state_k.v * dt + 0.5 * gravity_w * dt * dt +
          state_k.q * delta.alpha;
  out.v = state_k.v + gravity_w * dt + state_k.q * delta.beta;
  out.q = (state_k.q * delta.gamma).normalized();
  return out;
}

ImuResidualJacobians imu_residual_jacobians(const PreintegratedDelta& delta,
                                            const BodyState& state_k,
                                            const BodyState& state_k1,
                                            const Vec3& gravity_w) {
  const double dt = delta.dt;
  const Mat3 r_k = state_k.q.toRotationMatrix();
  const Mat3 r_wk = r_k.transpose();
  const Vec3 u_alpha = state_k1.p - state_k.p - state_k.v * dt -
                       0.5 * gravity_w * dt * dt;
  const Vec3 u_beta = state_k1.v - state_k.v - gravity_w * dt;

  ImuResidualJacobians j;
  j.dp_k.setZero();
  j.dv_k.setZero();
  j.dtheta_k.setZero();
  j.dp_k1.setZero();
  j.dv_k1.setZero();
  j.dtheta_k1.setZero();

  j.dp_k.block<3, 3>(0, 0) = -r_wk;
  j.dv_k.block<3, 3>(0, 0) = -r_wk * dt;
  j.dp_k1.block<3, 3>(0, 0) = r_wk;
  j.dtheta_k.block<3, 3>(0, 0) = r_wk * skew(u_alpha);

  j.dv_k.block<3, 3>(3, 0) = -r_wk;
  j.dv_k1.block<3, 3>(3, 0) = r_wk;
  j.dtheta_k.block<3, 3>(3, 0) = r_wk * skew(u_beta);

  // theta rows: residual = 2 * vec(q_k^-1 * exp(d) * q_k1 * gamma^-1)
  const Quat c = state_k1.q * delta.gamma.conjugate();
  const Quat q_err = state_k.q.conjugate() * c;
  const double sign = q_err.w() >= 0.0 ? 1.0 : -1.0;
  const Mat4 m = quat_left(state_k.q.conjugate()) * quat_right(c);
  j.dtheta_k.block<3, 3>(6, 0) = -sign * m.block<3, 3>(1, 1);
  j.dtheta_k1.block<3, 3>(6, 0) = sign * m.block<3, 3>(1, 1);
  return j;
}

}  // namespace vio
