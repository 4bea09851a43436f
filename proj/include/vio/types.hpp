#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>

namespace vio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

// World gravity acceleration. A level stationary accelerometer measures the
// specific force f = R_bw * (a_w - g_w), i.e. (0,0,+9.81).
inline const Vec3 kGravityWorld{0.0, 0.0, -9.81};

// Rigid transform. Maps points from the local frame into the parent frame:
// x_parent = q * x_local + p.
struct Pose {
  Quat q{1.0, 0.0, 0.0, 0.0};
  Vec3 p{0.0, 0.0, 0.0};

  Pose() = default;
  Pose(const Quat& q_in, const Vec3& p_in) : q(q_in.normalized()), p(p_in) {}

  Vec3 act(const Vec3& x) const { return q * x + p; }

  Pose inverse() const {
    Quat qi = q.conjugate();
    return Pose(qi, -(qi * p));
  }

  Pose operator*(const Pose& rhs) const {
    return Pose(q * rhs.q, q * rhs.p + p);
  }

  Mat3 rotation() const { return q.toRotationMatrix(); }

  static Pose Identity() { return Pose(); }
};

struct BodyState {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  Quat q{1.0, 0.0, 0.0, 0.0};

  Pose pose() const { return Pose(q, p); }
};

}  // namespace vio
