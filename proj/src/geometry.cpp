#include "vio/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace vio {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Quat so3_exp(const Vec3& phi) {
  if (!phi.allFinite()) {
    throw std::invalid_argument("so3_exp: non-finite rotation vector");
  }
  const double theta2 = phi.squaredNorm();
  double w, k;
  if (theta2 < 1e-16) {
    // cos(t/2) and sin(t/2)/t expanded around zero.
    w = 1.0 - theta2 / 8.0;
    k = 0.5 - theta2 / 48.0;
  } else {
    const double theta = std::sqrt(theta2);
    w = std::cos(0.5 * theta);
    k = std::sin(0.5 * theta) / theta;
  }
  Quat q(w, k * phi.x(), k * phi.y(), k * phi.z());
  q.normalize();
  return q;
}

Vec3 so3_log(const Quat& q_in) {
  if (!quat_coeffs_wxyz(q_in).allFinite()) {
    throw std::invalid_argument("so3_log: non-finite quaternion");
  }
  double w = q_in.w();
  Vec3 v = q_in.vec();
  if (w < 0.0) {  // double cover: pick the representative with w >= 0
    w = -w;
    v = -v;
  }
  const double n = v.norm();
  if (n < 1e-12) {
    return (2.0 / w) * v;
  }
  const double angle = 2.0 * std::atan2(n, w);
  return (angle / n) * v;
}

Mat4 omega_matrix(const Vec3& w) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = -skew(w);
  m.topRightCorner<3, 1>() = w;
  m.bottomLeftCorner<1, 3>() = -w.transpose();
  return m;
}

double huber(double s, HuberVariant variant) {
  if (s < 0.0) {
    throw std::invalid_argument("huber: negative squared residual");
  }
  if (variant == HuberVariant::kPaperLiteral) {
    return s >= 1.0 ? 1.0 : 2.0 * std::sqrt(s) - 1.0;
  }
  return s < 1.0 ? s : 2.0 * std::sqrt(s) - 1.0;
}

double huber_deriv(double s, HuberVariant variant) {
  if (s < 0.0) {
    throw std::invalid_argument("huber_deriv: negative squared residual");
  }
  if (variant == HuberVariant::kPaperLiteral) {
    return s >= 1.0 ? 0.0 : 1.0 / std::sqrt(std::max(s, 1e-12));
  }
  return s < 1.0 ? 1.0 : 1.0 / std::sqrt(s);
}

Mat4 quat_left(const Quat& q) {
  Mat4 m;
  m(0, 0) = q.w();
  m.block<1, 3>(0, 1) = -q.vec().transpose();
  m.block<3, 1>(1, 0) = q.vec();
  m.block<3, 3>(1, 1) = q.w() * Mat3::Identity() + skew(q.vec());
  return m;
}

Mat4 quat_right(const Quat& q) {
  Mat4 m;
  m(0, 0) = q.w();
  m.block<1, 3>(0, 1) = -q.vec().transpose();
  m.block<3, 1>(1, 0) = q.vec();
  m.block<3, 3>(1, 1) = q.w() * Mat3::Identity() - skew(q.vec());
  return m;
}

Mat3 so3_right_jacobian(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 s = skew(phi);
  if (theta2 < 1e-12) {
    return Mat3::Identity() - 0.5 * s + s * s / 6.0;
  }
  const double theta = std::sqrt(theta2);
  const double a = (1.0 - std::cos(theta)) / theta2;
  const double b = (theta - std::sin(theta)) / (theta2 * theta);
  return Mat3::Identity() - a * s + b * s * s;
}

Mat3 so3_right_jacobian_inv(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 s = skew(phi);
  if (theta2 < 1e-12) {
    return Mat3::Identity() + 0.5 * s + s * s / 12.0;
  }
  const double theta = std::sqrt(theta2);
  const double c = 1.0 / theta2 -
                   (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() + 0.5 * s + c * s * s;
}

EulerZyx euler_zyx(const Quat& q) {
  const Mat3 r = q.toRotationMatrix();
  EulerZyx e;
  e.yaw = std::atan2(r(1, 0), r(0, 0));
  e.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  e.roll = std::atan2(r(2, 1), r(2, 2));
  return e;
}

Quat quat_from_zyx(double yaw, double pitch, double roll) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
              Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
              Eigen::AngleAxisd(roll, Vec3::UnitX()));
}

double yaw_of(const Quat& q) { return euler_zyx(q).yaw; }

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

}  // namespace vio
