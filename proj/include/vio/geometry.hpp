#pragma once

#include "vio/types.hpp"

namespace vio {

enum class HuberVariant { kStandard, kPaperLiteral };

Mat3 skew(const Vec3& v);

// Exponential map of SO(3), angle-axis vector (radians) to unit quaternion.
// Uses a Taylor expansion below 1e-8 rad. Throws std::invalid_argument on
// non-finite input.
Quat so3_exp(const Vec3& phi);

// Logarithm map, inverse of so3_exp for angles below pi. Returns the
// minimal-angle representative; q and -q map to the same vector.
Vec3 so3_log(const Quat& q);

// Quaternion-derivative matrix: q_dot = 0.5 * omega_matrix(w) * q with q as
// the 4-vector [x, y, z, w]. Antisymmetric; top-left block -skew(w), last
// column w, last row -w^T.
Mat4 omega_matrix(const Vec3& w);

// Robust norm on squared residuals: s for s < 1, 2*sqrt(s) - 1 above.
// The paper-literal variant swaps the cases (constant above 1).
double huber(double s, HuberVariant variant = HuberVariant::kStandard);

// d huber / d s for the Gauss-Newton reweighting.
double huber_deriv(double s, HuberVariant variant = HuberVariant::kStandard);

// Left/right quaternion product matrices acting on [w, x, y, z]:
// a*b = quat_left(a)*vec4(b) = quat_right(b)*vec4(a).
Mat4 quat_left(const Quat& q);
Mat4 quat_right(const Quat& q);

// Right Jacobian of SO(3) and its inverse: exp(phi + dphi) ~
// exp(phi) * exp(Jr(phi) * dphi).
Mat3 so3_right_jacobian(const Vec3& phi);
Mat3 so3_right_jacobian_inv(const Vec3& phi);

// ZYX Euler decomposition, R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerZyx {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};
EulerZyx euler_zyx(const Quat& q);
Quat quat_from_zyx(double yaw, double pitch, double roll);
double yaw_of(const Quat& q);

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

inline Vec4 quat_coeffs_wxyz(const Quat& q) {
  return Vec4(q.w(), q.x(), q.y(), q.z());
}

}  // namespace vio
