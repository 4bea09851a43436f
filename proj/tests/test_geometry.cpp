#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vio/geometry.hpp"
#include "vio/util.hpp"

#include <cmath>

using namespace vio;

namespace {

// Independent oracle: Rodrigues rotation-matrix formula.
Mat3 rodrigues(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < 1e-14) return Mat3::Identity();
  const Vec3 axis = phi / theta;
  const Mat3 k = skew(axis);
  return Mat3::Identity() + std::sin(theta) * k +
         (1.0 - std::cos(theta)) * k * k;
}

}  // namespace

TEST_CASE("so3_exp basics") {
  CHECK(so3_exp(Vec3::Zero()).isApprox(Quat::Identity(), 1e-15));

  // 180 degrees about z flips x
  const Quat q = so3_exp(Vec3(0, 0, M_PI));
  const Vec3 r = q * Vec3(1, 0, 0);
  CHECK((r - Vec3(-1, 0, 0)).norm() < 1e-12);

  const Vec3 phi(0.3, -0.2, 0.9);
  const Quat qe = so3_exp(phi);
  CHECK((qe * so3_exp(-phi)).isApprox(Quat::Identity(), 1e-12));

  CHECK_THROWS_AS(so3_exp(Vec3(std::nan(""), 0, 0)), std::invalid_argument);
}

TEST_CASE("so3_exp matches Rodrigues") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vec3 phi = rng.gaussian3() * rng.uniform(0.0, 1.0);
    CHECK((so3_exp(phi).toRotationMatrix() - rodrigues(phi)).norm() < 1e-12);
  }
}

TEST_CASE("so3_log round trip and double cover") {
  CHECK(so3_log(Quat::Identity()).norm() == 0.0);
  const Vec3 phi(0.1, -0.2, 0.3);
  CHECK((so3_log(so3_exp(phi)) - phi).norm() < 1e-10);

  const Quat q = so3_exp(Vec3(0.4, 0.1, -0.7));
  const Quat qn(-q.w(), -q.x(), -q.y(), -q.z());
  CHECK((so3_log(q) - so3_log(qn)).norm() < 1e-14);

  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    const double angle = rng.uniform(1e-6, M_PI - 0.01);
    const Vec3 phi2 = angle * Vec3(rng.unit_vector(3));
    CHECK((so3_log(so3_exp(phi2)) - phi2).norm() < 1e-10);
  }
}

TEST_CASE("omega_matrix structure and antisymmetry") {
  CHECK(omega_matrix(Vec3::Zero()).norm() == 0.0);

  const Mat4 m = omega_matrix(Vec3(0, 0, 1));
  CHECK(m(0, 1) == 1.0);
  CHECK(m(1, 0) == -1.0);
  CHECK(m(0, 3) == 0.0);
  CHECK(m(1, 3) == 0.0);
  CHECK(m(2, 3) == 1.0);
  CHECK(m(3, 0) == 0.0);
  CHECK(m(3, 1) == 0.0);
  CHECK(m(3, 2) == -1.0);
  CHECK(m(3, 3) == 0.0);

  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Mat4 o = omega_matrix(rng.gaussian3());
    CHECK((o + o.transpose()).norm() == 0.0);
  }
}

TEST_CASE("omega_matrix drives quaternion kinematics") {
  // integrating q_dot = 0.5 * Omega(w) * q (xyzw layout) matches the
  // closed-form exponential
  const Vec3 w(0.3, -0.5, 0.8);
  Vec4 q(0.0, 0.0, 0.0, 1.0);  // x y z w
  const double dt = 1e-4;
  const int steps = 10000;
  const Mat4 omega = omega_matrix(w);
  for (int i = 0; i < steps; ++i) {
    // RK4 on the linear ODE
    const Vec4 k1 = 0.5 * omega * q;
    const Vec4 k2 = 0.5 * omega * (q + 0.5 * dt * k1);
    const Vec4 k3 = 0.5 * omega * (q + 0.5 * dt * k2);
    const Vec4 k4 = 0.5 * omega * (q + dt * k3);
    q += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    q.normalize();
  }
  const Quat integrated(q(3), q(0), q(1), q(2));
  const Quat expected = so3_exp(w * dt * steps);
  CHECK(integrated.angularDistance(expected) < 1e-9);
}

TEST_CASE("huber values and variants") {
  CHECK(huber(1.0) == 1.0);
  CHECK(huber(0.25) == 0.25);
  CHECK(huber(4.0) == 3.0);
  CHECK_THROWS_AS(huber(-0.1), std::invalid_argument);

  CHECK(huber(4.0, HuberVariant::kPaperLiteral) == 1.0);
  CHECK(huber(0.25, HuberVariant::kPaperLiteral) == 0.0);

  // monotone, continuous, and below the identity
  double prev = 0.0;
  for (double s = 0.0; s < 9.0; s += 1e-3) {
    const double v = huber(s);
    CHECK(v >= prev - 1e-12);
    CHECK(v <= s + 1e-12);
    prev = v;
  }
  CHECK(std::abs(huber(1.0 - 1e-12) - huber(1.0 + 1e-12)) < 1e-9);
}

TEST_CASE("quaternion multiply matches matrix multiply") {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const Quat q1 = so3_exp(rng.gaussian3());
    const Quat q2 = so3_exp(rng.gaussian3());
    const Mat3 lhs = (q1 * q2).toRotationMatrix();
    const Mat3 rhs = q1.toRotationMatrix() * q2.toRotationMatrix();
    CHECK((lhs - rhs).norm() < 1e-10);
  }
}

TEST_CASE("quat_left/right reproduce products") {
  Rng rng(31);
  for (int i = 0; i < 50; ++i) {
    const Quat a = so3_exp(rng.gaussian3());
    const Quat b = so3_exp(rng.gaussian3());
    const Vec4 via_left = quat_left(a) * quat_coeffs_wxyz(b);
    const Vec4 via_right = quat_right(b) * quat_coeffs_wxyz(a);
    const Quat ab = a * b;
    CHECK((via_left - quat_coeffs_wxyz(ab)).norm() < 1e-12);
    CHECK((via_right - quat_coeffs_wxyz(ab)).norm() < 1e-12);
  }
}

TEST_CASE("euler zyx round trip") {
  Rng rng(37);
  for (int i = 0; i < 100; ++i) {
    const double yaw = rng.uniform(-M_PI + 0.01, M_PI - 0.01);
    const double pitch = rng.uniform(-1.4, 1.4);
    const double roll = rng.uniform(-M_PI + 0.01, M_PI - 0.01);
    const auto e = euler_zyx(quat_from_zyx(yaw, pitch, roll));
    CHECK(std::abs(wrap_angle(e.yaw - yaw)) < 1e-10);
    CHECK(std::abs(e.pitch - pitch) < 1e-10);
    CHECK(std::abs(wrap_angle(e.roll - roll)) < 1e-10);
  }
}

TEST_CASE("right jacobian consistency") {
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    const Vec3 phi = rng.gaussian3();
    const Mat3 jr = so3_right_jacobian(phi);
    const Mat3 jr_inv = so3_right_jacobian_inv(phi);
    CHECK((jr * jr_inv - Mat3::Identity()).norm() < 1e-9);
    // exp(phi + d) ~ exp(phi) * exp(Jr d)
    const Vec3 d = 1e-6 * Vec3(rng.unit_vector(3));
    const Quat lhs = so3_exp(phi + d);
    const Quat rhs = so3_exp(phi) * so3_exp(jr * d);
    CHECK(lhs.angularDistance(rhs) < 1e-12);
  }
}
