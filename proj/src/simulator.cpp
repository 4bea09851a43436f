#include "vio/simulator.hpp"

#include "vio/geometry.hpp"
#include "vio/util.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vio {

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "circle") return TrajectoryKind::kCircle;
  if (s == "figure-eight") return TrajectoryKind::kFigureEight;
  if (s == "waypoint-spline") return TrajectoryKind::kWaypointSpline;
  throw std::invalid_argument("unsupported trajectory kind '" + s + "'");
}

std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kCircle: return "circle";
    case TrajectoryKind::kFigureEight: return "figure-eight";
    case TrajectoryKind::kWaypointSpline: return "waypoint-spline";
  }
  return "?";
}

void TrajectorySpec::validate() const {
  if (duration_s <= 0.0) {
    throw std::invalid_argument("trajectory: duration must be positive");
  }
  if (imu_rate_hz < cam_rate_hz) {
    throw std::invalid_argument("trajectory: imu_rate must be >= cam_rate");
  }
  const double ratio = imu_rate_hz / cam_rate_hz;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument(
        "trajectory: imu_rate must be an integer multiple of cam_rate");
  }
  if (kind == TrajectoryKind::kWaypointSpline && waypoints.size() < 2) {
    throw std::invalid_argument(
        "trajectory: waypoint-spline needs at least two waypoints");
  }
}

int TrajectorySpec::imu_samples() const {
  return static_cast<int>(std::llround(duration_s * imu_rate_hz)) + 1;
}

int TrajectorySpec::cam_frames() const {
  return static_cast<int>(std::llround(duration_s * cam_rate_hz)) + 1;
}

int TrajectorySpec::imu_per_frame() const {
  return static_cast<int>(std::llround(imu_rate_hz / cam_rate_hz));
}

namespace {

struct PlanarKinematics {
  Vec3 p;
  Vec3 v;
  Vec3 a;
};

// Natural cubic spline over equally spaced knots.
class CubicSpline1d {
 public:
  CubicSpline1d(const std::vector<double>& y, double knot_dt) : y_(y), h_(knot_dt) {
    const int n = static_cast<int>(y.size());
    m_.assign(n, 0.0);
    if (n < 3) return;
    // Tridiagonal system for interior second derivatives, natural ends.
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
    for (int i = 1; i < n - 1; ++i) {
      a[i] = h_ / 6.0;
      b[i] = 2.0 * h_ / 3.0;
      c[i] = h_ / 6.0;
      d[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h_;
    }
    for (int i = 2; i < n - 1; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    for (int i = n - 2; i >= 1; --i) {
      m_[i] = (d[i] - c[i] * (i + 1 < n - 1 ? m_[i + 1] : 0.0)) / b[i];
    }
  }

  void eval(double t, double* y, double* dy, double* ddy) const {
    const int n = static_cast<int>(y_.size());
    int i = static_cast<int>(std::floor(t / h_));
    i = std::clamp(i, 0, n - 2);
    const double x = t - i * h_;
    const double m0 = m_[i], m1 = m_[i + 1];
    const double A = (y_[i + 1] - y_[i]) / h_ - h_ * (2.0 * m0 + m1) / 6.0;
    *y = y_[i] + A * x + 0.5 * m0 * x * x +
         (m1 - m0) * x * x * x / (6.0 * h_);
    *dy = A + m0 * x + 0.5 * (m1 - m0) * x * x / h_;
    *ddy = m0 + (m1 - m0) * x / h_;
  }

 private:
  std::vector<double> y_;
  double h_;
  std::vector<double> m_;
};

PlanarKinematics eval_position(const TrajectorySpec& spec, double t,
                               const CubicSpline1d* sx, const CubicSpline1d* sy,
                               const CubicSpline1d* sz) {
  PlanarKinematics k;
  switch (spec.kind) {
    case TrajectoryKind::kCircle: {
      const double r = spec.circle_radius_m;
      const double w = spec.circle_angular_speed;
      const double th = w * t;
      k.p = Vec3(r * std::cos(th), r * std::sin(th), spec.height_m);
      k.v = Vec3(-r * w * std::sin(th), r * w * std::cos(th), 0.0);
      k.a = Vec3(-r * w * w * std::cos(th), -r * w * w * std::sin(th), 0.0);
      break;
    }
    case TrajectoryKind::kFigureEight: {
      const double ax = spec.eight_x_amplitude_m;
      const double ay = spec.eight_y_amplitude_m;
      const double w = spec.eight_angular_speed;
      k.p = Vec3(ax * std::sin(w * t), ay * std::sin(2.0 * w * t),
                 spec.height_m);
      k.v = Vec3(ax * w * std::cos(w * t),
                 2.0 * ay * w * std::cos(2.0 * w * t), 0.0);
      k.a = Vec3(-ax * w * w * std::sin(w * t),
                 -4.0 * ay * w * w * std::sin(2.0 * w * t), 0.0);
      break;
    }
    case TrajectoryKind::kWaypointSpline: {
      double p, v, a;
      sx->eval(t, &p, &v, &a);
      k.p.x() = p;
      k.v.x() = v;
      k.a.x() = a;
      sy->eval(t, &p, &v, &a);
      k.p.y() = p;
      k.v.y() = v;
      k.a.y() = a;
      sz->eval(t, &p, &v, &a);
      k.p.z() = p;
      k.v.z() = v;
      k.a.z() = a;
      break;
    }
  }
  return k;
}

}  // namespace

std::vector<GroundTruthSample> generate_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  const int n = spec.imu_samples();
  std::vector<GroundTruthSample> out;
  out.reserve(n);

  std::unique_ptr<CubicSpline1d> sx, sy, sz;
  if (spec.kind == TrajectoryKind::kWaypointSpline) {
    const int k = static_cast<int>(spec.waypoints.size());
    const double knot_dt = spec.duration_s / (k - 1);
    std::vector<double> xs(k), ys(k), zs(k);
    for (int i = 0; i < k; ++i) {
      xs[i] = spec.waypoints[i].x();
      ys[i] = spec.waypoints[i].y();
      zs[i] = spec.waypoints[i].z();
    }
    sx = std::make_unique<CubicSpline1d>(xs, knot_dt);
    sy = std::make_unique<CubicSpline1d>(ys, knot_dt);
    sz = std::make_unique<CubicSpline1d>(zs, knot_dt);
  }

  double last_yaw = 0.0;
  constexpr double kMinSpeed2 = 1e-6;  // below this, yaw holds its value
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.imu_rate_hz;
    const auto kin = eval_position(spec, t, sx.get(), sy.get(), sz.get());
    GroundTruthSample s;
    s.t_ns = static_cast<int64_t>(std::llround(t * 1e9));
    const double speed2 =
        kin.v.x() * kin.v.x() + kin.v.y() * kin.v.y();
    double yaw = last_yaw;
    double yaw_rate = 0.0;
    if (speed2 > kMinSpeed2) {
      yaw = std::atan2(kin.v.y(), kin.v.x());
      yaw_rate = (kin.v.x() * kin.a.y() - kin.v.y() * kin.a.x()) / speed2;
    }
    last_yaw = yaw;
    s.pose = Pose(quat_from_zyx(yaw, 0.0, 0.0), kin.p);
    s.v = kin.v;
    s.w_body = Vec3(0.0, 0.0, yaw_rate);
    s.a_world = kin.a;
    out.push_back(s);
  }
  return out;
}

void SceneSpec::validate(double duration_s) const {
  for (const auto& e : events) {
    if (e.coverage_fraction < 0.0 || e.coverage_fraction > 1.0) {
      throw std::invalid_argument("scene: coverage_fraction outside [0,1]");
    }
    if (e.t_start_s < 0.0 || e.t_end_s > duration_s ||
        e.t_start_s >= e.t_end_s) {
      throw std::invalid_argument(
          "scene: blackout event outside trajectory duration");
    }
  }
  if (static_count < 0) {
    throw std::invalid_argument("scene: negative static landmark count");
  }
}

std::vector<ImuRecord> synthesize_imu(
    const std::vector<GroundTruthSample>& truth, const ImuNoiseModel& noise,
    double imu_rate_hz, uint64_t seed) {
  noise.validate();
  if (truth.size() < 2) {
    throw std::invalid_argument("synthesize_imu: need at least two samples");
  }
  const double dt = 1.0 / imu_rate_hz;
  for (size_t i = 0; i + 1 < truth.size(); ++i) {
    const double step = (truth[i + 1].t_ns - truth[i].t_ns) * 1e-9;
    if (std::abs(step - dt) > 1e-7) {
      throw std::invalid_argument(
          "synthesize_imu: truth is not sampled at the configured IMU rate");
    }
  }

  const Mat3 gyro_inv = (noise.gyro_scale * noise.gyro_misalignment).inverse();
  const Mat3 accel_inv =
      (noise.accel_scale * noise.accel_misalignment).inverse();

  Rng rng(hash_combine(seed, 0x1b5u));
  Rng bias_rng(hash_combine(noise.bias_seed ? noise.bias_seed : seed, 0xb1a5u));
  Vec3 bg = noise.gyro_bias_init > 0.0
                ? Vec3(noise.gyro_bias_init * Vec3(bias_rng.unit_vector(3)))
                : Vec3::Zero();
  Vec3 ba = noise.accel_bias_init > 0.0
                ? Vec3(noise.accel_bias_init * Vec3(bias_rng.unit_vector(3)))
                : Vec3::Zero();
  const double gw = noise.gyro_white_sigma / std::sqrt(dt);
  const double aw = noise.accel_white_sigma / std::sqrt(dt);
  const double gwalk = noise.gyro_walk_sigma * std::sqrt(dt);
  const double awalk = noise.accel_walk_sigma * std::sqrt(dt);

  std::vector<ImuRecord> out;
  out.reserve(truth.size());
  for (const auto& s : truth) {
    const Vec3 f_body =
        s.pose.q.conjugate() * (s.a_world - kGravityWorld);
    ImuRecord rec;
    rec.t_ns = s.t_ns;
    rec.w = gyro_inv * s.w_body + bg + gw * rng.gaussian3();
    rec.a = accel_inv * f_body + ba + aw * rng.gaussian3();
    out.push_back(rec);
    bg += gwalk * rng.gaussian3();
    ba += awalk * rng.gaussian3();
  }
  return out;
}

namespace {

struct ScenePoint {
  int64_t id;
  Vec3 base;           // world position at t = 0
  int label;           // 0 static, 1 dynamic
  int cluster = -1;    // index into clusters, -1 for static landmarks
};

Vec3 cluster_offset(const DynamicClusterSpec& c, double t) {
  if (c.motion == "none") return Vec3::Zero();
  if (c.motion == "linear") return c.velocity * t;
  if (c.motion == "orbit") {
    return Vec3(c.orbit_radius_m * (std::cos(c.orbit_rate * t) - 1.0),
                c.orbit_radius_m * std::sin(c.orbit_rate * t), 0.0);
  }
  throw std::invalid_argument("unknown cluster motion '" + c.motion + "'");
}

}  // namespace

ProjectedTracks project_tracks(const std::vector<GroundTruthSample>& truth,
                               const TrajectorySpec& traj,
                               const SceneSpec& scene, const CameraModel& cam,
                               double pixel_sigma, uint64_t seed) {
  cam.validate();
  scene.validate(traj.duration_s);
  const int frames = traj.cam_frames();
  const int ipf = traj.imu_per_frame();

  Rng place_rng(hash_combine(seed, 0x57a71cu));
  std::vector<ScenePoint> points;
  points.reserve(scene.static_count);
  for (int i = 0; i < scene.static_count; ++i) {
    ScenePoint sp;
    sp.id = i;
    sp.label = 0;
    for (int k = 0; k < 3; ++k) {
      sp.base[k] = place_rng.uniform(scene.bbox_min[k], scene.bbox_max[k]);
    }
    points.push_back(sp);
  }
  for (size_t c = 0; c < scene.clusters.size(); ++c) {
    const auto& cl = scene.clusters[c];
    Rng crng(hash_combine(seed, hash_combine(0xc1u, c)));
    for (int j = 0; j < cl.count; ++j) {
      ScenePoint sp;
      sp.id = 100000 + static_cast<int64_t>(c) * 1000 + j;
      sp.label = 1;
      sp.cluster = static_cast<int>(c);
      for (int k = 0; k < 3; ++k) {
        sp.base[k] = cl.center[k] + crng.uniform(-0.5, 0.5) * cl.extent_m;
      }
      points.push_back(sp);
    }
  }

  // Per-event suppressed subsets (fixed for the whole event).
  std::vector<std::set<int64_t>> suppressed(scene.events.size());
  for (size_t e = 0; e < scene.events.size(); ++e) {
    Rng erng(hash_combine(seed, hash_combine(0xe7u, e)));
    const auto perm = erng.permutation(static_cast<int>(points.size()));
    const int n_hide = static_cast<int>(
        std::floor(scene.events[e].coverage_fraction * points.size() + 0.5));
    for (int k = 0; k < n_hide; ++k) {
      suppressed[e].insert(points[perm[k]].id);
    }
  }

  // Occluder grid in camera coordinates, spanning slightly past the FOV.
  const double xn_max = std::max(cam.cx, cam.width - 1 - cam.cx) / cam.fx;
  const double yn_max = std::max(cam.cy, cam.height - 1 - cam.cy) / cam.fy;
  std::vector<Vec3> occ_grid;
  for (int gy = 0; gy < scene.occluder_grid_y; ++gy) {
    for (int gx = 0; gx < scene.occluder_grid_x; ++gx) {
      const double fx = scene.occluder_grid_x > 1
                            ? static_cast<double>(gx) / (scene.occluder_grid_x - 1)
                            : 0.5;
      const double fy = scene.occluder_grid_y > 1
                            ? static_cast<double>(gy) / (scene.occluder_grid_y - 1)
                            : 0.5;
      occ_grid.emplace_back((2.0 * fx - 1.0) * 1.05 * xn_max *
                                scene.occluder_depth_m,
                            (2.0 * fy - 1.0) * 1.05 * yn_max *
                                scene.occluder_depth_m,
                            scene.occluder_depth_m);
    }
  }

  ProjectedTracks out;
  out.frames.resize(frames);
  out.mask_sources.assign(frames,
                          MaskSource{{}, scene.mask_disk_radius_px});

  for (int f = 0; f < frames; ++f) {
    const auto& gt = truth[static_cast<size_t>(f) * ipf];
    const double t = gt.t_ns * 1e-9;
    const Pose cam_pose = gt.pose * cam.cam_in_body;  // camera in world
    const Pose world_in_cam = cam_pose.inverse();

    int active_event = -1;
    for (size_t e = 0; e < scene.events.size(); ++e) {
      if (t >= scene.events[e].t_start_s && t <= scene.events[e].t_end_s) {
        active_event = static_cast<int>(e);
        break;
      }
    }

    auto emit = [&](int64_t id, const Vec3& x_world, int label) {
      const Vec3 x_cam = world_in_cam.act(x_world);
      if (x_cam.z() < 0.15) return;
      const Vec2 clean = cam.project(x_cam);
      if (!cam.in_bounds(clean, 1.0)) return;
      if (label == 1) {
        out.mask_sources[f].dynamic_px.push_back(clean);
      }
      Vec2 px = clean;
      if (pixel_sigma > 0.0) {
        Rng obs_rng(hash_combine(seed,
                                 hash_combine(0x9bu,
                                              hash_combine(f, id))));
        px.x() += pixel_sigma * obs_rng.gaussian();
        px.y() += pixel_sigma * obs_rng.gaussian();
      }
      if (!cam.in_bounds(px, 0.0)) return;
      TrackObs obs;
      obs.frame_id = f;
      obs.t_ns = gt.t_ns;
      obs.kp_id = id;
      obs.u = px.x();
      obs.v = px.y();
      obs.semantic_label = label;
      out.frames[f].push_back(obs);
    };

    for (const auto& sp : points) {
      if (active_event >= 0 && suppressed[active_event].count(sp.id)) continue;
      Vec3 x = sp.base;
      if (sp.cluster >= 0) {
        x += cluster_offset(scene.clusters[sp.cluster], t);
      }
      emit(sp.id, x, sp.label);
    }

    if (active_event >= 0) {
      const auto& ev = scene.events[active_event];
      const double tau = t - ev.t_start_s;
      const double ph = 2.0 * M_PI * tau / scene.occluder_osc_period_s;
      const Vec3 osc(scene.occluder_osc_amplitude_m * std::sin(ph),
                     0.4 * scene.occluder_osc_amplitude_m * std::sin(2.0 * ph),
                     0.0);
      for (size_t j = 0; j < occ_grid.size(); ++j) {
        const Vec3 x_world = cam_pose.act(occ_grid[j] + osc);
        emit(500000 + static_cast<int64_t>(active_event) * 1000 +
                 static_cast<int64_t>(j),
             x_world, 1);
      }
    }
  }
  return out;
}

namespace {

std::string vec3_str(const Vec3& v) {
  return format_double(v.x()) + " " + format_double(v.y()) + " " +
         format_double(v.z());
}

Vec3 parse_vec3(const std::string& s, const std::string& ctx) {
  std::istringstream is(s);
  std::string a, b, c;
  if (!(is >> a >> b >> c)) {
    throw std::invalid_argument(ctx + ": expected three numbers, got '" + s +
                                "'");
  }
  return Vec3(parse_double(a, ctx), parse_double(b, ctx), parse_double(c, ctx));
}

std::string mat3_str(const Mat3& m) {
  std::string s;
  for (int i = 0; i < 9; ++i) {
    if (i) s += " ";
    s += format_double(m(i / 3, i % 3));
  }
  return s;
}

Mat3 parse_mat3(const std::string& s, const std::string& ctx) {
  std::istringstream is(s);
  Mat3 m;
  for (int i = 0; i < 9; ++i) {
    std::string tok;
    if (!(is >> tok)) {
      throw std::invalid_argument(ctx + ": expected nine numbers");
    }
    m(i / 3, i % 3) = parse_double(tok, ctx);
  }
  return m;
}

std::string pose_str(const Pose& p) {
  return vec3_str(p.p) + " " + format_double(p.q.w()) + " " +
         format_double(p.q.x()) + " " + format_double(p.q.y()) + " " +
         format_double(p.q.z());
}

Pose parse_pose(const std::string& s, const std::string& ctx) {
  std::istringstream is(s);
  std::vector<double> v;
  std::string tok;
  while (is >> tok) v.push_back(parse_double(tok, ctx));
  if (v.size() != 7) {
    throw std::invalid_argument(ctx + ": expected px py pz qw qx qy qz");
  }
  return Pose(Quat(v[3], v[4], v[5], v[6]), Vec3(v[0], v[1], v[2]));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> ScenarioSpec::to_kv() const {
  std::vector<std::pair<std::string, std::string>> kv;
  auto add = [&](const std::string& k, const std::string& v) {
    kv.emplace_back(k, v);
  };
  add("kind", to_string(traj.kind));
  add("duration_s", format_double(traj.duration_s));
  add("imu_rate_hz", format_double(traj.imu_rate_hz));
  add("cam_rate_hz", format_double(traj.cam_rate_hz));
  add("seed", std::to_string(traj.seed));
  add("circle_radius_m", format_double(traj.circle_radius_m));
  add("circle_angular_speed", format_double(traj.circle_angular_speed));
  add("eight_x_amplitude_m", format_double(traj.eight_x_amplitude_m));
  add("eight_y_amplitude_m", format_double(traj.eight_y_amplitude_m));
  add("eight_angular_speed", format_double(traj.eight_angular_speed));
  add("height_m", format_double(traj.height_m));
  if (!traj.waypoints.empty()) {
    std::string w;
    for (size_t i = 0; i < traj.waypoints.size(); ++i) {
      if (i) w += ";";
      w += vec3_str(traj.waypoints[i]);
    }
    add("waypoints", w);
  }
  add("noise_gyro_scale", mat3_str(noise.gyro_scale));
  add("noise_gyro_misalignment", mat3_str(noise.gyro_misalignment));
  add("noise_accel_scale", mat3_str(noise.accel_scale));
  add("noise_accel_misalignment", mat3_str(noise.accel_misalignment));
  add("noise_gyro_bias_init", format_double(noise.gyro_bias_init));
  add("noise_accel_bias_init", format_double(noise.accel_bias_init));
  add("noise_bias_seed", std::to_string(noise.bias_seed));
  add("noise_gyro_white", format_double(noise.gyro_white_sigma));
  add("noise_accel_white", format_double(noise.accel_white_sigma));
  add("noise_gyro_walk", format_double(noise.gyro_walk_sigma));
  add("noise_accel_walk", format_double(noise.accel_walk_sigma));
  add("scene_static_count", std::to_string(scene.static_count));
  add("scene_bbox_min", vec3_str(scene.bbox_min));
  add("scene_bbox_max", vec3_str(scene.bbox_max));
  add("scene_mask_radius_px", format_double(scene.mask_disk_radius_px));
  add("occluder_grid_x", std::to_string(scene.occluder_grid_x));
  add("occluder_grid_y", std::to_string(scene.occluder_grid_y));
  add("occluder_depth_m", format_double(scene.occluder_depth_m));
  add("occluder_osc_amplitude_m", format_double(scene.occluder_osc_amplitude_m));
  add("occluder_osc_period_s", format_double(scene.occluder_osc_period_s));
  for (size_t i = 0; i < scene.clusters.size(); ++i) {
    const auto& c = scene.clusters[i];
    const std::string p = "cluster" + std::to_string(i) + "_";
    add(p + "count", std::to_string(c.count));
    add(p + "motion", c.motion);
    add(p + "center", vec3_str(c.center));
    add(p + "extent_m", format_double(c.extent_m));
    add(p + "velocity", vec3_str(c.velocity));
    add(p + "orbit_radius_m", format_double(c.orbit_radius_m));
    add(p + "orbit_rate", format_double(c.orbit_rate));
  }
  for (size_t i = 0; i < scene.events.size(); ++i) {
    const std::string p = "event" + std::to_string(i) + "_";
    add(p + "start_s", format_double(scene.events[i].t_start_s));
    add(p + "end_s", format_double(scene.events[i].t_end_s));
    add(p + "coverage", format_double(scene.events[i].coverage_fraction));
  }
  add("cam_fx", format_double(camera.fx));
  add("cam_fy", format_double(camera.fy));
  add("cam_cx", format_double(camera.cx));
  add("cam_cy", format_double(camera.cy));
  add("cam_width", std::to_string(camera.width));
  add("cam_height", std::to_string(camera.height));
  add("cam_in_body", pose_str(camera.cam_in_body));
  add("pixel_sigma_px", format_double(pixel_sigma_px));
  return kv;
}

ScenarioSpec ScenarioSpec::from_kv(
    const std::vector<std::pair<std::string, std::string>>& kv) {
  ScenarioSpec s;
  auto cluster_at = [&](size_t i) -> DynamicClusterSpec& {
    if (s.scene.clusters.size() <= i) s.scene.clusters.resize(i + 1);
    return s.scene.clusters[i];
  };
  auto event_at = [&](size_t i) -> BlackoutEvent& {
    if (s.scene.events.size() <= i) s.scene.events.resize(i + 1);
    return s.scene.events[i];
  };

  for (const auto& [k, v] : kv) {
    const std::string ctx = "scenario key " + k;
    if (k == "kind") s.traj.kind = trajectory_kind_from_string(v);
    else if (k == "duration_s") s.traj.duration_s = parse_double(v, ctx);
    else if (k == "imu_rate_hz") s.traj.imu_rate_hz = parse_double(v, ctx);
    else if (k == "cam_rate_hz") s.traj.cam_rate_hz = parse_double(v, ctx);
    else if (k == "seed") s.traj.seed = static_cast<uint64_t>(parse_i64(v, ctx));
    else if (k == "circle_radius_m") s.traj.circle_radius_m = parse_double(v, ctx);
    else if (k == "circle_angular_speed") s.traj.circle_angular_speed = parse_double(v, ctx);
    else if (k == "eight_x_amplitude_m") s.traj.eight_x_amplitude_m = parse_double(v, ctx);
    else if (k == "eight_y_amplitude_m") s.traj.eight_y_amplitude_m = parse_double(v, ctx);
    else if (k == "eight_angular_speed") s.traj.eight_angular_speed = parse_double(v, ctx);
    else if (k == "height_m") s.traj.height_m = parse_double(v, ctx);
    else if (k == "waypoints") {
      s.traj.waypoints.clear();
      std::string rest = v;
      while (!rest.empty()) {
        const auto semi = rest.find(';');
        const std::string part = rest.substr(0, semi);
        s.traj.waypoints.push_back(parse_vec3(part, ctx));
        rest = semi == std::string::npos ? "" : rest.substr(semi + 1);
      }
    }
    else if (k == "noise_gyro_scale") s.noise.gyro_scale = parse_mat3(v, ctx);
    else if (k == "noise_gyro_misalignment") s.noise.gyro_misalignment = parse_mat3(v, ctx);
    else if (k == "noise_accel_scale") s.noise.accel_scale = parse_mat3(v, ctx);
    else if (k == "noise_accel_misalignment") s.noise.accel_misalignment = parse_mat3(v, ctx);
    else if (k == "noise_gyro_bias_init") s.noise.gyro_bias_init = parse_double(v, ctx);
    else if (k == "noise_accel_bias_init") s.noise.accel_bias_init = parse_double(v, ctx);
    else if (k == "noise_bias_seed") s.noise.bias_seed = static_cast<uint64_t>(parse_i64(v, ctx));
    else if (k == "noise_gyro_white") s.noise.gyro_white_sigma = parse_double(v, ctx);
    else if (k == "noise_accel_white") s.noise.accel_white_sigma = parse_double(v, ctx);
    else if (k == "noise_gyro_walk") s.noise.gyro_walk_sigma = parse_double(v, ctx);
    else if (k == "noise_accel_walk") s.noise.accel_walk_sigma = parse_double(v, ctx);
    else if (k == "scene_static_count") s.scene.static_count = static_cast<int>(parse_i64(v, ctx));
    else if (k == "scene_bbox_min") s.scene.bbox_min = parse_vec3(v, ctx);
    else if (k == "scene_bbox_max") s.scene.bbox_max = parse_vec3(v, ctx);
    else if (k == "scene_mask_radius_px") s.scene.mask_disk_radius_px = parse_double(v, ctx);
    else if (k == "occluder_grid_x") s.scene.occluder_grid_x = static_cast<int>(parse_i64(v, ctx));
    else if (k == "occluder_grid_y") s.scene.occluder_grid_y = static_cast<int>(parse_i64(v, ctx));
    else if (k == "occluder_depth_m") s.scene.occluder_depth_m = parse_double(v, ctx);
    else if (k == "occluder_osc_amplitude_m") s.scene.occluder_osc_amplitude_m = parse_double(v, ctx);
    else if (k == "occluder_osc_period_s") s.scene.occluder_osc_period_s = parse_double(v, ctx);
    else if (k.rfind("cluster", 0) == 0) {
      const auto us = k.find('_');
      const size_t idx = static_cast<size_t>(
          parse_i64(k.substr(7, us - 7), ctx));
      const std::string field = k.substr(us + 1);
      auto& c = cluster_at(idx);
      if (field == "count") c.count = static_cast<int>(parse_i64(v, ctx));
      else if (field == "motion") c.motion = v;
      else if (field == "center") c.center = parse_vec3(v, ctx);
      else if (field == "extent_m") c.extent_m = parse_double(v, ctx);
      else if (field == "velocity") c.velocity = parse_vec3(v, ctx);
      else if (field == "orbit_radius_m") c.orbit_radius_m = parse_double(v, ctx);
      else if (field == "orbit_rate") c.orbit_rate = parse_double(v, ctx);
      else throw std::invalid_argument("unknown scenario key '" + k + "'");
    }
    else if (k.rfind("event", 0) == 0) {
      const auto us = k.find('_');
      const size_t idx = static_cast<size_t>(parse_i64(k.substr(5, us - 5), ctx));
      const std::string field = k.substr(us + 1);
      auto& e = event_at(idx);
      if (field == "start_s") e.t_start_s = parse_double(v, ctx);
      else if (field == "end_s") e.t_end_s = parse_double(v, ctx);
      else if (field == "coverage") e.coverage_fraction = parse_double(v, ctx);
      else throw std::invalid_argument("unknown scenario key '" + k + "'");
    }
    else if (k == "cam_fx") s.camera.fx = parse_double(v, ctx);
    else if (k == "cam_fy") s.camera.fy = parse_double(v, ctx);
    else if (k == "cam_cx") s.camera.cx = parse_double(v, ctx);
    else if (k == "cam_cy") s.camera.cy = parse_double(v, ctx);
    else if (k == "cam_width") s.camera.width = static_cast<int>(parse_i64(v, ctx));
    else if (k == "cam_height") s.camera.height = static_cast<int>(parse_i64(v, ctx));
    else if (k == "cam_in_body") s.camera.cam_in_body = parse_pose(v, ctx);
    else if (k == "pixel_sigma_px") s.pixel_sigma_px = parse_double(v, ctx);
    else throw std::invalid_argument("unknown scenario key '" + k + "'");
  }
  return s;
}

ScenarioSpec ScenarioSpec::from_file(const std::string& path) {
  return from_kv(read_kv_file(path));
}

Dataset simulate_scenario(const ScenarioSpec& spec) {
  spec.traj.validate();
  spec.noise.validate();
  spec.camera.validate();
  spec.scene.validate(spec.traj.duration_s);

  const auto truth = generate_trajectory(spec.traj);
  Dataset ds;
  ds.imu = synthesize_imu(truth, spec.noise, spec.traj.imu_rate_hz,
                          spec.traj.seed);
  ds.groundtruth.reserve(truth.size());
  for (const auto& s : truth) {
    GroundTruthRecord g;
    g.t_ns = s.t_ns;
    g.p = s.pose.p;
    g.q = s.pose.q;
    g.v = s.v;
    ds.groundtruth.push_back(g);
  }
  auto tracks = project_tracks(truth, spec.traj, spec.scene, spec.camera,
                               spec.pixel_sigma_px, spec.traj.seed);
  ds.frames = std::move(tracks.frames);
  ds.mask_sources = std::move(tracks.mask_sources);
  ds.frame_t_ns.resize(ds.frames.size());
  const int ipf = spec.traj.imu_per_frame();
  for (size_t f = 0; f < ds.frames.size(); ++f) {
    ds.frame_t_ns[f] = truth[f * ipf].t_ns;
  }
  ds.camera = spec.camera;
  ds.noise = spec.noise;
  ds.scenario_kv = spec.to_kv();
  return ds;
}

}  // namespace vio
