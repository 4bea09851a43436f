#pragma once

// Synthetic scenes shared by the frontend/optimizer tests and the
// acceptance suite.

#include "vio/dataset.hpp"
#include "vio/frontend.hpp"
#include "vio/geometry.hpp"
#include "vio/optimizer.hpp"
#include "vio/preintegration.hpp"
#include "vio/simulator.hpp"
#include "vio/util.hpp"

#include <map>
#include <vector>

namespace vio::testing {

enum PointGroup { kStaticPt = 0, kSteadyPt = 1, kMovingPt = 2 };

struct TwoViewScene {
  CameraModel cam;
  Pose cam0;  // camera pose in world for frame 0
  Pose cam1;
  std::vector<Correspondence> corr;
  std::vector<int> group;  // parallel to corr
  SemanticMask mask;       // current-frame mask: steady+moving are dynamic
};

inline TwoViewScene make_two_view_scene(uint64_t seed, int n_static,
                                        int n_steady, int n_moving,
                                        double pixel_noise,
                                        const Vec3& move_shift) {
  Rng rng(hash_combine(seed, 0x535cu));
  TwoViewScene s;
  s.cam0 = Pose::Identity();
  s.cam1 = Pose(so3_exp(Vec3(0.01, -0.02, 0.015)), Vec3(0.3, 0.05, 0.08));

  MaskSource mask_src;
  mask_src.radius_px = 12.0;

  auto add_point = [&](const Vec3& x0, const Vec3& x1, int group,
                       int64_t id) {
    const Vec3 c0 = s.cam0.inverse().act(x0);
    const Vec3 c1 = s.cam1.inverse().act(x1);
    if (c0.z() < 0.2 || c1.z() < 0.2) return;
    Vec2 p0 = s.cam.project(c0);
    Vec2 p1 = s.cam.project(c1);
    if (!s.cam.in_bounds(p0, 2.0) || !s.cam.in_bounds(p1, 2.0)) return;
    if (group != kStaticPt) mask_src.dynamic_px.push_back(p1);
    if (pixel_noise > 0.0) {
      p0 += pixel_noise * Vec2(rng.gaussian(), rng.gaussian());
      p1 += pixel_noise * Vec2(rng.gaussian(), rng.gaussian());
    }
    s.corr.push_back(make_correspondence(id, p0, p1, s.cam));
    s.group.push_back(group);
  };

  int64_t id = 0;
  for (int i = 0; i < n_static; ++i) {
    const Vec3 x(rng.uniform(-2.5, 2.5), rng.uniform(-1.8, 1.8),
                 rng.uniform(3.0, 9.0));
    add_point(x, x, kStaticPt, id++);
  }
  for (int i = 0; i < n_steady; ++i) {
    const Vec3 x(rng.uniform(1.0, 2.2), rng.uniform(-0.5, 0.5),
                 rng.uniform(4.0, 6.0));
    add_point(x, x, kSteadyPt, 10000 + id++);
  }
  for (int i = 0; i < n_moving; ++i) {
    const Vec3 x(rng.uniform(-2.2, -1.0), rng.uniform(-0.5, 0.5),
                 rng.uniform(4.0, 6.0));
    add_point(x, x + move_shift, kMovingPt, 20000 + id++);
  }

  s.mask.width = s.cam.width;
  s.mask.height = s.cam.height;
  s.mask.data = rasterize_mask(s.cam.width, s.cam.height, mask_src);
  return s;
}

inline ScenarioSpec noiseless_circle_scenario(double duration_s = 3.0,
                                              uint64_t seed = 42) {
  ScenarioSpec s;
  s.traj.kind = TrajectoryKind::kCircle;
  s.traj.duration_s = duration_s;
  s.traj.imu_rate_hz = 200.0;
  s.traj.cam_rate_hz = 10.0;
  s.traj.seed = seed;
  s.traj.circle_radius_m = 2.0;
  s.traj.circle_angular_speed = 0.35;
  s.scene.static_count = 250;
  s.pixel_sigma_px = 0.0;
  s.noise.gyro_white_sigma = 0.0;
  s.noise.accel_white_sigma = 0.0;
  s.noise.gyro_walk_sigma = 0.0;
  s.noise.accel_walk_sigma = 0.0;
  return s;
}

// Builds an exactly-consistent sliding window from a dataset: ground-truth
// states, preintegrated deltas over the frame intervals, and feature tracks
// with bearings back-projected from the stored pixels.
inline SlidingWindow make_window_from_dataset(const Dataset& ds,
                                              int first_frame, int num_frames,
                                              const ImuNoiseDensities& dens) {
  SlidingWindow w;
  w.extrinsic = ds.camera.cam_in_body;
  const int ipf =
      static_cast<int>((ds.frame_t_ns[1] - ds.frame_t_ns[0]) /
                       (ds.imu[1].t_ns - ds.imu[0].t_ns));
  for (int k = 0; k < num_frames; ++k) {
    const auto& gt = ds.gt_at_frame(first_frame + k);
    BodyState st;
    st.p = gt.p;
    st.q = gt.q;
    st.v = gt.v;
    w.states.push_back(st);
    if (k > 0) {
      PreintegrationBuffer buf;
      const int i0 = (first_frame + k - 1) * ipf;
      const int i1 = (first_frame + k) * ipf;
      for (int i = i0; i <= i1; ++i) {
        buf.samples.push_back({ds.imu[i].t_ns, ds.imu[i].w, ds.imu[i].a});
      }
      ImuEdge edge;
      edge.delta = propagate(buf, dens);
      w.imu_edges.push_back(edge);
    }
  }
  w.psi_c.assign(num_frames, 1.0);

  std::map<int64_t, FeatureTrack> tracks;
  for (int k = 0; k < num_frames; ++k) {
    for (const auto& obs : ds.frames[first_frame + k]) {
      if (obs.semantic_label != 0) continue;
      FeatureObsW o;
      o.frame = k;
      o.px = Vec2(obs.u, obs.v);
      o.bearing = back_project(o.px, ds.camera);
      auto& tr = tracks[obs.kp_id];
      if (tr.obs.empty()) {
        tr.id = obs.kp_id;
        tr.anchor_frame = k;
      }
      tr.obs.push_back(o);
    }
  }
  for (auto& [id, tr] : tracks) {
    if (tr.obs.size() < 2) continue;
    const auto inv_depth = triangulate(tr, w.states, w.extrinsic);
    if (!inv_depth) continue;
    tr.inv_depth = *inv_depth;
    tr.valid = true;
    w.tracks.push_back(tr);
  }
  return w;
}

}  // namespace vio::testing
