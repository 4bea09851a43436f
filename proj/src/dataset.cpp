#include "vio/dataset.hpp"

#include "vio/util.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace vio {

namespace fs = std::filesystem;

void CameraModel::validate() const {
  if (fx <= 0.0 || fy <= 0.0) {
    throw std::invalid_argument("camera: focal lengths must be positive");
  }
  if (cx <= 0.0 || cx >= width || cy <= 0.0 || cy >= height) {
    throw std::invalid_argument("camera: principal point outside image");
  }
}

Vec3 back_project(const Vec2& px, const CameraModel& cam) {
  Vec3 ray((px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy, 1.0);
  return ray.normalized();
}

void ImuNoiseModel::validate() const {
  for (const Mat3* s : {&gyro_scale, &accel_scale}) {
    for (int i = 0; i < 3; ++i) {
      if ((*s)(i, i) <= 0.0) {
        throw std::invalid_argument("imu noise: scale diagonal must be > 0");
      }
    }
  }
  for (const Mat3* m : {&gyro_misalignment, &accel_misalignment}) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (i == j) continue;
        if (std::abs((*m)(i, j)) >= 0.1) {
          throw std::invalid_argument(
              "imu noise: misalignment off-diagonals must stay below 0.1");
        }
      }
    }
  }
}

bool ImuNoiseModel::is_noiseless() const {
  return gyro_bias_init == 0.0 && accel_bias_init == 0.0 &&
         gyro_white_sigma == 0.0 && accel_white_sigma == 0.0 &&
         gyro_walk_sigma == 0.0 && accel_walk_sigma == 0.0;
}

std::vector<uint8_t> rasterize_mask(int width, int height,
                                    const MaskSource& source) {
  std::vector<uint8_t> px(static_cast<size_t>(width) * height, 255);
  const double r = source.radius_px;
  const double r2 = r * r;
  for (const Vec2& c : source.dynamic_px) {
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - r)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(c.x() + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - r)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(c.y() + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - c.x();
        const double dy = y - c.y();
        if (dx * dx + dy * dy <= r2) {
          px[static_cast<size_t>(y) * width + x] = 0;
        }
      }
    }
  }
  return px;
}

std::vector<uint8_t> Dataset::mask(int frame_id) const {
  if (frame_id < 0 || frame_id >= num_frames()) {
    throw std::out_of_range("dataset: mask frame_id out of range");
  }
  if (!dir.empty()) {
    int w = 0, h = 0;
    auto px = read_pgm(dir + "/masks/frame_" + std::to_string(frame_id) +
                           ".pgm",
                       &w, &h);
    if (w != camera.width || h != camera.height) {
      throw std::runtime_error("dataset: mask resolution mismatch for frame " +
                               std::to_string(frame_id));
    }
    return px;
  }
  return rasterize_mask(camera.width, camera.height, mask_sources[frame_id]);
}

const GroundTruthRecord& Dataset::gt_at_frame(int frame_id) const {
  const int64_t t = frame_t_ns[frame_id];
  // frames align with IMU samples; locate by timestamp
  const size_t n = groundtruth.size();
  size_t lo = 0, hi = n;
  while (lo < hi) {
    const size_t mid = (lo + hi) / 2;
    if (groundtruth[mid].t_ns < t) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo >= n || groundtruth[lo].t_ns != t) {
    throw std::runtime_error("dataset: no ground truth at frame timestamp " +
                             std::to_string(t));
  }
  return groundtruth[lo];
}

void write_dataset(const Dataset& ds, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/masks");

  {
    CsvWriter w(out_dir + "/imu.csv", "t_ns,wx,wy,wz,ax,ay,az");
    for (const auto& s : ds.imu) {
      w.row({std::to_string(s.t_ns), format_double(s.w.x()),
             format_double(s.w.y()), format_double(s.w.z()),
             format_double(s.a.x()), format_double(s.a.y()),
             format_double(s.a.z())});
    }
  }
  {
    CsvWriter w(out_dir + "/tracks.csv",
                "frame_id,t_ns,kp_id,u_px,v_px,semantic_label");
    for (const auto& frame : ds.frames) {
      for (const auto& t : frame) {
        w.row({std::to_string(t.frame_id), std::to_string(t.t_ns),
               std::to_string(t.kp_id), format_double(t.u), format_double(t.v),
               std::to_string(t.semantic_label)});
      }
    }
  }
  {
    CsvWriter w(out_dir + "/groundtruth.csv",
                "t_ns,px,py,pz,qw,qx,qy,qz,vx,vy,vz");
    for (const auto& g : ds.groundtruth) {
      w.row({std::to_string(g.t_ns), format_double(g.p.x()),
             format_double(g.p.y()), format_double(g.p.z()),
             format_double(g.q.w()), format_double(g.q.x()),
             format_double(g.q.y()), format_double(g.q.z()),
             format_double(g.v.x()), format_double(g.v.y()),
             format_double(g.v.z())});
    }
  }
  {
    CsvWriter w(out_dir + "/calib.csv", "fx,fy,cx,cy,width,height");
    const auto& c = ds.camera;
    w.row({format_double(c.fx), format_double(c.fy), format_double(c.cx),
           format_double(c.cy), std::to_string(c.width),
           std::to_string(c.height)});
    const Pose& e = c.cam_in_body;
    w.row({format_double(e.p.x()), format_double(e.p.y()),
           format_double(e.p.z()), format_double(e.q.w()),
           format_double(e.q.x()), format_double(e.q.y()),
           format_double(e.q.z())});
    w.row({format_double(ds.noise.gyro_white_sigma),
           format_double(ds.noise.accel_white_sigma),
           format_double(ds.noise.gyro_walk_sigma),
           format_double(ds.noise.accel_walk_sigma)});
  }
  write_kv_file(out_dir + "/scenario.toml", ds.scenario_kv);

  for (int f = 0; f < ds.num_frames(); ++f) {
    write_pgm(out_dir + "/masks/frame_" + std::to_string(f) + ".pgm",
              ds.camera.width, ds.camera.height, ds.mask(f));
  }
}

Dataset read_dataset(const std::string& in_dir) {
  Dataset ds;
  ds.dir = in_dir;

  {
    auto csv = read_csv(in_dir + "/imu.csv", 7);
    ds.imu.reserve(csv.rows.size());
    for (size_t i = 0; i < csv.rows.size(); ++i) {
      const auto& r = csv.rows[i];
      const std::string ctx =
          csv.path + ":" + std::to_string(csv.line_numbers[i]);
      ImuRecord rec;
      rec.t_ns = parse_i64(r[0], ctx);
      rec.w = Vec3(parse_double(r[1], ctx), parse_double(r[2], ctx),
                   parse_double(r[3], ctx));
      rec.a = Vec3(parse_double(r[4], ctx), parse_double(r[5], ctx),
                   parse_double(r[6], ctx));
      ds.imu.push_back(rec);
    }
  }
  {
    auto csv = read_csv(in_dir + "/groundtruth.csv", 11);
    for (size_t i = 0; i < csv.rows.size(); ++i) {
      const auto& r = csv.rows[i];
      const std::string ctx =
          csv.path + ":" + std::to_string(csv.line_numbers[i]);
      GroundTruthRecord g;
      g.t_ns = parse_i64(r[0], ctx);
      g.p = Vec3(parse_double(r[1], ctx), parse_double(r[2], ctx),
                 parse_double(r[3], ctx));
      g.q = Quat(parse_double(r[4], ctx), parse_double(r[5], ctx),
                 parse_double(r[6], ctx), parse_double(r[7], ctx));
      g.v = Vec3(parse_double(r[8], ctx), parse_double(r[9], ctx),
                 parse_double(r[10], ctx));
      ds.groundtruth.push_back(g);
    }
  }
  {
    auto csv = read_csv(in_dir + "/tracks.csv", 6);
    for (size_t i = 0; i < csv.rows.size(); ++i) {
      const auto& r = csv.rows[i];
      const std::string ctx =
          csv.path + ":" + std::to_string(csv.line_numbers[i]);
      TrackObs t;
      t.frame_id = static_cast<int>(parse_i64(r[0], ctx));
      t.t_ns = parse_i64(r[1], ctx);
      t.kp_id = parse_i64(r[2], ctx);
      t.u = parse_double(r[3], ctx);
      t.v = parse_double(r[4], ctx);
      t.semantic_label = static_cast<int>(parse_i64(r[5], ctx));
      if (t.frame_id < 0) throw std::runtime_error(ctx + ": negative frame id");
      if (t.frame_id >= static_cast<int>(ds.frames.size())) {
        ds.frames.resize(t.frame_id + 1);
        ds.frame_t_ns.resize(t.frame_id + 1, 0);
      }
      ds.frames[t.frame_id].push_back(t);
      ds.frame_t_ns[t.frame_id] = t.t_ns;
    }
  }
  {
    auto csv = read_csv(in_dir + "/calib.csv");
    if (csv.rows.size() < 3) {
      throw std::runtime_error(csv.path + ": expected 3 calibration rows");
    }
    const std::string ctx = csv.path;
    const auto& r0 = csv.rows[0];
    if (r0.size() != 6) throw std::runtime_error(ctx + ":2: bad intrinsics row");
    ds.camera.fx = parse_double(r0[0], ctx);
    ds.camera.fy = parse_double(r0[1], ctx);
    ds.camera.cx = parse_double(r0[2], ctx);
    ds.camera.cy = parse_double(r0[3], ctx);
    ds.camera.width = static_cast<int>(parse_i64(r0[4], ctx));
    ds.camera.height = static_cast<int>(parse_i64(r0[5], ctx));
    const auto& r1 = csv.rows[1];
    if (r1.size() != 7) throw std::runtime_error(ctx + ":3: bad extrinsic row");
    ds.camera.cam_in_body =
        Pose(Quat(parse_double(r1[3], ctx), parse_double(r1[4], ctx),
                  parse_double(r1[5], ctx), parse_double(r1[6], ctx)),
             Vec3(parse_double(r1[0], ctx), parse_double(r1[1], ctx),
                  parse_double(r1[2], ctx)));
    const auto& r2 = csv.rows[2];
    if (r2.size() != 4) throw std::runtime_error(ctx + ":4: bad noise row");
    ds.noise.gyro_white_sigma = parse_double(r2[0], ctx);
    ds.noise.accel_white_sigma = parse_double(r2[1], ctx);
    ds.noise.gyro_walk_sigma = parse_double(r2[2], ctx);
    ds.noise.accel_walk_sigma = parse_double(r2[3], ctx);
    ds.camera.validate();
  }
  ds.scenario_kv = read_kv_file(in_dir + "/scenario.toml");

  // Frame timestamps come from the IMU timeline (frames align with IMU
  // samples), so frames without observations (full blackout) keep a valid
  // timestamp too.
  double cam_rate = 0.0, imu_rate = 0.0, duration = 0.0;
  for (const auto& [k, v] : ds.scenario_kv) {
    if (k == "cam_rate_hz") cam_rate = parse_double(v, "scenario.toml");
    if (k == "imu_rate_hz") imu_rate = parse_double(v, "scenario.toml");
    if (k == "duration_s") duration = parse_double(v, "scenario.toml");
  }
  if (cam_rate > 0.0 && imu_rate > 0.0 && duration > 0.0) {
    const int ipf = static_cast<int>(std::llround(imu_rate / cam_rate));
    const int n = static_cast<int>(std::llround(duration * cam_rate)) + 1;
    if (n > static_cast<int>(ds.frames.size())) {
      ds.frames.resize(n);
      ds.frame_t_ns.resize(n, 0);
    }
    for (int f = 0; f < n; ++f) {
      const size_t idx = static_cast<size_t>(f) * ipf;
      if (idx < ds.imu.size()) ds.frame_t_ns[f] = ds.imu[idx].t_ns;
    }
  }
  return ds;
}

}  // namespace vio
