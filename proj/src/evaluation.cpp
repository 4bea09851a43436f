#include "vio/evaluation.hpp"

#include "vio/geometry.hpp"
#include "vio/util.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace vio {

Trajectory read_trajectory_csv(const std::string& path) {
  const auto csv = read_csv(path);
  Trajectory out;
  for (size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& r = csv.rows[i];
    const std::string ctx = path + ":" + std::to_string(csv.line_numbers[i]);
    if (r.size() < 8) {
      throw std::runtime_error(ctx + ": expected at least 8 fields");
    }
    TrajectoryRow row;
    row.t_ns = parse_i64(r[0], ctx);
    row.pose.p = Vec3(parse_double(r[1], ctx), parse_double(r[2], ctx),
                      parse_double(r[3], ctx));
    row.pose.q = Quat(parse_double(r[4], ctx), parse_double(r[5], ctx),
                      parse_double(r[6], ctx), parse_double(r[7], ctx));
    out.push_back(row);
  }
  return out;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  CsvWriter w(path, "t_ns,px,py,pz,qw,qx,qy,qz");
  for (const auto& row : traj) {
    w.row({std::to_string(row.t_ns), format_double(row.pose.p.x()),
           format_double(row.pose.p.y()), format_double(row.pose.p.z()),
           format_double(row.pose.q.w()), format_double(row.pose.q.x()),
           format_double(row.pose.q.y()), format_double(row.pose.q.z())});
  }
}

AssociateResult associate(const Trajectory& a, const Trajectory& b,
                          int64_t max_dt_ns) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("associate: empty trajectory");
  }
  AssociateResult out;
  size_t jb = 0;
  for (size_t ia = 0; ia < a.size(); ++ia) {
    while (jb + 1 < b.size() &&
           std::llabs(b[jb + 1].t_ns - a[ia].t_ns) <=
               std::llabs(b[jb].t_ns - a[ia].t_ns)) {
      ++jb;
    }
    if (std::llabs(b[jb].t_ns - a[ia].t_ns) <= max_dt_ns) {
      out.pairs.emplace_back(static_cast<int>(ia), static_cast<int>(jb));
    } else {
      ++out.dropped_a;
    }
  }
  out.dropped_b = static_cast<int>(b.size()) -
                  static_cast<int>(out.pairs.size());
  if (out.dropped_b < 0) out.dropped_b = 0;
  if (out.pairs.empty()) {
    throw std::runtime_error("associate: no pairs within the time tolerance");
  }
  return out;
}

AlignmentResult umeyama_align(const std::vector<Vec3>& a,
                              const std::vector<Vec3>& b, bool with_scale) {
  if (a.size() != b.size() || a.size() < 3) {
    throw std::invalid_argument(
        "umeyama_align: need at least 3 paired points");
  }
  MatX src(3, b.size()), dst(3, a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    src.col(i) = b[i];
    dst.col(i) = a[i];
  }
  // reject collinear/degenerate configurations
  const MatX centered = src.colwise() - src.rowwise().mean();
  Eigen::JacobiSVD<MatX> svd(centered);
  if (svd.singularValues()(1) < 1e-9) {
    throw std::invalid_argument("umeyama_align: degenerate (collinear) points");
  }
  const Mat4 t = Eigen::umeyama(src, dst, with_scale);
  AlignmentResult out;
  const Mat3 sr = t.topLeftCorner<3, 3>();
  out.scale = with_scale ? std::cbrt(sr.determinant()) : 1.0;
  out.rotation = sr / out.scale;
  out.translation = t.topRightCorner<3, 1>();
  return out;
}

AteResult ate_rms(const Trajectory& estimate, const Trajectory& groundtruth,
                  AlignMode mode, bool normalize_by_path_length,
                  int64_t max_dt_ns) {
  const auto assoc = associate(estimate, groundtruth, max_dt_ns);
  std::vector<Vec3> est, gt;
  est.reserve(assoc.pairs.size());
  for (const auto& [ie, ig] : assoc.pairs) {
    est.push_back(estimate[ie].pose.p);
    gt.push_back(groundtruth[ig].pose.p);
  }
  AteResult out;
  out.pairs = static_cast<int>(assoc.pairs.size());
  if (mode != AlignMode::kNone) {
    out.alignment = umeyama_align(gt, est, mode == AlignMode::kSim3);
  }
  double sum_sq = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    sum_sq += (gt[i] - out.alignment.apply(est[i])).squaredNorm();
  }
  out.rms = std::sqrt(sum_sq / est.size());
  if (normalize_by_path_length) {
    const double len = path_length(groundtruth);
    if (len <= 0.0) {
      throw std::runtime_error("ate_rms: zero ground-truth path length");
    }
    out.rms /= len;
  }
  return out;
}

RpeResult rpe_rms(const Trajectory& estimate, const Trajectory& groundtruth,
                  double delta_s, int64_t max_dt_ns) {
  const auto assoc = associate(estimate, groundtruth, max_dt_ns);
  const int64_t delta_ns = static_cast<int64_t>(std::llround(delta_s * 1e9));
  if (!assoc.pairs.empty()) {
    const int64_t span =
        estimate[assoc.pairs[1 < assoc.pairs.size() ? 1 : 0].first].t_ns -
        estimate[assoc.pairs[0].first].t_ns;
    if (delta_ns < span) {
      throw std::invalid_argument(
          "rpe_rms: delta below one sample interval");
    }
  }
  double sum_t = 0.0, sum_r = 0.0;
  int count = 0;
  for (size_t i = 0; i < assoc.pairs.size(); ++i) {
    const auto [ie0, ig0] = assoc.pairs[i];
    const int64_t target = estimate[ie0].t_ns + delta_ns;
    // find the pair whose estimate timestamp is nearest the target
    size_t best = i;
    int64_t best_err = std::numeric_limits<int64_t>::max();
    for (size_t j = i + 1; j < assoc.pairs.size(); ++j) {
      const int64_t err =
          std::llabs(estimate[assoc.pairs[j].first].t_ns - target);
      if (err < best_err) {
        best_err = err;
        best = j;
      }
      if (estimate[assoc.pairs[j].first].t_ns > target + max_dt_ns) break;
    }
    if (best == i || best_err > max_dt_ns) continue;
    const auto [ie1, ig1] = assoc.pairs[best];
    const Pose est_rel =
        estimate[ie0].pose.inverse() * estimate[ie1].pose;
    const Pose gt_rel =
        groundtruth[ig0].pose.inverse() * groundtruth[ig1].pose;
    const Pose err = gt_rel.inverse() * est_rel;
    sum_t += err.p.squaredNorm();
    const double angle = so3_log(err.q).norm();
    sum_r += angle * angle;
    ++count;
  }
  if (count == 0) {
    throw std::runtime_error("rpe_rms: no interval pairs found");
  }
  RpeResult out;
  out.pairs = count;
  out.trans_rms = std::sqrt(sum_t / count);
  out.rot_rms_deg = std::sqrt(sum_r / count) * 180.0 / M_PI;
  return out;
}

double path_length(const Trajectory& traj) {
  double len = 0.0;
  for (size_t i = 1; i < traj.size(); ++i) {
    len += (traj[i].pose.p - traj[i - 1].pose.p).norm();
  }
  return len;
}

}  // namespace vio
