#include "vio/frontend.hpp"

#include "vio/util.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace vio {

Correspondence make_correspondence(int64_t kp_id, const Vec2& px_prev,
                                   const Vec2& px_cur, const CameraModel& cam) {
  Correspondence c;
  c.kp_id = kp_id;
  c.px_prev = px_prev;
  c.px_cur = px_cur;
  c.norm_prev = Vec3((px_prev.x() - cam.cx) / cam.fx,
                     (px_prev.y() - cam.cy) / cam.fy, 1.0);
  c.norm_cur = Vec3((px_cur.x() - cam.cx) / cam.fx,
                    (px_cur.y() - cam.cy) / cam.fy, 1.0);
  return c;
}

namespace {

// 1-D squared distance transform (Felzenszwalb & Huttenlocher).
void dt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  d.assign(n, 0.0);
  std::vector<int> v(n, 0);
  std::vector<double> z(n + 1, 0.0);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

SemanticMask dilate_mask(const SemanticMask& mask, double radius_px) {
  if (radius_px <= 0.0) return mask;
  const int w = mask.width, h = mask.height;
  const double inf = 1e18;
  std::vector<double> dist(static_cast<size_t>(w) * h);
  for (size_t i = 0; i < dist.size(); ++i) {
    dist[i] = mask.data[i] == 0 ? 0.0 : inf;
  }
  std::vector<double> col(h), out_col(h), row(w), out_row(w);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = dist[static_cast<size_t>(y) * w + x];
    dt_1d(col, out_col);
    for (int y = 0; y < h; ++y) dist[static_cast<size_t>(y) * w + x] = out_col[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = dist[static_cast<size_t>(y) * w + x];
    dt_1d(row, out_row);
    for (int x = 0; x < w; ++x) dist[static_cast<size_t>(y) * w + x] = out_row[x];
  }
  SemanticMask out;
  out.width = w;
  out.height = h;
  out.data.resize(dist.size());
  const double r2 = radius_px * radius_px;
  for (size_t i = 0; i < dist.size(); ++i) {
    out.data[i] = dist[i] <= r2 ? 0 : 255;
  }
  return out;
}

PartitionResult semantic_partition(std::vector<Correspondence>& corr,
                                   const SemanticMask& mask) {
  PartitionResult out;
  for (size_t i = 0; i < corr.size(); ++i) {
    const Vec2& px = corr[i].px_cur;
    const int x = static_cast<int>(std::lround(px.x()));
    const int y = static_cast<int>(std::lround(px.y()));
    if (x < 0 || x >= mask.width || y < 0 || y >= mask.height) {
      out.dropped_idx.push_back(static_cast<int>(i));
      continue;
    }
    if (mask.data[static_cast<size_t>(y) * mask.width + x] == 0) {
      corr[i].semantic_label = 1;
      out.dynamic_idx.push_back(static_cast<int>(i));
    } else {
      corr[i].semantic_label = 0;
      out.static_idx.push_back(static_cast<int>(i));
    }
  }
  return out;
}

namespace {

struct Normalization {
  Mat3 T;
  std::vector<Vec2> pts;
};

Normalization hartley_normalize(const std::vector<Correspondence>& corr,
                                const std::vector<int>& idx, bool use_cur) {
  Vec2 centroid = Vec2::Zero();
  for (int i : idx) centroid += use_cur ? corr[i].px_cur : corr[i].px_prev;
  centroid /= static_cast<double>(idx.size());
  double mean_dist = 0.0;
  for (int i : idx) {
    const Vec2 p = (use_cur ? corr[i].px_cur : corr[i].px_prev) - centroid;
    mean_dist += p.norm();
  }
  mean_dist /= static_cast<double>(idx.size());
  const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  Normalization n;
  n.T << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  n.pts.reserve(idx.size());
  for (int i : idx) {
    const Vec2 p = (use_cur ? corr[i].px_cur : corr[i].px_prev);
    n.pts.emplace_back(s * (p.x() - centroid.x()), s * (p.y() - centroid.y()));
  }
  return n;
}

// Eight-point least squares on the given subset; F maps prev -> cur
// (x_cur^T F x_prev = 0). Returns false on a rank-deficient system.
bool solve_eight_point(const std::vector<Correspondence>& corr,
                       const std::vector<int>& idx, Mat3* F_out) {
  const auto prev = hartley_normalize(corr, idx, false);
  const auto cur = hartley_normalize(corr, idx, true);
  const int n = static_cast<int>(idx.size());
  MatX A(n, 9);
  for (int r = 0; r < n; ++r) {
    const double x = prev.pts[r].x(), y = prev.pts[r].y();
    const double xp = cur.pts[r].x(), yp = cur.pts[r].y();
    A.row(r) << xp * x, xp * y, xp, yp * x, yp * y, yp, x, y, 1.0;
  }
  Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() < 0.0) return false;
  const VecX f = svd.matrixV().col(8);
  Mat3 Fn;
  Fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  // rank-2 enforcement
  Eigen::JacobiSVD<Mat3> svd2(Fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sv = svd2.singularValues();
  sv(2) = 0.0;
  Fn = svd2.matrixU() * sv.asDiagonal() * svd2.matrixV().transpose();
  Mat3 F = cur.T.transpose() * Fn * prev.T;
  const double norm = F.norm();
  if (norm < 1e-15 || !F.allFinite()) return false;
  *F_out = F / norm;
  return true;
}

}  // namespace

double sampson_distance_sq(const Mat3& F, const Vec2& px_prev,
                           const Vec2& px_cur) {
  const Vec3 x(px_prev.x(), px_prev.y(), 1.0);
  const Vec3 xp(px_cur.x(), px_cur.y(), 1.0);
  const Vec3 Fx = F * x;
  const Vec3 Ftxp = F.transpose() * xp;
  const double e = xp.dot(Fx);
  const double den =
      Fx.x() * Fx.x() + Fx.y() * Fx.y() + Ftxp.x() * Ftxp.x() + Ftxp.y() * Ftxp.y();
  if (den < 1e-18) return std::numeric_limits<double>::infinity();
  return e * e / den;
}

std::optional<RansacResult> estimate_fundamental_ransac(
    const std::vector<Correspondence>& corr, const std::vector<int>& subset,
    const RansacParams& params) {
  const int n = static_cast<int>(subset.size());
  if (n < 8) return std::nullopt;

  Rng rng(params.seed);
  const double thr2 =
      params.inlier_threshold_px * params.inlier_threshold_px;

  std::vector<int> best_inliers;
  int max_iters = params.max_iterations;
  for (int it = 0; it < max_iters; ++it) {
    // sample 8 distinct indices
    std::set<int> sample;
    while (static_cast<int>(sample.size()) < 8) {
      sample.insert(subset[rng.uniform_int(0, n - 1)]);
    }
    std::vector<int> minimal(sample.begin(), sample.end());
    Mat3 F;
    if (!solve_eight_point(corr, minimal, &F)) continue;
    std::vector<int> inliers;
    for (int i : subset) {
      if (sampson_distance_sq(F, corr[i].px_prev, corr[i].px_cur) <= thr2) {
        inliers.push_back(i);
      }
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      const double w =
          static_cast<double>(best_inliers.size()) / static_cast<double>(n);
      const double denom = std::log(std::max(1e-12, 1.0 - std::pow(w, 8)));
      if (denom < 0.0) {
        const int needed = static_cast<int>(
            std::ceil(std::log(1.0 - params.confidence) / denom));
        max_iters = std::clamp(needed, it + 1, params.max_iterations);
      }
    }
  }
  if (static_cast<int>(best_inliers.size()) < 8) return std::nullopt;

  RansacResult result;
  if (!solve_eight_point(corr, best_inliers, &result.F)) return std::nullopt;
  for (int i : subset) {
    if (sampson_distance_sq(result.F, corr[i].px_prev, corr[i].px_cur) <=
        thr2) {
      result.inliers.push_back(i);
    }
  }
  if (static_cast<int>(result.inliers.size()) < 8) return std::nullopt;
  return result;
}

std::vector<int> epipolar_readmission(const std::vector<Correspondence>& corr,
                                      const Mat3& F, double epsilon_px) {
  std::vector<int> out;
  const double eps2 = epsilon_px * epsilon_px;
  for (size_t i = 0; i < corr.size(); ++i) {
    if (sampson_distance_sq(F, corr[i].px_prev, corr[i].px_cur) < eps2) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

namespace {

FrontendOutput degenerate_output(const std::vector<Correspondence>& corr,
                                 const PartitionResult* part) {
  FrontendOutput out;
  out.degenerate = true;
  out.psi_c = 0.0;
  std::set<int> dropped;
  if (part) dropped.insert(part->dropped_idx.begin(), part->dropped_idx.end());
  for (size_t i = 0; i < corr.size(); ++i) {
    out.statuses.emplace_back(corr[i].kp_id, KeypointStatus::kRansacOutlier);
  }
  return out;
}

}  // namespace

FrontendOutput three_step_filter(std::vector<Correspondence> corr,
                                 const SemanticMask& mask,
                                 const FrontendParams& params) {
  const SemanticMask dilated = dilate_mask(mask, params.dilation_radius_px);
  const PartitionResult part = semantic_partition(corr, dilated);

  RansacParams rp;
  rp.seed = params.seed;
  rp.inlier_threshold_px = params.ransac_threshold_px;
  rp.max_iterations = params.ransac_max_iterations;

  const auto step1 = estimate_fundamental_ransac(corr, part.static_idx, rp);
  if (!step1) return degenerate_output(corr, &part);

  std::vector<Correspondence> considered;
  std::vector<int> considered_src;
  std::set<int> dropped(part.dropped_idx.begin(), part.dropped_idx.end());
  for (size_t i = 0; i < corr.size(); ++i) {
    if (!dropped.count(static_cast<int>(i))) {
      considered.push_back(corr[i]);
      considered_src.push_back(static_cast<int>(i));
    }
  }
  const auto readmitted =
      epipolar_readmission(considered, step1->F, params.epsilon_px);

  RansacParams rp3 = rp;
  rp3.seed = hash_combine(params.seed, 3);
  const auto step3 = estimate_fundamental_ransac(considered, readmitted, rp3);
  if (!step3) return degenerate_output(corr, &part);

  FrontendOutput out;
  out.f_accurate = step3->F;
  std::set<int> kept_src;
  for (int i : step3->inliers) kept_src.insert(considered_src[i]);
  std::set<int> readmitted_src;
  for (int i : readmitted) readmitted_src.insert(considered_src[i]);

  for (size_t i = 0; i < corr.size(); ++i) {
    const int idx = static_cast<int>(i);
    KeypointStatus st;
    if (kept_src.count(idx)) {
      st = KeypointStatus::kKept;
      out.kept.push_back(corr[i]);
    } else if (corr[i].semantic_label == 1 && !readmitted_src.count(idx) &&
               !dropped.count(idx)) {
      st = KeypointStatus::kFilteredDynamic;
    } else {
      st = KeypointStatus::kRansacOutlier;
    }
    out.statuses.emplace_back(corr[i].kp_id, st);
  }
  out.psi_c = std::min(
      1.0, static_cast<double>(out.kept.size()) / params.f_max);
  return out;
}

FrontendOutput single_ransac_filter(std::vector<Correspondence> corr,
                                    const FrontendParams& params) {
  RansacParams rp;
  rp.seed = params.seed;
  rp.inlier_threshold_px = params.ransac_threshold_px;
  rp.max_iterations = params.ransac_max_iterations;
  std::vector<int> all(corr.size());
  for (size_t i = 0; i < corr.size(); ++i) all[i] = static_cast<int>(i);
  const auto res = estimate_fundamental_ransac(corr, all, rp);
  if (!res) return degenerate_output(corr, nullptr);

  FrontendOutput out;
  out.f_accurate = res->F;
  std::set<int> kept(res->inliers.begin(), res->inliers.end());
  for (size_t i = 0; i < corr.size(); ++i) {
    if (kept.count(static_cast<int>(i))) {
      out.kept.push_back(corr[i]);
      out.statuses.emplace_back(corr[i].kp_id, KeypointStatus::kKept);
    } else {
      out.statuses.emplace_back(corr[i].kp_id, KeypointStatus::kRansacOutlier);
    }
  }
  out.psi_c = std::min(
      1.0, static_cast<double>(out.kept.size()) / params.f_max);
  return out;
}

}  // namespace vio
