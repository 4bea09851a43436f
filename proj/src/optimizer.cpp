#include "vio/optimizer.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace vio {

Eigen::Matrix<double, 2, 3> tangent_basis(const Vec3& bearing) {
  const Vec3 n = bearing.normalized();
  Vec3 ref = Vec3::UnitX();
  if (std::abs(n.x()) > 0.9) ref = Vec3::UnitY();
  const Vec3 b1 = (ref - n * n.dot(ref)).normalized();
  const Vec3 b2 = n.cross(b1);
  Eigen::Matrix<double, 2, 3> b;
  b.row(0) = b1.transpose();
  b.row(1) = b2.transpose();
  return b;
}

std::optional<double> triangulate(const FeatureTrack& track,
                                  const std::vector<BodyState>& states,
                                  const Pose& extrinsic) {
  if (track.obs.size() < 2) return std::nullopt;
  const auto& anchor = track.obs.front();
  const Pose cam_i = states[anchor.frame].pose() * extrinsic;

  // co-observation with the largest baseline
  int best = -1;
  double best_baseline = 0.0;
  for (size_t k = 1; k < track.obs.size(); ++k) {
    const Pose cam_j = states[track.obs[k].frame].pose() * extrinsic;
    const double b = (cam_j.p - cam_i.p).norm();
    if (b > best_baseline) {
      best_baseline = b;
      best = static_cast<int>(k);
    }
  }
  if (best < 0 || best_baseline < 1e-4) return std::nullopt;

  const Pose cam_j = states[track.obs[best].frame].pose() * extrinsic;
  const Vec3 o1 = cam_i.p, d1 = cam_i.q * anchor.bearing;
  const Vec3 o2 = cam_j.p, d2 = cam_j.q * track.obs[best].bearing;

  // midpoint of the common perpendicular between the two rays
  const double a = d1.dot(d1), b = d1.dot(d2), c = d2.dot(d2);
  const Vec3 w0 = o1 - o2;
  const double d = d1.dot(w0), e = d2.dot(w0);
  const double denom = a * c - b * b;
  if (denom < 1e-12) return std::nullopt;  // near-parallel rays
  const double s = (b * e - c * d) / denom;
  const double t = (a * e - b * d) / denom;
  const Vec3 mid = 0.5 * ((o1 + s * d1) + (o2 + t * d2));

  const double range = (mid - o1).dot(d1);
  if (range <= 0.0 || range > 500.0) return std::nullopt;
  if ((mid - o2).dot(d2) <= 0.0) return std::nullopt;  // behind other camera
  return 1.0 / range;
}

namespace {

struct VisualChain {
  Vec3 f = Vec3::Zero();    // predicted point in camera j
  Vec3 x_w = Vec3::Zero();  // world point
  Vec3 x_bi = Vec3::Zero();
  bool valid = false;
};

VisualChain eval_chain(const BodyState& state_i, const BodyState& state_j,
                       const Pose& extrinsic, const Vec3& bearing_i,
                       double inv_depth) {
  VisualChain c;
  const Vec3 x_ci = bearing_i / inv_depth;
  c.x_bi = extrinsic.q * x_ci + extrinsic.p;
  c.x_w = state_i.q * c.x_bi + state_i.p;
  const Vec3 x_bj = state_j.q.conjugate() * (c.x_w - state_j.p);
  c.f = extrinsic.q.conjugate() * (x_bj - extrinsic.p);
  c.valid = c.f.norm() > 1e-6;
  return c;
}

}  // namespace

VisualResidual visual_residual(const BodyState& state_i,
                               const BodyState& state_j, const Pose& extrinsic,
                               const Vec3& bearing_i, const Vec3& bearing_j,
                               double inv_depth) {
  VisualResidual out;
  if (inv_depth <= 0.0) return out;
  const auto chain =
      eval_chain(state_i, state_j, extrinsic, bearing_i, inv_depth);
  if (!chain.valid) return out;
  const Vec3 pred = chain.f.normalized();
  out.r = tangent_basis(bearing_j) * (bearing_j - pred);
  out.valid = true;
  return out;
}

VisualJacobians visual_residual_jacobians(const BodyState& state_i,
                                          const BodyState& state_j,
                                          const Pose& extrinsic,
                                          const Vec3& bearing_i,
                                          const Vec3& bearing_j,
                                          double inv_depth) {
  VisualJacobians out;
  if (inv_depth <= 0.0) return out;
  const auto chain =
      eval_chain(state_i, state_j, extrinsic, bearing_i, inv_depth);
  if (!chain.valid) return out;

  const Vec3 f = chain.f;
  const double fn = f.norm();
  const Vec3 n = f / fn;
  const Eigen::Matrix<double, 2, 3> b = tangent_basis(bearing_j);
  // residual = B * (obs - f/|f|)
  const Eigen::Matrix<double, 2, 3> dr_df =
      -b * (Mat3::Identity() - n * n.transpose()) / fn;

  const Mat3 r_cb_t = extrinsic.q.conjugate().toRotationMatrix();
  const Mat3 r_j_t = state_j.q.conjugate().toRotationMatrix();
  const Mat3 df_dxw = r_cb_t * r_j_t;

  out.dp_i = dr_df * df_dxw;
  out.dtheta_i = -dr_df * df_dxw * skew(state_i.q * chain.x_bi);
  out.dp_j = -dr_df * df_dxw;
  out.dtheta_j = dr_df * r_cb_t * r_j_t * skew(chain.x_w - state_j.p);
  const Mat3 r_i = state_i.q.toRotationMatrix();
  const Mat3 r_cb = extrinsic.q.toRotationMatrix();
  out.dinv_depth =
      dr_df * df_dxw * r_i * r_cb * (-bearing_i / (inv_depth * inv_depth));
  out.valid = true;
  return out;
}

namespace {

struct ParamLayout {
  int num_states = 0;
  std::vector<int> landmark_track;  // track index per landmark slot
  std::vector<int> track_landmark;  // landmark slot per track (-1 if none)
  int dim() const {
    return 9 * num_states + static_cast<int>(landmark_track.size());
  }
  int landmark_offset(int slot) const { return 9 * num_states + slot; }
};

ParamLayout make_layout(const SlidingWindow& w) {
  ParamLayout l;
  l.num_states = static_cast<int>(w.states.size());
  l.track_landmark.assign(w.tracks.size(), -1);
  if (w.use_visual) {
    for (size_t t = 0; t < w.tracks.size(); ++t) {
      if (w.tracks[t].usable()) {
        l.track_landmark[t] = static_cast<int>(l.landmark_track.size());
        l.landmark_track.push_back(static_cast<int>(t));
      }
    }
  }
  return l;
}

Mat9 imu_sqrt_info(const PreintegratedDelta& delta, int block_id) {
  Mat9 cov = delta.covariance;
  cov = 0.5 * (cov + cov.transpose()).eval();
  cov.diagonal().array() += 1e-16;  // noiseless deltas are exactly singular
  const Mat9 info = cov.inverse();
  Eigen::LLT<Mat9> llt(0.5 * (info + info.transpose()));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("imu block " + std::to_string(block_id) +
                             ": covariance is not positive definite");
  }
  return llt.matrixL().transpose();
}

double visual_whitening(const WindowConfig& config) {
  return config.focal / config.visual_sigma_px;
}

VecX state_boxminus(const std::vector<BodyState>& states,
                    const std::vector<BodyState>& lin, int count) {
  VecX dx(9 * count);
  for (int k = 0; k < count; ++k) {
    dx.segment<3>(9 * k) = states[k].p - lin[k].p;
    dx.segment<3>(9 * k + 3) = states[k].v - lin[k].v;
    dx.segment<3>(9 * k + 6) =
        so3_log((states[k].q * lin[k].q.conjugate()).normalized());
  }
  return dx;
}

double prior_residual(const SlidingWindow& w, VecX* residual_out) {
  const VecX dx =
      state_boxminus(w.states, w.prior.lin_states, w.prior.num_states);
  const VecX r = w.prior.residual0 + w.prior.jacobian * dx;
  if (residual_out) *residual_out = r;
  return r.squaredNorm();
}

struct LinearizedSystem {
  MatX h;
  VecX g;  // gradient, 2 * sum J^T r
  double cost = 0.0;
  double cost_prior = 0.0;
  double cost_imu = 0.0;
  double cost_visual = 0.0;
};

// One pass over every residual block; with `build` false only cost and
// gradient are produced.
LinearizedSystem linearize(const SlidingWindow& w, const WindowConfig& config,
                           const ParamLayout& layout, bool build) {
  const int dim = layout.dim();
  LinearizedSystem sys;
  sys.h = MatX::Zero(build ? dim : 0, build ? dim : 0);
  sys.g = VecX::Zero(dim);

  auto add_block = [&](const std::vector<int>& cols, const MatX& j,
                       const VecX& r) {
    const VecX jtr = j.transpose() * r;
    for (size_t a = 0; a < cols.size(); ++a) sys.g(cols[a]) += 2.0 * jtr(a);
    if (!build) return;
    const MatX jtj = j.transpose() * j;
    for (size_t a = 0; a < cols.size(); ++a) {
      for (size_t bcol = 0; bcol < cols.size(); ++bcol) {
        sys.h(cols[a], cols[bcol]) += jtj(a, bcol);
      }
    }
  };

  if (w.prior.valid()) {
    VecX r;
    sys.cost_prior = prior_residual(w, &r);
    sys.cost += sys.cost_prior;
    const int pdim = 9 * w.prior.num_states;
    sys.g.head(pdim) += 2.0 * w.prior.jacobian.transpose() * r;
    if (build) {
      sys.h.topLeftCorner(pdim, pdim) +=
          w.prior.jacobian.transpose() * w.prior.jacobian;
    }
  }

  if (w.use_inertial) {
    for (size_t k = 0; k < w.imu_edges.size(); ++k) {
      const auto& edge = w.imu_edges[k];
      const Mat9 sqrt_info = imu_sqrt_info(edge.delta, static_cast<int>(k));
      const double psi = std::max(edge.psi_b, 0.0);
      const double sw = std::sqrt(psi);
      const Vec9 rbase = sqrt_info * imu_residual(edge.delta, w.states[k],
                                                  w.states[k + 1],
                                                  config.gravity_w);
      const Vec9 rw = sw * rbase;
      // psi multiplies the squared norm so unit weights are bit-neutral and
      // doubling psi doubles the term exactly
      const double block_cost = psi == 1.0 ? rbase.squaredNorm()
                                           : psi * rbase.squaredNorm();
      sys.cost_imu += block_cost;
      sys.cost += block_cost;

      const auto jac = imu_residual_jacobians(
          edge.delta, w.states[k], w.states[k + 1], config.gravity_w);
      Eigen::Matrix<double, 9, 18> j;
      j << jac.dp_k, jac.dv_k, jac.dtheta_k, jac.dp_k1, jac.dv_k1,
          jac.dtheta_k1;
      const Eigen::Matrix<double, 9, 18> jw = sw * (sqrt_info * j);
      std::vector<int> cols(18);
      for (int c = 0; c < 9; ++c) cols[c] = 9 * static_cast<int>(k) + c;
      for (int c = 0; c < 9; ++c) {
        cols[9 + c] = 9 * (static_cast<int>(k) + 1) + c;
      }
      add_block(cols, jw, rw);
    }
  }

  if (w.use_visual) {
    const double whiten = visual_whitening(config);
    for (size_t t = 0; t < w.tracks.size(); ++t) {
      const auto& track = w.tracks[t];
      if (!track.usable()) continue;
      const int lm = layout.track_landmark[t];
      const auto& anchor = track.obs.front();
      for (size_t o = 1; o < track.obs.size(); ++o) {
        const auto& obs = track.obs[o];
        const double psi =
            !w.psi_c.empty() && obs.frame < static_cast<int>(w.psi_c.size())
                ? w.psi_c[obs.frame]
                : 1.0;
        if (psi <= 0.0) continue;
        const auto res = visual_residual(
            w.states[anchor.frame], w.states[obs.frame], w.extrinsic,
            anchor.bearing, obs.bearing, track.inv_depth);
        if (!res.valid) continue;
        const Vec2 rw = whiten * res.r;
        const double s = rw.squaredNorm();
        const double block_cost = psi * huber(s, config.huber_variant);
        sys.cost_visual += block_cost;
        sys.cost += block_cost;

        const double weight = psi * huber_deriv(s, config.huber_variant);
        if (weight <= 0.0) continue;
        const double sw = std::sqrt(weight);
        const auto jac = visual_residual_jacobians(
            w.states[anchor.frame], w.states[obs.frame], w.extrinsic,
            anchor.bearing, obs.bearing, track.inv_depth);
        if (!jac.valid) continue;
        Eigen::Matrix<double, 2, 19> j = Eigen::Matrix<double, 2, 19>::Zero();
        j.block<2, 3>(0, 0) = jac.dp_i;
        j.block<2, 3>(0, 6) = jac.dtheta_i;
        j.block<2, 3>(0, 9) = jac.dp_j;
        j.block<2, 3>(0, 15) = jac.dtheta_j;
        j.col(18) = jac.dinv_depth;
        std::vector<int> cols(19);
        for (int c = 0; c < 9; ++c) cols[c] = 9 * anchor.frame + c;
        for (int c = 0; c < 9; ++c) cols[9 + c] = 9 * obs.frame + c;
        cols[18] = layout.landmark_offset(lm);
        add_block(cols, (sw * whiten) * j, sw * rw);
      }
    }
  }
  return sys;
}

double evaluate_cost(const SlidingWindow& w, const WindowConfig& config,
                     const ParamLayout& layout) {
  return linearize(w, config, layout, false).cost;
}

void retract(SlidingWindow& w, const ParamLayout& layout, const VecX& dx) {
  for (int k = 0; k < layout.num_states; ++k) {
    w.states[k].p += dx.segment<3>(9 * k);
    w.states[k].v += dx.segment<3>(9 * k + 3);
    w.states[k].q =
        (so3_exp(dx.segment<3>(9 * k + 6)) * w.states[k].q).normalized();
  }
  for (size_t slot = 0; slot < layout.landmark_track.size(); ++slot) {
    auto& track = w.tracks[layout.landmark_track[slot]];
    track.inv_depth += dx(layout.landmark_offset(static_cast<int>(slot)));
    if (track.inv_depth < 1e-4) track.inv_depth = 1e-4;
  }
}

std::vector<int> fixed_params(const SlidingWindow& w,
                              const WindowConfig& config) {
  std::vector<int> fixed;
  if (config.fix_first_state && !w.prior.valid() && !w.states.empty()) {
    for (int d : {0, 1, 2, 6, 7, 8}) fixed.push_back(d);  // first pose
  }
  return fixed;
}

void apply_gauge(MatX& h, VecX& b, const std::vector<int>& fixed) {
  for (int d : fixed) {
    h.row(d).setZero();
    h.col(d).setZero();
    h(d, d) = 1.0;
    b(d) = 0.0;
  }
}

VecX schur_solve(const MatX& h, const VecX& b, int pose_dim, double lambda) {
  const int dim = static_cast<int>(h.rows());
  const int nl = dim - pose_dim;
  MatX hd = h;
  for (int d = 0; d < dim; ++d) {
    hd(d, d) += lambda * std::max(h(d, d), 1e-9);
  }
  if (nl == 0) return VecX(hd.ldlt().solve(b));
  const MatX app = hd.topLeftCorner(pose_dim, pose_dim);
  const MatX apl = hd.topRightCorner(pose_dim, nl);
  VecX all_inv(nl);
  for (int i = 0; i < nl; ++i) {
    all_inv(i) = 1.0 / std::max(hd(pose_dim + i, pose_dim + i), 1e-12);
  }
  const VecX bp = b.head(pose_dim);
  const VecX bl = b.tail(nl);
  const MatX s = app - apl * all_inv.asDiagonal() * apl.transpose();
  const VecX rhs = bp - apl * (all_inv.asDiagonal() * bl);
  const VecX dxp = s.ldlt().solve(rhs);
  VecX dx(dim);
  dx.head(pose_dim) = dxp;
  dx.tail(nl) = all_inv.asDiagonal() * (bl - apl.transpose() * dxp);
  return dx;
}

}  // namespace

CostBreakdown total_cost(const SlidingWindow& window,
                         const WindowConfig& config) {
  const ParamLayout layout = make_layout(window);
  const auto sys = linearize(window, config, layout, false);
  CostBreakdown out;
  out.total = sys.cost;
  out.prior = sys.cost_prior;
  out.imu = sys.cost_imu;
  out.visual = sys.cost_visual;
  out.gradient = sys.g;
  return out;
}

SolveReport solve(SlidingWindow& window, const WindowConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  const ParamLayout layout = make_layout(window);
  const int pose_dim = 9 * layout.num_states;
  const auto fixed = fixed_params(window, config);

  SolveReport report;
  double cost = evaluate_cost(window, config, layout);
  report.initial_cost = cost;
  report.final_cost = cost;
  if (cost <= config.abs_cost_floor) {
    report.converged = true;
    return report;
  }

  double lambda = 1e-6;
  int consecutive_rejects = 0;
  SlidingWindow best = window;
  double best_cost = cost;

  for (int it = 0; it < config.max_iterations; ++it) {
    if (config.time_budget_s > 0.0) {
      const double elapsed = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - t_start)
                                 .count();
      if (elapsed > config.time_budget_s) break;
    }
    auto sys = linearize(window, config, layout, true);
    VecX b = -0.5 * sys.g;  // normal equations take J^T r; gradient is 2 J^T r
    apply_gauge(sys.h, b, fixed);

    bool accepted = false;
    while (!accepted) {
      const VecX dx = schur_solve(sys.h, b, pose_dim, lambda);
      bool ok = dx.allFinite();
      double new_cost = 0.0;
      SlidingWindow candidate;
      if (ok) {
        candidate = window;
        retract(candidate, layout, dx);
        new_cost = evaluate_cost(candidate, config, layout);
        ok = new_cost <= cost;
      }
      if (ok) {
        window = std::move(candidate);
        const double prev = cost;
        cost = new_cost;
        report.final_cost = cost;
        ++report.iterations;
        lambda = std::max(lambda / 3.0, 1e-9);
        consecutive_rejects = 0;
        accepted = true;
        if (cost < best_cost) {
          best = window;
          best_cost = cost;
        }
        if (cost <= config.abs_cost_floor ||
            prev - cost < config.rel_cost_decrease * std::max(prev, 1e-300)) {
          report.converged = true;
          return report;
        }
      } else {
        lambda *= 4.0;
        if (++consecutive_rejects >= 5) {
          window = best;  // roll back to the best accepted state
          report.final_cost = best_cost;
          report.non_convergence = true;
          return report;
        }
      }
    }
  }
  report.converged = report.iterations > 0;
  return report;
}

void marginalize_and_slide(SlidingWindow& window, const WindowConfig& config) {
  const int ns = static_cast<int>(window.states.size());
  if (ns < 2) {
    throw std::invalid_argument("marginalize_and_slide: window too small");
  }

  std::vector<int> marg_tracks;
  if (window.use_visual) {
    for (size_t t = 0; t < window.tracks.size(); ++t) {
      if (window.tracks[t].anchor_frame == 0 && window.tracks[t].usable()) {
        marg_tracks.push_back(static_cast<int>(t));
      }
    }
  }
  const int nf = static_cast<int>(marg_tracks.size());
  const int dim = 9 * ns + nf;

  MatX h = MatX::Zero(dim, dim);
  VecX g = VecX::Zero(dim);
  auto add_block = [&](const std::vector<int>& cols, const MatX& j,
                       const VecX& r) {
    const MatX jtj = j.transpose() * j;
    const VecX jtr = j.transpose() * r;
    for (size_t a = 0; a < cols.size(); ++a) {
      g(cols[a]) += jtr(a);
      for (size_t bcol = 0; bcol < cols.size(); ++bcol) {
        h(cols[a], cols[bcol]) += jtj(a, bcol);
      }
    }
  };

  if (window.prior.valid()) {
    VecX r;
    prior_residual(window, &r);
    const int pdim = 9 * window.prior.num_states;
    h.topLeftCorner(pdim, pdim) +=
        window.prior.jacobian.transpose() * window.prior.jacobian;
    g.head(pdim) += window.prior.jacobian.transpose() * r;
  }

  if (window.use_inertial && !window.imu_edges.empty()) {
    const auto& edge = window.imu_edges.front();
    const Mat9 sqrt_info = imu_sqrt_info(edge.delta, 0);
    const double sw = std::sqrt(std::max(edge.psi_b, 0.0));
    const Vec9 rw = sw * (sqrt_info * imu_residual(edge.delta,
                                                   window.states[0],
                                                   window.states[1],
                                                   config.gravity_w));
    const auto jac = imu_residual_jacobians(
        edge.delta, window.states[0], window.states[1], config.gravity_w);
    Eigen::Matrix<double, 9, 18> j;
    j << jac.dp_k, jac.dv_k, jac.dtheta_k, jac.dp_k1, jac.dv_k1, jac.dtheta_k1;
    std::vector<int> cols(18);
    for (int c = 0; c < 18; ++c) cols[c] = c;
    add_block(cols, sw * (sqrt_info * j), rw);
  }

  if (window.use_visual) {
    const double whiten = visual_whitening(config);
    for (int slot = 0; slot < nf; ++slot) {
      const auto& track = window.tracks[marg_tracks[slot]];
      const auto& anchor = track.obs.front();
      for (size_t o = 1; o < track.obs.size(); ++o) {
        const auto& obs = track.obs[o];
        const double psi =
            !window.psi_c.empty() &&
                    obs.frame < static_cast<int>(window.psi_c.size())
                ? window.psi_c[obs.frame]
                : 1.0;
        if (psi <= 0.0) continue;
        const auto res = visual_residual(window.states[anchor.frame],
                                         window.states[obs.frame],
                                         window.extrinsic, anchor.bearing,
                                         obs.bearing, track.inv_depth);
        const auto jac = visual_residual_jacobians(
            window.states[anchor.frame], window.states[obs.frame],
            window.extrinsic, anchor.bearing, obs.bearing, track.inv_depth);
        if (!res.valid || !jac.valid) continue;
        const Vec2 rw = whiten * res.r;
        const double weight =
            psi * huber_deriv(rw.squaredNorm(), config.huber_variant);
        if (weight <= 0.0) continue;
        const double sw = std::sqrt(weight);
        Eigen::Matrix<double, 2, 19> j = Eigen::Matrix<double, 2, 19>::Zero();
        j.block<2, 3>(0, 0) = jac.dp_i;
        j.block<2, 3>(0, 6) = jac.dtheta_i;
        j.block<2, 3>(0, 9) = jac.dp_j;
        j.block<2, 3>(0, 15) = jac.dtheta_j;
        j.col(18) = jac.dinv_depth;
        std::vector<int> cols(19);
        for (int c = 0; c < 9; ++c) cols[c] = 9 * anchor.frame + c;
        for (int c = 0; c < 9; ++c) cols[9 + c] = 9 * obs.frame + c;
        cols[18] = 9 * ns + slot;
        add_block(cols, (sw * whiten) * j, sw * rw);
      }
    }
  }

  // eliminate [state 0, anchored features]; keep states 1..ns-1
  const int keep_dim = 9 * (ns - 1);
  const int elim_dim = 9 + nf;
  std::vector<int> order(dim);
  for (int i = 0; i < keep_dim; ++i) order[i] = 9 + i;
  for (int i = 0; i < 9; ++i) order[keep_dim + i] = i;
  for (int i = 0; i < nf; ++i) order[keep_dim + 9 + i] = 9 * ns + i;
  MatX h_perm(dim, dim);
  VecX g_perm(dim);
  for (int r = 0; r < dim; ++r) {
    g_perm(r) = g(order[r]);
    for (int c = 0; c < dim; ++c) h_perm(r, c) = h(order[r], order[c]);
  }

  MatX hee = h_perm.bottomRightCorner(elim_dim, elim_dim);
  const MatX hke = h_perm.topRightCorner(keep_dim, elim_dim);
  Eigen::LDLT<MatX> ldlt(hee);
  if (ldlt.info() != Eigen::Success ||
      (ldlt.vectorD().array() < 1e-12).any()) {
    hee.diagonal().array() += 1e-8;
    ldlt.compute(hee);
    std::cerr << "[viokit] marginalization: singular reduced system, "
                 "regularized with 1e-8 diagonal\n";
  }
  const MatX s =
      h_perm.topLeftCorner(keep_dim, keep_dim) -
      hke * ldlt.solve(hke.transpose());
  const VecX g_schur =
      g_perm.head(keep_dim) - hke * ldlt.solve(g_perm.tail(elim_dim));

  // square-root form via eigendecomposition with clipped spectrum
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (s + s.transpose()));
  const VecX evals = es.eigenvalues();
  std::vector<int> rows;
  for (int i = 0; i < evals.size(); ++i) {
    if (evals(i) > 1e-10) rows.push_back(i);
  }
  MatX j_new(static_cast<int>(rows.size()), keep_dim);
  VecX r0_new(static_cast<int>(rows.size()));
  const MatX vt = es.eigenvectors().transpose();
  const VecX vg = vt * g_schur;
  for (size_t i = 0; i < rows.size(); ++i) {
    const double sq = std::sqrt(evals(rows[i]));
    j_new.row(static_cast<int>(i)) = sq * vt.row(rows[i]);
    r0_new(static_cast<int>(i)) = vg(rows[i]) / sq;
  }

  window.prior.jacobian = std::move(j_new);
  window.prior.residual0 = std::move(r0_new);
  window.prior.num_states = ns - 1;
  window.prior.lin_states.assign(window.states.begin() + 1,
                                 window.states.end());

  // shift the window
  const std::vector<BodyState> old_states = window.states;
  window.states.erase(window.states.begin());
  if (!window.imu_edges.empty()) {
    window.imu_edges.erase(window.imu_edges.begin());
  }
  if (!window.psi_c.empty()) window.psi_c.erase(window.psi_c.begin());

  std::vector<FeatureTrack> kept;
  for (auto& track : window.tracks) {
    if (track.anchor_frame == 0) {
      if (track.obs.size() < 2) continue;  // exclusively observed: dropped
      const auto old_anchor = track.obs.front();
      const Pose old_cam = old_states[0].pose() * window.extrinsic;
      const bool have_depth = track.inv_depth > 0.0;
      Vec3 x_w = Vec3::Zero();
      if (have_depth) {
        x_w = old_cam.act(old_anchor.bearing / track.inv_depth);
      }
      track.obs.erase(track.obs.begin());
      track.anchor_frame = track.obs.front().frame;
      if (have_depth) {
        const Pose new_cam =
            old_states[track.anchor_frame].pose() * window.extrinsic;
        const Vec3 x_cn = new_cam.inverse().act(x_w);
        const double range = x_cn.norm();
        if (x_cn.z() > 0.05 && range > 0.05 && range < 500.0) {
          track.inv_depth = 1.0 / range;
        } else {
          track.inv_depth = 0.0;
          track.valid = false;
        }
      }
    }
    for (auto& o : track.obs) o.frame -= 1;
    track.anchor_frame -= 1;
    if (!track.obs.empty()) kept.push_back(std::move(track));
  }
  window.tracks = std::move(kept);
}

}  // namespace vio
