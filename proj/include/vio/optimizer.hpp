#pragma once

#include "vio/dataset.hpp"
#include "vio/geometry.hpp"
#include "vio/preintegration.hpp"
#include "vio/types.hpp"

#include <optional>
#include <vector>

namespace vio {

struct WindowConfig {
  int window_size = 10;  // n; a full window holds n+1 body states
  int max_iterations = 12;
  double time_budget_s = 0.0;  // 0 disables the wall-clock stop
  double rel_cost_decrease = 1e-6;
  double abs_cost_floor = 1e-12;  // below this the window counts as optimal
  double visual_sigma_px = 1.5;
  double focal = 420.0;  // maps the pixel sigma onto the unit sphere
  HuberVariant huber_variant = HuberVariant::kStandard;
  bool fix_first_state = true;  // gauge anchor while no prior exists
  Vec3 gravity_w = kGravityWorld;
};

struct FeatureObsW {
  int frame = 0;  // window slot
  Vec3 bearing = Vec3::UnitZ();
  Vec2 px = Vec2::Zero();
};

struct FeatureTrack {
  int64_t id = 0;
  int anchor_frame = 0;
  std::vector<FeatureObsW> obs;  // first entry is the anchor observation
  double inv_depth = 0.0;        // 1/range along the anchor bearing
  bool valid = false;

  bool usable() const { return valid && inv_depth > 0.0 && obs.size() >= 2; }
};

struct ImuEdge {
  PreintegratedDelta delta;  // between window slots k and k+1
  double psi_b = 1.0;
};

// FEJ linear prior: cost = || r0 + J * (chi [-] lin) ||^2 over the first
// `num_states` window slots.
struct MarginalizationPrior {
  MatX jacobian;
  VecX residual0;
  std::vector<BodyState> lin_states;
  int num_states = 0;

  bool valid() const { return jacobian.size() > 0; }
};

struct SlidingWindow {
  std::vector<BodyState> states;
  Pose extrinsic;  // camera in body, held constant
  std::vector<FeatureTrack> tracks;
  std::vector<ImuEdge> imu_edges;  // size states.size() - 1 when inertial
  std::vector<double> psi_c;       // per-frame visual weight
  MarginalizationPrior prior;
  bool use_inertial = true;
  bool use_visual = true;
};

// Orthonormal tangent basis rows at a unit bearing (Gram-Schmidt against a
// fixed tie-break axis: world x unless |bearing.x| > 0.9, then y).
Eigen::Matrix<double, 2, 3> tangent_basis(const Vec3& bearing);

// Two-view midpoint triangulation in the anchor camera; returns the inverse
// range or nullopt for near-zero baselines, negative depths, or ranges
// beyond 500 m.
std::optional<double> triangulate(const FeatureTrack& track,
                                  const std::vector<BodyState>& states,
                                  const Pose& extrinsic);

struct VisualResidual {
  Vec2 r = Vec2::Zero();
  bool valid = false;
};

VisualResidual visual_residual(const BodyState& state_i,
                               const BodyState& state_j, const Pose& extrinsic,
                               const Vec3& bearing_i, const Vec3& bearing_j,
                               double inv_depth);

struct VisualJacobians {
  Eigen::Matrix<double, 2, 3> dp_i, dtheta_i, dp_j, dtheta_j;
  Vec2 dinv_depth;
  bool valid = false;
};

VisualJacobians visual_residual_jacobians(const BodyState& state_i,
                                          const BodyState& state_j,
                                          const Pose& extrinsic,
                                          const Vec3& bearing_i,
                                          const Vec3& bearing_j,
                                          double inv_depth);

struct CostBreakdown {
  double total = 0.0;
  double prior = 0.0;
  double imu = 0.0;
  double visual = 0.0;
  VecX gradient;  // d cost / d params (states then landmarks)
};

// Weighted window cost: prior + sum psi_b * ||r_B||^2_P +
// sum psi_c * huber(||r_C||^2_P). With unit weights this is the plain
// unweighted cost on the same blocks.
CostBreakdown total_cost(const SlidingWindow& window,
                         const WindowConfig& config);

struct SolveReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  bool non_convergence = false;  // five consecutive rejected steps
};

// Damped Gauss-Newton with a dense Schur complement over landmarks.
SolveReport solve(SlidingWindow& window, const WindowConfig& config);

// Schur-complements the oldest state and its anchored features into the
// prior at the current linearization point, then shifts the window.
void marginalize_and_slide(SlidingWindow& window, const WindowConfig& config);

}  // namespace vio
