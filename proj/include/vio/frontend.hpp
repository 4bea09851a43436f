#pragma once

#include "vio/dataset.hpp"
#include "vio/types.hpp"

#include <optional>
#include <vector>

namespace vio {

struct Correspondence {
  int64_t kp_id = 0;
  Vec2 px_prev = Vec2::Zero();
  Vec2 px_cur = Vec2::Zero();
  Vec3 norm_prev = Vec3::UnitZ();  // normalized homogeneous (x, y, 1)
  Vec3 norm_cur = Vec3::UnitZ();
  int semantic_label = 0;  // 0 static, 1 dynamic (mask lookup)
};

Correspondence make_correspondence(int64_t kp_id, const Vec2& px_prev,
                                   const Vec2& px_cur, const CameraModel& cam);

enum class KeypointStatus { kKept, kFilteredDynamic, kRansacOutlier };

struct SemanticMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;  // 255 static, 0 dynamic

  bool is_dynamic(double u, double v) const {
    const int x = static_cast<int>(std::lround(u));
    const int y = static_cast<int>(std::lround(v));
    if (x < 0 || x >= width || y < 0 || y >= height) return true;
    return data[static_cast<size_t>(y) * width + x] == 0;
  }
};

// Grows the dynamic (0) region by a disk of the given radius. Exact
// Euclidean dilation via a squared distance transform.
SemanticMask dilate_mask(const SemanticMask& mask, double radius_px);

struct PartitionResult {
  std::vector<int> static_idx;
  std::vector<int> dynamic_idx;
  std::vector<int> dropped_idx;  // out-of-bounds lookups
};

// Labels each correspondence by current-frame pixel lookup in the (already
// dilated) mask and writes the label back into the correspondence.
PartitionResult semantic_partition(std::vector<Correspondence>& corr,
                                   const SemanticMask& mask);

struct RansacParams {
  uint64_t seed = 0;
  double inlier_threshold_px = 1.0;
  int max_iterations = 200;
  double confidence = 0.99;
};

struct RansacResult {
  Mat3 F = Mat3::Zero();  // rank 2, unit Frobenius norm; maps prev -> cur
  std::vector<int> inliers;
};

// Normalized eight-point solve on minimal samples with Sampson-distance
// scoring and a final refit on the best consensus. Returns nullopt for
// fewer than eight correspondences.
std::optional<RansacResult> estimate_fundamental_ransac(
    const std::vector<Correspondence>& corr, const std::vector<int>& subset,
    const RansacParams& params);

// Squared Sampson distance in pixels^2.
double sampson_distance_sq(const Mat3& F, const Vec2& px_prev,
                           const Vec2& px_cur);

// Indices (into corr) whose Sampson distance under F stays below epsilon.
std::vector<int> epipolar_readmission(const std::vector<Correspondence>& corr,
                                      const Mat3& F, double epsilon_px);

struct FrontendParams {
  uint64_t seed = 0;
  double epsilon_px = 1.0;
  double ransac_threshold_px = 1.0;
  int ransac_max_iterations = 200;
  double f_max = 250.0;
  double dilation_radius_px = 3.0;
};

struct FrontendOutput {
  std::vector<Correspondence> kept;
  double psi_c = 0.0;
  Mat3 f_accurate = Mat3::Zero();
  bool degenerate = false;
  std::vector<std::pair<int64_t, KeypointStatus>> statuses;
};

// Step 1: RANSAC on static-labeled points; step 2: epipolar re-admission of
// everything consistent with the initial F; step 3: RANSAC on the
// re-admitted set. A degenerate step 1 or 3 yields an empty set, psi_c = 0.
FrontendOutput three_step_filter(std::vector<Correspondence> corr,
                                 const SemanticMask& mask,
                                 const FrontendParams& params);

// Single-RANSAC path used when the semantic filter is disabled.
FrontendOutput single_ransac_filter(std::vector<Correspondence> corr,
                                    const FrontendParams& params);

}  // namespace vio
