#pragma once

#include "vio/dataset.hpp"
#include "vio/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vio {

inline constexpr int kDescriptorDim = 64;

// Persistent per-landmark descriptor (unit 64-vector) plus a noisy
// per-observation variant; both deterministic in their seeds.
VecX landmark_descriptor(int64_t kp_id, uint64_t seed);
VecX observe_descriptor(int64_t kp_id, int frame_id, uint64_t seed,
                        double sigma);

struct KeyframeRecord {
  int64_t index = 0;  // keyframe id
  Pose pose;          // estimated body pose in world
  int64_t loop_index = -1;           // candidate keyframe, -1 when none
  Vec3 loop_rel_p = Vec3::Zero();    // relative position in body i frame
  double loop_rel_yaw = 0.0;
  std::vector<Vec2> keypoints;       // pixel locations
  std::vector<VecX> descriptors;     // unit vectors, parallel to keypoints
};

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (index in a, index in b)
  std::vector<double> scores;              // descending
};

using MatcherInterface = std::function<MatchResult(
    const std::vector<VecX>&, const std::vector<VecX>&)>;

// Mutual nearest neighbor with a 0.8 ratio test; one-to-one by construction.
MatchResult mutual_nn_matcher(const std::vector<VecX>& a,
                              const std::vector<VecX>& b);

struct LoopCandidate {
  int64_t index = 0;
  double similarity = 0.0;  // mean-descriptor cosine
  MatchResult matches;
};

class KeyframeDatabase {
 public:
  // Rejects duplicate indices. Keypoints and descriptors are quantized to
  // float32 on insertion so the on-disk round trip is bit-exact.
  void add_keyframe(KeyframeRecord record);
  const KeyframeRecord* get(int64_t index) const;
  KeyframeRecord* mutable_get(int64_t index);
  size_t size() const { return records_.size(); }
  const std::map<int64_t, KeyframeRecord>& records() const { return records_; }

  // Top-K retrieval by mean-descriptor cosine similarity, skipping indices
  // within the exclusion window of the query; candidates survive only with
  // at least t_knn mutual-NN matches.
  std::vector<LoopCandidate> query_candidates(
      const KeyframeRecord& query, int k, int t_knn,
      int exclusion_window = 30,
      const MatcherInterface& matcher = mutual_nn_matcher) const;

  void save(const std::string& dir) const;
  static KeyframeDatabase load(const std::string& dir);

 private:
  std::map<int64_t, KeyframeRecord> records_;
  std::map<int64_t, VecX> mean_descriptors_;
};

struct PnpMatch {
  Vec3 point;  // 3-D point in the query camera frame
  Vec2 pixel;  // observation in the candidate image
};

struct PnpResult {
  Pose cand_from_query;  // x_cand_cam = q * x_query_cam + p
  std::vector<int> inliers;
};

// P3P hypotheses inside RANSAC with a 2 px reprojection gate and
// Gauss-Newton refinement on the consensus set. Returns nullopt for fewer
// than 4 matches or a consensus below min_inliers.
std::optional<PnpResult> solve_pnp_ransac(const std::vector<PnpMatch>& matches,
                                          const CameraModel& camera,
                                          uint64_t seed,
                                          double threshold_px = 2.0,
                                          int min_inliers = 12,
                                          int max_iterations = 100);

// Relative position (in body i) and yaw difference between two poses, yaw
// by ZYX decomposition. Logs a warning near gimbal lock.
struct RelativeEdge {
  Vec3 rel_p = Vec3::Zero();
  double rel_yaw = 0.0;
};
RelativeEdge relative_edge(const Pose& pose_i, const Pose& pose_j);

struct PoseGraphNode {
  int64_t id = 0;
  Vec3 p = Vec3::Zero();
  double yaw = 0.0;
  double pitch = 0.0;  // frozen
  double roll = 0.0;   // frozen

  Quat orientation() const;
};

enum class EdgeKind { kSequential, kLoop };

struct PoseGraphEdge {
  int64_t i = 0;
  int64_t j = 0;
  Vec3 rel_p = Vec3::Zero();
  double rel_yaw = 0.0;
  EdgeKind kind = EdgeKind::kSequential;
};

PoseGraphNode make_pose_graph_node(int64_t id, const Pose& pose);

// Gauss-Newton over (p, yaw) per node with the first node fixed; pitch and
// roll stay untouched. Throws on a disconnected graph, listing components.
void optimize_pose_graph(std::vector<PoseGraphNode>& nodes,
                         const std::vector<PoseGraphEdge>& edges,
                         int max_iterations = 25);

// Residual of one edge under the current node values (3+1 rows).
Vec4 pose_graph_residual(const PoseGraphNode& ni, const PoseGraphNode& nj,
                         const PoseGraphEdge& edge);

struct PoseGraphJacobians {
  Eigen::Matrix<double, 4, 3> dp_i, dp_j;
  Vec4 dyaw_i, dyaw_j;
};
PoseGraphJacobians pose_graph_jacobians(const PoseGraphNode& ni,
                                        const PoseGraphNode& nj,
                                        const PoseGraphEdge& edge);

}  // namespace vio
