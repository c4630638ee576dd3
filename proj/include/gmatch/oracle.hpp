#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gmatch/geometry.hpp"
#include "gmatch/keypoints.hpp"
#include "gmatch/matcher.hpp"

namespace gmatch {

inline constexpr std::size_t kMaxOraclePool = 20;

/// Exhaustive maximum consistent subset of `pool`: injective, every two
/// members within epsilon_c under pairwise_error, and every triangle passing
/// flip_over_ok (when cfg.check_flip_over). Ties in size go to the smaller
/// sum of pairwise errors, which is reported as accumulated_cost. Pairs come
/// out in pool order. Throws PoolTooLarge beyond kMaxOraclePool entries.
MatchState brute_force_max_consistent(std::span<const CandidatePair> pool,
                                      const KeypointSet& src, const KeypointSet& tgt,
                                      const MatchConfig& cfg);

struct RansacResult {
  RigidTransform transform;
  std::vector<IndexPair> inliers;  // pool order
};

/// Classic hypothesize-and-verify baseline: three random pool pairs,
/// kabsch_solve, count pairs whose transfer error is below inlier_tol. The
/// best hypothesis is refit on its inliers. Throws NoConsensus when no
/// hypothesis reaches three inliers.
RansacResult ransac_baseline(std::span<const CandidatePair> pool, const KeypointSet& src,
                             const KeypointSet& tgt, std::size_t iterations, double inlier_tol,
                             std::uint64_t rng_seed);

/// Plain nearest-neighbor feature matching: each source keypoint takes its
/// closest target descriptor (lowest index on ties) if closer than epsilon_f.
std::vector<CandidatePair> nearest_neighbor_matches(const KeypointSet& src,
                                                    const KeypointSet& tgt, double epsilon_f);

struct PoseError {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
};

/// Geodesic rotation angle between the two rotations and the distance between
/// the translations.
PoseError evaluate_pose(const RigidTransform& estimate, const RigidTransform& truth);

}  // namespace gmatch
