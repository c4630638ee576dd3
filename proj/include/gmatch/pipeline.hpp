#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "gmatch/geometry.hpp"
#include "gmatch/keypoints.hpp"
#include "gmatch/matcher.hpp"
#include "gmatch/refine.hpp"

namespace gmatch {

/// Seconds spent in each pipeline stage.
struct StageTimings {
  double candidate = 0.0;
  double seed = 0.0;
  double expand = 0.0;
  double solve = 0.0;
  double refine = 0.0;

  friend bool operator==(const StageTimings&, const StageTimings&) = default;
};

struct PipelineConfig {
  MatchConfig match;
  bool icp = true;
  IcpConfig icp_config;
};

struct PipelineResult {
  std::optional<RigidTransform> pose;  // empty when fewer than 3 matches survive
  MatchState matches;
  std::size_t candidate_count = 0;
  std::size_t seed_count = 0;
  bool refined = false;                // ICP ran and its result was kept
  StageTimings timing;
  std::string diagnostic;              // why no pose was produced
};

/// candidate_pairs, seed_hypotheses, expand_hypotheses, kabsch_solve and,
/// when enabled, icp_refine over the keypoint 3D points. A missing pose is a
/// reported outcome, not an exception.
PipelineResult estimate_pose(const KeypointSet& src, const KeypointSet& tgt,
                             const PipelineConfig& cfg);

}  // namespace gmatch
