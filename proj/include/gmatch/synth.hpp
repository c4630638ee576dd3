#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <optional>
#include <vector>

#include "gmatch/keypoints.hpp"
#include "gmatch/matcher.hpp"

namespace gmatch {

enum class ScenePreset {
  // Points uniform in a 0.5 m cube one meter in front of the source camera.
  Cube,
  // Coplanar points facing the camera, laid out in mirror-symmetric twins
  // that share a descriptor. Without the flip-over constraint the mirrored
  // assignment is exactly as consistent as the true one.
  PlanarMirror,
};

std::string_view to_string(ScenePreset preset);
std::optional<ScenePreset> parse_preset(std::string_view name);

struct SynthParams {
  std::size_t n_points = 30;               // keypoints with a true correspondence
  std::size_t duplicate_feature_groups = 0;
  double duplicate_fraction = 0.0;         // share of the n_points placed in duplicate groups
  double feature_noise_sigma = 0.0;        // per element, before renormalization
  double depth_noise_sigma = 0.0;          // meters along target z, truncated at 3 sigma
  std::size_t outlier_count = 0;           // unmatched keypoints added to each set
  std::uint64_t seed = 0;
  std::size_t feature_dim = 128;
  ScenePreset preset = ScenePreset::Cube;

  /// Throws InvalidParams.
  void validate() const;

  friend bool operator==(const SynthParams&, const SynthParams&) = default;
};

struct SynthScene {
  KeypointSet source;
  KeypointSet target;
  RigidTransform truth;                 // maps source points onto target points
  std::vector<IndexPair> truth_pairs;   // sorted by source index
  SynthParams params;
};

/// Intrinsics used to fill in pixel coordinates of generated keypoints.
CameraIntrinsics synth_intrinsics();

/// Deterministic in `params.seed`. Features are random unit vectors; target
/// descriptors get gaussian noise and are renormalized. Outliers copy the
/// descriptor of a random inlier so that they produce impostor candidates.
/// Both sets are shuffled so indices carry no correspondence information.
/// The target view direction is the source view carried through the truth
/// rotation, i.e. both cameras see the same face of the object.
SynthScene synth_scene(const SynthParams& params);

}  // namespace gmatch
