#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmatch/geometry.hpp"
#include "gmatch/keypoints.hpp"
#include "gmatch/matcher.hpp"
#include "gmatch/pipeline.hpp"
#include "gmatch/synth.hpp"

namespace gmatch {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ParseError on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Keypoint files are JSON Lines: a header object followed by one record per
// keypoint. See docs/file_formats.md.

struct LoadedKeypoints {
  KeypointSet keypoints;
  std::vector<std::size_t> record_index;  // file record of each loaded keypoint
  std::vector<std::size_t> rejected;      // records dropped for missing depth
  std::optional<CameraIntrinsics> intrinsics;
};

LoadedKeypoints read_keypoints(std::istream& in);
LoadedKeypoints load_keypoints(const std::filesystem::path& path);

/// Writes explicit 3D points (never depth) and f64 feature payloads, so a
/// loaded set compares equal to the one saved.
void write_keypoints(std::ostream& out, const KeypointSet& keypoints,
                     const std::optional<CameraIntrinsics>& intrinsics = std::nullopt);
void save_keypoints(const std::filesystem::path& path, const KeypointSet& keypoints,
                    const std::optional<CameraIntrinsics>& intrinsics = std::nullopt);

struct PoseFile {
  RigidTransform pose;
  std::size_t match_count = 0;
  double accumulated_cost = 0.0;
  std::vector<IndexPair> pairs;
  std::optional<StageTimings> timing;
};

std::string pose_to_json(const PoseFile& pose);
PoseFile pose_from_json(std::string_view text);
void save_pose(const std::filesystem::path& path, const PoseFile& pose);
PoseFile load_pose(const std::filesystem::path& path);

/// Writes source.jsonl, target.jsonl and truth.json into `dir`.
void save_scene(const std::filesystem::path& dir, const SynthScene& scene);

}  // namespace gmatch
