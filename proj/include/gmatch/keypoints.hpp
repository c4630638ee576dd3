#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gmatch/geometry.hpp"

namespace gmatch {

enum class FeatureKind { Real, Binary };
enum class FeatureMetric { Euclidean, Hamming };

std::string_view to_string(FeatureMetric metric);
std::optional<FeatureMetric> parse_metric(std::string_view name);
FeatureKind kind_for(FeatureMetric metric);

/// Row-major storage for one keypoint set's descriptors.
///
/// Real rows hold `length()` doubles; binary rows hold `length()` bits packed
/// little-endian into ceil(length / 8) bytes. Padding bits are kept zero.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  static FeatureMatrix real(std::size_t length);
  static FeatureMatrix binary(std::size_t bits);

  FeatureKind kind() const { return kind_; }
  std::size_t length() const { return length_; }
  std::size_t rows() const { return rows_; }
  std::size_t bytes_per_row() const { return kind_ == FeatureKind::Binary ? (length_ + 7) / 8 : 0; }

  void push_real(std::span<const double> row);
  void push_binary(std::span<const std::uint8_t> packed);

  std::span<const double> real_row(std::size_t i) const;
  std::span<const std::uint8_t> binary_row(std::size_t i) const;

  /// Copies the given rows, in order, into a new matrix.
  FeatureMatrix select(std::span<const std::size_t> rows) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  FeatureKind kind_ = FeatureKind::Real;
  std::size_t length_ = 0;
  std::size_t rows_ = 0;
  std::vector<double> real_;
  std::vector<std::uint8_t> bits_;
};

/// d_f between row i of `a` and row j of `b`. Kinds and lengths must match.
double feature_distance(const FeatureMatrix& a, std::size_t i, const FeatureMatrix& b,
                        std::size_t j, FeatureMetric metric);

/// Keypoints of one RGB-D image: pixels, 3D points, descriptors and the
/// camera's viewing direction expressed in the same frame as the points.
///
/// Immutable after construction; the constructor enforces equal lengths,
/// finite points, a unit view vector and a metric that suits the feature kind.
class KeypointSet {
 public:
  KeypointSet() = default;
  KeypointSet(std::vector<Pixel> pixels, std::vector<Point3> points, FeatureMatrix features,
              FeatureMetric metric, const Eigen::Vector3d& view = Eigen::Vector3d::UnitZ());

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  const std::vector<Pixel>& pixels() const { return pixels_; }
  const std::vector<Point3>& points() const { return points_; }
  const Point3& point(std::size_t i) const { return points_[i]; }
  const FeatureMatrix& features() const { return features_; }
  FeatureMetric metric() const { return metric_; }
  const Eigen::Vector3d& view() const { return view_; }

  friend bool operator==(const KeypointSet&, const KeypointSet&) = default;

 private:
  std::vector<Pixel> pixels_;
  std::vector<Point3> points_;
  FeatureMatrix features_;
  FeatureMetric metric_ = FeatureMetric::Euclidean;
  Eigen::Vector3d view_ = Eigen::Vector3d::UnitZ();
};

}  // namespace gmatch
