#include "gmatch/keypoints.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

namespace gmatch {

std::string_view to_string(FeatureMetric metric) {
  return metric == FeatureMetric::Euclidean ? "euclidean" : "hamming";
}

std::optional<FeatureMetric> parse_metric(std::string_view name) {
  if (name == "euclidean") return FeatureMetric::Euclidean;
  if (name == "hamming") return FeatureMetric::Hamming;
  return std::nullopt;
}

FeatureKind kind_for(FeatureMetric metric) {
  return metric == FeatureMetric::Euclidean ? FeatureKind::Real : FeatureKind::Binary;
}

FeatureMatrix FeatureMatrix::real(std::size_t length) {
  FeatureMatrix m;
  m.kind_ = FeatureKind::Real;
  m.length_ = length;
  return m;
}

FeatureMatrix FeatureMatrix::binary(std::size_t bits) {
  FeatureMatrix m;
  m.kind_ = FeatureKind::Binary;
  m.length_ = bits;
  return m;
}

void FeatureMatrix::push_real(std::span<const double> row) {
  if (kind_ != FeatureKind::Real) {
    throw Error(ErrorCode::InvalidKeypoints, "real row pushed into a binary feature matrix");
  }
  if (row.size() != length_ || length_ == 0) {
    throw Error(ErrorCode::InvalidKeypoints, "feature row has length " +
                                                 std::to_string(row.size()) + ", expected " +
                                                 std::to_string(length_));
  }
  for (double x : row) {
    if (std::isnan(x)) throw Error(ErrorCode::InvalidKeypoints, "feature contains NaN");
  }
  real_.insert(real_.end(), row.begin(), row.end());
  ++rows_;
}

void FeatureMatrix::push_binary(std::span<const std::uint8_t> packed) {
  if (kind_ != FeatureKind::Binary) {
    throw Error(ErrorCode::InvalidKeypoints, "binary row pushed into a real feature matrix");
  }
  if (packed.size() != bytes_per_row() || length_ == 0) {
    throw Error(ErrorCode::InvalidKeypoints, "binary feature has " +
                                                 std::to_string(packed.size()) +
                                                 " bytes, expected " +
                                                 std::to_string(bytes_per_row()));
  }
  bits_.insert(bits_.end(), packed.begin(), packed.end());
  if (const std::size_t spare = length_ % 8; spare != 0) {
    bits_.back() &= static_cast<std::uint8_t>((1u << spare) - 1u);
  }
  ++rows_;
}

std::span<const double> FeatureMatrix::real_row(std::size_t i) const {
  return {real_.data() + i * length_, length_};
}

std::span<const std::uint8_t> FeatureMatrix::binary_row(std::size_t i) const {
  const std::size_t stride = bytes_per_row();
  return {bits_.data() + i * stride, stride};
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.kind_ = kind_;
  out.length_ = length_;
  for (std::size_t r : rows) {
    if (kind_ == FeatureKind::Real) {
      const auto row = real_row(r);
      out.real_.insert(out.real_.end(), row.begin(), row.end());
    } else {
      const auto row = binary_row(r);
      out.bits_.insert(out.bits_.end(), row.begin(), row.end());
    }
    ++out.rows_;
  }
  return out;
}

double feature_distance(const FeatureMatrix& a, std::size_t i, const FeatureMatrix& b,
                        std::size_t j, FeatureMetric metric) {
  if (metric == FeatureMetric::Euclidean) {
    const auto x = a.real_row(i);
    const auto y = b.real_row(j);
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double d = x[k] - y[k];
      sum += d * d;
    }
    return std::sqrt(sum);
  }
  const auto x = a.binary_row(i);
  const auto y = b.binary_row(j);
  int count = 0;
  std::size_t k = 0;
  for (; k + 8 <= x.size(); k += 8) {
    std::uint64_t wx, wy;
    std::memcpy(&wx, x.data() + k, 8);
    std::memcpy(&wy, y.data() + k, 8);
    count += std::popcount(wx ^ wy);
  }
  for (; k < x.size(); ++k) count += std::popcount(static_cast<unsigned>(x[k] ^ y[k]));
  return count;
}

KeypointSet::KeypointSet(std::vector<Pixel> pixels, std::vector<Point3> points,
                         FeatureMatrix features, FeatureMetric metric,
                         const Eigen::Vector3d& view)
    : pixels_(std::move(pixels)),
      points_(std::move(points)),
      features_(std::move(features)),
      metric_(metric),
      view_(view) {
  if (pixels_.size() != points_.size() || features_.rows() != points_.size()) {
    throw Error(ErrorCode::InvalidKeypoints,
                "pixels, points and features must have equal length (" +
                    std::to_string(pixels_.size()) + ", " + std::to_string(points_.size()) +
                    ", " + std::to_string(features_.rows()) + ")");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite()) {
      throw Error(ErrorCode::InvalidKeypoints, "point " + std::to_string(i) + " is not finite");
    }
  }
  if (!view_.allFinite() || std::abs(view_.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidKeypoints, "view direction must be a unit vector");
  }
  if (!points_.empty() && features_.kind() != kind_for(metric_)) {
    throw Error(ErrorCode::MetricMismatch, std::string(to_string(metric_)) +
                                               " metric does not apply to these features");
  }
}

}  // namespace gmatch
