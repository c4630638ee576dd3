#pragma once

#include <Eigen/Geometry>

#include <random>
#include <vector>

#include "gmatch/keypoints.hpp"

namespace gmatch::testing {

inline std::vector<double> one_hot(std::size_t k, std::size_t dim = 8) {
  std::vector<double> v(dim, 0.0);
  v[k % dim] = 1.0;
  return v;
}

/// Real-feature set; pixels are left at (0, 0).
inline KeypointSet make_set(const std::vector<Point3>& points,
                            const std::vector<std::vector<double>>& features,
                            const Eigen::Vector3d& view = Eigen::Vector3d::UnitZ()) {
  FeatureMatrix f = FeatureMatrix::real(features.empty() ? 8 : features.front().size());
  for (const auto& row : features) f.push_real(row);
  return {std::vector<Pixel>(points.size()), points, std::move(f), FeatureMetric::Euclidean, view};
}

/// Every point gets its own one-hot descriptor.
inline KeypointSet make_unique_set(const std::vector<Point3>& points,
                                   const Eigen::Vector3d& view = Eigen::Vector3d::UnitZ()) {
  std::vector<std::vector<double>> f;
  for (std::size_t i = 0; i < points.size(); ++i) f.push_back(one_hot(i, points.size()));
  return make_set(points, f, view);
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
  return Eigen::Quaterniond(w, x, y, z).normalized().toRotationMatrix();
}

inline std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t n, double half = 0.25,
                                         const Point3& center = Point3(0.0, 0.0, 1.0)) {
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(center + Point3(u(rng), u(rng), u(rng)));
  return pts;
}

}  // namespace gmatch::testing
