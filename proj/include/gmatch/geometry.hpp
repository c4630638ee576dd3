#pragma once

#include <Eigen/Core>

#include <span>

#include "gmatch/error.hpp"

namespace gmatch {

using Point3 = Eigen::Vector3d;

struct Pixel {
  int u = 0;
  int v = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Pinhole intrinsics, camera looking down +z.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidIntrinsics unless fx, fy > 0 and the principal point lies
  /// inside the image.
  void validate() const;
  bool contains(const Pixel& pixel) const;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Proper rigid motion x -> R x + t with R in SO(3).
///
/// Construction rejects anything that is not orthonormal with det = +1 to
/// within kRotationTolerance, so a RigidTransform in hand is always a
/// rotation, never a reflection.
class RigidTransform {
 public:
  static constexpr double kRotationTolerance = 1e-9;

  RigidTransform();
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return {}; }
  /// Homogeneous 4x4; the bottom row must be (0, 0, 0, 1).
  static RigidTransform from_matrix(const Eigen::Matrix4d& matrix);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix4d matrix() const;

  Point3 operator()(const Point3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;
  /// (a * b)(x) == a(b(x))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// Returns ((u - cx) z / fx, (v - cy) z / fy, z).
Point3 back_project(const Pixel& pixel, double depth, const CameraIntrinsics& intrinsics);

/// Inverse of back_project up to pixel rounding; returns continuous coordinates.
Eigen::Vector2d project(const Point3& point, const CameraIntrinsics& intrinsics);

double pairwise_distance(const Point3& a, const Point3& b);

/// ((origin - a) x (origin - b)) . (origin - c)
double scalar_triple(const Point3& origin, const Point3& a, const Point3& b, const Point3& c);

/// Least-squares proper rigid transform taking source[i] onto target[i].
///
/// Reflections are resolved by flipping the direction of the smallest
/// singular value. Throws InsufficientCorrespondences for fewer than three
/// pairs and DegenerateGeometry for a colinear (or coincident) source.
RigidTransform kabsch_solve(std::span<const Point3> source, std::span<const Point3> target);

/// Recovers Q, t with target[i] = Q source[i] + t by the constructive
/// argument: center both sets on their first point, pick a basis of the
/// centered source vectors, complete it to R^3 with Gram-Schmidt, and form
/// Q = Y X^-1 from the matching columns. Coplanar sets whose Q comes out
/// improper are repaired with Y diag(1, 1, -1) X^-1.
///
/// `distance_tolerance` is relative to the source diameter. Throws
/// NotConsistent when some pairwise distance disagrees by more than that,
/// and ChiralityViolation when a non-coplanar pair of sets is only related
/// by a reflection.
RigidTransform recover_transform_constructive(std::span<const Point3> source,
                                              std::span<const Point3> target,
                                              double distance_tolerance = 1e-9);

/// Quartic check that every pairwise distance and every scalar triple product
/// agree between the two ordered sets (relative tolerance `tol`). Triple
/// products below 1e-12 m^3 in both sets are skipped. Intended for small n.
bool verify_consistency(std::span<const Point3> source, std::span<const Point3> target,
                        double tol);

}  // namespace gmatch
