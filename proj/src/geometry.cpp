#include "gmatch/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gmatch {

namespace {

constexpr double kColinearRelative = 1e-12;
constexpr double kCoplanarRelative = 1e-9;
constexpr double kTripleFloor = 1e-12;

bool is_proper_rotation(const Eigen::Matrix3d& r) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= RigidTransform::kRotationTolerance &&
         std::abs(r.determinant() - 1.0) <= RigidTransform::kRotationTolerance;
}

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::InvalidParams, "point lists differ in length (" + std::to_string(a) +
                                              " vs " + std::to_string(b) + ")");
  }
}

// Orthonormal vectors completing span(basis) to R^3, drawn from the
// coordinate axes by Gram-Schmidt.
std::vector<Eigen::Vector3d> gram_schmidt_completion(const std::vector<Eigen::Vector3d>& basis) {
  std::vector<Eigen::Vector3d> ortho;
  auto residual = [&ortho](Eigen::Vector3d v) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : ortho) v -= u.dot(v) * u;
    }
    return v;
  };
  for (const auto& v : basis) ortho.push_back(residual(v).normalized());

  std::vector<Eigen::Vector3d> completion;
  while (ortho.size() < 3) {
    Eigen::Vector3d best = Eigen::Vector3d::Zero();
    for (int axis = 0; axis < 3; ++axis) {
      const Eigen::Vector3d r = residual(Eigen::Vector3d::Unit(axis));
      if (r.norm() > best.norm()) best = r;
    }
    best.normalize();
    ortho.push_back(best);
    completion.push_back(best);
  }
  return completion;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::InvalidIntrinsics, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0 || !(cx >= 0.0) || !(cx < width) || !(cy >= 0.0) ||
      !(cy < height)) {
    throw Error(ErrorCode::InvalidIntrinsics, "principal point outside the image");
  }
}

bool CameraIntrinsics::contains(const Pixel& pixel) const {
  return pixel.u >= 0 && pixel.v >= 0 && pixel.u < width && pixel.v < height;
}

RigidTransform::RigidTransform()
    : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_proper_rotation(rotation_)) {
    throw Error(ErrorCode::NotRotation, "matrix is not in SO(3)");
  }
  if (!translation_.allFinite()) {
    throw Error(ErrorCode::NotRotation, "translation is not finite");
  }
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m) {
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
    throw Error(ErrorCode::NotRotation, "bottom row of a homogeneous transform must be 0 0 0 1");
  }
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation_ = a.rotation_ * b.rotation_;
  out.translation_ = a.rotation_ * b.translation_ + a.translation_;
  return out;
}

Point3 back_project(const Pixel& pixel, double depth, const CameraIntrinsics& intrinsics) {
  intrinsics.validate();
  if (!std::isfinite(depth) || depth <= 0.0) {
    throw Error(ErrorCode::InvalidDepth, "depth must be positive and finite, got " +
                                             std::to_string(depth));
  }
  if (!intrinsics.contains(pixel)) {
    throw Error(ErrorCode::InvalidPixel, "pixel (" + std::to_string(pixel.u) + ", " +
                                             std::to_string(pixel.v) + ") outside the image");
  }
  return {(pixel.u - intrinsics.cx) * depth / intrinsics.fx,
          (pixel.v - intrinsics.cy) * depth / intrinsics.fy, depth};
}

Eigen::Vector2d project(const Point3& point, const CameraIntrinsics& intrinsics) {
  return {intrinsics.fx * point.x() / point.z() + intrinsics.cx,
          intrinsics.fy * point.y() / point.z() + intrinsics.cy};
}

double pairwise_distance(const Point3& a, const Point3& b) { return (a - b).norm(); }

double scalar_triple(const Point3& origin, const Point3& a, const Point3& b, const Point3& c) {
  return (origin - a).cross(origin - b).dot(origin - c);
}

RigidTransform kabsch_solve(std::span<const Point3> source, std::span<const Point3> target) {
  require_same_size(source.size(), target.size());
  const std::size_t n = source.size();
  if (n < 3) {
    throw Error(ErrorCode::InsufficientCorrespondences,
                "need at least 3 pairs, got " + std::to_string(n));
  }

  Eigen::Vector3d source_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d target_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    source_mean += source[i];
    target_mean += target[i];
  }
  source_mean /= static_cast<double>(n);
  target_mean /= static_cast<double>(n);

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d s = source[i] - source_mean;
    scatter += s * s.transpose();
    cross += s * (target[i] - target_mean).transpose();
  }

  // Eigenvalues ascending; colinear when the two smallest vanish.
  const Eigen::Vector3d spread = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(
                                     scatter, Eigen::EigenvaluesOnly)
                                     .eigenvalues();
  if (!(spread[2] > 0.0) || spread[1] <= kColinearRelative * spread[2]) {
    throw Error(ErrorCode::DegenerateGeometry, "source points are colinear");
  }

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d rotation = v * d * u.transpose();
  return {rotation, target_mean - rotation * source_mean};
}

RigidTransform recover_transform_constructive(std::span<const Point3> source,
                                              std::span<const Point3> target,
                                              double distance_tolerance) {
  require_same_size(source.size(), target.size());
  const std::size_t n = source.size();
  if (n < 2) {
    throw Error(ErrorCode::InsufficientCorrespondences,
                "need at least 2 points, got " + std::to_string(n));
  }

  double diameter = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      diameter = std::max(diameter, pairwise_distance(source[i], source[j]));
    }
  }
  const double allowed = distance_tolerance * std::max(diameter, 1e-12);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double gap = std::abs(pairwise_distance(source[i], source[j]) -
                                  pairwise_distance(target[i], target[j]));
      if (!(gap <= allowed)) {
        throw Error(ErrorCode::NotConsistent, "distance between points " + std::to_string(i) +
                                                  " and " + std::to_string(j) + " differs by " +
                                                  std::to_string(gap));
      }
    }
  }

  std::vector<Eigen::Vector3d> xs(n - 1), ys(n - 1);
  Eigen::Matrix3Xd centered(3, n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    xs[i - 1] = source[i] - source[0];
    ys[i - 1] = target[i] - target[0];
    centered.col(static_cast<Eigen::Index>(i - 1)) = xs[i - 1];
  }

  const Eigen::VectorXd sigma = Eigen::JacobiSVD<Eigen::Matrix3Xd>(centered).singularValues();
  int dim = 0;
  if (sigma.size() > 0 && sigma[0] > 0.0) {
    for (Eigen::Index k = 0; k < sigma.size(); ++k) {
      if (sigma[k] > kCoplanarRelative * sigma[0]) ++dim;
    }
  }

  // Column-pivoted selection keeps X well conditioned: take the centered
  // vector with the largest component orthogonal to those already chosen.
  std::vector<std::size_t> chosen;
  std::vector<Eigen::Vector3d> ortho;
  for (int k = 0; k < dim; ++k) {
    std::size_t best = 0;
    double best_norm = -1.0;
    Eigen::Vector3d best_residual;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Eigen::Vector3d r = xs[i];
      for (const auto& u : ortho) r -= u.dot(r) * u;
      if (r.norm() > best_norm) {
        best_norm = r.norm();
        best = i;
        best_residual = r;
      }
    }
    chosen.push_back(best);
    ortho.push_back(best_residual.normalized());
  }

  std::vector<Eigen::Vector3d> x_basis, y_basis;
  for (std::size_t i : chosen) {
    x_basis.push_back(xs[i]);
    y_basis.push_back(ys[i]);
  }
  const auto x_fill = gram_schmidt_completion(x_basis);
  const auto y_fill = gram_schmidt_completion(y_basis);

  Eigen::Matrix3d x_mat, y_mat;
  for (int c = 0; c < 3; ++c) {
    const bool from_basis = c < dim;
    x_mat.col(c) = from_basis ? x_basis[c] : x_fill[c - dim];
    y_mat.col(c) = from_basis ? y_basis[c] : y_fill[c - dim];
  }

  const Eigen::Matrix3d x_inv = x_mat.inverse();
  Eigen::Matrix3d q = y_mat * x_inv;
  if (q.determinant() < 0.0) {
    if (dim == 3) {
      throw Error(ErrorCode::ChiralityViolation,
                  "non-coplanar sets are related only by a reflection");
    }
    // Column 2 is a completion vector here, so flipping it leaves the basis
    // correspondence intact.
    q = y_mat * Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal() * x_inv;
  }
  return {q, target[0] - q * source[0]};
}

bool verify_consistency(std::span<const Point3> source, std::span<const Point3> target,
                        double tol) {
  if (source.size() != target.size()) return false;
  const std::size_t n = source.size();

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ds = pairwise_distance(source[i], source[j]);
      const double dt = pairwise_distance(target[i], target[j]);
      if (std::abs(ds - dt) > tol * std::max(ds, dt)) return false;
    }
  }

  // Reordering a quadruple only changes the sign of the triple product on
  // both sides together, so i < j < k < l covers every case.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        for (std::size_t l = k + 1; l < n; ++l) {
          const double vs = scalar_triple(source[i], source[j], source[k], source[l]);
          const double vt = scalar_triple(target[i], target[j], target[k], target[l]);
          const double magnitude = std::max(std::abs(vs), std::abs(vt));
          if (magnitude < kTripleFloor) continue;
          if (vs * vt <= 0.0) return false;
          if (std::abs(vs - vt) > tol * magnitude) return false;
        }
      }
    }
  }
  return true;
}

}  // namespace gmatch
