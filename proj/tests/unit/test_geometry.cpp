#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "gmatch/geometry.hpp"
#include "support.hpp"

namespace gmatch {
namespace {

using testing::random_points;
using testing::random_rotation;

const CameraIntrinsics kCamera{600.0, 600.0, 320.0, 240.0, 640, 480};

std::vector<Point3> transformed(const RigidTransform& t, const std::vector<Point3>& pts) {
  std::vector<Point3> out;
  for (const Point3& p : pts) out.push_back(t(p));
  return out;
}

void expect_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(BackProject, PrincipalRay) {
  const Point3 p = back_project({320, 240}, 1.0, kCamera);
  EXPECT_EQ(p, Point3(0.0, 0.0, 1.0));
}

TEST(BackProject, UnitTangentOffset) {
  const CameraIntrinsics wide{600.0, 600.0, 320.0, 240.0, 1280, 480};
  const Point3 p = back_project({920, 240}, 2.0, wide);
  EXPECT_DOUBLE_EQ(p.x(), 2.0);
  EXPECT_DOUBLE_EQ(p.y(), 0.0);
  EXPECT_DOUBLE_EQ(p.z(), 2.0 * 1.0);
}

TEST(BackProject, HandEvaluatedPixel) {
  // x = (100 - 320) * 0.75 / 600, y = (80 - 240) * 0.75 / 600
  const Point3 p = back_project({100, 80}, 0.75, kCamera);
  EXPECT_NEAR(p.x(), -0.275, 1e-15);
  EXPECT_NEAR(p.y(), -0.2, 1e-15);
  EXPECT_DOUBLE_EQ(p.z(), 0.75);
}

TEST(BackProject, RejectsBadInput) {
  expect_code(ErrorCode::InvalidDepth, [] { back_project({10, 10}, 0.0, kCamera); });
  expect_code(ErrorCode::InvalidDepth, [] { back_project({10, 10}, -1.0, kCamera); });
  expect_code(ErrorCode::InvalidDepth, [] { back_project({10, 10}, std::nan(""), kCamera); });
  expect_code(ErrorCode::InvalidPixel, [] { back_project({640, 10}, 1.0, kCamera); });
  expect_code(ErrorCode::InvalidPixel, [] { back_project({-1, 10}, 1.0, kCamera); });
  expect_code(ErrorCode::InvalidIntrinsics,
              [] { back_project({1, 1}, 1.0, CameraIntrinsics{0.0, 600.0, 320.0, 240.0, 640, 480}); });
}

TEST(BackProject, ProjectInverts) {
  const Point3 p = back_project({123, 456 - 100}, 1.3, kCamera);
  const Eigen::Vector2d uv = project(p, kCamera);
  EXPECT_NEAR(uv.x(), 123.0, 1e-9);
  EXPECT_NEAR(uv.y(), 356.0, 1e-9);
}

TEST(PairwiseDistance, Examples) {
  EXPECT_EQ(pairwise_distance({0, 0, 0}, {0, 0, 0}), 0.0);
  EXPECT_EQ(pairwise_distance({1, 0, 0}, {0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(pairwise_distance({1, 2, 3}, {4, 6, 3}), 5.0);
}

TEST(ScalarTriple, UnitAxes) {
  EXPECT_DOUBLE_EQ(scalar_triple({0, 0, 0}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}), 1.0);
}

TEST(ScalarTriple, ColinearIsZero) {
  EXPECT_EQ(scalar_triple({0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {0.3, -4, 2}), 0.0);
}

TEST(ScalarTriple, MatchesDeterminant) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    const auto q = random_points(rng, 4, 1.0, Point3::Zero());
    Eigen::Matrix3d m;
    m.row(0) = (q[0] - q[1]).transpose();
    m.row(1) = (q[0] - q[2]).transpose();
    m.row(2) = (q[0] - q[3]).transpose();
    EXPECT_NEAR(scalar_triple(q[0], q[1], q[2], q[3]), m.determinant(), 1e-12);
  }
}

TEST(RigidTransform, RejectsReflectionAndNonOrthogonal) {
  expect_code(ErrorCode::NotRotation, [] {
    RigidTransform(Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal(), Eigen::Vector3d::Zero());
  });
  expect_code(ErrorCode::NotRotation,
              [] { RigidTransform(2.0 * Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()); });
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(3, 0) = 0.5;
  expect_code(ErrorCode::NotRotation, [&] { RigidTransform::from_matrix(m); });
}

TEST(RigidTransform, ComposeAndInvert) {
  std::mt19937_64 rng(5);
  const RigidTransform a(random_rotation(rng), {0.1, -0.2, 0.3});
  const RigidTransform b(random_rotation(rng), {1.0, 2.0, -0.5});
  const Point3 x(0.3, 0.7, -1.1);
  EXPECT_TRUE(((a * b)(x)).isApprox(a(b(x)), 1e-12));
  EXPECT_TRUE((a.inverse()(a(x))).isApprox(x, 1e-12));
  EXPECT_TRUE(RigidTransform::from_matrix(a.matrix()).matrix().isApprox(a.matrix(), 0.0));
}

TEST(Kabsch, IdentityOnEqualSets) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 6);
  const RigidTransform t = kabsch_solve(pts, pts);
  EXPECT_LT((t.rotation() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_LT(t.translation().norm(), 1e-12);
}

TEST(Kabsch, RecoversRandomTransform) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    const RigidTransform truth(random_rotation(rng), Eigen::Vector3d(0.4, -0.3, 0.2) * k / 10.0);
    const auto src = random_points(rng, 3 + k % 8);
    const RigidTransform t = kabsch_solve(src, transformed(truth, src));
    EXPECT_LT((t.rotation() - truth.rotation()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((t.translation() - truth.translation()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Kabsch, AxisAlignedQuarterTurn) {
  const std::vector<Point3> src = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ())
                                 .toRotationMatrix();
  std::vector<Point3> tgt;
  for (const Point3& p : src) tgt.push_back(rz * p);
  const RigidTransform t = kabsch_solve(src, tgt);
  EXPECT_LT((t.rotation() - rz).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Kabsch, MirroredTargetStillProper) {
  std::mt19937_64 rng(3);
  const auto src = random_points(rng, 8);
  std::vector<Point3> tgt;
  for (const Point3& p : src) tgt.push_back(Point3(-p.x(), p.y(), p.z()));
  const RigidTransform t = kabsch_solve(src, tgt);
  EXPECT_NEAR(t.rotation().determinant(), 1.0, 1e-12);
}

TEST(Kabsch, Errors) {
  const std::vector<Point3> two = {{0, 0, 0}, {1, 0, 0}};
  expect_code(ErrorCode::InsufficientCorrespondences, [&] { kabsch_solve(two, two); });
  const std::vector<Point3> line = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  expect_code(ErrorCode::DegenerateGeometry, [&] { kabsch_solve(line, line); });
  const std::vector<Point3> three = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  expect_code(ErrorCode::InvalidParams, [&] { kabsch_solve(three, two); });
}

TEST(Constructive, IdentityOnEqualSets) {
  std::mt19937_64 rng(4);
  const auto pts = random_points(rng, 5);
  const RigidTransform t = recover_transform_constructive(pts, pts);
  EXPECT_LT((t.rotation() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_LT(t.translation().norm(), 1e-12);
}

TEST(Constructive, CoplanarSquareThroughReflectionIsRepaired) {
  // A reflection of a planar set is also reachable by a rotation.
  const std::vector<Point3> square = {{0, 0, 1}, {0.1, 0, 1}, {0.1, 0.1, 1}, {0, 0.1, 1}};
  std::vector<Point3> tgt;
  for (const Point3& p : square) tgt.push_back(Point3(-p.x(), p.y(), p.z()));
  const RigidTransform t = recover_transform_constructive(square, tgt);
  EXPECT_NEAR(t.rotation().determinant(), 1.0, 1e-12);
  for (std::size_t i = 0; i < square.size(); ++i) {
    EXPECT_LT((t(square[i]) - tgt[i]).norm(), 1e-9);
  }
}

TEST(Constructive, AgreesWithKabsch) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 100; ++k) {
    const RigidTransform truth(random_rotation(rng), Eigen::Vector3d(0.1, 0.2, -0.3));
    const auto src = random_points(rng, 4 + k % 6);
    const auto tgt = transformed(truth, src);
    const RigidTransform q = recover_transform_constructive(src, tgt);
    const RigidTransform s = kabsch_solve(src, tgt);
    EXPECT_LT((q.matrix() - s.matrix()).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Constructive, TwoPointsAndSinglePoint) {
  const std::vector<Point3> src = {{0, 0, 1}, {0.2, 0, 1}};
  const std::vector<Point3> tgt = {{1, 1, 1}, {1, 1.2, 1}};
  const RigidTransform t = recover_transform_constructive(src, tgt);
  EXPECT_LT((t(src[0]) - tgt[0]).norm(), 1e-12);
  EXPECT_LT((t(src[1]) - tgt[1]).norm(), 1e-12);

  const std::vector<Point3> one = {{1, 2, 3}}, moved = {{0, 0, 0}};
  expect_code(ErrorCode::InsufficientCorrespondences,
              [&] { recover_transform_constructive(one, moved); });
}

TEST(Constructive, Errors) {
  std::mt19937_64 rng(7);
  const auto src = random_points(rng, 6);
  std::vector<Point3> mirrored, stretched;
  for (const Point3& p : src) {
    mirrored.push_back(Point3(-p.x(), p.y(), p.z()));
    stretched.push_back(1.1 * p);
  }
  expect_code(ErrorCode::ChiralityViolation,
              [&] { recover_transform_constructive(src, mirrored); });
  expect_code(ErrorCode::NotConsistent, [&] { recover_transform_constructive(src, stretched); });
}

// Well-spread set: every quadruple spans a volume far above the noise floor.
const std::vector<Point3> kSpread = {
    {0.0, 0.0, 1.0}, {0.3, 0.02, 1.05}, {0.05, 0.28, 0.97}, {0.02, 0.04, 1.31}, {0.21, 0.19, 1.22}};

TEST(VerifyConsistency, SelfAndMirror) {
  EXPECT_TRUE(verify_consistency(kSpread, kSpread, 1e-12));
  std::vector<Point3> mirrored;
  for (const Point3& p : kSpread) mirrored.push_back(Point3(-p.x(), p.y(), p.z()));
  EXPECT_FALSE(verify_consistency(kSpread, mirrored, 1e-2));
}

TEST(VerifyConsistency, NoisyRigidCopyWithinTolerance) {
  for (std::size_t a = 0; a < kSpread.size(); ++a) {
    for (std::size_t b = a + 1; b < kSpread.size(); ++b) {
      for (std::size_t c = b + 1; c < kSpread.size(); ++c) {
        for (std::size_t d = c + 1; d < kSpread.size(); ++d) {
          ASSERT_GT(std::abs(scalar_triple(kSpread[a], kSpread[b], kSpread[c], kSpread[d])), 1e-3);
        }
      }
    }
  }
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 1e-4);
  for (int k = 0; k < 20; ++k) {
    const RigidTransform t(random_rotation(rng), Eigen::Vector3d(0.1, 0.0, 0.2));
    std::vector<Point3> tgt;
    for (const Point3& p : kSpread) tgt.push_back(t(p) + Point3(noise(rng), noise(rng), noise(rng)));
    EXPECT_TRUE(verify_consistency(kSpread, tgt, 1e-2));
  }
}

TEST(VerifyConsistency, DetectsDistanceChange) {
  std::vector<Point3> tgt = kSpread;
  tgt[2].x() += 0.05;
  EXPECT_FALSE(verify_consistency(kSpread, tgt, 1e-2));
}

}  // namespace
}  // namespace gmatch
