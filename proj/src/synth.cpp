#include "gmatch/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace gmatch {

namespace {

using Rng = std::mt19937_64;

Eigen::Vector3d uniform_box(Rng& rng, const Eigen::Vector3d& center, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  const double x = u(rng), y = u(rng), z = u(rng);
  return center + Eigen::Vector3d(x, y, z);
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
  return Eigen::Quaterniond(w, x, y, z).normalized().toRotationMatrix();
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = n(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<double> perturb(Rng& rng, const std::vector<double>& base, double sigma) {
  if (sigma == 0.0) return base;
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> v(base);
  double norm = 0.0;
  for (double& x : v) {
    x += n(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double truncated_noise(Rng& rng, double sigma) {
  if (sigma == 0.0) return 0.0;
  std::normal_distribution<double> n(0.0, sigma);
  for (;;) {
    const double e = n(rng);
    if (std::abs(e) <= 3.0 * sigma) return e;
  }
}

Pixel pixel_for(const Point3& p) {
  const CameraIntrinsics k = synth_intrinsics();
  if (!(p.z() > 0.0)) return {0, 0};
  const Eigen::Vector2d uv = project(p, k);
  return {std::clamp(static_cast<int>(std::lround(uv.x())), 0, k.width - 1),
          std::clamp(static_cast<int>(std::lround(uv.y())), 0, k.height - 1)};
}

struct Draft {
  Point3 point;
  std::vector<double> feature;
  std::ptrdiff_t partner = -1;  // index into the other set's drafts, -1 for outliers
};

KeypointSet assemble(const std::vector<Draft>& drafts, const std::vector<std::size_t>& order,
                     std::size_t dim, const Eigen::Vector3d& view) {
  std::vector<Pixel> pixels;
  std::vector<Point3> points;
  FeatureMatrix features = FeatureMatrix::real(dim);
  for (std::size_t k : order) {
    points.push_back(drafts[k].point);
    pixels.push_back(pixel_for(drafts[k].point));
    features.push_real(drafts[k].feature);
  }
  return {std::move(pixels), std::move(points), std::move(features), FeatureMetric::Euclidean,
          view};
}

}  // namespace

std::string_view to_string(ScenePreset preset) {
  return preset == ScenePreset::Cube ? "cube" : "planar-mirror";
}

std::optional<ScenePreset> parse_preset(std::string_view name) {
  if (name == "cube") return ScenePreset::Cube;
  if (name == "planar-mirror") return ScenePreset::PlanarMirror;
  return std::nullopt;
}

void SynthParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidParams, what); };
  if (n_points < 3) fail("n_points must be at least 3");
  if (feature_dim == 0) fail("feature_dim must be positive");
  if (!(duplicate_fraction >= 0.0 && duplicate_fraction <= 1.0)) {
    fail("duplicate_fraction must lie in [0, 1]");
  }
  if (duplicate_fraction > 0.0 && duplicate_feature_groups == 0) {
    fail("duplicate_fraction needs at least one duplicate group");
  }
  if (!(feature_noise_sigma >= 0.0) || !std::isfinite(feature_noise_sigma)) {
    fail("feature_noise_sigma must be non-negative");
  }
  if (!(depth_noise_sigma >= 0.0) || !std::isfinite(depth_noise_sigma)) {
    fail("depth_noise_sigma must be non-negative");
  }
  if (preset == ScenePreset::PlanarMirror && (n_points % 2 != 0 || n_points < 4)) {
    fail("planar-mirror scenes need an even n_points of at least 4");
  }
}

CameraIntrinsics synth_intrinsics() { return {600.0, 600.0, 320.0, 240.0, 640, 480}; }

SynthScene synth_scene(const SynthParams& params) {
  params.validate();
  Rng rng(params.seed);
  const std::size_t n = params.n_points;
  const std::size_t dim = params.feature_dim;
  const Eigen::Vector3d source_center(0.0, 0.0, 1.0);

  const Eigen::Matrix3d rotation = random_rotation(rng);
  const Eigen::Vector3d target_center = uniform_box(rng, source_center, 0.2);
  const RigidTransform truth(rotation, target_center - rotation * source_center);

  std::vector<Draft> src, tgt;
  std::vector<std::vector<double>> base(n);

  if (params.preset == ScenePreset::Cube) {
    for (std::size_t i = 0; i < n; ++i) {
      src.push_back({uniform_box(rng, source_center, 0.25), {}, -1});
      base[i] = random_unit(rng, dim);
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto dup = static_cast<std::size_t>(std::lround(params.duplicate_fraction * n));
    for (std::size_t k = 0; k < dup; ++k) {
      const std::size_t group = k % params.duplicate_feature_groups;
      base[perm[k]] = base[perm[group]];
    }
  } else {
    // Twins mirrored across x = 0 on the plane z = 1.
    std::uniform_real_distribution<double> ux(0.03, 0.2), uy(-0.15, 0.15);
    for (std::size_t i = 0; i < n / 2; ++i) {
      const double x = ux(rng), y = uy(rng);
      src.push_back({{x, y, 1.0}, {}, -1});
      src.push_back({{-x, y, 1.0}, {}, -1});
      base[2 * i] = random_unit(rng, dim);
      base[2 * i + 1] = base[2 * i];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    src[i].feature = base[i];
    src[i].partner = static_cast<std::ptrdiff_t>(i);
    Point3 p = truth(src[i].point);
    p.z() += truncated_noise(rng, params.depth_noise_sigma);
    tgt.push_back({p, perturb(rng, base[i], params.feature_noise_sigma),
                   static_cast<std::ptrdiff_t>(i)});
  }

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t k = 0; k < params.outlier_count; ++k) {
    const Point3 p = uniform_box(rng, target_center, 0.25);
    tgt.push_back({p, perturb(rng, base[pick(rng)], params.feature_noise_sigma), -1});
  }
  for (std::size_t k = 0; k < params.outlier_count; ++k) {
    const Point3 p = uniform_box(rng, source_center, 0.25);
    src.push_back({p, perturb(rng, base[pick(rng)], params.feature_noise_sigma), -1});
  }

  std::vector<std::size_t> src_order(src.size()), tgt_order(tgt.size());
  std::iota(src_order.begin(), src_order.end(), 0);
  std::iota(tgt_order.begin(), tgt_order.end(), 0);
  std::shuffle(src_order.begin(), src_order.end(), rng);
  std::shuffle(tgt_order.begin(), tgt_order.end(), rng);

  std::vector<std::size_t> tgt_position(tgt.size());
  for (std::size_t k = 0; k < tgt_order.size(); ++k) tgt_position[tgt_order[k]] = k;

  SynthScene scene{
      assemble(src, src_order, dim, Eigen::Vector3d::UnitZ()),
      assemble(tgt, tgt_order, dim, (rotation * Eigen::Vector3d::UnitZ()).normalized()),
      truth,
      {},
      params,
  };
  for (std::size_t k = 0; k < src_order.size(); ++k) {
    const Draft& d = src[src_order[k]];
    if (d.partner >= 0) {
      scene.truth_pairs.push_back({k, tgt_position[static_cast<std::size_t>(d.partner)]});
    }
  }
  return scene;
}

}  // namespace gmatch
