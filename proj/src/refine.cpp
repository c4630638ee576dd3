#include "gmatch/refine.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>

namespace gmatch {

namespace {

// Uniform hash grid with cell size equal to the search radius, so a radius
// query only visits the 27 surrounding cells.
class RadiusGrid {
 public:
  RadiusGrid(std::span<const Point3> points, double radius)
      : points_(points), cell_(radius) {
    cells_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(cell_of(points[i]))].push_back(i);
  }

  // Index of the nearest point within the radius; ties go to the lower index.
  std::optional<std::size_t> nearest(const Point3& q) const {
    const Eigen::Vector3i c = cell_of(q);
    const double limit = cell_ * cell_;
    std::optional<std::size_t> best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second) {
            const double d2 = (points_[i] - q).squaredNorm();
            if (d2 > limit) continue;
            if (d2 < best_d2 || (d2 == best_d2 && i < *best)) {
              best_d2 = d2;
              best = i;
            }
          }
        }
      }
    }
    return best;
  }

 private:
  Eigen::Vector3i cell_of(const Point3& p) const {
    return (p / cell_).array().floor().cast<int>();
  }

  static std::uint64_t key(const Eigen::Vector3i& c) {
    auto part = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v) & 0x1FFFFFu); };
    return part(c.x()) | (part(c.y()) << 21) | (part(c.z()) << 42);
  }

  std::span<const Point3> points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

double rmse(const RigidTransform& t, const std::vector<Point3>& src, const std::vector<Point3>& tgt) {
  if (src.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += (t(src[i]) - tgt[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(src.size()));
}

}  // namespace

void IcpConfig::validate() const {
  if (max_iterations == 0 || !(correspondence_radius > 0.0) || !(convergence_eps > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "ICP settings must all be positive");
  }
}

IcpResult icp_refine(const RigidTransform& initial, std::span<const Point3> source_points,
                     std::span<const Point3> target_points, const IcpConfig& cfg) {
  cfg.validate();
  if (source_points.empty() || target_points.empty()) {
    throw Error(ErrorCode::NoOverlap, "ICP needs non-empty clouds");
  }
  const RadiusGrid grid(target_points, cfg.correspondence_radius);

  IcpResult result{initial, 0.0, 0, {}};
  RigidTransform current = initial;
  double previous = std::numeric_limits<double>::infinity();
  std::vector<Point3> src, tgt;

  for (std::size_t iteration = 0; iteration < cfg.max_iterations; ++iteration) {
    src.clear();
    tgt.clear();
    for (const Point3& p : source_points) {
      if (const auto j = grid.nearest(current(p))) {
        src.push_back(p);
        tgt.push_back(target_points[*j]);
      }
    }
    if (src.empty()) {
      if (iteration == 0) {
        throw Error(ErrorCode::NoOverlap, "no point pairs within the correspondence radius");
      }
      break;
    }

    std::optional<RigidTransform> solved;
    if (src.size() >= 3) {
      try {
        solved = kabsch_solve(src, tgt);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateGeometry) throw;
      }
    }
    if (!solved) {
      if (iteration == 0) {
        result.rmse = rmse(current, src, tgt);
        result.associations = src.size();
      }
      break;
    }

    const double error = rmse(*solved, src, tgt);
    if (error > previous) break;
    current = *solved;
    result.transform = current;
    result.rmse = error;
    result.associations = src.size();
    result.rmse_history.push_back(error);
    if (std::isfinite(previous) && previous - error <= cfg.convergence_eps * previous) break;
    previous = error;
  }
  return result;
}

}  // namespace gmatch
