#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmatch/geometry.hpp"

namespace gmatch {

struct IcpConfig {
  std::size_t max_iterations = 30;
  double correspondence_radius = 0.02;  // meters
  double convergence_eps = 1e-6;        // relative RMSE change

  void validate() const;
};

struct IcpResult {
  RigidTransform transform;
  double rmse = 0.0;                 // over the final association set
  std::size_t associations = 0;
  std::vector<double> rmse_history;  // one entry per accepted iteration, non-increasing
};

/// Point-to-point ICP: nearest target point within correspondence_radius for
/// every transformed source point, then kabsch_solve, until the RMSE stops
/// improving by more than convergence_eps or max_iterations is reached. An
/// iteration whose RMSE would exceed the previous one is discarded and ends
/// the loop, so the history never increases.
///
/// Throws NoOverlap when the initial pose associates no points at all.
IcpResult icp_refine(const RigidTransform& initial, std::span<const Point3> source_points,
                     std::span<const Point3> target_points, const IcpConfig& cfg = {});

}  // namespace gmatch
