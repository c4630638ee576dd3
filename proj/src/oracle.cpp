#include "gmatch/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>

namespace gmatch {

namespace {

class SubsetSearch {
 public:
  SubsetSearch(std::span<const CandidatePair> pool, const KeypointSet& src,
               const KeypointSet& tgt, const MatchConfig& cfg)
      : pool_(pool), src_(src), tgt_(tgt), cfg_(cfg), m_(pool.size()) {
    error_.assign(m_ * m_, 1.0);
    compatible_.assign(m_ * m_, false);
    for (std::size_t a = 0; a < m_; ++a) {
      for (std::size_t b = 0; b < m_; ++b) {
        if (a == b) continue;
        const IndexPair pa = pool[a].indices(), pb = pool[b].indices();
        const double e = pairwise_error(pa, pb, src, tgt, cfg.eta);
        error_[a * m_ + b] = e;
        compatible_[a * m_ + b] =
            pa.source != pb.source && pa.target != pb.target && e <= cfg.epsilon_c;
      }
    }
  }

  std::vector<std::size_t> run() {
    std::vector<std::size_t> all(m_);
    for (std::size_t k = 0; k < m_; ++k) all[k] = k;
    std::vector<std::size_t> chosen;
    extend(chosen, all, 0.0);
    return best_;
  }

  double best_total() const { return best_total_; }

 private:
  void extend(std::vector<std::size_t>& chosen, const std::vector<std::size_t>& candidates,
              double total) {
    if (chosen.size() > best_.size() ||
        (chosen.size() == best_.size() && total < best_total_)) {
      best_ = chosen;
      best_total_ = total;
    }
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      // Even taking every remaining candidate cannot reach the best size.
      if (chosen.size() + (candidates.size() - k) < best_.size()) return;
      const std::size_t c = candidates[k];
      if (!triangles_ok(chosen, c)) continue;

      double added = 0.0;
      for (std::size_t a : chosen) added += error_[a * m_ + c];
      std::vector<std::size_t> next;
      for (std::size_t r = k + 1; r < candidates.size(); ++r) {
        if (compatible_[c * m_ + candidates[r]]) next.push_back(candidates[r]);
      }
      chosen.push_back(c);
      extend(chosen, next, total + added);
      chosen.pop_back();
    }
  }

  bool triangles_ok(const std::vector<std::size_t>& chosen, std::size_t c) const {
    if (!cfg_.check_flip_over) return true;
    const IndexPair pc = pool_[c].indices();
    for (std::size_t x = 0; x < chosen.size(); ++x) {
      for (std::size_t y = x + 1; y < chosen.size(); ++y) {
        if (!flip_over_ok(pool_[chosen[x]].indices(), pool_[chosen[y]].indices(), pc, src_, tgt_,
                          cfg_.colinear_eps)) {
          return false;
        }
      }
    }
    return true;
  }

  std::span<const CandidatePair> pool_;
  const KeypointSet& src_;
  const KeypointSet& tgt_;
  const MatchConfig& cfg_;
  std::size_t m_;
  std::vector<double> error_;
  std::vector<bool> compatible_;
  std::vector<std::size_t> best_;
  double best_total_ = std::numeric_limits<double>::infinity();
};

std::vector<IndexPair> inliers_of(const RigidTransform& t, std::span<const CandidatePair> pool,
                                  const KeypointSet& src, const KeypointSet& tgt, double tol) {
  std::vector<IndexPair> out;
  for (const CandidatePair& c : pool) {
    if ((t(src.point(c.source)) - tgt.point(c.target)).norm() < tol) out.push_back(c.indices());
  }
  return out;
}

std::optional<RigidTransform> try_kabsch(const std::vector<Point3>& s, const std::vector<Point3>& t) {
  try {
    return kabsch_solve(s, t);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateGeometry) throw;
  }
  return std::nullopt;
}

}  // namespace

MatchState brute_force_max_consistent(std::span<const CandidatePair> pool,
                                      const KeypointSet& src, const KeypointSet& tgt,
                                      const MatchConfig& cfg) {
  if (pool.size() > kMaxOraclePool) {
    throw Error(ErrorCode::PoolTooLarge, "exhaustive search is limited to " +
                                             std::to_string(kMaxOraclePool) + " pairs, got " +
                                             std::to_string(pool.size()));
  }
  SubsetSearch search(pool, src, tgt, cfg);
  const std::vector<std::size_t> best = search.run();
  MatchState out;
  for (std::size_t k : best) out.pairs.push_back(pool[k].indices());
  out.accumulated_cost = best.empty() ? 0.0 : search.best_total();
  return out;
}

RansacResult ransac_baseline(std::span<const CandidatePair> pool, const KeypointSet& src,
                             const KeypointSet& tgt, std::size_t iterations, double inlier_tol,
                             std::uint64_t rng_seed) {
  if (pool.size() < 3) {
    throw Error(ErrorCode::InsufficientCorrespondences, "RANSAC needs at least 3 pairs");
  }
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);

  std::optional<RigidTransform> best;
  std::vector<IndexPair> best_inliers;
  std::vector<Point3> s(3), t(3);
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || a == c || b == c) continue;
    const std::size_t sample[3] = {a, b, c};
    for (int k = 0; k < 3; ++k) {
      s[k] = src.point(pool[sample[k]].source);
      t[k] = tgt.point(pool[sample[k]].target);
    }
    const auto hypothesis = try_kabsch(s, t);
    if (!hypothesis) continue;
    auto inliers = inliers_of(*hypothesis, pool, src, tgt, inlier_tol);
    if (inliers.size() > best_inliers.size()) {
      best = hypothesis;
      best_inliers = std::move(inliers);
    }
  }
  if (!best || best_inliers.size() < 3) {
    throw Error(ErrorCode::NoConsensus, "no hypothesis gathered three inliers");
  }

  std::vector<Point3> fs, ft;
  for (const IndexPair& p : best_inliers) {
    fs.push_back(src.point(p.source));
    ft.push_back(tgt.point(p.target));
  }
  if (const auto refit = try_kabsch(fs, ft)) {
    auto refit_inliers = inliers_of(*refit, pool, src, tgt, inlier_tol);
    if (refit_inliers.size() >= best_inliers.size()) {
      return {*refit, std::move(refit_inliers)};
    }
  }
  return {*best, std::move(best_inliers)};
}

std::vector<CandidatePair> nearest_neighbor_matches(const KeypointSet& src,
                                                    const KeypointSet& tgt, double epsilon_f) {
  std::vector<CandidatePair> out;
  if (src.empty() || tgt.empty()) return out;
  if (src.metric() != tgt.metric() || src.features().kind() != tgt.features().kind() ||
      src.features().length() != tgt.features().length()) {
    throw Error(ErrorCode::MetricMismatch,
                "source and target features differ in metric, kind or length");
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      const double d = feature_distance(src.features(), i, tgt.features(), j, src.metric());
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best_d < epsilon_f) out.push_back({i, best, best_d});
  }
  return out;
}

PoseError evaluate_pose(const RigidTransform& estimate, const RigidTransform& truth) {
  const Eigen::Matrix3d delta = estimate.rotation().transpose() * truth.rotation();
  // atan2 form of arccos((trace - 1) / 2); it stays accurate near 0 and 180 degrees.
  const Eigen::Vector3d axis(delta(2, 1) - delta(1, 2), delta(0, 2) - delta(2, 0),
                             delta(1, 0) - delta(0, 1));
  const double angle = std::atan2(0.5 * axis.norm(), 0.5 * (delta.trace() - 1.0));
  return {angle * 180.0 / std::numbers::pi,
          (estimate.translation() - truth.translation()).norm()};
}

}  // namespace gmatch
