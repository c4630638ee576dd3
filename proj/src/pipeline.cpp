#include "gmatch/pipeline.hpp"

#include <chrono>
#include <vector>

namespace gmatch {

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

PipelineResult estimate_pose(const KeypointSet& src, const KeypointSet& tgt,
                             const PipelineConfig& cfg) {
  cfg.match.validate();
  if (cfg.icp) cfg.icp_config.validate();

  PipelineResult out;
  Stopwatch clock;
  const std::vector<CandidatePair> pool = candidate_pairs(src, tgt, cfg.match);
  out.timing.candidate = clock.lap();
  out.candidate_count = pool.size();
  if (pool.empty()) {
    out.diagnostic = "no candidate pairs";
    return out;
  }

  const std::vector<MatchState> seeds = seed_hypotheses(pool, src, tgt, cfg.match);
  out.timing.seed = clock.lap();
  out.seed_count = seeds.size();
  if (seeds.empty()) {
    out.diagnostic = "no consistent seed among " + std::to_string(pool.size()) + " candidate pairs";
    return out;
  }

  out.matches = expand_hypotheses(seeds, pool, src, tgt, cfg.match).best;
  out.timing.expand = clock.lap();

  std::vector<Point3> s, t;
  for (const IndexPair& p : out.matches.pairs) {
    s.push_back(src.point(p.source));
    t.push_back(tgt.point(p.target));
  }
  try {
    out.pose = kabsch_solve(s, t);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateGeometry &&
        e.code() != ErrorCode::InsufficientCorrespondences) {
      throw;
    }
    out.diagnostic = std::string("matches do not determine a pose: ") + e.what();
    return out;
  }
  out.timing.solve = clock.lap();

  if (cfg.icp) {
    try {
      out.pose = icp_refine(*out.pose, src.points(), tgt.points(), cfg.icp_config).transform;
      out.refined = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoOverlap) throw;
    }
    out.timing.refine = clock.lap();
  }
  return out;
}

}  // namespace gmatch
