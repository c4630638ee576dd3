#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gmatch/keypoints.hpp"

namespace gmatch {

/// Ordering used whenever two candidates or hypotheses are otherwise equal.
/// Only one policy exists; it is recorded so outputs are reproducible.
enum class TieBreak { FeatureDistanceThenIndex };

struct MatchConfig {
  double epsilon_f = 0.1;       // feature distance threshold (d_f < epsilon_f)
  double epsilon_c = 0.08;      // geometric cost tolerance
  double eta = 0.02;            // hard margin on |l_s - l_t|, meters
  std::size_t top_t = 24;       // seed pool size
  std::size_t max_len = 24;     // search length cap
  double colinear_eps = 1e-9;   // m^2, cross-product magnitude treated as degenerate
  TieBreak tie_break = TieBreak::FeatureDistanceThenIndex;
  bool check_flip_over = true;  // disabling is for ablation only
  std::size_t threads = 1;      // 0 = hardware concurrency

  /// Defaults with epsilon_f chosen for the metric: 0.1 Euclidean, 90 Hamming.
  static MatchConfig defaults_for(FeatureMetric metric);

  /// Throws InvalidConfig when a field is out of range.
  void validate() const;
};

struct IndexPair {
  std::size_t source = 0;
  std::size_t target = 0;

  friend bool operator==(const IndexPair&, const IndexPair&) = default;
  friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

struct CandidatePair {
  std::size_t source = 0;
  std::size_t target = 0;
  double feat_dist = 0.0;

  IndexPair indices() const { return {source, target}; }
  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

/// A growing hypothesis: ordered pairs plus the sum of the g values at which
/// each pair was accepted.
struct MatchState {
  std::vector<IndexPair> pairs;
  double accumulated_cost = 0.0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  bool uses_source(std::size_t i) const;
  bool uses_target(std::size_t j) const;

  friend bool operator==(const MatchState&, const MatchState&) = default;
};

/// All (i, j) with d_f < epsilon_f, sorted by (feat_dist, i, j).
/// Throws MetricMismatch when the two sets' metrics or feature layouts differ.
std::vector<CandidatePair> candidate_pairs(const KeypointSet& src, const KeypointSet& tgt,
                                           const MatchConfig& cfg);

/// Relative length error between the segment p-q in the source and the
/// corresponding segment in the target, saturated to 1 once the absolute
/// difference reaches eta. Zero-length source segments score 1.
double pairwise_error(const IndexPair& p, const IndexPair& q, const KeypointSet& src,
                      const KeypointSet& tgt, double eta);

/// g: the worst pairwise_error of `pair` against every pair already in `state`.
double distance_cost(const MatchState& state, const IndexPair& pair, const KeypointSet& src,
                     const KeypointSet& tgt, double eta);

/// True when triangle (a, b, c) faces the camera the same way in both sets,
/// or when either triangle is too thin to tell (cross product or its
/// projection on the view direction below colinear_eps).
bool flip_over_ok(const IndexPair& a, const IndexPair& b, const IndexPair& c,
                  const KeypointSet& src, const KeypointSet& tgt, double colinear_eps);

struct StepChoice {
  CandidatePair pair;
  double cost = 0.0;  // g(state, pair)
};

/// One extension of a hypothesis with at least two pairs: keep pool members
/// with g <= epsilon_c whose triangle with the last two matches does not flip
/// over, and return the one with minimal g (ties by feat_dist, then index).
/// `pool` must not contain pairs that reuse an index already in `state`.
std::optional<StepChoice> step(const MatchState& state, std::span<const CandidatePair> pool,
                               const KeypointSet& src, const KeypointSet& tgt,
                               const MatchConfig& cfg);

/// Length-3 hypotheses from the first top_t pool entries: depth-first over
/// p1 < p2 < p3 in pool order, pruning index collisions, pairwise error above
/// epsilon_c, colinear source triangles and flip-overs.
std::vector<MatchState> seed_hypotheses(std::span<const CandidatePair> pool,
                                        const KeypointSet& src, const KeypointSet& tgt,
                                        const MatchConfig& cfg);

struct ExpansionResult {
  MatchState best;
  std::size_t best_seed = 0;   // index into the seed list; meaningless when best is empty
  std::size_t step_calls = 0;  // step invocations across all hypotheses
};

/// Grows every seed with step until it returns nothing or max_len is reached,
/// and keeps the longest result (ties: lower accumulated cost, then earlier
/// seed). Seeds are expanded independently and may run on several threads;
/// the outcome never depends on the thread count.
ExpansionResult expand_hypotheses(std::span<const MatchState> seeds,
                                  std::span<const CandidatePair> pool, const KeypointSet& src,
                                  const KeypointSet& tgt, const MatchConfig& cfg);

struct GMatchResult {
  MatchState matches;
  std::size_t candidate_count = 0;
  std::size_t seed_count = 0;
  std::size_t step_calls = 0;
};

GMatchResult gmatch_detailed(const KeypointSet& src, const KeypointSet& tgt,
                             const MatchConfig& cfg);

/// Full matcher: candidates, seeds, expansion. Empty when no seed survives.
MatchState gmatch(const KeypointSet& src, const KeypointSet& tgt, const MatchConfig& cfg);

}  // namespace gmatch
