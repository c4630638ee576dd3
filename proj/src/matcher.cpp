#include "gmatch/matcher.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

namespace gmatch {

namespace {

bool collides(const IndexPair& a, const IndexPair& b) {
  return a.source == b.source || a.target == b.target;
}

bool collides(const MatchState& state, const IndexPair& p) {
  return std::any_of(state.pairs.begin(), state.pairs.end(),
                     [&](const IndexPair& q) { return collides(p, q); });
}

// Lazily filled rows of pairwise_error between pool entries. Each expansion
// thread owns one, so no synchronization is needed.
class ErrorRows {
 public:
  ErrorRows(std::span<const CandidatePair> pool, const KeypointSet& src, const KeypointSet& tgt,
            double eta)
      : pool_(pool), src_(src), tgt_(tgt), eta_(eta), rows_(pool.size()) {}

  const std::vector<double>& row(std::size_t r) {
    auto& out = rows_[r];
    if (out.empty() && !pool_.empty()) {
      out.resize(pool_.size());
      const IndexPair p = pool_[r].indices();
      for (std::size_t c = 0; c < pool_.size(); ++c) {
        out[c] = pairwise_error(p, pool_[c].indices(), src_, tgt_, eta_);
      }
    }
    return out;
  }

 private:
  std::span<const CandidatePair> pool_;
  const KeypointSet& src_;
  const KeypointSet& tgt_;
  double eta_;
  std::vector<std::vector<double>> rows_;
};

struct ActiveEntry {
  std::size_t pool_index;
  double cost;
};

struct Expanded {
  MatchState state;
  std::size_t step_calls = 0;
};

// Incremental form of repeated step(): pool members that collide with the
// hypothesis or exceed epsilon_c are dropped for good (g never decreases as
// pairs are appended), and g is updated with one error row per accepted
// pair. Scanning in pool order with a strict '<' reproduces step()'s tie
// break because the pool is sorted by (feat_dist, source, target).
Expanded expand_one(const MatchState& seed, std::span<const CandidatePair> pool,
                    const KeypointSet& src, const KeypointSet& tgt, const MatchConfig& cfg,
                    ErrorRows& rows) {
  Expanded out{seed, 0};
  MatchState& state = out.state;
  if (state.size() < 2 || state.size() >= cfg.max_len) return out;

  std::vector<ActiveEntry> active;
  active.reserve(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const IndexPair p = pool[k].indices();
    if (collides(state, p)) continue;
    const double g = distance_cost(state, p, src, tgt, cfg.eta);
    if (g <= cfg.epsilon_c) active.push_back({k, g});
  }

  while (state.size() < cfg.max_len) {
    ++out.step_calls;
    const IndexPair last = state.pairs[state.size() - 1];
    const IndexPair prev = state.pairs[state.size() - 2];

    std::size_t best = active.size();
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (best != active.size() && !(active[a].cost < active[best].cost)) continue;
      if (cfg.check_flip_over &&
          !flip_over_ok(last, prev, pool[active[a].pool_index].indices(), src, tgt,
                        cfg.colinear_eps)) {
        continue;
      }
      best = a;
    }
    if (best == active.size()) break;

    const std::size_t chosen_index = active[best].pool_index;
    const IndexPair chosen = pool[chosen_index].indices();
    state.pairs.push_back(chosen);
    state.accumulated_cost += active[best].cost;

    const std::vector<double>& errors = rows.row(chosen_index);
    std::size_t kept = 0;
    for (const ActiveEntry& e : active) {
      if (e.pool_index == chosen_index || collides(pool[e.pool_index].indices(), chosen)) continue;
      const double g = std::max(e.cost, errors[e.pool_index]);
      if (g > cfg.epsilon_c) continue;
      active[kept++] = {e.pool_index, g};
    }
    active.resize(kept);
  }
  return out;
}

bool better(const MatchState& a, std::size_t a_seed, const MatchState& b, std::size_t b_seed) {
  if (a.size() != b.size()) return a.size() > b.size();
  if (a.accumulated_cost != b.accumulated_cost) return a.accumulated_cost < b.accumulated_cost;
  return a_seed < b_seed;
}

}  // namespace

MatchConfig MatchConfig::defaults_for(FeatureMetric metric) {
  MatchConfig cfg;
  cfg.epsilon_f = metric == FeatureMetric::Euclidean ? 0.1 : 90.0;
  return cfg;
}

void MatchConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(epsilon_f > 0.0) || !std::isfinite(epsilon_f)) fail("epsilon_f must be positive");
  if (!(epsilon_c > 0.0 && epsilon_c <= 1.0)) fail("epsilon_c must lie in (0, 1]");
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be positive");
  if (top_t < 3) fail("top_t must be at least 3");
  if (max_len < 3) fail("max_len must be at least 3");
  if (!(colinear_eps >= 0.0)) fail("colinear_eps must be non-negative");
}

bool MatchState::uses_source(std::size_t i) const {
  return std::any_of(pairs.begin(), pairs.end(), [i](const IndexPair& p) { return p.source == i; });
}

bool MatchState::uses_target(std::size_t j) const {
  return std::any_of(pairs.begin(), pairs.end(), [j](const IndexPair& p) { return p.target == j; });
}

std::vector<CandidatePair> candidate_pairs(const KeypointSet& src, const KeypointSet& tgt,
                                           const MatchConfig& cfg) {
  std::vector<CandidatePair> out;
  if (src.empty() || tgt.empty()) return out;
  if (src.metric() != tgt.metric() || src.features().kind() != tgt.features().kind() ||
      src.features().length() != tgt.features().length()) {
    throw Error(ErrorCode::MetricMismatch,
                "source and target features differ in metric, kind or length");
  }

  const FeatureMatrix& a = src.features();
  const FeatureMatrix& b = tgt.features();
  if (src.metric() == FeatureMetric::Euclidean) {
    // Early exit on the partial squared sum; the bound is loosened slightly
    // so the final decision is always made on the exact distance.
    const double bound = cfg.epsilon_f * cfg.epsilon_f * (1.0 + 1e-9);
    for (std::size_t i = 0; i < src.size(); ++i) {
      const auto x = a.real_row(i);
      for (std::size_t j = 0; j < tgt.size(); ++j) {
        const auto y = b.real_row(j);
        double sum = 0.0;
        std::size_t k = 0;
        for (; k < x.size(); ++k) {
          const double d = x[k] - y[k];
          sum += d * d;
          if ((k & 15) == 15 && sum > bound) break;
        }
        if (k < x.size()) continue;
        const double dist = std::sqrt(sum);
        if (dist < cfg.epsilon_f) out.push_back({i, j, dist});
      }
    }
  } else {
    for (std::size_t i = 0; i < src.size(); ++i) {
      for (std::size_t j = 0; j < tgt.size(); ++j) {
        const double dist = feature_distance(a, i, b, j, FeatureMetric::Hamming);
        if (dist < cfg.epsilon_f) out.push_back({i, j, dist});
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const CandidatePair& l, const CandidatePair& r) {
    if (l.feat_dist != r.feat_dist) return l.feat_dist < r.feat_dist;
    if (l.source != r.source) return l.source < r.source;
    return l.target < r.target;
  });
  return out;
}

double pairwise_error(const IndexPair& p, const IndexPair& q, const KeypointSet& src,
                      const KeypointSet& tgt, double eta) {
  const double ls = pairwise_distance(src.point(p.source), src.point(q.source));
  const double lt = pairwise_distance(tgt.point(p.target), tgt.point(q.target));
  const double gap = std::abs(ls - lt);
  if (!(gap < eta) || ls == 0.0) return 1.0;
  return gap / ls;
}

double distance_cost(const MatchState& state, const IndexPair& pair, const KeypointSet& src,
                     const KeypointSet& tgt, double eta) {
  double g = 0.0;
  for (const IndexPair& p : state.pairs) g = std::max(g, pairwise_error(p, pair, src, tgt, eta));
  return g;
}

bool flip_over_ok(const IndexPair& a, const IndexPair& b, const IndexPair& c,
                  const KeypointSet& src, const KeypointSet& tgt, double colinear_eps) {
  const Point3& s1 = src.point(a.source);
  const Point3& t1 = tgt.point(a.target);
  const Eigen::Vector3d ns = (s1 - src.point(b.source)).cross(s1 - src.point(c.source));
  const Eigen::Vector3d nt = (t1 - tgt.point(b.target)).cross(t1 - tgt.point(c.target));
  if (ns.norm() < colinear_eps || nt.norm() < colinear_eps) return true;
  const double facing_s = ns.dot(src.view());
  const double facing_t = nt.dot(tgt.view());
  if (std::abs(facing_s) < colinear_eps || std::abs(facing_t) < colinear_eps) return true;
  return (facing_s > 0.0) == (facing_t > 0.0);
}

std::optional<StepChoice> step(const MatchState& state, std::span<const CandidatePair> pool,
                               const KeypointSet& src, const KeypointSet& tgt,
                               const MatchConfig& cfg) {
  if (state.size() < 2) {
    throw Error(ErrorCode::InvalidParams, "step needs a hypothesis with at least two pairs");
  }
  const IndexPair last = state.pairs[state.size() - 1];
  const IndexPair prev = state.pairs[state.size() - 2];

  std::optional<StepChoice> best;
  for (const CandidatePair& candidate : pool) {
    const double g = distance_cost(state, candidate.indices(), src, tgt, cfg.eta);
    if (g > cfg.epsilon_c) continue;
    if (cfg.check_flip_over &&
        !flip_over_ok(last, prev, candidate.indices(), src, tgt, cfg.colinear_eps)) {
      continue;
    }
    if (best) {
      const CandidatePair& b = best->pair;
      if (g != best->cost) {
        if (g > best->cost) continue;
      } else if (candidate.feat_dist != b.feat_dist) {
        if (candidate.feat_dist > b.feat_dist) continue;
      } else if (candidate.indices() > b.indices()) {
        continue;
      }
    }
    best = StepChoice{candidate, g};
  }
  return best;
}

std::vector<MatchState> seed_hypotheses(std::span<const CandidatePair> pool,
                                        const KeypointSet& src, const KeypointSet& tgt,
                                        const MatchConfig& cfg) {
  std::vector<MatchState> seeds;
  const std::size_t m = std::min(cfg.top_t, pool.size());
  for (std::size_t a = 0; a < m; ++a) {
    const IndexPair pa = pool[a].indices();
    for (std::size_t b = a + 1; b < m; ++b) {
      const IndexPair pb = pool[b].indices();
      if (collides(pa, pb)) continue;
      const double ab = pairwise_error(pa, pb, src, tgt, cfg.eta);
      if (ab > cfg.epsilon_c) continue;
      for (std::size_t c = b + 1; c < m; ++c) {
        const IndexPair pc = pool[c].indices();
        if (collides(pa, pc) || collides(pb, pc)) continue;
        const double ac = pairwise_error(pa, pc, src, tgt, cfg.eta);
        const double bc = pairwise_error(pb, pc, src, tgt, cfg.eta);
        if (ac > cfg.epsilon_c || bc > cfg.epsilon_c) continue;
        const Point3& s = src.point(pa.source);
        if ((s - src.point(pb.source)).cross(s - src.point(pc.source)).norm() < cfg.colinear_eps) {
          continue;
        }
        if (cfg.check_flip_over && !flip_over_ok(pb, pa, pc, src, tgt, cfg.colinear_eps)) {
          continue;
        }
        seeds.push_back(MatchState{{pa, pb, pc}, ab + std::max(ac, bc)});
      }
    }
  }
  return seeds;
}

ExpansionResult expand_hypotheses(std::span<const MatchState> seeds,
                                  std::span<const CandidatePair> pool, const KeypointSet& src,
                                  const KeypointSet& tgt, const MatchConfig& cfg) {
  ExpansionResult result;
  if (seeds.empty()) return result;

  std::size_t threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : cfg.threads;
  threads = std::min(threads, seeds.size());

  struct Partial {
    MatchState best;
    std::size_t best_seed = 0;
    bool found = false;
    std::size_t step_calls = 0;
  };
  std::vector<Partial> partials(threads);

  auto work = [&](std::size_t worker) {
    const std::size_t begin = seeds.size() * worker / threads;
    const std::size_t end = seeds.size() * (worker + 1) / threads;
    ErrorRows rows(pool, src, tgt, cfg.eta);
    Partial& part = partials[worker];
    for (std::size_t s = begin; s < end; ++s) {
      Expanded e = expand_one(seeds[s], pool, src, tgt, cfg, rows);
      part.step_calls += e.step_calls;
      if (!part.found || better(e.state, s, part.best, part.best_seed)) {
        part.best = std::move(e.state);
        part.best_seed = s;
        part.found = true;
      }
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool_threads;
    pool_threads.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) pool_threads.emplace_back(work, w);
  }

  bool found = false;
  for (Partial& part : partials) {
    result.step_calls += part.step_calls;
    if (!part.found) continue;
    if (!found || better(part.best, part.best_seed, result.best, result.best_seed)) {
      result.best = std::move(part.best);
      result.best_seed = part.best_seed;
      found = true;
    }
  }
  return result;
}

GMatchResult gmatch_detailed(const KeypointSet& src, const KeypointSet& tgt,
                             const MatchConfig& cfg) {
  cfg.validate();
  GMatchResult out;
  const std::vector<CandidatePair> pool = candidate_pairs(src, tgt, cfg);
  const std::vector<MatchState> seeds = seed_hypotheses(pool, src, tgt, cfg);
  ExpansionResult expanded = expand_hypotheses(seeds, pool, src, tgt, cfg);
  out.matches = std::move(expanded.best);
  out.candidate_count = pool.size();
  out.seed_count = seeds.size();
  out.step_calls = expanded.step_calls;
  return out;
}

MatchState gmatch(const KeypointSet& src, const KeypointSet& tgt, const MatchConfig& cfg) {
  return gmatch_detailed(src, tgt, cfg).matches;
}

}  // namespace gmatch
