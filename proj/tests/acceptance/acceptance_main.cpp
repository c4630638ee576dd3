// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "gmatch/geometry.hpp"
#include "gmatch/io.hpp"
#include "gmatch/matcher.hpp"
#include "gmatch/oracle.hpp"
#include "gmatch/pipeline.hpp"
#include "gmatch/refine.hpp"
#include "gmatch/synth.hpp"

namespace {

using namespace gmatch;
using Clock = std::chrono::steady_clock;
using Rng = std::mt19937_64;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
  return Eigen::Quaterniond(w, x, y, z).normalized().toRotationMatrix();
}

RigidTransform random_transform(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {random_rotation(rng), Eigen::Vector3d(u(rng), u(rng), u(rng))};
}

std::vector<Point3> random_points(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3> pts(n);
  for (Point3& p : pts) p = Point3(u(rng), u(rng), u(rng));
  return pts;
}

std::vector<Point3> transformed(const RigidTransform& t, const std::vector<Point3>& pts) {
  std::vector<Point3> out;
  for (const Point3& p : pts) out.push_back(t(p));
  return out;
}

double max_residual(const RigidTransform& t, const std::vector<Point3>& s,
                    const std::vector<Point3>& d) {
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) worst = std::max(worst, (t(s[i]) - d[i]).norm());
  return worst;
}

bool coplanar(const std::vector<Point3>& pts) {
  if (pts.size() < 4) return true;
  Eigen::MatrixXd m(3, pts.size() - 1);
  for (std::size_t i = 1; i < pts.size(); ++i) m.col(i - 1) = pts[i] - pts[0];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(2) < 1e-6 * svd.singularValues()(0);
}

std::vector<Point3> points_of(const KeypointSet& set, const std::vector<IndexPair>& pairs,
                              bool source) {
  std::vector<Point3> out;
  for (const IndexPair& p : pairs) out.push_back(set.point(source ? p.source : p.target));
  return out;
}

Outcome criterion_1() {
  Rng rng(1001);
  std::uniform_int_distribution<std::size_t> size(2, 10);
  const auto start = Clock::now();
  double worst_residual = 0.0, worst_agreement = 0.0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto src = random_points(rng, size(rng));
    const RigidTransform truth = random_transform(rng);
    const auto tgt = transformed(truth, src);
    const RigidTransform q = recover_transform_constructive(src, tgt);
    worst_residual = std::max(worst_residual, max_residual(q, src, tgt));
    if (!coplanar(src)) {
      const RigidTransform k = kabsch_solve(src, tgt);
      worst_agreement = std::max(worst_agreement, (q.matrix() - k.matrix()).cwiseAbs().maxCoeff());
      ++compared;
    }
  }
  const double elapsed = seconds_since(start);
  return {worst_residual <= 1e-6 && worst_agreement <= 1e-6 && elapsed < 5.0,
          fmt("max residual %.2e, kabsch agreement %.2e over %zu non-coplanar sets, %.3f s",
              worst_residual, worst_agreement, compared, elapsed)};
}

Outcome criterion_2() {
  Rng rng(2002);
  std::uniform_int_distribution<std::size_t> size(4, 10);
  std::size_t mirror_rejected = 0, rigid_accepted = 0, coplanar_ok = 0;
  double worst_coplanar = 0.0;
  const Eigen::Matrix3d mirror = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  for (int trial = 0; trial < 200; ++trial) {
    const auto src = random_points(rng, size(rng));
    const RigidTransform rigid = random_transform(rng);
    std::vector<Point3> mirrored;
    for (const Point3& p : src) mirrored.push_back(rigid(mirror * p));
    if (!verify_consistency(src, mirrored, 1e-9)) ++mirror_rejected;
    if (verify_consistency(src, transformed(rigid, src), 1e-9)) ++rigid_accepted;

    // Coplanar set: z = 0 plane, then a proper motion.
    std::vector<Point3> flat = src;
    for (Point3& p : flat) p.z() = 0.0;
    const auto flat_tgt = transformed(rigid, flat);
    const RigidTransform q = recover_transform_constructive(flat, flat_tgt);
    const double residual = max_residual(q, flat, flat_tgt);
    worst_coplanar = std::max(worst_coplanar, residual);
    if (q.rotation().determinant() > 0.0 && residual <= 1e-9) ++coplanar_ok;
  }
  return {mirror_rejected == 200 && rigid_accepted == 200 && coplanar_ok == 200,
          fmt("mirror rejected %zu/200, rigid accepted %zu/200, coplanar det=+1 %zu/200 "
              "(max residual %.2e)",
              mirror_rejected, rigid_accepted, coplanar_ok, worst_coplanar)};
}

Outcome criterion_3() {
  std::size_t ok = 0;
  double worst_rot = 0.0, worst_trans = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthParams p;
    p.n_points = 50;
    p.seed = 3000 + seed;
    const SynthScene scene = synth_scene(p);
    const MatchConfig cfg;
    const MatchState m = gmatch::gmatch(scene.source, scene.target, cfg);
    if (m.size() < 3) continue;
    const RigidTransform est = kabsch_solve(points_of(scene.source, m.pairs, true),
                                            points_of(scene.target, m.pairs, false));
    const PoseError e = evaluate_pose(est, scene.truth);
    worst_rot = std::max(worst_rot, e.rotation_deg);
    worst_trans = std::max(worst_trans, e.translation_m);
    if (e.rotation_deg <= 0.01 && e.translation_m <= 1e-4) ++ok;
  }
  return {ok == 100, fmt("%zu/100 within 0.01 deg / 0.1 mm (worst %.2e deg, %.2e m)", ok,
                         worst_rot, worst_trans)};
}

SynthParams ambiguous_scene(std::uint64_t seed) {
  SynthParams p;
  p.n_points = 40;             // 40 matched + 10 outliers per set: outliers are 20%
  p.outlier_count = 10;
  p.duplicate_fraction = 0.5;  // 20 of 50 keypoints (40%) share descriptors
  p.duplicate_feature_groups = 5;
  p.depth_noise_sigma = 0.002;
  p.feature_noise_sigma = 0.003;
  p.seed = seed;
  return p;
}

Outcome criterion_4() {
  std::size_t clean = 0, accurate = 0, nn_bad = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SynthScene scene = synth_scene(ambiguous_scene(4000 + seed));
    PipelineConfig cfg;
    const PipelineResult r = estimate_pose(scene.source, scene.target, cfg);

    const bool no_impostor = std::all_of(r.matches.pairs.begin(), r.matches.pairs.end(),
                                         [&](const IndexPair& p) {
                                           return std::binary_search(scene.truth_pairs.begin(),
                                                                     scene.truth_pairs.end(), p);
                                         });
    if (no_impostor && !r.matches.empty()) ++clean;
    if (r.pose) {
      const PoseError e = evaluate_pose(*r.pose, scene.truth);
      if (e.rotation_deg <= 2.0 && e.translation_m <= 0.01) ++accurate;
    }

    const auto nn = nearest_neighbor_matches(scene.source, scene.target, cfg.match.epsilon_f);
    std::vector<Point3> s, t;
    for (const CandidatePair& c : nn) {
      s.push_back(scene.source.point(c.source));
      t.push_back(scene.target.point(c.target));
    }
    try {
      if (evaluate_pose(kabsch_solve(s, t), scene.truth).rotation_deg > 10.0) ++nn_bad;
    } catch (const Error&) {
      ++nn_bad;  // too few or degenerate matches: no pose at all
    }
  }
  return {clean >= 98 && accurate >= 95 && nn_bad >= 50,
          fmt("impostor-free %zu/100 (need 98), pose within 2 deg / 10 mm %zu/100 (need 95), "
              "nearest-neighbor above 10 deg %zu/100 (need 50)",
              clean, accurate, nn_bad)};
}

Outcome criterion_5() {
  std::size_t with_ok = 0, without_failed = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SynthParams p;
    p.preset = ScenePreset::PlanarMirror;
    p.n_points = 20;
    p.seed = 5000 + seed;
    const SynthScene scene = synth_scene(p);

    auto solve = [&](bool flip_check) -> std::optional<RigidTransform> {
      MatchConfig cfg;
      cfg.check_flip_over = flip_check;
      const MatchState m = gmatch::gmatch(scene.source, scene.target, cfg);
      if (m.size() < 3) return std::nullopt;
      try {
        return kabsch_solve(points_of(scene.source, m.pairs, true),
                            points_of(scene.target, m.pairs, false));
      } catch (const Error&) {
        return std::nullopt;
      }
    };
    const auto with = solve(true);
    if (with && with->rotation().determinant() > 0.0 &&
        evaluate_pose(*with, scene.truth).rotation_deg <= 2.0) {
      ++with_ok;
    }
    const auto without = solve(false);
    if (!without || evaluate_pose(*without, scene.truth).rotation_deg > 2.0) ++without_failed;
  }
  return {with_ok == 50 && without_failed >= 20,
          fmt("with flip-over check %zu/50 correct, without it %zu/50 failed (need 20)", with_ok,
              without_failed)};
}

// True when every triangle of `m` passes flip_over_ok, not only the
// consecutive ones step looks at.
bool all_triangles_agree(const MatchState& m, const SynthScene& scene, const MatchConfig& cfg) {
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = a + 1; b < m.size(); ++b) {
      for (std::size_t c = b + 1; c < m.size(); ++c) {
        if (!flip_over_ok(m.pairs[a], m.pairs[b], m.pairs[c], scene.source, scene.target,
                          cfg.colinear_eps)) {
          return false;
        }
      }
    }
  }
  return true;
}

Outcome criterion_6() {
  // Even pools: noise-free, unique features. Odd pools: 2 mm depth noise,
  // shared descriptors and outliers.
  std::array<std::size_t, 2> bounded{}, cases{}, equal{};
  std::size_t unchecked_flip = 0, pools = 0;
  std::uint64_t seed = 6000;
  while (pools < 200 && seed < 6000 + 20000) {
    const bool clean = pools % 2 == 0;
    SynthParams p;
    p.seed = seed++;
    p.n_points = (clean ? 8 : 6) + p.seed % 7;
    if (!clean) {
      p.outlier_count = 2;
      p.duplicate_fraction = 0.4;
      p.duplicate_feature_groups = 2;
      p.depth_noise_sigma = 0.002;
      p.feature_noise_sigma = 0.003;
    }
    const SynthScene scene = synth_scene(p);
    MatchConfig cfg;
    cfg.top_t = kMaxOraclePool;
    const auto pool = candidate_pairs(scene.source, scene.target, cfg);
    if (pool.size() < 3 || pool.size() > 18) continue;
    ++pools;

    const auto seeds = seed_hypotheses(pool, scene.source, scene.target, cfg);
    const MatchState g = expand_hypotheses(seeds, pool, scene.source, scene.target, cfg).best;
    const MatchState oracle = brute_force_max_consistent(pool, scene.source, scene.target, cfg);
    const int kind = clean ? 0 : 1;
    ++cases[kind];
    if (g.size() <= oracle.size()) {
      ++bounded[kind];
    } else if (!all_triangles_agree(g, scene, cfg)) {
      ++unchecked_flip;
    }
    if (g.size() == oracle.size()) ++equal[kind];
  }
  const double ratio =
      cases[0] == 0 ? 0.0 : static_cast<double>(equal[0]) / static_cast<double>(cases[0]);
  return {pools == 200 && bounded[0] + bounded[1] == 200 && ratio >= 0.9,
          fmt("bounded by the oracle %zu/200 (noise-free %zu/%zu, noisy ambiguous %zu/%zu; "
              "%zu excesses contain a flipped non-consecutive triangle), equal on %zu/%zu "
              "noise-free unambiguous pools",
              bounded[0] + bounded[1], bounded[0], cases[0], bounded[1], cases[1],
              unchecked_flip, equal[0], cases[0])};
}

SynthParams latency_scene() {
  SynthParams p;
  p.n_points = 200;
  p.outlier_count = 300;  // 500 keypoints per set
  p.duplicate_fraction = 0.2;
  p.duplicate_feature_groups = 10;
  p.depth_noise_sigma = 0.002;
  p.feature_noise_sigma = 0.003;
  p.seed = 7000;
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome criterion_7() {
  const SynthScene scene = synth_scene(latency_scene());
  PipelineConfig cfg;
  cfg.icp = false;
  std::vector<double> similarity, match;
  std::size_t pool = 0;
  for (int rep = 0; rep < 11; ++rep) {
    const PipelineResult r = estimate_pose(scene.source, scene.target, cfg);
    similarity.push_back(r.timing.candidate);
    match.push_back(r.timing.seed + r.timing.expand);
    pool = r.candidate_count;
  }
  const double sim = median(similarity), gm = median(match);
  return {gm <= 0.050 && sim <= 0.200,
          fmt("%zu x %zu keypoints, %zu candidates: GMatch stage %.1f ms (limit 50), "
              "similarity %.1f ms (limit 200)",
              scene.source.size(), scene.target.size(), pool, gm * 1e3, sim * 1e3)};
}

std::string run_capture(const std::string& command) {
  std::string out;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return out;
  std::array<char, 4096> buf;
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  if (pclose(pipe) != 0) out = "<nonzero exit>";
  return out;
}

Outcome criterion_8() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("gmatch_acceptance_" + std::to_string(::getpid()));
  SynthParams p = ambiguous_scene(8000);
  save_scene(dir, synth_scene(p));

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t threads = std::max(8u, hw);
  const std::string base = std::string("\"") + GMATCH_CLI_PATH + "\" match \"" +
                           (dir / "source.jsonl").string() + "\" \"" +
                           (dir / "target.jsonl").string() + "\" 2>/dev/null --threads ";

  const std::string reference = run_capture(base + "1");
  std::size_t identical = 0;
  for (int run = 0; run < 10; ++run) {
    if (run_capture(base + std::to_string(threads)) == reference) ++identical;
  }
  fs::remove_all(dir);
  const bool valid = reference.find("gmatch-pose") != std::string::npos;
  return {valid && identical == 10,
          fmt("%zu/10 runs with %zu threads byte-identical to the single-thread output", identical,
              threads)};
}

std::vector<Point3> dense_cloud(Rng& rng) {
  // Model frame: points on the surface of a 0.3 x 0.2 x 0.15 box centered at
  // the origin, roughly 7 mm apart.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::Vector3d size(0.3, 0.2, 0.15);
  std::vector<Point3> pts;
  for (int k = 0; k < 6000; ++k) {
    Point3 p(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
    const int axis = k % 3;
    p[axis] = (k / 3) % 2 == 0 ? -0.5 : 0.5;
    pts.push_back(p.cwiseProduct(size));
  }
  return pts;
}

Outcome criterion_9() {
  Rng rng(9009);
  std::size_t monotone = 0, recovered = 0;
  double worst_rot = 0.0, worst_trans = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto src = dense_cloud(rng);
    const RigidTransform truth = random_transform(rng);
    const auto tgt = transformed(truth, src);

    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Eigen::Vector3d axis = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    const double angle = u(rng) * 2.0 * std::numbers::pi / 180.0;
    const Eigen::Vector3d shift = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized() * u(rng) * 0.005;
    const RigidTransform perturb(Eigen::AngleAxisd(angle, axis).toRotationMatrix(), shift);

    IcpConfig cfg;
    cfg.max_iterations = 50;
    cfg.correspondence_radius = 0.03;
    // Perturbation in the model frame, i.e. about the object center.
    const IcpResult r = icp_refine(truth * perturb, src, tgt, cfg);
    if (std::is_sorted(r.rmse_history.rbegin(), r.rmse_history.rend())) ++monotone;
    const PoseError e = evaluate_pose(r.transform, truth);
    worst_rot = std::max(worst_rot, e.rotation_deg);
    worst_trans = std::max(worst_trans, e.translation_m);
    if (e.rotation_deg <= 0.1 && e.translation_m <= 5e-4) ++recovered;
  }
  return {monotone == 100 && recovered == 100,
          fmt("non-increasing RMSE %zu/100, recovered within 0.1 deg / 0.5 mm %zu/100 "
              "(worst %.3f deg, %.2f mm)",
              monotone, recovered, worst_rot, worst_trans * 1e3)};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number.
  std::vector<std::size_t> only;
  for (int a = 1; a < argc; ++a) only.push_back(std::stoul(argv[a]));

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"constructive recovery round-trip", criterion_1},
      {"chirality", criterion_2},
      {"exact recovery", criterion_3},
      {"ambiguity elimination", criterion_4},
      {"flip-over regression", criterion_5},
      {"oracle bound", criterion_6},
      {"latency", criterion_7},
      {"determinism", criterion_8},
      {"ICP monotone convergence", criterion_9},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!only.empty() && std::find(only.begin(), only.end(), k + 1) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("[%s] criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", k + 1,
                criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
