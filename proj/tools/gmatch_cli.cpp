// gmatch command-line front end: match, synth, eval, bench.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "gmatch/io.hpp"
#include "gmatch/oracle.hpp"
#include "gmatch/pipeline.hpp"
#include "gmatch/synth.hpp"

namespace {

using namespace gmatch;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoMatch = 2;

struct MatchOptions {
  std::string source;
  std::string target;
  std::string out;
  double epsilon_f = -1.0;  // negative: metric default
  double epsilon_c = MatchConfig{}.epsilon_c;
  double eta = MatchConfig{}.eta;
  std::size_t top_t = MatchConfig{}.top_t;
  std::size_t max_len = MatchConfig{}.max_len;
  std::size_t threads = 1;
  bool icp = true;
  bool no_flip_over = false;
  bool embed_timing = false;
  IcpConfig icp_config;
};

struct SceneOptions {
  SynthParams params;
  std::string preset = "cube";

  void add_to(CLI::App* app) {
    app->add_option("--n-points", params.n_points, "Keypoints with a true correspondence");
    app->add_option("--duplicate-groups", params.duplicate_feature_groups,
                    "Number of shared-descriptor groups");
    app->add_option("--duplicate-fraction", params.duplicate_fraction,
                    "Share of n-points placed in duplicate groups")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--feature-noise", params.feature_noise_sigma, "Descriptor noise sigma");
    app->add_option("--depth-noise", params.depth_noise_sigma, "Depth noise sigma, meters");
    app->add_option("--outliers", params.outlier_count, "Unmatched keypoints per set");
    app->add_option("--feature-dim", params.feature_dim, "Descriptor length");
    app->add_option("--seed", params.seed, "Generator seed");
    app->add_option("--preset", preset, "Scene layout")
        ->check(CLI::IsMember({"cube", "planar-mirror"}));
  }

  SynthParams resolved() const {
    SynthParams p = params;
    p.preset = *parse_preset(preset);
    return p;
  }
};

void print_timing(const StageTimings& t) {
  std::fprintf(stderr,
               "timing [s]: candidate %.6f  seed %.6f  expand %.6f  solve %.6f  refine %.6f\n",
               t.candidate, t.seed, t.expand, t.solve, t.refine);
}

int run_match(const MatchOptions& opt) {
  const LoadedKeypoints src = load_keypoints(opt.source);
  const LoadedKeypoints tgt = load_keypoints(opt.target);
  for (const auto* f : {&src, &tgt}) {
    for (std::size_t r : f->rejected) {
      std::fprintf(stderr, "warning: %s record %zu dropped: depth is not positive\n",
                   (f == &src ? opt.source : opt.target).c_str(), r);
    }
  }

  PipelineConfig cfg;
  const FeatureMetric metric = src.keypoints.empty() ? tgt.keypoints.metric()
                                                     : src.keypoints.metric();
  cfg.match = MatchConfig::defaults_for(metric);
  if (opt.epsilon_f >= 0.0) cfg.match.epsilon_f = opt.epsilon_f;
  cfg.match.epsilon_c = opt.epsilon_c;
  cfg.match.eta = opt.eta;
  cfg.match.top_t = opt.top_t;
  cfg.match.max_len = opt.max_len;
  cfg.match.threads = opt.threads;
  cfg.match.check_flip_over = !opt.no_flip_over;
  cfg.icp = opt.icp;
  cfg.icp_config = opt.icp_config;

  const PipelineResult result = estimate_pose(src.keypoints, tgt.keypoints, cfg);
  print_timing(result.timing);
  std::fprintf(stderr, "candidates %zu  seeds %zu  matches %zu\n", result.candidate_count,
               result.seed_count, result.matches.size());
  if (!result.pose) {
    std::fprintf(stderr, "no match: %s\n", result.diagnostic.c_str());
    return kExitNoMatch;
  }

  PoseFile pose{*result.pose, result.matches.size(), result.matches.accumulated_cost, {},
                std::nullopt};
  for (const IndexPair& p : result.matches.pairs) {
    pose.pairs.push_back({src.record_index[p.source], tgt.record_index[p.target]});
  }
  if (opt.embed_timing) pose.timing = result.timing;

  if (opt.out.empty()) {
    std::cout << pose_to_json(pose);
  } else {
    save_pose(opt.out, pose);
  }
  return kExitOk;
}

int run_synth(const SceneOptions& scene, const std::string& out_dir) {
  const SynthScene s = synth_scene(scene.resolved());
  save_scene(out_dir, s);
  std::fprintf(stderr, "wrote %zu source and %zu target keypoints to %s\n", s.source.size(),
               s.target.size(), out_dir.c_str());
  return kExitOk;
}

int run_eval(const std::string& estimate, const std::string& truth, bool as_json) {
  const PoseError e = evaluate_pose(load_pose(estimate).pose, load_pose(truth).pose);
  if (as_json) {
    const nlohmann::json j = {{"rotation_deg", e.rotation_deg},
                              {"translation_m", e.translation_m}};
    std::cout << j.dump() << '\n';
  } else {
    std::printf("rotation error    %.6f deg\ntranslation error %.6f m\n", e.rotation_deg,
                e.translation_m);
  }
  return kExitOk;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  // Nearest-rank.
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

int run_bench(const SceneOptions& scene, std::size_t repetitions, bool icp, std::size_t threads,
              bool as_json) {
  const SynthScene s = synth_scene(scene.resolved());
  PipelineConfig cfg;
  cfg.match.threads = threads;
  cfg.icp = icp;

  const char* stages[] = {"similarity", "match", "icp"};
  std::vector<std::vector<double>> columns(3);
  for (std::size_t r = 0; r < repetitions; ++r) {
    const PipelineResult res = estimate_pose(s.source, s.target, cfg);
    columns[0].push_back(res.timing.candidate);
    columns[1].push_back(res.timing.seed + res.timing.expand);
    columns[2].push_back(res.timing.refine);
  }

  if (as_json) {
    nlohmann::json j = {{"repetitions", repetitions},
                        {"source_keypoints", s.source.size()},
                        {"target_keypoints", s.target.size()},
                        {"stages", nlohmann::json::array()}};
    for (int c = 0; c < 3; ++c) {
      j["stages"].push_back({{"name", stages[c]},
                             {"median_s", percentile(columns[c], 0.5)},
                             {"p95_s", percentile(columns[c], 0.95)},
                             {"runs_s", columns[c]}});
    }
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  }

  std::printf("%zu x %zu keypoints, %zu repetitions\n", s.source.size(), s.target.size(),
              repetitions);
  std::printf("%-8s %12s %12s %12s\n", "run", stages[0], stages[1], stages[2]);
  for (std::size_t r = 0; r < repetitions; ++r) {
    std::printf("%-8zu %12.6f %12.6f %12.6f\n", r, columns[0][r], columns[1][r], columns[2][r]);
  }
  std::printf("%-8s %12.6f %12.6f %12.6f\n", "median", percentile(columns[0], 0.5),
              percentile(columns[1], 0.5), percentile(columns[2], 0.5));
  std::printf("%-8s %12.6f %12.6f %12.6f\n", "p95", percentile(columns[0], 0.95),
              percentile(columns[1], 0.95), percentile(columns[2], 0.95));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-constrained keypoint matching for 6DoF pose"};
  app.require_subcommand(1);

  MatchOptions match;
  auto* m = app.add_subcommand("match", "Estimate the pose mapping source keypoints onto target");
  m->add_option("source", match.source, "Source keypoint file")->required();
  m->add_option("target", match.target, "Target keypoint file")->required();
  m->add_option("--out", match.out, "Write the pose file here instead of stdout");
  m->add_option("--epsilon-f", match.epsilon_f,
                "Feature distance threshold (default 0.1 Euclidean, 90 Hamming)");
  m->add_option("--epsilon-c", match.epsilon_c, "Geometric cost tolerance")->capture_default_str();
  m->add_option("--eta", match.eta, "Hard margin on length differences, meters")
      ->capture_default_str();
  m->add_option("--top-t", match.top_t, "Seed pool size")->capture_default_str();
  m->add_option("--max-len", match.max_len, "Maximum match count")->capture_default_str();
  m->add_option("--threads", match.threads, "Expansion threads, 0 = all cores")
      ->capture_default_str();
  m->add_flag("--icp,!--no-icp", match.icp, "Refine with ICP (default on)");
  m->add_option("--icp-radius", match.icp_config.correspondence_radius,
                "ICP association radius, meters")
      ->capture_default_str();
  m->add_option("--icp-iterations", match.icp_config.max_iterations, "ICP iteration cap")
      ->capture_default_str();
  m->add_flag("--no-flip-over", match.no_flip_over, "Disable the flip-over check (ablation)");
  m->add_flag("--embed-timing", match.embed_timing, "Include stage timings in the pose file");

  SceneOptions synth;
  std::string out_dir;
  auto* s = app.add_subcommand("synth", "Write a synthetic scene with ground truth");
  synth.add_to(s);
  s->add_option("--out-dir", out_dir, "Directory for source.jsonl, target.jsonl, truth.json")
      ->required();

  std::string estimate, truth;
  bool eval_json = false;
  auto* e = app.add_subcommand("eval", "Compare an estimated pose with the truth");
  e->add_option("estimate", estimate, "Estimated pose file")->required();
  e->add_option("truth", truth, "Ground-truth pose file")->required();
  e->add_flag("--json", eval_json, "Machine-readable output");

  SceneOptions bench;
  std::size_t repetitions = 10, bench_threads = 1;
  bool bench_icp = false, bench_json = false;
  auto* b = app.add_subcommand("bench", "Time the pipeline stages on a synthetic scene");
  bench.add_to(b);
  b->add_option("--repetitions", repetitions, "Timed runs")->check(CLI::PositiveNumber);
  b->add_option("--threads", bench_threads, "Expansion threads, 0 = all cores");
  b->add_flag("--icp", bench_icp, "Include the ICP stage");
  b->add_flag("--json", bench_json, "Machine-readable output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (m->parsed()) return run_match(match);
    if (s->parsed()) return run_synth(synth, out_dir);
    if (e->parsed()) return run_eval(estimate, truth, eval_json);
    if (b->parsed()) return run_bench(bench, repetitions, bench_icp, bench_threads, bench_json);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitError;
  }
  return kExitError;
}
