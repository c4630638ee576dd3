#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "gmatch/error.hpp"
#include "gmatch/geometry.hpp"
#include "gmatch/io.hpp"
#include "gmatch/keypoints.hpp"
#include "gmatch/matcher.hpp"
#include "gmatch/oracle.hpp"
#include "gmatch/pipeline.hpp"
#include "gmatch/refine.hpp"
#include "gmatch/synth.hpp"

namespace py = pybind11;
using namespace gmatch;

namespace {

using PointArray = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Point3> to_points(const Eigen::Ref<const PointArray>& a) {
  std::vector<Point3> out(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = a.row(i).transpose();
  return out;
}

PointArray from_points(const std::vector<Point3>& pts) {
  PointArray a(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return a;
}

py::list pairs_to_list(const std::vector<IndexPair>& pairs) {
  py::list out;
  for (const IndexPair& p : pairs) out.append(py::make_tuple(p.source, p.target));
  return out;
}

std::vector<IndexPair> pairs_from_list(const std::vector<std::pair<std::size_t, std::size_t>>& v) {
  std::vector<IndexPair> out;
  out.reserve(v.size());
  for (const auto& [s, t] : v) out.push_back({s, t});
  return out;
}

FeatureMetric metric_arg(const std::string& name) {
  if (const auto m = parse_metric(name)) return *m;
  throw Error(ErrorCode::MetricUnknown, "unknown metric '" + name + "'");
}

KeypointSet make_keypoints(const Eigen::Ref<const PointArray>& points, py::array features,
                           const std::string& metric_name, const Eigen::Vector3d& view,
                           std::optional<py::array_t<int, py::array::c_style | py::array::forcecast>> pixels,
                           std::optional<std::size_t> feature_bits) {
  const FeatureMetric metric = metric_arg(metric_name);
  const auto n = static_cast<std::size_t>(points.rows());
  if (features.ndim() != 2 || static_cast<std::size_t>(features.shape(0)) != n) {
    throw Error(ErrorCode::InvalidKeypoints, "features must be a 2-D array with one row per point");
  }
  const auto width = static_cast<std::size_t>(features.shape(1));

  FeatureMatrix fm;
  if (metric == FeatureMetric::Hamming) {
    const auto bytes = py::array_t<std::uint8_t, py::array::c_style>::ensure(features);
    if (!bytes || features.dtype().kind() != 'u' || features.itemsize() != 1) {
      throw Error(ErrorCode::MetricMismatch, "hamming metric needs packed uint8 features");
    }
    const std::size_t bits = feature_bits.value_or(8 * width);
    if ((bits + 7) / 8 != width) {
      throw Error(ErrorCode::InvalidKeypoints, "feature_bits does not match the packed row width");
    }
    fm = FeatureMatrix::binary(bits);
    for (std::size_t i = 0; i < n; ++i) fm.push_binary({bytes.data(i, 0), width});
  } else {
    if (features.dtype().kind() == 'u' && features.itemsize() == 1) {
      throw Error(ErrorCode::MetricMismatch, "euclidean metric needs real-valued features");
    }
    const auto reals = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(features);
    fm = FeatureMatrix::real(width);
    for (std::size_t i = 0; i < n; ++i) fm.push_real({reals.data(i, 0), width});
  }

  std::vector<Pixel> px(n);
  if (pixels) {
    if (pixels->ndim() != 2 || static_cast<std::size_t>(pixels->shape(0)) != n || pixels->shape(1) != 2) {
      throw Error(ErrorCode::InvalidKeypoints, "pixels must have shape (n, 2)");
    }
    const auto r = pixels->unchecked<2>();
    for (std::size_t i = 0; i < n; ++i) px[i] = {r(i, 0), r(i, 1)};
  }
  return KeypointSet(std::move(px), to_points(points), std::move(fm), metric, view);
}

py::array features_array(const KeypointSet& k) {
  const FeatureMatrix& f = k.features();
  if (f.kind() == FeatureKind::Binary) {
    py::array_t<std::uint8_t> out({f.rows(), f.bytes_per_row()});
    for (std::size_t i = 0; i < f.rows(); ++i) {
      std::memcpy(out.mutable_data(i, 0), f.binary_row(i).data(), f.bytes_per_row());
    }
    return out;
  }
  py::array_t<double> out({f.rows(), f.length()});
  for (std::size_t i = 0; i < f.rows(); ++i) {
    std::memcpy(out.mutable_data(i, 0), f.real_row(i).data(), f.length() * sizeof(double));
  }
  return out;
}

py::handle g_error_type;

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Geometry-constrained incremental keypoint matching";

  py::enum_<ErrorCode> code(m, "ErrorCode");
  for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c) {
    const auto e = static_cast<ErrorCode>(c);
    code.value(std::string(to_string(e)).c_str(), e);
  }

  static py::exception<Error> error_type(m, "GMatchError", PyExc_RuntimeError);
  g_error_type = error_type;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(g_error_type)(e.what());
      inst.attr("code") = e.code();
      PyErr_SetObject(g_error_type.ptr(), inst.ptr());
    }
  });

  py::enum_<FeatureMetric>(m, "FeatureMetric")
      .value("Euclidean", FeatureMetric::Euclidean)
      .value("Hamming", FeatureMetric::Hamming);
  py::enum_<ScenePreset>(m, "ScenePreset")
      .value("Cube", ScenePreset::Cube)
      .value("PlanarMirror", ScenePreset::PlanarMirror);

  // geometry
  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init([](double fx, double fy, double cx, double cy, int width, int height) {
             CameraIntrinsics k{fx, fy, cx, cy, width, height};
             k.validate();
             return k;
           }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"),
           py::arg("height"))
      .def_readonly("fx", &CameraIntrinsics::fx)
      .def_readonly("fy", &CameraIntrinsics::fy)
      .def_readonly("cx", &CameraIntrinsics::cx)
      .def_readonly("cy", &CameraIntrinsics::cy)
      .def_readonly("width", &CameraIntrinsics::width)
      .def_readonly("height", &CameraIntrinsics::height)
      .def(py::self == py::self);

  py::class_<RigidTransform>(m, "RigidTransform")
      .def(py::init<>())
      .def(py::init<const Eigen::Matrix3d&, const Eigen::Vector3d&>(), py::arg("rotation"),
           py::arg("translation"))
      .def_static("identity", &RigidTransform::identity)
      .def_static("from_matrix", &RigidTransform::from_matrix, py::arg("matrix"))
      .def_property_readonly("rotation", &RigidTransform::rotation)
      .def_property_readonly("translation", &RigidTransform::translation)
      .def("matrix", &RigidTransform::matrix)
      .def("inverse", &RigidTransform::inverse)
      .def("apply", [](const RigidTransform& t, const Eigen::Ref<const PointArray>& pts) {
        std::vector<Point3> out = to_points(pts);
        for (Point3& p : out) p = t(p);
        return from_points(out);
      }, py::arg("points"))
      .def(py::self * py::self)
      .def("__repr__", [](const RigidTransform& t) {
        std::ostringstream s;
        s << "RigidTransform(\n" << t.matrix() << ")";
        return s.str();
      });

  m.def("back_project",
        [](int u, int v, double depth, const CameraIntrinsics& k) {
          return back_project({u, v}, depth, k);
        },
        py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("intrinsics"));
  m.def("kabsch_solve",
        [](const Eigen::Ref<const PointArray>& s, const Eigen::Ref<const PointArray>& t) {
          return kabsch_solve(to_points(s), to_points(t));
        },
        py::arg("source"), py::arg("target"));
  m.def("recover_transform_constructive",
        [](const Eigen::Ref<const PointArray>& s, const Eigen::Ref<const PointArray>& t,
           double tol) { return recover_transform_constructive(to_points(s), to_points(t), tol); },
        py::arg("source"), py::arg("target"), py::arg("distance_tolerance") = 1e-9);
  m.def("verify_consistency",
        [](const Eigen::Ref<const PointArray>& s, const Eigen::Ref<const PointArray>& t,
           double tol) { return verify_consistency(to_points(s), to_points(t), tol); },
        py::arg("source"), py::arg("target"), py::arg("tol"));

  // keypoints
  py::class_<KeypointSet>(m, "KeypointSet")
      .def(py::init(&make_keypoints), py::arg("points"), py::arg("features"),
           py::arg("metric") = "euclidean", py::arg("view") = Eigen::Vector3d::UnitZ(),
           py::arg("pixels") = py::none(), py::arg("feature_bits") = py::none())
      .def("__len__", &KeypointSet::size)
      .def_property_readonly("points", [](const KeypointSet& k) { return from_points(k.points()); })
      .def_property_readonly("pixels",
                             [](const KeypointSet& k) {
                               py::array_t<int> out({k.size(), std::size_t{2}});
                               auto w = out.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < k.size(); ++i) {
                                 w(i, 0) = k.pixels()[i].u;
                                 w(i, 1) = k.pixels()[i].v;
                               }
                               return out;
                             })
      .def_property_readonly("features", &features_array)
      .def_property_readonly("metric", &KeypointSet::metric)
      .def_property_readonly("view", &KeypointSet::view)
      .def(py::self == py::self);

  // matcher
  py::class_<MatchConfig>(m, "MatchConfig")
      .def(py::init<>())
      .def_static("defaults_for", [](const std::string& metric) {
        return MatchConfig::defaults_for(metric_arg(metric));
      }, py::arg("metric"))
      .def_readwrite("epsilon_f", &MatchConfig::epsilon_f)
      .def_readwrite("epsilon_c", &MatchConfig::epsilon_c)
      .def_readwrite("eta", &MatchConfig::eta)
      .def_readwrite("top_t", &MatchConfig::top_t)
      .def_readwrite("max_len", &MatchConfig::max_len)
      .def_readwrite("colinear_eps", &MatchConfig::colinear_eps)
      .def_readwrite("check_flip_over", &MatchConfig::check_flip_over)
      .def_readwrite("threads", &MatchConfig::threads)
      .def("validate", &MatchConfig::validate);

  py::class_<CandidatePair>(m, "CandidatePair")
      .def(py::init([](std::size_t s, std::size_t t, double d) { return CandidatePair{s, t, d}; }),
           py::arg("source"), py::arg("target"), py::arg("feat_dist") = 0.0)
      .def_readonly("source", &CandidatePair::source)
      .def_readonly("target", &CandidatePair::target)
      .def_readonly("feat_dist", &CandidatePair::feat_dist)
      .def("__repr__", [](const CandidatePair& c) {
        return "CandidatePair(" + std::to_string(c.source) + ", " + std::to_string(c.target) +
               ", " + std::to_string(c.feat_dist) + ")";
      });

  py::class_<MatchState>(m, "MatchState")
      .def_property_readonly("pairs", [](const MatchState& s) { return pairs_to_list(s.pairs); })
      .def_readonly("accumulated_cost", &MatchState::accumulated_cost)
      .def("__len__", &MatchState::size);

  m.def("candidate_pairs", &candidate_pairs, py::arg("source"), py::arg("target"),
        py::arg("config") = MatchConfig{});
  m.def("seed_hypotheses",
        [](const std::vector<CandidatePair>& pool, const KeypointSet& s, const KeypointSet& t,
           const MatchConfig& cfg) { return seed_hypotheses(pool, s, t, cfg); },
        py::arg("pool"), py::arg("source"), py::arg("target"), py::arg("config") = MatchConfig{});
  m.def("gmatch", &gmatch::gmatch, py::arg("source"), py::arg("target"),
        py::arg("config") = MatchConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("brute_force_max_consistent",
        [](const std::vector<CandidatePair>& pool, const KeypointSet& s, const KeypointSet& t,
           const MatchConfig& cfg) { return brute_force_max_consistent(pool, s, t, cfg); },
        py::arg("pool"), py::arg("source"), py::arg("target"), py::arg("config") = MatchConfig{});

  // refine
  py::class_<IcpConfig>(m, "IcpConfig")
      .def(py::init<>())
      .def_readwrite("max_iterations", &IcpConfig::max_iterations)
      .def_readwrite("correspondence_radius", &IcpConfig::correspondence_radius)
      .def_readwrite("convergence_eps", &IcpConfig::convergence_eps);
  py::class_<IcpResult>(m, "IcpResult")
      .def_readonly("transform", &IcpResult::transform)
      .def_readonly("rmse", &IcpResult::rmse)
      .def_readonly("associations", &IcpResult::associations)
      .def_readonly("rmse_history", &IcpResult::rmse_history);
  m.def("icp_refine",
        [](const RigidTransform& initial, const Eigen::Ref<const PointArray>& s,
           const Eigen::Ref<const PointArray>& t, const IcpConfig& cfg) {
          const auto src = to_points(s), tgt = to_points(t);
          py::gil_scoped_release release;
          return icp_refine(initial, src, tgt, cfg);
        },
        py::arg("initial"), py::arg("source_points"), py::arg("target_points"),
        py::arg("config") = IcpConfig{});

  // pipeline
  py::class_<StageTimings>(m, "StageTimings")
      .def_readonly("candidate", &StageTimings::candidate)
      .def_readonly("seed", &StageTimings::seed)
      .def_readonly("expand", &StageTimings::expand)
      .def_readonly("solve", &StageTimings::solve)
      .def_readonly("refine", &StageTimings::refine);
  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("match", &PipelineConfig::match)
      .def_readwrite("icp", &PipelineConfig::icp)
      .def_readwrite("icp_config", &PipelineConfig::icp_config);
  py::class_<PipelineResult>(m, "PipelineResult")
      .def_readonly("pose", &PipelineResult::pose)
      .def_readonly("matches", &PipelineResult::matches)
      .def_readonly("candidate_count", &PipelineResult::candidate_count)
      .def_readonly("seed_count", &PipelineResult::seed_count)
      .def_readonly("refined", &PipelineResult::refined)
      .def_readonly("timing", &PipelineResult::timing)
      .def_readonly("diagnostic", &PipelineResult::diagnostic);
  m.def("estimate_pose", &estimate_pose, py::arg("source"), py::arg("target"),
        py::arg("config") = PipelineConfig{}, py::call_guard<py::gil_scoped_release>());

  // oracle and bench
  py::class_<SynthParams>(m, "SynthParams")
      .def(py::init<>())
      .def_readwrite("n_points", &SynthParams::n_points)
      .def_readwrite("duplicate_feature_groups", &SynthParams::duplicate_feature_groups)
      .def_readwrite("duplicate_fraction", &SynthParams::duplicate_fraction)
      .def_readwrite("feature_noise_sigma", &SynthParams::feature_noise_sigma)
      .def_readwrite("depth_noise_sigma", &SynthParams::depth_noise_sigma)
      .def_readwrite("outlier_count", &SynthParams::outlier_count)
      .def_readwrite("seed", &SynthParams::seed)
      .def_readwrite("feature_dim", &SynthParams::feature_dim)
      .def_readwrite("preset", &SynthParams::preset);
  py::class_<SynthScene>(m, "SynthScene")
      .def_readonly("source", &SynthScene::source)
      .def_readonly("target", &SynthScene::target)
      .def_readonly("truth", &SynthScene::truth)
      .def_property_readonly("truth_pairs",
                             [](const SynthScene& s) { return pairs_to_list(s.truth_pairs); })
      .def_readonly("params", &SynthScene::params);
  m.def("synth_scene", &synth_scene, py::arg("params"));
  m.def("synth_intrinsics", &synth_intrinsics);

  py::class_<PoseError>(m, "PoseError")
      .def_readonly("rotation_deg", &PoseError::rotation_deg)
      .def_readonly("translation_m", &PoseError::translation_m);
  m.def("evaluate_pose", &evaluate_pose, py::arg("estimate"), py::arg("truth"));

  // io
  py::class_<LoadedKeypoints>(m, "LoadedKeypoints")
      .def_readonly("keypoints", &LoadedKeypoints::keypoints)
      .def_readonly("record_index", &LoadedKeypoints::record_index)
      .def_readonly("rejected", &LoadedKeypoints::rejected)
      .def_readonly("intrinsics", &LoadedKeypoints::intrinsics);
  m.def("load_keypoints", &load_keypoints, py::arg("path"));
  m.def("save_keypoints", &save_keypoints, py::arg("path"), py::arg("keypoints"),
        py::arg("intrinsics") = std::nullopt);

  py::class_<PoseFile>(m, "PoseFile")
      .def(py::init([](const RigidTransform& pose, double cost,
                       const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
             PoseFile p;
             p.pose = pose;
             p.pairs = pairs_from_list(pairs);
             p.match_count = p.pairs.size();
             p.accumulated_cost = cost;
             return p;
           }),
           py::arg("pose"), py::arg("accumulated_cost") = 0.0,
           py::arg("pairs") = std::vector<std::pair<std::size_t, std::size_t>>{})
      .def_readonly("pose", &PoseFile::pose)
      .def_readonly("match_count", &PoseFile::match_count)
      .def_readonly("accumulated_cost", &PoseFile::accumulated_cost)
      .def_property_readonly("pairs", [](const PoseFile& p) { return pairs_to_list(p.pairs); })
      .def_readonly("timing", &PoseFile::timing);
  m.def("load_pose", &load_pose, py::arg("path"));
  m.def("save_pose", &save_pose, py::arg("path"), py::arg("pose"));
  m.def("save_scene", &save_scene, py::arg("directory"), py::arg("scene"));
}
