#include "gmatch/io.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gmatch {

static_assert(std::endian::native == std::endian::little,
              "feature payloads are little-endian; add byte swapping for this platform");

using nlohmann::json;

namespace {

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr std::string_view kKeypointFormat = "gmatch-keypoints";
constexpr std::string_view kPoseFormat = "gmatch-pose";
constexpr int kVersion = 1;

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

[[noreturn]] void record_fail(std::size_t line, const std::string& what) {
  parse_fail("line " + std::to_string(line) + ": " + what);
}

json parse_json(std::string_view text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    record_fail(line, e.what());
  }
}

Eigen::Vector3d vec3(const json& j, const char* name, std::size_t line) {
  if (!j.is_array() || j.size() != 3) record_fail(line, std::string(name) + " must be [x, y, z]");
  Eigen::Vector3d v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) record_fail(line, std::string(name) + " must be numeric");
    v[k] = j[k].get<double>();
  }
  return v;
}

enum class PayloadKind { F64, F32, Bits };

std::optional<PayloadKind> parse_payload_kind(std::string_view s) {
  if (s == "f64") return PayloadKind::F64;
  if (s == "f32") return PayloadKind::F32;
  if (s == "bits") return PayloadKind::Bits;
  return std::nullopt;
}

std::size_t payload_bytes(PayloadKind kind, std::size_t length) {
  switch (kind) {
    case PayloadKind::F64: return 8 * length;
    case PayloadKind::F32: return 4 * length;
    case PayloadKind::Bits: return (length + 7) / 8;
  }
  return 0;
}

template <typename T>
T required(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) record_fail(line, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    record_fail(line, std::string("field '") + key + "' has the wrong type");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) parse_fail("base64 length is not a multiple of 4");
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (std::size_t k = 0; k < kAlphabet.size(); ++k) {
    lookup[static_cast<unsigned char>(kAlphabet[k])] = static_cast<int>(k);
  }

  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      if (ch == '=' && last && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = lookup[static_cast<unsigned char>(ch)];
      if (d < 0 || pad > 0) parse_fail("invalid base64 payload");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

LoadedKeypoints read_keypoints(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line()) parse_fail("empty keypoint file");
  const json header = parse_json(line, line_no);
  if (!header.is_object()) record_fail(line_no, "header must be an object");
  if (required<std::string>(header, "format", line_no) != kKeypointFormat) {
    record_fail(line_no, "not a gmatch-keypoints file");
  }
  if (required<int>(header, "version", line_no) != kVersion) {
    record_fail(line_no, "unsupported version");
  }

  const auto metric_name = required<std::string>(header, "metric", line_no);
  const auto metric = parse_metric(metric_name);
  if (!metric) throw Error(ErrorCode::MetricUnknown, "unknown metric '" + metric_name + "'");

  const auto kind_name = required<std::string>(header, "feature_kind", line_no);
  const auto kind = parse_payload_kind(kind_name);
  if (!kind) record_fail(line_no, "unknown feature_kind '" + kind_name + "'");
  if ((*kind == PayloadKind::Bits) != (*metric == FeatureMetric::Hamming)) {
    throw Error(ErrorCode::MetricMismatch,
                metric_name + " metric does not apply to " + kind_name + " features");
  }
  const auto length = required<std::size_t>(header, "feature_length", line_no);
  if (length == 0) record_fail(line_no, "feature_length must be positive");
  const auto count = required<std::size_t>(header, "count", line_no);

  Eigen::Vector3d view = Eigen::Vector3d::UnitZ();
  if (header.contains("view")) view = vec3(header["view"], "view", line_no);

  LoadedKeypoints loaded;
  if (header.contains("intrinsics") && !header["intrinsics"].is_null()) {
    const json& k = header["intrinsics"];
    CameraIntrinsics intr{required<double>(k, "fx", line_no), required<double>(k, "fy", line_no),
                          required<double>(k, "cx", line_no), required<double>(k, "cy", line_no),
                          required<int>(k, "width", line_no), required<int>(k, "height", line_no)};
    try {
      intr.validate();
    } catch (const Error& e) {
      record_fail(line_no, e.what());
    }
    loaded.intrinsics = intr;
  }

  std::vector<Pixel> pixels;
  std::vector<Point3> points;
  FeatureMatrix features =
      *kind == PayloadKind::Bits ? FeatureMatrix::binary(length) : FeatureMatrix::real(length);
  std::optional<bool> uses_depth;
  std::vector<double> row(length);

  std::size_t record = 0;
  for (; next_line(); ++record) {
    const json r = parse_json(line, line_no);
    if (!r.is_object()) record_fail(line_no, "record must be an object");

    Pixel pixel;
    if (r.contains("pixel")) {
      const json& p = r["pixel"];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
          !p[1].is_number_integer()) {
        record_fail(line_no, "pixel must be [u, v] integers");
      }
      pixel = {p[0].get<int>(), p[1].get<int>()};
    }

    const bool has_depth = r.contains("depth");
    const bool has_point = r.contains("point");
    if (has_depth == has_point) record_fail(line_no, "record needs exactly one of depth or point");
    if (uses_depth && *uses_depth != has_depth) {
      record_fail(line_no, "records mix depth and explicit points");
    }
    uses_depth = has_depth;
    if (loaded.intrinsics && !loaded.intrinsics->contains(pixel)) {
      record_fail(line_no, "pixel outside the image");
    }

    const auto payload = base64_decode(required<std::string>(r, "feature", line_no));
    if (payload.size() != payload_bytes(*kind, length)) {
      record_fail(line_no, "feature payload has " + std::to_string(payload.size()) +
                               " bytes, expected " +
                               std::to_string(payload_bytes(*kind, length)));
    }

    Point3 point;
    if (has_depth) {
      if (!loaded.intrinsics) record_fail(line_no, "depth records need intrinsics in the header");
      if (!r["depth"].is_number()) record_fail(line_no, "depth must be numeric");
      const double depth = r["depth"].get<double>();
      if (!std::isfinite(depth) || depth <= 0.0) {
        loaded.rejected.push_back(record);
        continue;
      }
      point = back_project(pixel, depth, *loaded.intrinsics);
    } else {
      point = vec3(r["point"], "point", line_no);
      if (!point.allFinite()) record_fail(line_no, "point is not finite");
    }

    if (*kind == PayloadKind::Bits) {
      features.push_binary(payload);
    } else if (*kind == PayloadKind::F64) {
      std::memcpy(row.data(), payload.data(), payload.size());
      features.push_real(row);
    } else {
      for (std::size_t k = 0; k < length; ++k) {
        float f;
        std::memcpy(&f, payload.data() + 4 * k, 4);
        row[k] = f;
      }
      features.push_real(row);
    }
    pixels.push_back(pixel);
    points.push_back(point);
    loaded.record_index.push_back(record);
  }
  if (record != count) {
    parse_fail("header declares " + std::to_string(count) + " records, file has " +
               std::to_string(record));
  }

  try {
    loaded.keypoints = KeypointSet(std::move(pixels), std::move(points), std::move(features),
                                   *metric, view);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MetricMismatch) throw;
    parse_fail(e.what());
  }
  return loaded;
}

LoadedKeypoints load_keypoints(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return read_keypoints(in);
}

void write_keypoints(std::ostream& out, const KeypointSet& keypoints,
                     const std::optional<CameraIntrinsics>& intrinsics) {
  const FeatureMatrix& f = keypoints.features();
  const bool binary = keypoints.metric() == FeatureMetric::Hamming;
  json header = {
      {"format", kKeypointFormat},
      {"version", kVersion},
      {"metric", to_string(keypoints.metric())},
      {"feature_kind", binary ? "bits" : "f64"},
      {"feature_length", f.length()},
      {"view", {keypoints.view().x(), keypoints.view().y(), keypoints.view().z()}},
      {"count", keypoints.size()},
  };
  if (intrinsics) {
    header["intrinsics"] = {{"fx", intrinsics->fx},       {"fy", intrinsics->fy},
                            {"cx", intrinsics->cx},       {"cy", intrinsics->cy},
                            {"width", intrinsics->width}, {"height", intrinsics->height}};
  }
  out << header.dump() << '\n';

  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    std::string payload;
    if (binary) {
      payload = base64_encode(f.binary_row(i));
    } else {
      const auto row = f.real_row(i);
      payload = base64_encode({reinterpret_cast<const std::uint8_t*>(row.data()), row.size_bytes()});
    }
    const Point3& p = keypoints.point(i);
    const json record = {
        {"pixel", {keypoints.pixels()[i].u, keypoints.pixels()[i].v}},
        {"point", {p.x(), p.y(), p.z()}},
        {"feature", payload},
    };
    out << record.dump() << '\n';
  }
}

void save_keypoints(const std::filesystem::path& path, const KeypointSet& keypoints,
                    const std::optional<CameraIntrinsics>& intrinsics) {
  std::ostringstream ss;
  write_keypoints(ss, keypoints, intrinsics);
  write_file(path, ss.str());
}

std::string pose_to_json(const PoseFile& pose) {
  const Eigen::Matrix4d m = pose.pose.matrix();
  json matrix = json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) matrix.push_back(m(r, c));
  }
  json pairs = json::array();
  for (const IndexPair& p : pose.pairs) pairs.push_back({p.source, p.target});

  json out = {
      {"format", kPoseFormat},
      {"version", kVersion},
      {"matrix", matrix},
      {"match_count", pose.match_count},
      {"accumulated_cost", pose.accumulated_cost},
      {"pairs", pairs},
  };
  if (pose.timing) {
    const StageTimings& t = *pose.timing;
    out["timing"] = {{"candidate", t.candidate}, {"seed", t.seed},    {"expand", t.expand},
                     {"solve", t.solve},         {"refine", t.refine}};
  }
  return out.dump(2) + "\n";
}

PoseFile pose_from_json(std::string_view text) {
  const json j = parse_json(text, 1);
  if (!j.is_object() || !j.contains("format") || j["format"] != kPoseFormat) {
    parse_fail("not a gmatch-pose file");
  }
  if (required<int>(j, "version", 1) != kVersion) parse_fail("unsupported pose file version");

  const auto values = required<std::vector<double>>(j, "matrix", 1);
  if (values.size() != 16) parse_fail("matrix must hold 16 row-major values");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = values[4 * r + c];
  }

  PoseFile pose;
  try {
    pose.pose = RigidTransform::from_matrix(m);
  } catch (const Error& e) {
    parse_fail(e.what());
  }
  pose.match_count = required<std::size_t>(j, "match_count", 1);
  pose.accumulated_cost = required<double>(j, "accumulated_cost", 1);
  for (const auto& p : required<std::vector<std::array<std::size_t, 2>>>(j, "pairs", 1)) {
    pose.pairs.push_back({p[0], p[1]});
  }
  if (j.contains("timing")) {
    const json& t = j["timing"];
    pose.timing = StageTimings{required<double>(t, "candidate", 1), required<double>(t, "seed", 1),
                               required<double>(t, "expand", 1), required<double>(t, "solve", 1),
                               required<double>(t, "refine", 1)};
  }
  return pose;
}

void save_pose(const std::filesystem::path& path, const PoseFile& pose) {
  write_file(path, pose_to_json(pose));
}

PoseFile load_pose(const std::filesystem::path& path) { return pose_from_json(read_file(path)); }

void save_scene(const std::filesystem::path& dir, const SynthScene& scene) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  save_keypoints(dir / "source.jsonl", scene.source);
  save_keypoints(dir / "target.jsonl", scene.target);
  save_pose(dir / "truth.json",
            PoseFile{scene.truth, scene.truth_pairs.size(), 0.0, scene.truth_pairs, std::nullopt});
}

}  // namespace gmatch
