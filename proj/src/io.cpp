#include "carm/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace carm::io {
namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(Errc::InvalidArgument, where + ": " + what);
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where, "expected an object");
}

/// Rejects keys outside `allowed`.
void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema_error(where, "unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    schema_error(where + "." + key, "wrong type");
  }
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) schema_error(where, std::string("missing key '") + key + "'");
  T out{};
  read_field(j, key, out, where);
  return out;
}

std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

JointId joint_or_throw(const std::string& name) {
  auto j = joint_from_name(name);
  if (!j) throw Error(Errc::InvalidArgument, "unknown joint '" + name + "'");
  return *j;
}

TargetName target_or_throw(const std::string& name) {
  auto t = target_from_name(name);
  if (!t) throw Error(Errc::InvalidArgument, "unknown target '" + name + "'");
  return *t;
}

template <typename F>
void for_each_record(std::istream& in, F&& f) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    f(j);
  }
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write '" + path.string() + "'");
  out << text;
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::InvalidArgument, "expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json_row_major(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Mat3 mat3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw Error(Errc::InvalidArgument, "expected 9 numbers");
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j[static_cast<std::size_t>(3 * r + c)].get<double>();
  return m;
}

namespace {

json intrinsics_to_json(const Intrinsics<double>& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
          {"width", k.image_width}, {"height", k.image_height}};
}

Intrinsics<double> intrinsics_from_json(const json& j, const std::string& where) {
  check_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, where);
  Intrinsics<double> k;
  k.fx = required<double>(j, "fx", where);
  k.fy = required<double>(j, "fy", where);
  k.cx = required<double>(j, "cx", where);
  k.cy = required<double>(j, "cy", where);
  k.image_width = required<int>(j, "width", where);
  k.image_height = required<int>(j, "height", where);
  k.validate();
  return k;
}

void check_version(const json& doc, const std::string& where) {
  const int v = required<int>(doc, "format_version", where);
  if (v != kFormatVersion) schema_error(where, "unsupported format_version " + std::to_string(v));
}

}  // namespace

json rig_to_json(const CameraRig& rig) {
  json cams = json::array();
  for (const auto& c : rig) {
    cams.push_back({{"id", c.id},
                    {"intrinsics", intrinsics_to_json(c.intrinsics)},
                    {"rotation", to_json_row_major(c.extrinsics.rotation)},
                    {"translation", to_json(c.extrinsics.translation)}});
  }
  return {{"format_version", kFormatVersion}, {"cameras", cams}};
}

CameraRig rig_from_json(const json& doc) {
  check_keys(doc, {"format_version", "cameras"}, "rig");
  check_version(doc, "rig");
  CameraRig rig;
  for (const auto& c : required<json>(doc, "cameras", "rig")) {
    const std::string where = "rig.cameras";
    check_keys(c, {"id", "intrinsics", "rotation", "translation"}, where);
    Camera cam;
    cam.id = required<std::string>(c, "id", where);
    cam.intrinsics = intrinsics_from_json(required<json>(c, "intrinsics", where), where);
    cam.extrinsics.rotation = mat3_from_json(required<json>(c, "rotation", where));
    cam.extrinsics.translation = vec3_from_json(required<json>(c, "translation", where));
    if (!cam.extrinsics.is_valid(1e-6)) schema_error(where, "rotation of '" + cam.id + "' is not orthonormal");
    rig.push_back(std::move(cam));
  }
  return rig;
}

json primitive_to_json(const Primitive& p) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          return {{"type", "box"}, {"min", to_json(s.min_corner)}, {"max", to_json(s.max_corner)}};
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return {{"type", "sphere"}, {"center", to_json(s.center)}, {"radius", s.radius}};
        } else if constexpr (std::is_same_v<T, Capsule>) {
          return {{"type", "capsule"}, {"a", to_json(s.a)}, {"b", to_json(s.b)}, {"radius", s.radius}};
        } else {
          return {{"type", "oriented_box"},
                  {"center", to_json(s.center)},
                  {"axes", to_json_row_major(s.axes)},
                  {"half_extents", to_json(s.half_extents)}};
        }
      },
      p);
}

Primitive primitive_from_json(const json& j) {
  const std::string where = "shape";
  require_object(j, where);
  const auto type = required<std::string>(j, "type", where);
  if (type == "box") {
    check_keys(j, {"type", "min", "max"}, where);
    Box b{vec3_from_json(required<json>(j, "min", where)), vec3_from_json(required<json>(j, "max", where))};
    if ((b.max_corner.array() < b.min_corner.array()).any()) schema_error(where, "box max < min");
    return b;
  }
  if (type == "sphere") {
    check_keys(j, {"type", "center", "radius"}, where);
    Sphere s{vec3_from_json(required<json>(j, "center", where)), required<double>(j, "radius", where)};
    if (!(s.radius > 0)) schema_error(where, "radius must be positive");
    return s;
  }
  if (type == "capsule") {
    check_keys(j, {"type", "a", "b", "radius"}, where);
    Capsule c{vec3_from_json(required<json>(j, "a", where)), vec3_from_json(required<json>(j, "b", where)),
              required<double>(j, "radius", where)};
    if (!(c.radius > 0)) schema_error(where, "radius must be positive");
    return c;
  }
  if (type == "oriented_box") {
    check_keys(j, {"type", "center", "axes", "half_extents"}, where);
    OrientedBox b;
    b.center = vec3_from_json(required<json>(j, "center", where));
    b.axes = j.contains("axes") ? mat3_from_json(j["axes"]) : Mat3::Identity();
    b.half_extents = vec3_from_json(required<json>(j, "half_extents", where));
    return b;
  }
  schema_error(where, "unknown type '" + type + "'");
}

void write_observations(std::ostream& out, const std::vector<FrameObservations>& frames) {
  for (const auto& f : frames) {
    for (const auto& o : f.observations()) {
      json j = {{"t", f.timestep()},
                {"camera", f.camera_id()},
                {"joint", joint_name(o.joint)},
                {"pixel", {o.pixel.x(), o.pixel.y()}},
                {"rho", o.confidence},
                {"v", o.visibility}};
      out << j.dump() << '\n';
    }
  }
}

std::vector<FrameObservations> read_observations(std::istream& in) {
  std::vector<FrameObservations> frames;
  for_each_record(in, [&](const json& j) {
    const std::string where = "observation";
    check_keys(j, {"t", "camera", "joint", "pixel", "rho", "v"}, where);
    const int t = required<int>(j, "t", where);
    const auto cam = required<std::string>(j, "camera", where);
    Observation2D o;
    o.joint = joint_or_throw(required<std::string>(j, "joint", where));
    const auto px = required<std::vector<double>>(j, "pixel", where);
    if (px.size() != 2) schema_error(where, "pixel needs 2 numbers");
    o.pixel = {px[0], px[1]};
    o.confidence = required<double>(j, "rho", where);
    o.visibility = required<int>(j, "v", where);
    if (o.confidence < 0 || o.confidence > 1) schema_error(where, "rho outside [0, 1]");
    if (o.visibility != 0 && o.visibility != 1) schema_error(where, "v must be 0 or 1");
    auto it = std::find_if(frames.begin(), frames.end(), [&](const FrameObservations& f) {
      return f.timestep() == t && f.camera_id() == cam;
    });
    if (it == frames.end()) {
      frames.emplace_back(cam, t);
      it = frames.end() - 1;
    }
    it->set(o);
  });
  return frames;
}

json keypoint_to_json(const ScoredKeypoint3D& kp, bool consolidated) {
  return {{"t", kp.timestep},
          {"joint", joint_name(kp.joint)},
          {"position", to_json(kp.position)},
          {"rho", kp.score.confidence},
          {"v", kp.score.visibility},
          {"inv_err", kp.score.inv_err},
          {"subset", kp.winning_subset},
          {"consolidated", consolidated}};
}

ScoredKeypoint3D keypoint_from_json(const json& j, bool* consolidated) {
  const std::string where = "keypoint";
  check_keys(j, {"t", "joint", "position", "rho", "v", "inv_err", "subset", "consolidated"}, where);
  ScoredKeypoint3D kp;
  kp.timestep = required<int>(j, "t", where);
  kp.joint = joint_or_throw(required<std::string>(j, "joint", where));
  kp.position = vec3_from_json(required<json>(j, "position", where));
  kp.score.confidence = required<double>(j, "rho", where);
  kp.score.visibility = required<double>(j, "v", where);
  kp.score.inv_err = required<double>(j, "inv_err", where);
  read_field(j, "subset", kp.winning_subset, where);
  if (consolidated) {
    *consolidated = false;
    read_field(j, "consolidated", *consolidated, where);
  }
  return kp;
}

void write_keypoints(std::ostream& out, const std::vector<ScoredKeypoint3D>& keypoints,
                     bool consolidated) {
  for (const auto& kp : keypoints) out << keypoint_to_json(kp, consolidated).dump() << '\n';
}

std::vector<ScoredKeypoint3D> read_keypoints(std::istream& in) {
  std::vector<ScoredKeypoint3D> out;
  for_each_record(in, [&](const json& j) { out.push_back(keypoint_from_json(j)); });
  return out;
}

json drift_event_to_json(const DriftEvent& e) {
  return {{"t", e.timestep},
          {"joint", joint_name(e.joint)},
          {"marginal", marginal_name(e.marginal)},
          {"p_value", e.p_value}};
}

void write_depth_csv(std::ostream& out, const DepthImage& depth) {
  out << "# carm-depth v1 " << depth.width << ' ' << depth.height << '\n';
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (u) out << ',';
      out << shortest(depth.at(u, v));
    }
    out << '\n';
  }
}

DepthImage read_depth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::ParseError, "depth: empty file");
  std::istringstream header(line);
  std::string hash, magic, version;
  int w = 0;
  int h = 0;
  header >> hash >> magic >> version >> w >> h;
  if (hash != "#" || magic != "carm-depth" || version != "v1" || w <= 0 || h <= 0) {
    throw Error(Errc::ParseError, "depth: bad header '" + line + "'");
  }
  DepthImage depth(w, h);
  for (int v = 0; v < h; ++v) {
    if (!std::getline(in, line)) throw Error(Errc::ParseError, "depth: missing row " + std::to_string(v));
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int u = 0; u < w; ++u) {
      double value = 0.0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc{}) {
        throw Error(Errc::ParseError, "depth: bad value at row " + std::to_string(v));
      }
      depth.at(u, v) = value;
      p = next;
      if (u + 1 < w) {
        if (p == end || *p != ',') throw Error(Errc::ParseError, "depth: short row " + std::to_string(v));
        ++p;
      }
    }
  }
  depth.validate();
  return depth;
}

void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const auto& p : cloud.points) {
    out << shortest(p.x()) << ' ' << shortest(p.y()) << ' ' << shortest(p.z()) << '\n';
  }
}

PointCloud read_ply(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(Errc::ParseError, "ply: missing magic");
  std::size_t count = 0;
  int properties = 0;
  bool vertex_element = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw Error(Errc::ParseError, "ply: only ascii is supported");
    } else if (word == "element") {
      std::string name;
      ls >> name;
      vertex_element = name == "vertex";
      if (vertex_element) ls >> count;
    } else if (word == "property" && vertex_element) {
      ++properties;
    } else if (word == "end_header") {
      break;
    }
  }
  if (properties < 3) throw Error(Errc::ParseError, "ply: vertex needs x y z");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw Error(Errc::ParseError, "ply: truncated vertex list");
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) throw Error(Errc::ParseError, "ply: bad vertex");
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_points_csv(std::ostream& out, const PointCloud& cloud) {
  out << "x,y,z\n";
  for (const auto& p : cloud.points) {
    out << shortest(p.x()) << ',' << shortest(p.y()) << ',' << shortest(p.z()) << '\n';
  }
}

PointCloud read_points_csv(std::istream& in) {
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) throw Error(Errc::ParseError, "csv: bad point '" + line + "'");
    cloud.points.push_back(p);
  }
  return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  if (path.extension() == ".ply") return read_ply(in);
  if (path.extension() == ".csv") return read_points_csv(in);
  throw Error(Errc::InvalidArgument, "unsupported point cloud extension: " + path.string());
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ostringstream out;
  if (path.extension() == ".ply") {
    write_ply(out, cloud);
  } else if (path.extension() == ".csv") {
    write_points_csv(out, cloud);
  } else {
    throw Error(Errc::InvalidArgument, "unsupported point cloud extension: " + path.string());
  }
  write_text(path, out.str());
}

namespace {

json step_to_json(const TrajectoryStep& s) {
  return {{"angle_deg", s.angle_deg}, {"isocenter", to_json(s.isocenter)},
          {"translation", to_json(s.translation)}};
}

TrajectoryStep step_from_json(const json& j) {
  const std::string where = "protocol.steps";
  check_keys(j, {"angle_deg", "isocenter", "translation"}, where);
  TrajectoryStep s;
  s.angle_deg = required<double>(j, "angle_deg", where);
  if (j.contains("isocenter")) s.isocenter = vec3_from_json(j["isocenter"]);
  if (j.contains("translation")) s.translation = vec3_from_json(j["translation"]);
  return s;
}

json carm_to_json(const CArmModel& m) {
  return {{"arc_radius", m.arc_radius},
          {"arc_span", m.arc_span},
          {"tube_cross_section", m.tube_cross_section},
          {"detector_box", to_json(m.detector_box)},
          {"source_box", to_json(m.source_box)},
          {"surface_sample_spacing", m.surface_sample_spacing}};
}

CArmModel carm_from_json(const json& j, CArmModel m) {
  const std::string where = "carm";
  check_keys(j, {"arc_radius", "arc_span", "tube_cross_section", "detector_box", "source_box",
                 "surface_sample_spacing"}, where);
  read_field(j, "arc_radius", m.arc_radius, where);
  read_field(j, "arc_span", m.arc_span, where);
  read_field(j, "tube_cross_section", m.tube_cross_section, where);
  read_field(j, "surface_sample_spacing", m.surface_sample_spacing, where);
  if (j.contains("detector_box")) m.detector_box = vec3_from_json(j["detector_box"]);
  if (j.contains("source_box")) m.source_box = vec3_from_json(j["source_box"]);
  return m;
}

}  // namespace

json protocol_to_json(const TrajectoryProtocol& protocol) {
  json steps = json::array();
  for (const auto& s : protocol.steps) steps.push_back(step_to_json(s));
  return {{"name", protocol.name}, {"steps", steps}};
}

TrajectoryProtocol protocol_from_json(const json& j) {
  const std::string where = "protocol";
  check_keys(j, {"name", "steps", "sweep"}, where);
  TrajectoryProtocol p;
  p.name = required<std::string>(j, "name", where);
  if (j.contains("sweep")) {
    // Shorthand: {"isocenter", "start_deg", "end_deg", "steps"}.
    const json& s = j["sweep"];
    check_keys(s, {"isocenter", "start_deg", "end_deg", "steps"}, where + ".sweep");
    p = sweep_protocol(p.name, vec3_from_json(required<json>(s, "isocenter", where)),
                       required<double>(s, "start_deg", where), required<double>(s, "end_deg", where),
                       required<int>(s, "steps", where));
  } else {
    for (const auto& s : required<json>(j, "steps", where)) p.steps.push_back(step_from_json(s));
  }
  p.validate();
  return p;
}

json grid_to_json(const VoxelGridConfig& grid) {
  return {{"origin", to_json(grid.origin)},
          {"extent", to_json(grid.extent)},
          {"resolution", {grid.resolution.x(), grid.resolution.y(), grid.resolution.z()}}};
}

VoxelGridConfig grid_from_json(const json& j) {
  const std::string where = "grid";
  check_keys(j, {"origin", "extent", "resolution"}, where);
  VoxelGridConfig g;
  if (j.contains("origin")) g.origin = vec3_from_json(j["origin"]);
  if (j.contains("extent")) g.extent = vec3_from_json(j["extent"]);
  if (j.contains("resolution")) {
    const auto r = j["resolution"].get<std::vector<int>>();
    if (r.size() != 3) schema_error(where, "resolution needs 3 integers");
    g.resolution = {r[0], r[1], r[2]};
  }
  g.validate();
  return g;
}

json collision_report_to_json(const CollisionReport& report, const VoxelGridConfig& grid) {
  json regions = json::array();
  std::size_t cells = 0;
  for (const auto& r : report.regions) {
    json centers = json::array();
    for (const auto& c : r.centers) centers.push_back(to_json(c));
    regions.push_back({{"step", r.step}, {"voxels", r.voxels}, {"centers", centers}});
    cells += r.voxels.size();
  }
  return {{"format_version", kFormatVersion},
          {"collided", report.collided},
          {"colliding_steps", report.regions.size()},
          {"colliding_cells", cells},
          {"grid", grid_to_json(grid)},
          {"regions", regions}};
}

json body_params_to_json(const BodyParams& params) {
  json scales = json::object();
  json rotations = json::object();
  for (JointId j : kAllJoints) {
    const auto k = static_cast<std::size_t>(index(j));
    scales[std::string(joint_name(j))] = params.bone_scales[k];
    rotations[std::string(joint_name(j))] = to_json_row_major(params.joint_rotations[k]);
  }
  return {{"root_position", to_json(params.root_position)},
          {"root_orientation", to_json_row_major(params.root_orientation)},
          {"bone_scales", scales},
          {"joint_rotations", rotations}};
}

BodyParams body_params_from_json(const json& j) {
  const std::string where = "body_params";
  check_keys(j, {"root_position", "root_orientation", "bone_scales", "joint_rotations"}, where);
  BodyParams p;
  if (j.contains("root_position")) p.root_position = vec3_from_json(j["root_position"]);
  if (j.contains("root_orientation")) p.root_orientation = mat3_from_json(j["root_orientation"]);
  if (j.contains("bone_scales")) {
    for (const auto& [name, value] : j["bone_scales"].items()) {
      p.bone_scales[static_cast<std::size_t>(index(joint_or_throw(name)))] = value.get<double>();
    }
  }
  if (j.contains("joint_rotations")) {
    for (const auto& [name, value] : j["joint_rotations"].items()) {
      // Row-major matrix, or a rotation vector for hand-written files.
      p.joint_rotations[static_cast<std::size_t>(index(joint_or_throw(name)))] =
          value.size() == 3 ? rotation_from_vector(vec3_from_json(value)) : mat3_from_json(value);
    }
  }
  p.validate();
  return p;
}

json targets_to_json(const std::vector<AnatomicalTarget>& targets) {
  json out = json::array();
  for (const auto& t : targets) {
    json joints = json::array();
    for (JointId j : t.defining_joints) joints.push_back(joint_name(j));
    out.push_back({{"name", target_name(t.name)}, {"joints", joints}, {"offset", to_json(t.offset)}});
  }
  return out;
}

std::vector<AnatomicalTarget> targets_from_json(const json& j) {
  std::vector<AnatomicalTarget> out;
  for (const auto& t : j) {
    const std::string where = "targets";
    check_keys(t, {"name", "joints", "offset"}, where);
    AnatomicalTarget a;
    a.name = target_or_throw(required<std::string>(t, "name", where));
    for (const auto& n : required<std::vector<std::string>>(t, "joints", where)) {
      a.defining_joints.push_back(joint_or_throw(n));
    }
    if (a.defining_joints.empty() || a.defining_joints.size() > 2) {
      schema_error(where, "a target needs one or two defining joints");
    }
    if (t.contains("offset")) a.offset = vec3_from_json(t["offset"]);
    out.push_back(std::move(a));
  }
  return out;
}

json noise_to_json(const NoiseConfig& n) {
  return {{"pixel_sigma", n.pixel_sigma},
          {"dropout_prob", n.dropout_prob},
          {"outlier_prob", n.outlier_prob},
          {"outlier_magnitude", n.outlier_magnitude},
          {"occluded_offset", n.occluded_offset},
          {"seed", n.seed}};
}

NoiseConfig noise_from_json(const json& j, NoiseConfig n) {
  const std::string where = "noise";
  check_keys(j, {"pixel_sigma", "dropout_prob", "outlier_prob", "outlier_magnitude",
                 "occluded_offset", "seed"}, where);
  read_field(j, "pixel_sigma", n.pixel_sigma, where);
  read_field(j, "dropout_prob", n.dropout_prob, where);
  read_field(j, "outlier_prob", n.outlier_prob, where);
  read_field(j, "outlier_magnitude", n.outlier_magnitude, where);
  read_field(j, "occluded_offset", n.occluded_offset, where);
  read_field(j, "seed", n.seed, where);
  n.validate();
  return n;
}

json scene_to_json(const Scene& scene) {
  json obstacles = json::array();
  for (const auto& o : scene.obstacles) {
    obstacles.push_back({{"id", o.id}, {"shape", primitive_to_json(o.shape)}});
  }
  return {{"format_version", kFormatVersion},
          {"preset", scene.preset},
          {"seed", scene.seed},
          {"cameras", rig_to_json(scene.cameras)["cameras"]},
          {"bed", primitive_to_json(scene.bed)},
          {"patient", body_params_to_json(scene.patient)},
          {"obstacles", obstacles},
          {"carm", carm_to_json(scene.carm)},
          {"carm_pose", step_to_json(scene.carm_pose)},
          {"protocol", protocol_to_json(scene.protocol)},
          {"targets", targets_to_json(scene.targets)}};
}

Scene scene_from_json(const json& doc) {
  const std::string where = "scene";
  check_keys(doc, {"format_version", "preset", "seed", "cameras", "bed", "patient", "obstacles",
                   "carm", "carm_pose", "protocol", "targets"}, where);
  check_version(doc, where);
  Scene scene = generate_scene(required<std::uint64_t>(doc, "seed", where),
                               required<std::string>(doc, "preset", where));
  if (doc.contains("cameras")) {
    scene.cameras = rig_from_json({{"format_version", kFormatVersion}, {"cameras", doc["cameras"]}});
  }
  if (doc.contains("bed")) {
    const Primitive bed = primitive_from_json(doc["bed"]);
    if (!std::holds_alternative<Box>(bed)) schema_error(where, "bed must be a box");
    scene.bed = std::get<Box>(bed);
  }
  if (doc.contains("patient")) scene.patient = body_params_from_json(doc["patient"]);
  if (doc.contains("obstacles")) {
    scene.obstacles.clear();
    for (const auto& o : doc["obstacles"]) {
      check_keys(o, {"id", "shape"}, where + ".obstacles");
      scene.obstacles.push_back({required<std::string>(o, "id", where),
                                 primitive_from_json(required<json>(o, "shape", where))});
    }
  }
  if (doc.contains("carm")) scene.carm = carm_from_json(doc["carm"], scene.carm);
  if (doc.contains("carm_pose")) scene.carm_pose = step_from_json(doc["carm_pose"]);
  if (doc.contains("protocol")) scene.protocol = protocol_from_json(doc["protocol"]);
  if (doc.contains("targets")) scene.targets = targets_from_json(doc["targets"]);
  return scene;
}

json script_to_json(const MotionScript& script) {
  json events = json::array();
  for (const auto& te : script.events) {
    json e = std::visit(
        [](const auto& ev) -> json {
          using T = std::decay_t<decltype(ev)>;
          if constexpr (std::is_same_v<T, MoveJoint>) {
            return {{"type", "move_joint"}, {"joint", joint_name(ev.joint)}, {"delta", to_json(ev.delta)}};
          } else if constexpr (std::is_same_v<T, Occlude>) {
            return {{"type", "occlude"}, {"camera", ev.camera_id},
                    {"shape", primitive_to_json(ev.shape)}, {"duration", ev.duration}};
          } else if constexpr (std::is_same_v<T, MoveObstacle>) {
            return {{"type", "move_obstacle"}, {"id", ev.id}, {"delta", to_json(ev.delta)}};
          } else {
            return {{"type", "noise"}, {"noise", noise_to_json(ev.noise)}};
          }
        },
        te.event);
    e["t"] = te.timestep;
    events.push_back(std::move(e));
  }
  return {{"format_version", kFormatVersion}, {"events", events}};
}

MotionScript script_from_json(const json& doc) {
  const std::string where = "script";
  check_keys(doc, {"format_version", "events"}, where);
  check_version(doc, where);
  MotionScript script;
  for (const auto& e : required<json>(doc, "events", where)) {
    const std::string ew = where + ".events";
    require_object(e, ew);
    const auto type = required<std::string>(e, "type", ew);
    TimedEvent te;
    te.timestep = required<int>(e, "t", ew);
    if (type == "move_joint") {
      check_keys(e, {"t", "type", "joint", "delta"}, ew);
      te.event = MoveJoint{joint_or_throw(required<std::string>(e, "joint", ew)),
                           vec3_from_json(required<json>(e, "delta", ew))};
    } else if (type == "occlude") {
      check_keys(e, {"t", "type", "camera", "shape", "duration"}, ew);
      te.event = Occlude{required<std::string>(e, "camera", ew),
                         primitive_from_json(required<json>(e, "shape", ew)),
                         required<int>(e, "duration", ew)};
    } else if (type == "move_obstacle") {
      check_keys(e, {"t", "type", "id", "delta"}, ew);
      te.event = MoveObstacle{required<std::string>(e, "id", ew),
                              vec3_from_json(required<json>(e, "delta", ew))};
    } else if (type == "noise") {
      check_keys(e, {"t", "type", "noise"}, ew);
      te.event = NoiseChange{noise_from_json(required<json>(e, "noise", ew))};
    } else {
      schema_error(ew, "unknown event type '" + type + "'");
    }
    script.events.push_back(std::move(te));
  }
  script.validate();
  return script;
}

json markers_to_json(const std::vector<MarkerSet>& sets) {
  json cams = json::array();
  for (const auto& s : sets) {
    json corr = json::array();
    for (const auto& c : s.correspondences) {
      corr.push_back({{"room", to_json(c.point_room)}, {"pixel", {c.point_pixel.x(), c.point_pixel.y()}}});
    }
    cams.push_back({{"id", s.camera_id}, {"intrinsics", intrinsics_to_json(s.intrinsics)},
                    {"markers", corr}});
  }
  return {{"format_version", kFormatVersion}, {"cameras", cams}};
}

std::vector<MarkerSet> markers_from_json(const json& doc) {
  const std::string where = "markers";
  check_keys(doc, {"format_version", "cameras"}, where);
  check_version(doc, where);
  std::vector<MarkerSet> out;
  for (const auto& c : required<json>(doc, "cameras", where)) {
    check_keys(c, {"id", "intrinsics", "markers"}, where + ".cameras");
    MarkerSet s;
    s.camera_id = required<std::string>(c, "id", where);
    s.intrinsics = intrinsics_from_json(required<json>(c, "intrinsics", where), where);
    for (const auto& m : required<json>(c, "markers", where)) {
      check_keys(m, {"room", "pixel"}, where + ".markers");
      const auto px = required<std::vector<double>>(m, "pixel", where);
      if (px.size() != 2) schema_error(where, "pixel needs 2 numbers");
      s.correspondences.push_back({vec3_from_json(required<json>(m, "room", where)), {px[0], px[1]}});
    }
    out.push_back(std::move(s));
  }
  return out;
}

RunConfig run_config_from_json(const json& doc, RunConfig c) {
  const std::string where = "config";
  check_keys(doc, {"format_version", "scene", "noise", "triangulation", "temporal", "bodyfit",
                   "positioning", "vtr", "output_dir", "verbosity"}, where);
  if (doc.contains("format_version")) check_version(doc, where);
  if (doc.contains("scene")) {
    const json& s = doc["scene"];
    check_keys(s, {"preset", "seed", "file", "script"}, where + ".scene");
    read_field(s, "preset", c.preset, where + ".scene");
    read_field(s, "seed", c.seed, where + ".scene");
    read_field(s, "file", c.scene_file, where + ".scene");
    read_field(s, "script", c.script_file, where + ".scene");
  }
  auto& pos = c.positioning;
  if (doc.contains("noise")) pos.noise = noise_from_json(doc["noise"], pos.noise);
  if (doc.contains("triangulation")) {
    const json& t = doc["triangulation"];
    const std::string w = where + ".triangulation";
    check_keys(t, {"huber_delta", "max_iterations", "max_condition", "error_floor", "tie_tolerance"}, w);
    read_field(t, "huber_delta", pos.triangulation.huber_delta, w);
    read_field(t, "max_iterations", pos.triangulation.max_iterations, w);
    read_field(t, "max_condition", pos.triangulation.max_condition, w);
    read_field(t, "error_floor", pos.triangulation.error_floor, w);
    read_field(t, "tie_tolerance", pos.triangulation.tie_tolerance, w);
    if (!(pos.triangulation.huber_delta > 0) || pos.triangulation.max_iterations <= 0 ||
        !(pos.triangulation.error_floor > 0)) {
      schema_error(w, "values must be positive");
    }
    if (!(pos.triangulation.max_condition > 1) || !(pos.triangulation.tie_tolerance >= 0)) {
      schema_error(w, "max_condition > 1 and tie_tolerance >= 0 required");
    }
  }
  if (doc.contains("temporal")) {
    const json& t = doc["temporal"];
    const std::string w = where + ".temporal";
    check_keys(t, {"window_size", "stat_size", "alpha", "rho_min", "vis_min", "reproj_max",
                   "motion_min"}, w);
    read_field(t, "window_size", pos.drift.window_size, w);
    read_field(t, "stat_size", pos.drift.stat_size, w);
    read_field(t, "alpha", pos.drift.alpha, w);
    read_field(t, "rho_min", pos.thresholds.rho_min, w);
    read_field(t, "vis_min", pos.thresholds.vis_min, w);
    read_field(t, "reproj_max", pos.thresholds.reproj_max, w);
    read_field(t, "motion_min", pos.thresholds.motion_min, w);
    pos.drift.validate();
    pos.thresholds.validate();
  }
  if (doc.contains("bodyfit")) {
    const json& b = doc["bodyfit"];
    const std::string w = where + ".bodyfit";
    check_keys(b, {"confidence_floor", "min_joints", "rotation_prior", "max_iterations"}, w);
    read_field(b, "confidence_floor", pos.fit.confidence_floor, w);
    read_field(b, "min_joints", pos.fit.min_joints, w);
    read_field(b, "rotation_prior", pos.fit.rotation_prior, w);
    read_field(b, "max_iterations", pos.fit.max_iterations, w);
    if (pos.fit.min_joints < 3 || pos.fit.min_joints > kNumJoints || pos.fit.max_iterations < 1) {
      schema_error(w, "min_joints must lie in [3, 15] and max_iterations be positive");
    }
    if (!(pos.fit.confidence_floor >= 0 && pos.fit.confidence_floor <= 1) || !(pos.fit.rotation_prior >= 0)) {
      schema_error(w, "confidence_floor in [0, 1] and rotation_prior >= 0 required");
    }
  }
  if (doc.contains("positioning")) {
    const json& p = doc["positioning"];
    const std::string w = where + ".positioning";
    check_keys(p, {"timesteps", "targets"}, w);
    read_field(p, "timesteps", pos.timesteps, w);
    if (pos.timesteps < 1) schema_error(w, "timesteps must be positive");
    if (p.contains("targets")) {
      pos.targets.clear();
      for (const auto& n : p["targets"].get<std::vector<std::string>>()) {
        pos.targets.push_back(target_or_throw(n));
      }
    }
  }
  if (doc.contains("vtr")) {
    const json& v = doc["vtr"];
    const std::string w = where + ".vtr";
    check_keys(v, {"grid", "subtraction_delta", "depth_stride", "render"}, w);
    if (v.contains("grid")) c.vtr.config.grid = grid_from_json(v["grid"]);
    read_field(v, "subtraction_delta", c.vtr.config.subtraction_delta, w);
    read_field(v, "depth_stride", c.vtr.config.depth_stride, w);
    read_field(v, "render", c.vtr.render, w);
    if (!(c.vtr.config.subtraction_delta >= 0) || c.vtr.config.depth_stride < 1) {
      schema_error(w, "subtraction_delta >= 0 and depth_stride >= 1 required");
    }
  }
  read_field(doc, "output_dir", c.output_dir, where);
  read_field(doc, "verbosity", c.verbosity, where);
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const auto& pos = c.positioning;
  json targets = json::array();
  for (TargetName t : pos.targets) targets.push_back(target_name(t));
  return {{"format_version", kFormatVersion},
          {"scene", {{"preset", c.preset}, {"seed", c.seed}, {"file", c.scene_file}, {"script", c.script_file}}},
          {"noise", noise_to_json(pos.noise)},
          {"triangulation",
           {{"huber_delta", pos.triangulation.huber_delta},
            {"max_iterations", pos.triangulation.max_iterations},
            {"max_condition", pos.triangulation.max_condition},
            {"error_floor", pos.triangulation.error_floor},
            {"tie_tolerance", pos.triangulation.tie_tolerance}}},
          {"temporal",
           {{"window_size", pos.drift.window_size},
            {"stat_size", pos.drift.stat_size},
            {"alpha", pos.drift.alpha},
            {"rho_min", pos.thresholds.rho_min},
            {"vis_min", pos.thresholds.vis_min},
            {"reproj_max", pos.thresholds.reproj_max},
            {"motion_min", pos.thresholds.motion_min}}},
          {"bodyfit",
           {{"confidence_floor", pos.fit.confidence_floor},
            {"min_joints", pos.fit.min_joints},
            {"rotation_prior", pos.fit.rotation_prior},
            {"max_iterations", pos.fit.max_iterations}}},
          {"positioning", {{"timesteps", pos.timesteps}, {"targets", targets}}},
          {"vtr",
           {{"grid", grid_to_json(c.vtr.config.grid)},
            {"subtraction_delta", c.vtr.config.subtraction_delta},
            {"depth_stride", c.vtr.config.depth_stride},
            {"render", c.vtr.render}}},
          {"output_dir", c.output_dir},
          {"verbosity", c.verbosity}};
}

}  // namespace carm::io
