#pragma once

#include "carm/bodyfit.hpp"
#include "carm/pipeline.hpp"
#include "carm/scenesim.hpp"
#include "carm/temporal.hpp"
#include "carm/triangulation.hpp"
#include "carm/vtr.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace carm::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

// Whole-file helpers; failures throw Error(ParseError / InvalidArgument).
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);

json to_json(const Vec3& v);
Vec3 vec3_from_json(const json& j);
json to_json_row_major(const Mat3& m);
Mat3 mat3_from_json(const json& j);

// Camera rig.
json rig_to_json(const CameraRig& rig);
CameraRig rig_from_json(const json& doc);

// Shapes used by scene and script files.
json primitive_to_json(const Primitive& p);
Primitive primitive_from_json(const json& j);

// Line-oriented records: one JSON object per line.
void write_observations(std::ostream& out, const std::vector<FrameObservations>& frames);
std::vector<FrameObservations> read_observations(std::istream& in);

json keypoint_to_json(const ScoredKeypoint3D& kp, bool consolidated);
ScoredKeypoint3D keypoint_from_json(const json& j, bool* consolidated = nullptr);
void write_keypoints(std::ostream& out, const std::vector<ScoredKeypoint3D>& keypoints,
                     bool consolidated);
std::vector<ScoredKeypoint3D> read_keypoints(std::istream& in);

json drift_event_to_json(const DriftEvent& e);

// Depth: "# carm-depth v1 <width> <height>" then one comma-separated row per
// image line, values in mm, 0 = no return.
void write_depth_csv(std::ostream& out, const DepthImage& depth);
DepthImage read_depth_csv(std::istream& in);

// Point clouds: ASCII PLY with float x y z, or CSV "x,y,z" lines.
void write_ply(std::ostream& out, const PointCloud& cloud);
PointCloud read_ply(std::istream& in);
void write_points_csv(std::ostream& out, const PointCloud& cloud);
PointCloud read_points_csv(std::istream& in);
/// Dispatches on the extension (.ply or .csv).
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

json protocol_to_json(const TrajectoryProtocol& protocol);
TrajectoryProtocol protocol_from_json(const json& j);
json grid_to_json(const VoxelGridConfig& grid);
VoxelGridConfig grid_from_json(const json& j);
json collision_report_to_json(const CollisionReport& report, const VoxelGridConfig& grid);

json body_params_to_json(const BodyParams& params);
BodyParams body_params_from_json(const json& j);
json targets_to_json(const std::vector<AnatomicalTarget>& targets);
std::vector<AnatomicalTarget> targets_from_json(const json& j);

json noise_to_json(const NoiseConfig& noise);
NoiseConfig noise_from_json(const json& j, NoiseConfig base = {});

/// Scene file: preset + seed regenerate the scene; optional blocks
/// (cameras, protocol, obstacles, targets) override the generated values.
json scene_to_json(const Scene& scene);
Scene scene_from_json(const json& doc);

json script_to_json(const MotionScript& script);
MotionScript script_from_json(const json& doc);

// Calibration input: per camera, intrinsics and marker correspondences.
struct MarkerSet {
  std::string camera_id;
  Intrinsics<double> intrinsics;
  std::vector<Correspondence> correspondences;
};
json markers_to_json(const std::vector<MarkerSet>& sets);
std::vector<MarkerSet> markers_from_json(const json& doc);

struct VtrParams {
  VtrConfig config;
  bool render = false;
};

struct RunConfig {
  std::string preset = "position-s1-c1";
  std::uint64_t seed = 0;
  std::string scene_file;   // optional; overrides preset/seed
  std::string script_file;  // optional; default occlusion script otherwise
  PositioningConfig positioning;
  VtrParams vtr;
  std::string output_dir = "carm-out";
  int verbosity = 1;
};

/// Schema-checked parse; unknown keys and wrong types throw InvalidArgument.
RunConfig run_config_from_json(const json& doc, RunConfig base = {});
json run_config_to_json(const RunConfig& config);

}  // namespace carm::io
