#pragma once

#include "carm/bodyfit.hpp"
#include "carm/observation.hpp"
#include "carm/vtr.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace carm {

struct SceneObstacle {
  std::string id;
  Primitive shape;
};

struct Scene {
  std::string preset;
  std::uint64_t seed = 0;
  CameraRig cameras;
  Box bed;
  bool floor = true;  // slab with its top face at z = 0
  SkeletonTemplate skeleton;
  BodyParams patient;
  std::array<double, kNumJoints> limb_radius{};  // capsule radius of the bone ending at a joint
  std::vector<SceneObstacle> obstacles;
  Points3 markers;
  CArmModel carm;
  TrajectoryStep carm_pose;
  TrajectoryProtocol protocol;
  std::vector<AnatomicalTarget> targets;
};

struct MoveJoint {
  JointId joint{};
  Vec3 delta = Vec3::Zero();  // applied to the joint and its descendants
};
struct Occlude {
  std::string camera_id;
  Primitive shape;
  int duration = 1;  // timesteps
};
struct MoveObstacle {
  std::string id;
  Vec3 delta = Vec3::Zero();
};
struct NoiseChange {
  NoiseConfig noise;
};
using ScriptEvent = std::variant<MoveJoint, Occlude, MoveObstacle, NoiseChange>;

struct TimedEvent {
  int timestep = 0;
  ScriptEvent event;
};

struct MotionScript {
  std::vector<TimedEvent> events;  // non-decreasing timesteps

  void validate() const;
};

/// Names accepted by generate_scene: "lab", the ten VTR scenarios and the
/// nine positioning configurations.
std::vector<std::string> vtr_presets();
std::vector<std::string> positioning_presets();
std::vector<std::string> all_presets();

/// Deterministic scene for (seed, preset). Throws UnknownPreset.
Scene generate_scene(std::uint64_t seed, const std::string& preset);

/// Occlusion script attached to a positioning preset (empty for others).
MotionScript default_script(const Scene& scene, int timesteps);

/// The three-camera ceiling rig around the table.
CameraRig default_rig();

struct GroundTruth {
  JointPositions joints;
  Mat3 body_orientation = Mat3::Identity();
  std::vector<std::pair<TargetName, Vec3>> targets;
  std::vector<SceneObstacle> obstacles;
};

/// Scene state after all script events with timestep <= t.
GroundTruth ground_truth(const Scene& scene, int timestep, const MotionScript& script);

/// Primitives that may block a camera's view at timestep t.
std::vector<Primitive> occluders_at(const Scene& scene, const MotionScript& script, int timestep,
                                    const std::string& camera_id);

NoiseConfig noise_at(const MotionScript& script, int timestep, const NoiseConfig& base);

/// Everything visible to the depth sensors (floor, bed, patient, obstacles,
/// C-arm at its current pose).
std::vector<Primitive> scene_primitives(const Scene& scene);

/// Per-pixel z-depth (mm) of the nearest surface; 0 where nothing is hit.
DepthImage render_depth(const std::vector<Primitive>& primitives, const Camera& camera);
DepthImage render_depth(const Scene& scene, const Camera& camera);

/// Marker correspondences for one camera with optional Gaussian pixel noise.
std::vector<Correspondence> marker_correspondences(const Scene& scene, const Camera& camera,
                                                   double pixel_sigma, std::uint64_t seed);

}  // namespace carm
