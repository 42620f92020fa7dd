#pragma once

#include "carm/bodyfit.hpp"
#include "carm/metrics.hpp"
#include "carm/scenesim.hpp"
#include "carm/temporal.hpp"
#include "carm/triangulation.hpp"
#include "carm/vtr.hpp"

#include <optional>
#include <string>
#include <vector>

namespace carm {

struct PositioningConfig {
  int timesteps = 40;
  NoiseConfig noise{2.0, 0.5, 0.0, 0.0, 40.0, 7};
  TriangulationOptions triangulation;
  DriftConfig drift;
  ReliabilityThresholds thresholds;
  FitOptions fit;
  std::vector<TargetName> targets{TargetName::HeadTop, TargetName::RightRadialArtery};
};

struct TargetResult {
  TargetName name{};
  Vec3 predicted = Vec3::Zero();
  Vec3 ground_truth = Vec3::Zero();
  double error = 0.0;  // horizontal plane, mm
  bool success = false;
};

struct FrameResult {
  int timestep = 0;
  std::vector<FrameObservations> observations;
  std::vector<ScoredKeypoint3D> keypoints;      // triangulated this frame
  std::vector<ScoredKeypoint3D> consolidated;  // one per tracked joint
  std::optional<FitResult> fit;
  std::vector<TargetResult> targets;
  GroundTruth truth;
  std::vector<std::string> log;
};

struct PositioningRun {
  std::string preset;
  std::vector<FrameResult> frames;
  std::vector<DriftEvent> drift_events;

  /// Frames in which every requested target was located within 25 mm.
  [[nodiscard]] int successful_frames() const;
  [[nodiscard]] int failed_frames() const;
  /// Target results of the last frame with a successful fit: the position the
  /// C-arm would be driven to at the end of the run. Empty if no frame fit.
  [[nodiscard]] std::vector<TargetResult> final_targets() const;
};

/// detect -> triangulate -> consolidate -> fit -> locate, once per timestep.
PositioningRun run_positioning(const Scene& scene, const MotionScript& script,
                               const PositioningConfig& config);

/// 2D detections against exact projections of the ground truth.
std::vector<metrics::PoseFrame<2>> detection_frames(const Scene& scene, const PositioningRun& run);

/// Consolidated 3D joints against ground truth.
std::vector<metrics::PoseFrame<3>> keypoint_frames(const PositioningRun& run);

/// Renders every camera and packages the scene for run_vtr.
VtrInput make_vtr_input(const Scene& scene);

}  // namespace carm
