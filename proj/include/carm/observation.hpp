#pragma once

#include "carm/geometry.hpp"
#include "carm/primitives.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace carm {

enum class JointId : std::uint8_t {
  RightAnkle = 0,
  RightKnee,
  RightHip,
  LeftHip,
  LeftKnee,
  LeftAnkle,
  RightWrist,
  RightElbow,
  RightShoulder,
  LeftShoulder,
  LeftElbow,
  LeftWrist,
  Neck,
  HeadTop,
  Nose,
};

inline constexpr int kNumJoints = 15;

inline constexpr std::array<JointId, kNumJoints> kAllJoints = {
    JointId::RightAnkle,    JointId::RightKnee,    JointId::RightHip,   JointId::LeftHip,
    JointId::LeftKnee,      JointId::LeftAnkle,    JointId::RightWrist, JointId::RightElbow,
    JointId::RightShoulder, JointId::LeftShoulder, JointId::LeftElbow,  JointId::LeftWrist,
    JointId::Neck,          JointId::HeadTop,      JointId::Nose,
};

constexpr int index(JointId j) { return static_cast<int>(j); }
std::string_view joint_name(JointId j);
std::optional<JointId> joint_from_name(std::string_view name);

using JointPositions = std::array<Vec3, kNumJoints>;

struct Observation2D {
  JointId joint{};
  Vec2 pixel = Vec2::Zero();
  double confidence = 0.0;  // rho in [0, 1]
  int visibility = 0;       // 0 or 1
};

/// Keypoints seen by one camera at one timestep; at most one entry per joint.
class FrameObservations {
 public:
  FrameObservations() = default;
  FrameObservations(std::string camera_id, int timestep)
      : camera_id_(std::move(camera_id)), timestep_(timestep) {}

  [[nodiscard]] const std::string& camera_id() const { return camera_id_; }
  [[nodiscard]] int timestep() const { return timestep_; }

  /// Inserts or replaces the observation for `obs.joint`.
  void set(const Observation2D& obs);
  [[nodiscard]] const Observation2D* find(JointId joint) const;
  [[nodiscard]] const std::vector<Observation2D>& observations() const { return observations_; }
  [[nodiscard]] std::size_t size() const { return observations_.size(); }

 private:
  std::string camera_id_;
  int timestep_ = 0;
  std::vector<Observation2D> observations_;  // sorted by joint
};

struct NoiseConfig {
  double pixel_sigma = 0.0;
  double dropout_prob = 0.0;
  double outlier_prob = 0.0;
  double outlier_magnitude = 0.0;
  /// Displacement (px) of emitted occluded joints: the detector guesses.
  double occluded_offset = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Score {
  double confidence;
  int visibility;
};

inline constexpr double kConfidenceScale = 10.0;  // pixels
inline constexpr double kOcclusionFactor = 0.2;

Score score_model(const Vec2& exact_pixel, const Vec2& emitted_pixel, bool occluded, bool in_frame);

/// True when the segment from the camera center to `point` is blocked.
bool is_occluded(const Camera& camera, const Vec3& point, const std::vector<Primitive>& occluders);

/// Oracle detector: exact projections perturbed per `noise`.
FrameObservations synth_detect(const JointPositions& joints, const Camera& camera,
                               const std::vector<Primitive>& occluders, const NoiseConfig& noise,
                               int timestep = 0);

/// Stateless mixing of a base seed with stream indices.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Swappable 2D keypoint detector.
class KeypointDetector {
 public:
  virtual ~KeypointDetector() = default;
  virtual FrameObservations detect(const Camera& camera, int timestep) = 0;
};

}  // namespace carm
