#pragma once

#include "carm/triangulation.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace carm {

/// Articulated 15-joint skeleton rooted at the neck. Template-local frame:
/// +x superior, +y patient left, +z anterior (supine: facing the ceiling).
struct SkeletonTemplate {
  std::array<std::optional<JointId>, kNumJoints> parent{};
  std::array<Vec3, kNumJoints> rest_direction{};  // unit, bone ending at the joint
  std::array<double, kNumJoints> bone_length{};   // mm, 0 for the root
  std::vector<JointId> order;                     // parents before children

  void validate() const;
};

/// Supine layout with arms alongside the body and palms down.
SkeletonTemplate default_template();

inline constexpr double kMinBoneScale = 0.5;
inline constexpr double kMaxBoneScale = 2.0;

struct BodyParams {
  Vec3 root_position = Vec3::Zero();
  Mat3 root_orientation = Mat3::Identity();
  std::array<double, kNumJoints> bone_scales;
  std::array<Mat3, kNumJoints> joint_rotations;

  BodyParams() {
    bone_scales.fill(1.0);
    joint_rotations.fill(Mat3::Identity());
  }
  void validate() const;
};

/// child = parent + scale * length * (rotation chain * rest direction).
JointPositions forward_kinematics(const SkeletonTemplate& skeleton, const BodyParams& params);

struct FitOptions {
  double confidence_floor = 0.2;  // on rho * v
  int min_joints = 8;
  double rotation_prior = 1.0;  // residual weight per radian, mm-equivalent
  int max_iterations = 200;
};

struct FitResult {
  BodyParams params;
  double residual_rms = 0.0;  // mm over the joints used
  int joints_used = 0;
  int iterations = 0;
};

/// Confidence-weighted least-squares skeleton fit from a rigid alignment of
/// the template. Throws InsufficientKeypoints or NoConvergence.
FitResult fit_body(std::span<const ScoredKeypoint3D> keypoints, const SkeletonTemplate& skeleton,
                   const FitOptions& options = {});

enum class TargetName {
  HeadTop,
  RightRadialArtery,
  LeftRadialArtery,
  RightFemoralArtery,
  LeftFemoralArtery,
};
std::string_view target_name(TargetName t);
std::optional<TargetName> target_from_name(std::string_view name);

struct AnatomicalTarget {
  TargetName name{};
  std::vector<JointId> defining_joints;  // origin joint first
  Vec3 offset = Vec3::Zero();            // mm in the local frame
};

/// Simulator conventions for the five supported targets.
std::vector<AnatomicalTarget> default_targets();
const AnatomicalTarget& find_target(std::span<const AnatomicalTarget> targets, TargetName name);

/// Local frame: origin at the first defining joint; with a second joint the
/// x-axis runs from the second to the first, z is as close to the body's
/// anterior axis as possible. A single joint uses the root orientation.
Vec3 locate_target(const BodyParams& params, const SkeletonTemplate& skeleton,
                   const AnatomicalTarget& target);

/// Same frame construction from explicit joint positions.
Vec3 locate_target(const JointPositions& joints, const Mat3& body_orientation,
                   const AnatomicalTarget& target);

/// Horizontal-plane (x-y) distance in mm.
double positioning_error(const Vec3& predicted, const Vec3& ground_truth);

inline constexpr double kPositioningSuccessMm = 25.0;

}  // namespace carm
