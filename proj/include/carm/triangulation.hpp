#pragma once

#include "carm/observation.hpp"

#include <span>
#include <string>
#include <vector>

namespace carm {

/// One camera's 2D observation of a single joint.
struct JointView {
  const Camera* camera = nullptr;
  Observation2D observation;
};

struct Candidate3D {
  Vec3 position = Vec3::Zero();
  std::vector<std::string> subset;  // sorted camera ids, size >= 2
  double mean_reproj_error = 0.0;
};

struct ScoreVector {
  double confidence = 0.0;  // mean rho over the winning subset
  double visibility = 0.0;  // mean v over the winning subset
  double inv_err = 0.0;     // 1 / max(mean reprojection error, floor), px^-1
};

struct ScoredKeypoint3D {
  JointId joint{};
  int timestep = 0;
  Vec3 position = Vec3::Zero();
  ScoreVector score;
  std::vector<std::string> winning_subset;
};

struct TriangulationOptions {
  double huber_delta = 2.0;
  int max_iterations = 100;
  double max_condition = 1e8;
  double error_floor = 0.1;
  double tie_tolerance = 1e-9;
};

/// Linear (SVD) initialization followed by Huber-robust refinement over the
/// given views. Throws NearParallelRays or NoConvergence.
Candidate3D triangulate_subset(std::span<const JointView> views,
                               const TriangulationOptions& options = {});

struct SkippedSubset {
  std::vector<std::string> subset;
  std::string reason;
};

struct CandidateSet {
  std::vector<Candidate3D> candidates;
  std::vector<SkippedSubset> skipped;
};

/// One candidate per subset (size >= 2) of the views with v = 1.
/// Throws InsufficientViews with fewer than two usable views.
CandidateSet enumerate_candidates(std::span<const JointView> views,
                                  const TriangulationOptions& options = {});

/// Sum of rho * reprojection error over every usable view.
double weighted_cost(const Vec3& position, std::span<const JointView> views);

/// Outer selection: the candidate with least confidence-weighted cost over
/// all observing cameras, with deterministic tie-breaking.
ScoredKeypoint3D select_best(std::span<const Candidate3D> candidates,
                             std::span<const JointView> views, JointId joint, int timestep,
                             const TriangulationOptions& options = {});

/// Strict ordering used by select_best: true when `a` should win over `b`.
bool candidate_precedes(const Candidate3D& a, double cost_a, const Candidate3D& b, double cost_b,
                        double tie_tolerance);

struct FrameTriangulation {
  std::vector<ScoredKeypoint3D> keypoints;
  std::vector<std::string> log;  // skipped subsets and untriangulatable joints
};

/// Triangulates every joint seen by at least two cameras at one timestep.
FrameTriangulation triangulate_frame(const CameraRig& rig,
                                     std::span<const FrameObservations> frames, int timestep,
                                     const TriangulationOptions& options = {});

}  // namespace carm
