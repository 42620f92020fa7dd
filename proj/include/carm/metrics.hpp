#pragma once

#include "carm/observation.hpp"
#include "carm/vtr.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace carm::metrics {

template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

/// Predicted and ground-truth joints of one frame; absent joints are nullopt.
template <int Dim>
struct PoseFrame {
  std::array<std::optional<Point<Dim>>, kNumJoints> predicted{};
  std::array<std::optional<Point<Dim>>, kNumJoints> ground_truth{};
};

/// Mean Euclidean error over matched pairs. Throws NoMatches.
template <int Dim>
double mpjpe(std::span<const Point<Dim>> predicted, std::span<const Point<Dim>> ground_truth) {
  if (predicted.empty() || predicted.size() != ground_truth.size()) {
    throw Error(Errc::NoMatches, "mpjpe needs equally sized, non-empty sets");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += (predicted[i] - ground_truth[i]).norm();
  return sum / static_cast<double>(predicted.size());
}

template <int Dim>
double mpjpe(std::span<const PoseFrame<Dim>> frames) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& f : frames) {
    for (int j = 0; j < kNumJoints; ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (!f.predicted[k] || !f.ground_truth[k]) continue;
      sum += (*f.predicted[k] - *f.ground_truth[k]).norm();
      ++count;
    }
  }
  if (count == 0) throw Error(Errc::NoMatches, "no matched joints");
  return sum / static_cast<double>(count);
}

struct Mpjpe2d {
  double pixels = 0.0;
  std::optional<double> millimeters;
};

/// 2D MPJPE; `mm_per_pixel` converts when the caller supplies a scene scale.
Mpjpe2d mpjpe_2d(std::span<const PoseFrame<2>> frames,
                 std::optional<double> mm_per_pixel = std::nullopt);

/// Shoulder-to-hip distance of the ground truth (mean over sides present).
template <int Dim>
double torso_length(const PoseFrame<Dim>& frame) {
  double sum = 0.0;
  int sides = 0;
  for (auto [sh, hip] : {std::pair{JointId::RightShoulder, JointId::RightHip},
                         std::pair{JointId::LeftShoulder, JointId::LeftHip}}) {
    const auto& a = frame.ground_truth[static_cast<std::size_t>(index(sh))];
    const auto& b = frame.ground_truth[static_cast<std::size_t>(index(hip))];
    if (a && b) {
      sum += (*a - *b).norm();
      ++sides;
    }
  }
  if (sides == 0) throw Error(Errc::MissingNormalizerJoints, "frame lacks shoulder/hip truth");
  return sum / sides;
}

/// Percentage of joints with error < fraction * torso, computed per joint
/// and averaged over joints that have matches.
template <int Dim>
double pck(std::span<const PoseFrame<Dim>> frames, double fraction) {
  std::array<int, kNumJoints> hits{};
  std::array<int, kNumJoints> total{};
  for (const auto& f : frames) {
    const double threshold = fraction * torso_length(f);
    for (int j = 0; j < kNumJoints; ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (!f.predicted[k] || !f.ground_truth[k]) continue;
      ++total[k];
      if ((*f.predicted[k] - *f.ground_truth[k]).norm() < threshold) ++hits[k];
    }
  }
  double sum = 0.0;
  int joints = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto k = static_cast<std::size_t>(j);
    if (total[k] == 0) continue;
    sum += static_cast<double>(hits[k]) / total[k];
    ++joints;
  }
  if (joints == 0) throw Error(Errc::NoMatches, "no matched joints");
  return 100.0 * sum / joints;
}

/// Collision cell identity: (trajectory step, voxel index).
using CellKey = std::pair<int, std::int64_t>;

std::vector<CellKey> collision_cells(const CollisionReport& report);

/// Reference collision cells: per step, the sorted intersection of the room's
/// occupied cells with the sampled C-arm's cells. Sorted, unique.
std::vector<CellKey> reference_collision_cells(const PointCloud& room, const CArmModel& model,
                                               const TrajectoryProtocol& protocol,
                                               const VoxelGridConfig& grid);

/// |predicted ∩ oracle| / |predicted| in percent; 100 when both are empty.
double cdp(std::vector<CellKey> predicted, std::vector<CellKey> oracle);

/// |predicted ∩ oracle| / |oracle| in percent; 100 when the oracle is empty.
double collision_recall(std::vector<CellKey> predicted, std::vector<CellKey> oracle);

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Wall-clock seconds of one call.
double timing(const std::function<void()>& run);

struct TimingStats {
  double mean = 0.0;
  double stddev = 0.0;
  double coefficient_of_variation = 0.0;
};

TimingStats timing_stats(std::span<const double> seconds);

}  // namespace carm::metrics
