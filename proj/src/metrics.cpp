#include "carm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

namespace carm::metrics {

Mpjpe2d mpjpe_2d(std::span<const PoseFrame<2>> frames, std::optional<double> mm_per_pixel) {
  Mpjpe2d out;
  out.pixels = mpjpe<2>(frames);
  if (mm_per_pixel) out.millimeters = out.pixels * *mm_per_pixel;
  return out;
}

std::vector<CellKey> collision_cells(const CollisionReport& report) {
  std::vector<CellKey> cells;
  for (const auto& region : report.regions) {
    for (auto v : region.voxels) cells.emplace_back(region.step, v);
  }
  return cells;
}

std::vector<CellKey> reference_collision_cells(const PointCloud& room, const CArmModel& model,
                                               const TrajectoryProtocol& protocol,
                                               const VoxelGridConfig& grid) {
  auto cells_of = [&](const PointCloud& cloud) {
    std::vector<std::int64_t> cells;
    for (const auto& p : cloud.points) {
      if (const auto c = grid.index_of(p)) cells.push_back(*c);
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
  };
  const auto room_cells = cells_of(room);
  std::vector<CellKey> out;
  for (std::size_t s = 0; s < protocol.steps.size(); ++s) {
    const auto arm_cells = cells_of(sample_carm(model, protocol.steps[s]));
    std::vector<std::int64_t> both;
    std::set_intersection(room_cells.begin(), room_cells.end(), arm_cells.begin(), arm_cells.end(),
                          std::back_inserter(both));
    for (auto c : both) out.emplace_back(static_cast<int>(s), c);
  }
  return out;
}

namespace {

std::size_t intersection_size(std::vector<CellKey>& a, std::vector<CellKey>& b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

}  // namespace

double cdp(std::vector<CellKey> predicted, std::vector<CellKey> oracle) {
  const std::size_t common = intersection_size(predicted, oracle);
  if (predicted.empty()) return oracle.empty() ? 100.0 : 0.0;
  return 100.0 * static_cast<double>(common) / static_cast<double>(predicted.size());
}

double collision_recall(std::vector<CellKey> predicted, std::vector<CellKey> oracle) {
  const std::size_t common = intersection_size(predicted, oracle);
  if (oracle.empty()) return 100.0;
  return 100.0 * static_cast<double>(common) / static_cast<double>(oracle.size());
}

double timing(const std::function<void()>& run) {
  const Stopwatch watch;
  run();
  return watch.seconds();
}

TimingStats timing_stats(std::span<const double> seconds) {
  TimingStats s;
  if (seconds.empty()) return s;
  for (double x : seconds) s.mean += x;
  s.mean /= static_cast<double>(seconds.size());
  if (seconds.size() > 1) {
    double var = 0.0;
    for (double x : seconds) var += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(seconds.size() - 1));
  }
  s.coefficient_of_variation = s.mean > 0 ? s.stddev / s.mean : 0.0;
  return s;
}

}  // namespace carm::metrics
