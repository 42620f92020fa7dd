#pragma once

#include "carm/geometry.hpp"
#include "carm/primitives.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace carm {

/// Regular occupancy grid over the C-arm workspace crop.
struct VoxelGridConfig {
  Vec3 origin{-1500.0, -1000.0, 0.0};
  Vec3 extent{3000.0, 2000.0, 2000.0};
  Vec3i resolution{100, 100, 100};

  [[nodiscard]] Vec3 cell_size() const { return extent.cwiseQuotient(resolution.cast<double>()); }
  [[nodiscard]] std::int64_t cell_count() const {
    return static_cast<std::int64_t>(resolution.x()) * resolution.y() * resolution.z();
  }
  /// Linear cell index (x fastest) or nullopt outside the crop.
  [[nodiscard]] std::optional<std::int64_t> index_of(const Vec3& point) const;
  [[nodiscard]] Vec3i cell_of(std::int64_t index) const;
  [[nodiscard]] Vec3 center_of(std::int64_t index) const;
  [[nodiscard]] bool contains(const Vec3& point) const { return index_of(point).has_value(); }

  void validate() const;
};

class VoxelGrid {
 public:
  explicit VoxelGrid(VoxelGridConfig config);

  /// Marks the cell containing `point`; points outside the crop are ignored.
  void insert(const Vec3& point);
  void insert(const PointCloud& cloud);
  [[nodiscard]] bool occupied(std::int64_t index) const {
    return (bits_[static_cast<std::size_t>(index >> 6)] >> (index & 63)) & 1U;
  }
  [[nodiscard]] std::vector<std::int64_t> occupied_cells() const;
  [[nodiscard]] const VoxelGridConfig& config() const { return config_; }

 private:
  VoxelGridConfig config_;
  std::vector<std::uint64_t> bits_;
};

struct CArmModel {
  double arc_radius = 900.0;           // mm, isocenter to tube centerline
  double arc_span = 190.0;             // degrees
  double tube_cross_section = 100.0;   // tube diameter, mm
  Vec3 detector_box{400.0, 400.0, 450.0};  // tangent, axial, radial extents
  Vec3 source_box{300.0, 300.0, 350.0};
  double surface_sample_spacing = 10.0;

  void validate(const VoxelGridConfig& grid) const;
};

/// C-arm pose: propeller rotation about the room x-axis through the isocenter.
struct TrajectoryStep {
  Vec3 isocenter{0.0, 0.0, 1000.0};
  double angle_deg = 0.0;
  Vec3 translation = Vec3::Zero();

  [[nodiscard]] Mat3 rotation() const;
  [[nodiscard]] Vec3 to_room(const Vec3& local) const;
};

struct TrajectoryProtocol {
  std::string name;
  std::vector<TrajectoryStep> steps;

  void validate() const;
};

/// Evenly spaced propeller sweep around a fixed isocenter.
TrajectoryProtocol sweep_protocol(std::string name, const Vec3& isocenter, double start_deg,
                                  double end_deg, int steps);

/// Default head-scan: 60 steps from -100 to +100 degrees.
TrajectoryProtocol head_scan_protocol(const Vec3& isocenter);

/// Analytic pieces of the posed C-arm: the tube arc is returned as its
/// centerline (center, radius, angles) and the two housings as boxes.
struct CArmGeometry {
  Vec3 isocenter;
  Mat3 rotation;  // local -> room; local x is the propeller axis
  double arc_radius;
  double tube_radius;
  double start_angle;  // radians, in the local y-z plane
  double end_angle;
  OrientedBox detector;
  OrientedBox source;
};

CArmGeometry carm_geometry(const CArmModel& model, const TrajectoryStep& pose);

/// Distance from a point to the posed C-arm solid (negative inside).
double carm_signed_distance(const CArmGeometry& geometry, const Vec3& point);

/// Ray-traceable approximation (arc as a capsule chain) for depth rendering.
std::vector<Primitive> carm_primitives(const CArmModel& model, const TrajectoryStep& pose);

/// Surface samples of the posed C-arm, at most `surface_sample_spacing` apart.
PointCloud sample_carm(const CArmModel& model, const TrajectoryStep& pose);

/// Concatenated unprojections of all frames, cropped to the grid.
PointCloud fuse_clouds(const std::vector<std::pair<Camera, DepthImage>>& frames,
                       const VoxelGridConfig& grid, int stride = 1);

/// Room points farther than `delta` from every C-arm point.
PointCloud subtract_carm(const PointCloud& room, const PointCloud& carm, double delta = 25.0);

struct CollisionRegion {
  int step = 0;
  std::vector<std::int64_t> voxels;  // ascending
  std::vector<Vec3> centers;
};

struct CollisionReport {
  bool collided = false;
  std::vector<CollisionRegion> regions;  // ascending step
  double elapsed = 0.0;                  // seconds
};

CollisionReport detect_collisions(const PointCloud& residual_room, const CArmModel& model,
                                  const TrajectoryProtocol& protocol,
                                  const VoxelGridConfig& grid);

struct VtrConfig {
  VoxelGridConfig grid;
  double subtraction_delta = 25.0;
  int depth_stride = 1;
};

struct VtrInput {
  std::vector<std::pair<Camera, DepthImage>> frames;
  CArmModel carm;
  TrajectoryStep current_pose;
  TrajectoryProtocol protocol;
};

struct VtrResult {
  CollisionReport report;
  PointCloud residual;
  std::size_t fused_points = 0;
};

/// fuse -> subtract the C-arm at its current pose -> sweep collision check.
VtrResult run_vtr(const VtrInput& input, const VtrConfig& config);

/// Writes an oblique orthographic PPM snapshot: room points grey, C-arm at
/// the first colliding step blue, collision cells red.
void render_snapshot(const std::string& path, const PointCloud& room, const CArmModel& model,
                     const TrajectoryProtocol& protocol, const CollisionReport& report,
                     const VoxelGridConfig& grid, int width = 800, int height = 600);

}  // namespace carm
