#include "carm/vtr.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace carm {

std::optional<std::int64_t> VoxelGridConfig::index_of(const Vec3& point) const {
  const Vec3 rel = (point - origin).cwiseQuotient(cell_size());
  const double fx = std::floor(rel.x());
  const double fy = std::floor(rel.y());
  const double fz = std::floor(rel.z());
  if (!(fx >= 0 && fy >= 0 && fz >= 0 && fx < resolution.x() && fy < resolution.y() &&
        fz < resolution.z())) {
    return std::nullopt;
  }
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  return ix + resolution.x() * (iy + static_cast<std::int64_t>(resolution.y()) * iz);
}

Vec3i VoxelGridConfig::cell_of(std::int64_t index) const {
  const std::int64_t nx = resolution.x();
  const std::int64_t ny = resolution.y();
  return {static_cast<int>(index % nx), static_cast<int>((index / nx) % ny),
          static_cast<int>(index / (nx * ny))};
}

Vec3 VoxelGridConfig::center_of(std::int64_t index) const {
  return origin + (cell_of(index).cast<double>() + Vec3::Constant(0.5)).cwiseProduct(cell_size());
}

void VoxelGridConfig::validate() const {
  if ((resolution.array() <= 0).any() || (extent.array() <= 0.0).any() || !origin.allFinite()) {
    throw Error(Errc::InvalidArgument, "voxel grid needs positive extent and resolution");
  }
}

VoxelGrid::VoxelGrid(VoxelGridConfig config) : config_(std::move(config)) {
  config_.validate();
  bits_.assign(static_cast<std::size_t>((config_.cell_count() + 63) / 64), 0);
}

void VoxelGrid::insert(const Vec3& point) {
  if (const auto idx = config_.index_of(point)) {
    bits_[static_cast<std::size_t>(*idx >> 6)] |= std::uint64_t{1} << (*idx & 63);
  }
}

void VoxelGrid::insert(const PointCloud& cloud) {
  for (const auto& p : cloud.points) insert(p);
}

std::vector<std::int64_t> VoxelGrid::occupied_cells() const {
  std::vector<std::int64_t> out;
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    std::uint64_t word = bits_[w];
    while (word != 0) {
      const int bit = std::countr_zero(word);
      out.push_back(static_cast<std::int64_t>(w * 64 + static_cast<std::size_t>(bit)));
      word &= word - 1;
    }
  }
  return out;
}

void CArmModel::validate(const VoxelGridConfig& grid) const {
  if (!(arc_radius > 0 && arc_span > 0 && arc_span <= 360 && tube_cross_section > 0 &&
        (detector_box.array() > 0).all() && (source_box.array() > 0).all() &&
        surface_sample_spacing > 0)) {
    throw Error(Errc::InvalidArgument, "C-arm dimensions must be positive");
  }
  if (surface_sample_spacing > 0.5 * grid.cell_size().minCoeff() + 1e-12) {
    throw Error(Errc::InvalidArgument, "C-arm sample spacing exceeds half the smallest voxel edge");
  }
}

Mat3 TrajectoryStep::rotation() const { return axis_angle<double>(Vec3::UnitX(), deg2rad(angle_deg)); }

Vec3 TrajectoryStep::to_room(const Vec3& local) const {
  return isocenter + translation + rotation() * local;
}

void TrajectoryProtocol::validate() const {
  if (steps.size() < 2) throw Error(Errc::InvalidArgument, "protocol needs at least two steps");
  bool increasing = true;
  bool decreasing = true;
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i].angle_deg < steps[i - 1].angle_deg) increasing = false;
    if (steps[i].angle_deg > steps[i - 1].angle_deg) decreasing = false;
  }
  if (!increasing && !decreasing) {
    throw Error(Errc::InvalidArgument, "protocol angles must be monotone");
  }
}

TrajectoryProtocol sweep_protocol(std::string name, const Vec3& isocenter, double start_deg,
                                  double end_deg, int steps) {
  TrajectoryProtocol p;
  p.name = std::move(name);
  for (int i = 0; i < steps; ++i) {
    const double f = steps > 1 ? static_cast<double>(i) / (steps - 1) : 0.0;
    TrajectoryStep s;
    s.isocenter = isocenter;
    s.angle_deg = start_deg + f * (end_deg - start_deg);
    p.steps.push_back(s);
  }
  return p;
}

TrajectoryProtocol head_scan_protocol(const Vec3& isocenter) {
  return sweep_protocol("head-scan", isocenter, -100.0, 100.0, 60);
}

namespace {

// Local arc direction; the arc lies in the y-z plane, phi = 0 points to -y.
Vec3 arc_dir(double phi) { return {0.0, -std::cos(phi), std::sin(phi)}; }
Vec3 arc_tangent(double phi) { return {0.0, std::sin(phi), std::cos(phi)}; }

OrientedBox housing(const CArmModel& m, const Vec3& dims, double phi, const TrajectoryStep& pose) {
  // Outer radial face flush with the outside of the tube.
  const double outer = m.arc_radius + 0.5 * m.tube_cross_section;
  const Mat3 rot = pose.rotation();
  OrientedBox box;
  box.center = pose.to_room((outer - 0.5 * dims.z()) * arc_dir(phi));
  box.axes << rot * arc_tangent(phi), rot * Vec3::UnitX(), rot * arc_dir(phi);
  box.half_extents = 0.5 * dims;
  return box;
}

// Sample counts come from the unposed edge lengths so that posing the box
// never changes how many points it gets.
void sample_face(const Vec3& corner, const Vec3& edge_a, double len_a, const Vec3& edge_b,
                 double len_b, double spacing, Points3& out) {
  const int na = static_cast<int>(std::ceil(len_a / spacing)) + 1;
  const int nb = static_cast<int>(std::ceil(len_b / spacing)) + 1;
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      out.push_back(corner + edge_a * (static_cast<double>(i) / (na - 1)) +
                    edge_b * (static_cast<double>(j) / (nb - 1)));
    }
  }
}

void sample_box(const OrientedBox& box, double spacing, Points3& out) {
  const Vec3 len = 2.0 * box.half_extents;
  const Vec3 a = box.axes.col(0) * len.x();
  const Vec3 b = box.axes.col(1) * len.y();
  const Vec3 c = box.axes.col(2) * len.z();
  const Vec3 lo = box.center - 0.5 * (a + b + c);
  sample_face(lo, a, len.x(), b, len.y(), spacing, out);
  sample_face(lo + c, a, len.x(), b, len.y(), spacing, out);
  sample_face(lo, a, len.x(), c, len.z(), spacing, out);
  sample_face(lo + b, a, len.x(), c, len.z(), spacing, out);
  sample_face(lo, b, len.y(), c, len.z(), spacing, out);
  sample_face(lo + a, b, len.y(), c, len.z(), spacing, out);
}

}  // namespace

CArmGeometry carm_geometry(const CArmModel& model, const TrajectoryStep& pose) {
  const double half = 0.5 * deg2rad(model.arc_span);
  CArmGeometry g;
  g.isocenter = pose.isocenter + pose.translation;
  g.rotation = pose.rotation();
  g.arc_radius = model.arc_radius;
  g.tube_radius = 0.5 * model.tube_cross_section;
  g.start_angle = -half;
  g.end_angle = half;
  g.detector = housing(model, model.detector_box, half, pose);
  g.source = housing(model, model.source_box, -half, pose);
  return g;
}

double carm_signed_distance(const CArmGeometry& g, const Vec3& point) {
  const Vec3 p = g.rotation.transpose() * (point - g.isocenter);
  double phi = std::atan2(p.z(), -p.y());
  phi = std::clamp(phi, g.start_angle, g.end_angle);
  const double tube = (p - g.arc_radius * arc_dir(phi)).norm() - g.tube_radius;
  return std::min({tube, signed_distance(point, g.detector), signed_distance(point, g.source)});
}

std::vector<Primitive> carm_primitives(const CArmModel& model, const TrajectoryStep& pose) {
  const CArmGeometry g = carm_geometry(model, pose);
  std::vector<Primitive> out;
  const int segments = std::max(1, static_cast<int>(std::ceil(model.arc_span / 5.0)));
  for (int i = 0; i < segments; ++i) {
    const double a0 = g.start_angle + (g.end_angle - g.start_angle) * i / segments;
    const double a1 = g.start_angle + (g.end_angle - g.start_angle) * (i + 1) / segments;
    out.emplace_back(Capsule{pose.to_room(g.arc_radius * arc_dir(a0)),
                             pose.to_room(g.arc_radius * arc_dir(a1)), g.tube_radius});
  }
  out.emplace_back(g.detector);
  out.emplace_back(g.source);
  return out;
}

PointCloud sample_carm(const CArmModel& model, const TrajectoryStep& pose) {
  const CArmGeometry g = carm_geometry(model, pose);
  const double s = model.surface_sample_spacing;
  PointCloud cloud;
  const double span = g.end_angle - g.start_angle;
  const int n_phi =
      static_cast<int>(std::ceil(span * (g.arc_radius + g.tube_radius) / s)) + 1;
  const int n_psi = std::max(3, static_cast<int>(std::ceil(2.0 * kPi * g.tube_radius / s)));
  for (int i = 0; i < n_phi; ++i) {
    const double phi = g.start_angle + span * i / (n_phi - 1);
    const Vec3 u = arc_dir(phi);
    for (int j = 0; j < n_psi; ++j) {
      const double psi = 2.0 * kPi * j / n_psi;
      const Vec3 local = g.arc_radius * u +
                         g.tube_radius * (std::cos(psi) * u + std::sin(psi) * Vec3::UnitX());
      cloud.points.push_back(pose.to_room(local));
    }
  }
  sample_box(g.detector, s, cloud.points);
  sample_box(g.source, s, cloud.points);
  return cloud;
}

PointCloud fuse_clouds(const std::vector<std::pair<Camera, DepthImage>>& frames,
                       const VoxelGridConfig& grid, int stride) {
  PointCloud fused;
  for (const auto& [camera, depth] : frames) {
    const PointCloud part = unproject_depth(camera, depth, stride);
    for (const auto& p : part.points) {
      if (grid.contains(p)) fused.points.push_back(p);
    }
  }
  return fused;
}

namespace {

struct CellHash {
  std::size_t operator()(const Vec3i& c) const {
    return static_cast<std::size_t>(c.x()) * 73856093U ^ static_cast<std::size_t>(c.y()) * 19349663U ^
           static_cast<std::size_t>(c.z()) * 83492791U;
  }
};
struct CellEq {
  bool operator()(const Vec3i& a, const Vec3i& b) const { return a == b; }
};

}  // namespace

PointCloud subtract_carm(const PointCloud& room, const PointCloud& carm, double delta) {
  if (carm.empty() || delta <= 0.0) return room;
  // Bucket C-arm points by delta-sized cells: any point within delta lies in
  // one of the 27 neighboring buckets.
  auto cell = [delta](const Vec3& p) {
    return Vec3i(static_cast<int>(std::floor(p.x() / delta)),
                 static_cast<int>(std::floor(p.y() / delta)),
                 static_cast<int>(std::floor(p.z() / delta)));
  };
  std::unordered_map<Vec3i, std::vector<Vec3>, CellHash, CellEq> buckets;
  buckets.reserve(carm.size());
  for (const auto& p : carm.points) buckets[cell(p)].push_back(p);

  const double d2 = delta * delta;
  PointCloud out;
  out.points.reserve(room.size());
  for (const auto& p : room.points) {
    const Vec3i c = cell(p);
    bool near = false;
    for (int dx = -1; dx <= 1 && !near; ++dx) {
      for (int dy = -1; dy <= 1 && !near; ++dy) {
        for (int dz = -1; dz <= 1 && !near; ++dz) {
          const auto it = buckets.find(c + Vec3i(dx, dy, dz));
          if (it == buckets.end()) continue;
          near = std::any_of(it->second.begin(), it->second.end(),
                             [&](const Vec3& q) { return (q - p).squaredNorm() <= d2; });
        }
      }
    }
    if (!near) out.points.push_back(p);
  }
  return out;
}

CollisionReport detect_collisions(const PointCloud& residual_room, const CArmModel& model,
                                  const TrajectoryProtocol& protocol,
                                  const VoxelGridConfig& grid) {
  const auto start = std::chrono::steady_clock::now();
  VoxelGrid room(grid);
  room.insert(residual_room);

  CollisionReport report;
  std::vector<std::int64_t> hits;
  for (std::size_t s = 0; s < protocol.steps.size(); ++s) {
    const PointCloud arm = sample_carm(model, protocol.steps[s]);
    hits.clear();
    for (const auto& p : arm.points) {
      const auto idx = grid.index_of(p);
      if (idx && room.occupied(*idx)) hits.push_back(*idx);
    }
    if (hits.empty()) continue;
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    CollisionRegion region;
    region.step = static_cast<int>(s);
    region.voxels = hits;
    for (auto idx : hits) region.centers.push_back(grid.center_of(idx));
    report.regions.push_back(std::move(region));
  }
  report.collided = !report.regions.empty();
  report.elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

VtrResult run_vtr(const VtrInput& input, const VtrConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.grid.validate();
  input.carm.validate(config.grid);
  input.protocol.validate();

  VtrResult result;
  const PointCloud fused = fuse_clouds(input.frames, config.grid, config.depth_stride);
  result.fused_points = fused.size();
  result.residual =
      subtract_carm(fused, sample_carm(input.carm, input.current_pose), config.subtraction_delta);
  result.report = detect_collisions(result.residual, input.carm, input.protocol, config.grid);
  result.report.elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void render_snapshot(const std::string& path, const PointCloud& room, const CArmModel& model,
                     const TrajectoryProtocol& protocol, const CollisionReport& report,
                     const VoxelGridConfig& grid, int width, int height) {
  std::vector<unsigned char> image(static_cast<std::size_t>(width) * height * 3, 255);
  // Oblique view: yaw 35 degrees, pitch 30 degrees, orthographic.
  const Mat3 view = (axis_angle<double>(Vec3::UnitX(), deg2rad(-60.0)) *
                     axis_angle<double>(Vec3::UnitZ(), deg2rad(35.0)));
  const Vec3 center = grid.origin + 0.5 * grid.extent;
  const double scale = 0.9 * std::min(width, height) / grid.extent.norm();
  auto plot = [&](const Vec3& p, unsigned char r, unsigned char g, unsigned char b, int radius) {
    const Vec3 v = view * (p - center);
    const int u = static_cast<int>(width / 2 + scale * v.x());
    const int w = static_cast<int>(height / 2 - scale * v.y());
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        const int x = u + dx;
        const int y = w + dy;
        if (x < 0 || y < 0 || x >= width || y >= height) continue;
        auto* px = &image[(static_cast<std::size_t>(y) * width + x) * 3];
        px[0] = r;
        px[1] = g;
        px[2] = b;
      }
    }
  };
  const std::size_t room_stride = std::max<std::size_t>(1, room.size() / 200000);
  for (std::size_t i = 0; i < room.size(); i += room_stride) plot(room.points[i], 160, 160, 160, 0);
  if (!report.regions.empty() && !protocol.steps.empty()) {
    const auto step = static_cast<std::size_t>(report.regions.front().step);
    const PointCloud arm = sample_carm(model, protocol.steps.at(step));
    for (std::size_t i = 0; i < arm.size(); i += 4) plot(arm.points[i], 60, 90, 220, 0);
  }
  for (const auto& region : report.regions) {
    for (const auto& c : region.centers) plot(c, 220, 30, 30, 2);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write snapshot " + path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
}

}  // namespace carm
