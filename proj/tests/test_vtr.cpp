#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "carm/metrics.hpp"
#include "carm/scenesim.hpp"
#include "carm/vtr.hpp"
#include "support.hpp"
#include "vtr_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace carm;

namespace {

std::vector<metrics::CellKey> cells_of(const CollisionReport& r) { return metrics::collision_cells(r); }

/// Solid cube sampled strictly inside, 5 mm apart.
PointCloud solid_cube(const Vec3& lo, double edge) {
  PointCloud c;
  for (double x = 2.5; x < edge; x += 5.0) {
    for (double y = 2.5; y < edge; y += 5.0) {
      for (double z = 2.5; z < edge; z += 5.0) c.points.push_back(lo + Vec3(x, y, z));
    }
  }
  return c;
}

/// Smallest signed distance from the posed C-arm over a 5 mm lattice of the cube.
double cube_clearance(const CArmModel& model, const TrajectoryStep& step, const Vec3& lo, double edge) {
  const CArmGeometry g = carm_geometry(model, step);
  double best = std::numeric_limits<double>::infinity();
  for (double x = 0; x <= edge; x += 5.0) {
    for (double y = 0; y <= edge; y += 5.0) {
      for (double z = 0; z <= edge; z += 5.0) {
        best = std::min(best, carm_signed_distance(g, lo + Vec3(x, y, z)));
      }
    }
  }
  return best;
}

/// Distance from a point to the nearest of the three C-arm component surfaces.
double component_surface_distance(const CArmGeometry& g, const Vec3& point) {
  const Vec3 p = g.rotation.transpose() * (point - g.isocenter);
  const double phi = std::clamp(std::atan2(p.z(), -p.y()), g.start_angle, g.end_angle);
  const Vec3 on_arc(0.0, -g.arc_radius * std::cos(phi), g.arc_radius * std::sin(phi));
  const double tube = std::abs((p - on_arc).norm() - g.tube_radius);
  return std::min({tube, std::abs(signed_distance(point, g.detector)),
                   std::abs(signed_distance(point, g.source))});
}

}  // namespace

TEST_CASE("voxel grid") {
  const VoxelGridConfig grid;
  CHECK(grid.cell_size().isApprox(Vec3(30, 20, 20)));
  CHECK(grid.cell_count() == 1000000);
  CHECK(grid.index_of(grid.origin) == 0);
  CHECK_FALSE(grid.index_of(grid.origin + grid.extent).has_value());
  CHECK_FALSE(grid.index_of(grid.origin - Vec3(1e-9, 0, 0)).has_value());
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = test::uniform_in_box(rng, grid.origin, grid.origin + grid.extent);
    const auto idx = grid.index_of(p);
    REQUIRE(idx.has_value());
    CHECK(*idx == test::oracle_cell(grid, p));
    CHECK(((grid.center_of(*idx) - p).cwiseAbs().array() <= 0.5 * grid.cell_size().array() + 1e-9).all());
    CHECK(grid.index_of(grid.center_of(*idx)) == idx);
  }
  VoxelGrid occ(grid);
  occ.insert(Vec3(0, 0, 1000));
  occ.insert(Vec3(1, 1, 1001));  // same cell
  occ.insert(Vec3(5000, 0, 0));  // outside
  CHECK(occ.occupied_cells().size() == 1);
  VoxelGridConfig bad;
  bad.resolution = {0, 10, 10};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("C-arm model and protocols") {
  const VoxelGridConfig grid;
  CArmModel m;
  CHECK_NOTHROW(m.validate(grid));
  m.surface_sample_spacing = 11.0;  // above half of the 20 mm edge
  CHECK_THROWS_AS(m.validate(grid), Error);

  const TrajectoryProtocol head = head_scan_protocol(Vec3(0, 0, 1000));
  CHECK(head.steps.size() == 60);
  CHECK(head.steps.front().angle_deg == -100.0);
  CHECK(head.steps.back().angle_deg == 100.0);
  CHECK_NOTHROW(head.validate());
  TrajectoryProtocol zigzag = head;
  std::swap(zigzag.steps[3], zigzag.steps[4]);
  CHECK_THROWS_AS(zigzag.validate(), Error);
  TrajectoryProtocol single;
  single.steps.resize(1);
  CHECK_THROWS_AS(single.validate(), Error);
}

TEST_CASE("carm_signed_distance: analytic values") {
  const CArmModel m;
  TrajectoryStep pose;
  const CArmGeometry g = carm_geometry(m, pose);
  // Nearest solid from the isocenter is the detector's inner face.
  CHECK(carm_signed_distance(g, pose.isocenter) == doctest::Approx(500.0));
  // Tube centerline at the bottom of the C (-y direction).
  CHECK(carm_signed_distance(g, pose.isocenter + Vec3(0, -900, 0)) == doctest::Approx(-50.0));
  CHECK(carm_signed_distance(g, pose.isocenter + Vec3(0, -1000, 0)) == doctest::Approx(50.0));
  CHECK(carm_signed_distance(g, pose.isocenter + Vec3(300, -900, 0)) == doctest::Approx(250.0));
}

TEST_CASE("sample_carm") {
  const CArmModel m;
  TrajectoryStep pose;
  const PointCloud cloud = sample_carm(m, pose);

  SUBCASE("points lie on the analytic surface") {
    const CArmGeometry g = carm_geometry(m, pose);
    double worst = 0.0;
    for (const auto& p : cloud.points) worst = std::max(worst, component_surface_distance(g, p));
    CHECK(worst < 0.5 * m.surface_sample_spacing);
  }
  SUBCASE("surface is covered at the sample spacing") {
    // Random points on the outer tube surface have a sample within spacing.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> phi(-deg2rad(95.0), deg2rad(95.0));
    std::uniform_real_distribution<double> psi(-kPi, kPi);
    for (int i = 0; i < 300; ++i) {
      const double a = phi(rng);
      const double b = psi(rng);
      const Vec3 u(0.0, -std::cos(a), std::sin(a));
      const Vec3 q = pose.isocenter + 900.0 * u + 50.0 * (std::cos(b) * u + std::sin(b) * Vec3::UnitX());
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& p : cloud.points) nearest = std::min(nearest, (p - q).norm());
      CHECK(nearest <= m.surface_sample_spacing);
    }
  }
  SUBCASE("rotated pose rotates the cloud point for point") {
    TrajectoryStep turned = pose;
    turned.angle_deg = 180.0;
    const PointCloud rotated = sample_carm(m, turned);
    REQUIRE(rotated.size() == cloud.size());
    const Mat3 r = axis_angle<double>(Vec3::UnitX(), kPi);
    double worst = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3 expect = pose.isocenter + r * (cloud.points[i] - pose.isocenter);
      worst = std::max(worst, (rotated.points[i] - expect).norm());
    }
    CHECK(worst < 1e-9);
  }
  SUBCASE("halving the spacing quadruples the count") {
    CArmModel fine = m;
    fine.surface_sample_spacing = 0.5 * m.surface_sample_spacing;
    const double ratio = static_cast<double>(sample_carm(fine, pose).size()) / cloud.size();
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.2));
  }
}

TEST_CASE("fuse_clouds") {
  const VoxelGridConfig grid;
  SUBCASE("no depth returns an empty cloud") {
    std::mt19937_64 rng(1);
    const Camera cam = test::camera_around(rng, "c", Vec3(0, 0, 900), 2500);
    const DepthImage empty(cam.intrinsics.image_width, cam.intrinsics.image_height);
    CHECK(fuse_clouds({{cam, empty}}, grid).empty());
  }
  SUBCASE("box seen from three views covers its surface cells") {
    // Opposite octants see all six faces; faces sit mid-cell.
    const Box box{Vec3(-205, -147, 713), Vec3(195, 253, 1093)};
    const Vec3 c = box.center();
    const auto k = test::vga_intrinsics();
    std::vector<std::pair<Camera, DepthImage>> frames;
    const std::array<Vec3, 3> offsets{Vec3(1200, 1100, 1000), Vec3(-1200, -1100, -1000),
                                      Vec3(-1300, 1200, 900)};
    for (const Vec3& offset : offsets) {
      const Camera cam = look_at("c", k, Vec3(c + offset), c);
      frames.emplace_back(cam, render_depth({Primitive{box}}, cam));
    }
    const PointCloud fused = fuse_clouds(frames, grid);
    VoxelGrid occ(grid);
    occ.insert(fused);
    const auto got = occ.occupied_cells();
    const std::set<std::int64_t> have(got.begin(), got.end());

    // Analytic voxelization: cells that meet the closed box but are not
    // strictly inside it.
    int surface = 0;
    int covered = 0;
    int spurious = 0;
    for (std::int64_t idx = 0; idx < grid.cell_count(); ++idx) {
      const Vec3 lo = grid.center_of(idx) - 0.5 * grid.cell_size();
      const Vec3 hi = lo + grid.cell_size();
      const bool meets = (lo.array() <= box.max_corner.array()).all() &&
                         (hi.array() >= box.min_corner.array()).all();
      const bool inside = (lo.array() > box.min_corner.array()).all() &&
                          (hi.array() < box.max_corner.array()).all();
      const bool on_surface = meets && !inside;
      if (on_surface) {
        ++surface;
        covered += have.count(idx) != 0U ? 1 : 0;
      } else {
        spurious += have.count(idx) != 0U ? 1 : 0;
      }
    }
    MESSAGE("surface cells " << surface << ", covered " << covered);
    CHECK(covered >= 0.95 * surface);
    CHECK(spurious == 0);
  }
  SUBCASE("duplicate views voxelize identically") {
    std::mt19937_64 rng(2);
    const Sphere ball{Vec3(0, 0, 900), 150};
    const Camera cam = test::camera_around(rng, "c", ball.center, 2000);
    const DepthImage d = render_depth({Primitive{ball}}, cam);
    const PointCloud once = fuse_clouds({{cam, d}}, grid);
    const PointCloud twice = fuse_clouds({{cam, d}, {cam, d}}, grid);
    CHECK(twice.size() == 2 * once.size());
    VoxelGrid a(grid);
    VoxelGrid b(grid);
    a.insert(once);
    b.insert(twice);
    CHECK(a.occupied_cells() == b.occupied_cells());
  }
  SUBCASE("points outside the crop are dropped") {
    VoxelGridConfig small;
    small.origin = Vec3(-100, -100, 950);
    small.extent = Vec3(200, 200, 50);
    small.resolution = {10, 10, 5};
    std::mt19937_64 rng(4);
    const Sphere ball{Vec3(0, 0, 900), 150};
    const Camera cam = test::camera_around(rng, "c", ball.center, 2000);
    const PointCloud fused = fuse_clouds({{cam, render_depth({Primitive{ball}}, cam)}}, small);
    CHECK_FALSE(fused.empty());
    for (const auto& p : fused.points) CHECK(small.contains(p));
  }
}

TEST_CASE("subtract_carm") {
  const CArmModel m;
  const TrajectoryStep pose;
  const PointCloud arm = sample_carm(m, pose);

  SUBCASE("the C-arm itself is removed") { CHECK(subtract_carm(arm, arm).empty()); }
  SUBCASE("distant obstacles are kept") {
    const PointCloud far = solid_cube(Vec3(600, -100, 900), 200);
    CHECK(subtract_carm(far, arm).size() == far.size());
  }
  SUBCASE("noisy self-observation") {
    int removed = 0;
    int total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> g(0.0, 5.0);
      PointCloud seen;
      for (const auto& p : arm.points) {
        const double a = g(rng);
        const double b = g(rng);
        const double c = g(rng);
        seen.points.push_back(p + Vec3(a, b, c));
      }
      removed += static_cast<int>(seen.size() - subtract_carm(seen, arm).size());
      total += static_cast<int>(seen.size());
    }
    CHECK(removed >= 0.99 * total);
  }
  SUBCASE("matches the all-pairs distance rule") {
    std::mt19937_64 rng(6);
    PointCloud room;
    for (int i = 0; i < 2000; ++i) {
      const auto& anchor = arm.points[rng() % arm.size()];
      room.points.push_back(anchor + test::uniform_in_box(rng, Vec3(-60, -60, -60), Vec3(60, 60, 60)));
    }
    PointCloud expect;
    for (const auto& p : room.points) {
      const bool near = std::any_of(arm.points.begin(), arm.points.end(),
                                    [&](const Vec3& q) { return (q - p).norm() <= 25.0; });
      if (!near) expect.points.push_back(p);
    }
    const PointCloud got = subtract_carm(room, arm, 25.0);
    CHECK(got.points == expect.points);
  }
}

TEST_CASE("detect_collisions: analytic cube on the swept path") {
  // 20 mm cells so the 200 mm cube is exactly 10 x 10 x 10 cells.
  VoxelGridConfig grid;
  grid.resolution = {150, 100, 100};
  const CArmModel m;
  const TrajectoryProtocol protocol = head_scan_protocol(Vec3(0, 0, 1000));
  const double edge = 200.0;

  SUBCASE("collides at exactly the intersecting steps") {
    const Vec3 lo(-100, 800, 900);  // on the +y side, reached only at large angles
    const CollisionReport r = detect_collisions(solid_cube(lo, edge), m, protocol, grid);
    std::set<int> hit;
    for (const auto& region : r.regions) {
      hit.insert(region.step);
      for (const auto& c : region.centers) {
        CHECK(((c - lo).array() >= 0).all());
        CHECK(((c - lo).array() <= edge).all());
      }
    }
    int clear = 0;
    int deep = 0;
    for (int s = 0; s < static_cast<int>(protocol.steps.size()); ++s) {
      const double d = cube_clearance(m, protocol.steps[static_cast<std::size_t>(s)], lo, edge);
      CAPTURE(s);
      CAPTURE(d);
      if (d > 5.0) {
        ++clear;
        CHECK(hit.count(s) == 0);
      } else if (d < -2.0 * m.surface_sample_spacing) {
        ++deep;
        CHECK(hit.count(s) == 1);
      }
    }
    CHECK(clear > 0);
    CHECK(deep > 0);
    CHECK(clear + deep >= static_cast<int>(protocol.steps.size()) - 4);
  }
  SUBCASE("outside the swept annulus nothing collides") {
    const CollisionReport r =
        detect_collisions(solid_cube(Vec3(500, 800, 900), edge), m, protocol, grid);
    CHECK_FALSE(r.collided);
    CHECK(r.regions.empty());
  }
  SUBCASE("empty room") {
    const CollisionReport r = detect_collisions(PointCloud{}, m, protocol, grid);
    CHECK_FALSE(r.collided);
    CHECK(r.regions.empty());
    CHECK(r.elapsed >= 0.0);
  }
}

TEST_CASE("detect_collisions: pairwise oracle and properties") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const test::SmallVtrScene s = test::random_small_scene(rng);
    CAPTURE(trial);
    const CollisionReport r = detect_collisions(s.room, s.model, s.protocol, s.grid);
    const auto got = cells_of(r);
    CHECK(got == test::pairwise_collisions(s.room, s.model, s.protocol, s.grid));
    CHECK(got == test::sorted_set_collisions(s.room, s.model, s.protocol, s.grid));
    CHECK(r.collided == !r.regions.empty());
    CHECK(std::is_sorted(got.begin(), got.end()));
    for (const auto& region : r.regions) CHECK(region.voxels.size() == region.centers.size());

    // Shift scene, trajectory and grid together.
    const Vec3 t = test::uniform_in_box(rng, Vec3(-3000, -3000, -3000), Vec3(3000, 3000, 3000));
    test::SmallVtrScene moved = s;
    moved.grid.origin += t;
    for (auto& p : moved.room.points) p += t;
    for (auto& step : moved.protocol.steps) step.isocenter += t;
    CHECK(cells_of(detect_collisions(moved.room, moved.model, moved.protocol, moved.grid)) == got);

    // More room points never remove a collision.
    test::SmallVtrScene more = s;
    for (int i = 0; i < 300; ++i) {
      more.room.points.push_back(test::uniform_in_box(rng, s.grid.origin, s.grid.origin + s.grid.extent));
    }
    const auto superset = cells_of(detect_collisions(more.room, more.model, more.protocol, more.grid));
    CHECK(std::includes(superset.begin(), superset.end(), got.begin(), got.end()));
  }
}

TEST_CASE("run_vtr") {
  SUBCASE("clean scene") {
    const Scene scene = generate_scene(0, "right-side-clear");
    VtrInput input;
    for (const auto& cam : scene.cameras) input.frames.emplace_back(cam, render_depth(scene, cam));
    input.carm = scene.carm;
    input.current_pose = scene.carm_pose;
    input.protocol = scene.protocol;
    const VtrResult r = run_vtr(input, VtrConfig{});
    CHECK(r.fused_points > 0);
    CHECK(r.residual.size() < r.fused_points);
    CHECK_FALSE(r.report.collided);
    CHECK(r.report.elapsed > 0.0);
  }
  SUBCASE("invalid protocol propagates") {
    VtrInput input;
    input.protocol.steps.resize(1);
    CHECK_THROWS_AS(run_vtr(input, VtrConfig{}), Error);
  }
  SUBCASE("snapshot image") {
    const CArmModel m;
    const TrajectoryProtocol p = head_scan_protocol(Vec3(0, 0, 1000));
    VoxelGridConfig grid;
    const PointCloud cube = solid_cube(Vec3(-100, 800, 900), 200);
    const CollisionReport r = detect_collisions(cube, m, p, grid);
    const auto path = std::filesystem::temp_directory_path() / "carm_vtr_snapshot.ppm";
    render_snapshot(path.string(), cube, m, p, r, grid, 80, 60);
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int w = 0;
    int h = 0;
    in >> magic >> w >> h;
    CHECK(magic == "P6");
    CHECK(w == 80);
    CHECK(h == 60);
    CHECK(std::filesystem::file_size(path) > 80U * 60U * 3U);
    std::filesystem::remove(path);
  }
}
