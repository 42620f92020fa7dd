#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "carm/io.hpp"
#include "carm/scenesim.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace carm;

namespace {

std::size_t at(JointId j) { return static_cast<std::size_t>(index(j)); }

/// Small camera with the optical axis through pixel (40, 30).
Camera small_camera(const Vec3& eye, const Vec3& target) {
  Intrinsics<double> k;
  k.fx = k.fy = 100.0;
  k.cx = 40.0;
  k.cy = 30.0;
  k.image_width = 81;
  k.image_height = 61;
  return look_at("small", k, eye, target);
}

}  // namespace

TEST_CASE("presets") {
  CHECK(vtr_presets().size() == 10);
  CHECK(positioning_presets().size() == 9);
  const auto all = all_presets();
  CHECK(all.size() == 20);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == all.size());
  try {
    (void)generate_scene(0, "operating-theatre");
    FAIL("expected UnknownPreset");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownPreset);
  }
}

TEST_CASE("generate_scene: determinism") {
  for (const auto& preset : {"lab", "head-side-vertical", "position-s2-c0"}) {
    const Scene a = generate_scene(11, preset);
    const Scene b = generate_scene(11, preset);
    CHECK(io::scene_to_json(a).dump() == io::scene_to_json(b).dump());
    CHECK(forward_kinematics(a.skeleton, a.patient) == forward_kinematics(b.skeleton, b.patient));
    const Scene c = generate_scene(12, preset);
    CHECK(forward_kinematics(a.skeleton, a.patient) != forward_kinematics(c.skeleton, c.patient));
  }
  const Camera cam = small_camera(Vec3(1500, 800, 2500), Vec3(0, 0, 900));
  const Scene s = generate_scene(3, "left-side-monitor");
  CHECK(render_depth(s, cam).values == render_depth(generate_scene(3, "left-side-monitor"), cam).values);
}

TEST_CASE("generate_scene: layout invariants") {
  for (const auto& preset : all_presets()) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Scene s = generate_scene(seed, preset);
      CAPTURE(preset);
      CAPTURE(seed);
      REQUIRE(s.cameras.size() == 3);
      for (const auto& cam : s.cameras) {
        // Ceiling mounted, with the table in view.
        CHECK(cam.extrinsics.center().z() > 2000.0);
        CHECK(cam.intrinsics.contains(project(cam, s.bed.center())));
      }
      const JointPositions joints = forward_kinematics(s.skeleton, s.patient);
      for (JointId j : kAllJoints) {
        CHECK(joints[at(j)].z() > s.bed.max_corner.z());
        CHECK(joints[at(j)].x() >= s.bed.min_corner.x());
        CHECK(joints[at(j)].x() <= s.bed.max_corner.x());
      }
      CHECK(s.markers.size() >= 6);
      CHECK_NOTHROW(s.protocol.validate());
      CHECK_NOTHROW(s.patient.validate());
      const auto vtr = vtr_presets();
      const bool is_vtr = std::find(vtr.begin(), vtr.end(), preset) != vtr.end();
      CHECK(default_script(s, 40).events.empty() == is_vtr);
    }
  }
  // The nine positioning scenes differ in table position and C-arm start.
  std::set<std::pair<double, double>> layouts;
  for (const auto& preset : positioning_presets()) {
    const Scene s = generate_scene(0, preset);
    layouts.emplace(s.bed.center().x(), s.carm_pose.isocenter.x() - s.bed.center().x());
  }
  CHECK(layouts.size() == 9);
}

TEST_CASE("render_depth") {
  SUBCASE("empty scene") {
    const Camera cam = small_camera(Vec3(0, 0, 2000), Vec3(0, 0, 0));
    const DepthImage d = render_depth(std::vector<Primitive>{}, cam);
    CHECK(std::all_of(d.values.begin(), d.values.end(), [](double v) { return v == 0.0; }));
  }
  SUBCASE("sphere on the optical axis") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Vec3 center = test::uniform_in_box(rng, Vec3(-500, -500, 500), Vec3(500, 500, 1500));
      const Vec3 eye = center + test::uniform_in_box(rng, Vec3(-1500, -1500, 800), Vec3(1500, 1500, 2000));
      const double radius = 50.0 + 200.0 * (trial % 5) / 4.0;
      const Camera cam = small_camera(eye, center);
      const DepthImage d = render_depth({Primitive{Sphere{center, radius}}}, cam);
      CHECK(std::abs(d.at(40, 30) - ((eye - center).norm() - radius)) < 0.5);
    }
  }
  SUBCASE("unprojected depth lies on the scene surfaces") {
    const Scene s = generate_scene(4, "head-side-cart");
    const auto prims = scene_primitives(s);
    for (const auto& cam : s.cameras) {
      const PointCloud cloud = unproject_depth(cam, render_depth(prims, cam), 7);
      REQUIRE(cloud.size() > 1000);
      double worst = 0.0;
      for (const auto& p : cloud.points) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& prim : prims) nearest = std::min(nearest, surface_distance(p, prim));
        worst = std::max(worst, nearest);
      }
      CHECK(worst < 1.0);
    }
  }
  SUBCASE("nearest surface wins per pixel") {
    const Scene s = generate_scene(6, "lab");
    const auto prims = scene_primitives(s);
    const Camera cam = small_camera(s.cameras[0].extrinsics.center(), Vec3(0, 0, 900));
    const DepthImage all = render_depth(prims, cam);
    DepthImage expect(all.width, all.height);
    for (const auto& prim : prims) {
      const DepthImage one = render_depth({prim}, cam);
      for (std::size_t i = 0; i < one.values.size(); ++i) {
        const double v = one.values[i];
        if (v > 0.0 && (expect.values[i] == 0.0 || v < expect.values[i])) expect.values[i] = v;
      }
    }
    CHECK(all.values == expect.values);
  }
}

TEST_CASE("ground_truth") {
  const Scene s = generate_scene(2, "lab");
  const JointPositions fk = forward_kinematics(s.skeleton, s.patient);

  SUBCASE("no script is forward kinematics") {
    const GroundTruth gt = ground_truth(s, 0, MotionScript{});
    CHECK(gt.joints == fk);
    REQUIRE(gt.targets.size() == s.targets.size());
    for (const auto& [name, point] : gt.targets) {
      CHECK((point - locate_target(s.patient, s.skeleton, find_target(s.targets, name))).norm() < 1e-9);
    }
  }
  SUBCASE("moving a joint moves exactly its subtree") {
    MotionScript script;
    script.events.push_back({5, MoveJoint{JointId::RightWrist, Vec3(0, 200, 0)}});
    CHECK(ground_truth(s, 4, script).joints == fk);
    const GroundTruth gt = ground_truth(s, 5, script);
    for (JointId j : kAllJoints) {
      const Vec3 shift = j == JointId::RightWrist ? Vec3(0, 200, 0) : Vec3::Zero();
      CHECK(gt.joints[at(j)] - fk[at(j)] == shift);
    }
    script.events.push_back({6, MoveJoint{JointId::RightElbow, Vec3(10, 0, 0)}});
    const GroundTruth later = ground_truth(s, 9, script);
    CHECK((later.joints[at(JointId::RightWrist)] - fk[at(JointId::RightWrist)] - Vec3(10, 200, 0)).norm() < 1e-12);
    CHECK((later.joints[at(JointId::RightElbow)] - fk[at(JointId::RightElbow)] - Vec3(10, 0, 0)).norm() < 1e-12);
    CHECK(later.joints[at(JointId::RightShoulder)] == fk[at(JointId::RightShoulder)]);
  }
  SUBCASE("occlusion and noise changes leave the truth alone") {
    MotionScript script;
    script.events.push_back({1, Occlude{"cam1", Sphere{Vec3(0, 0, 1500), 300}, 10}});
    script.events.push_back({2, NoiseChange{NoiseConfig{9.0, 0.2, 0.1, 50.0, 30.0, 3}}});
    const GroundTruth gt = ground_truth(s, 5, script);
    CHECK(gt.joints == fk);
    const GroundTruth plain = ground_truth(s, 5, MotionScript{});
    REQUIRE(gt.targets.size() == plain.targets.size());
    for (std::size_t i = 0; i < gt.targets.size(); ++i) CHECK(gt.targets[i].second == plain.targets[i].second);
  }
  SUBCASE("obstacle motion") {
    const Scene v = generate_scene(2, "head-side-cart");
    REQUIRE_FALSE(v.obstacles.empty());
    MotionScript script;
    script.events.push_back({3, MoveObstacle{v.obstacles[0].id, Vec3(0, 100, 0)}});
    const GroundTruth gt = ground_truth(v, 3, script);
    const auto& before = std::get<Box>(v.obstacles[0].shape);
    const auto& after = std::get<Box>(gt.obstacles[0].shape);
    CHECK(after.min_corner - before.min_corner == Vec3(0, 100, 0));
    CHECK(gt.joints == forward_kinematics(v.skeleton, v.patient));
  }
}

TEST_CASE("motion scripts") {
  MotionScript script;
  script.events.push_back({4, Occlude{"cam2", Sphere{Vec3(0, 0, 1500), 100}, 3}});
  script.events.push_back({6, NoiseChange{NoiseConfig{5.0, 0, 0, 0, 0, 1}}});
  CHECK_NOTHROW(script.validate());

  const Scene s = generate_scene(0, "lab");
  const std::size_t base = occluders_at(s, MotionScript{}, 0, "cam2").size();
  CHECK(occluders_at(s, script, 3, "cam2").size() == base);
  CHECK(occluders_at(s, script, 4, "cam2").size() == base + 1);
  CHECK(occluders_at(s, script, 6, "cam2").size() == base + 1);
  CHECK(occluders_at(s, script, 7, "cam2").size() == base);
  CHECK(occluders_at(s, script, 5, "cam1").size() == base);

  const NoiseConfig start{2.0, 0, 0, 0, 0, 1};
  CHECK(noise_at(script, 5, start).pixel_sigma == 2.0);
  CHECK(noise_at(script, 6, start).pixel_sigma == 5.0);

  MotionScript backwards = script;
  std::swap(backwards.events[0], backwards.events[1]);
  CHECK_THROWS_AS(backwards.validate(), Error);
}

TEST_CASE("marker correspondences") {
  const Scene s = generate_scene(0, "lab");
  for (const auto& cam : s.cameras) {
    const auto exact = marker_correspondences(s, cam, 0.0, 1);
    CHECK(exact.size() >= 6);
    for (const auto& c : exact) CHECK((c.point_pixel - project(cam, c.point_room)).norm() == 0.0);
    const auto noisy = marker_correspondences(s, cam, 1.0, 1);
    REQUIRE(noisy.size() == exact.size());
    const auto again = marker_correspondences(s, cam, 1.0, 1);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      CHECK(noisy[i].point_pixel == again[i].point_pixel);
      CHECK((noisy[i].point_pixel - exact[i].point_pixel).norm() < 6.0);
    }
  }
}
