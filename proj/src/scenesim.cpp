#include "carm/scenesim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace carm {

namespace {

constexpr double kBedTop = 850.0;
// Head scans run with the table raised so the lower housing clears the floor.
constexpr double kVtrBedTop = 950.0;
constexpr double kBedThickness = 80.0;
constexpr double kBodyHeight = 110.0;  // joint plane above the bed top

std::size_t at(JointId j) { return static_cast<std::size_t>(index(j)); }

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::vector<std::string> kVtrPresets = {
    "head-side-vertical", "full-head-vertical", "left-side-vertical", "right-side-vertical",
    "full-left-vertical", "full-right-vertical", "head-side-cart",     "full-head-pole",
    "left-side-monitor",  "right-side-clear",
};

std::array<double, kNumJoints> default_limb_radius() {
  std::array<double, kNumJoints> r{};
  r[at(JointId::HeadTop)] = 90;
  r[at(JointId::Nose)] = 0;  // inside the head capsule
  r[at(JointId::RightShoulder)] = r[at(JointId::LeftShoulder)] = 60;
  r[at(JointId::RightElbow)] = r[at(JointId::LeftElbow)] = 45;
  r[at(JointId::RightWrist)] = r[at(JointId::LeftWrist)] = 35;
  r[at(JointId::RightHip)] = r[at(JointId::LeftHip)] = 110;
  r[at(JointId::RightKnee)] = r[at(JointId::LeftKnee)] = 70;
  r[at(JointId::RightAnkle)] = r[at(JointId::LeftAnkle)] = 50;
  return r;
}

// Patient on a bed centered at bed_x, head toward +x.
void place_patient(Scene& scene, double bed_x, double bed_top, std::mt19937_64& rng) {
  scene.bed = Box{{bed_x - 1000.0, -300.0, bed_top - kBedThickness}, {bed_x + 1000.0, 300.0, bed_top}};
  scene.skeleton = default_template();
  scene.limb_radius = default_limb_radius();
  std::uniform_real_distribution<double> scale(0.92, 1.08);
  std::uniform_real_distribution<double> angle(-0.08, 0.08);
  BodyParams p;
  p.root_position = {bed_x + 450.0, 0.0, bed_top + kBodyHeight};
  p.root_orientation = axis_angle<double>(Vec3::UnitZ(), angle(rng));
  for (JointId j : kAllJoints) {
    if (j == JointId::Neck) continue;
    p.bone_scales[at(j)] = scale(rng);
    // In-plane pose variation keeps limbs resting near the table surface.
    p.joint_rotations[at(j)] = axis_angle<double>(Vec3::UnitZ(), 2.0 * angle(rng)) *
                               axis_angle<double>(Vec3::UnitY(), 0.5 * angle(rng));
  }
  scene.patient = p;
}

Points3 default_markers(double bed_x) {
  Points3 m;
  for (double x : {-800.0, 0.0, 800.0}) {
    for (double y : {-500.0, 500.0}) {
      for (double z : {900.0, 1400.0}) m.emplace_back(bed_x + x, y + 0.1 * x, z + 0.05 * x);
    }
  }
  return m;
}

Vec3 jitter(std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  const double x = u(rng);
  const double y = u(rng);
  const double z = u(rng);
  return {x, y, z};
}

void add_vtr_obstacles(Scene& scene, const std::string& preset, std::mt19937_64& rng) {
  const Vec3 iso = scene.carm_pose.isocenter;
  const double x = iso.x();
  auto box = [&](const std::string& id, Vec3 lo, Vec3 hi) {
    const Vec3 j = jitter(rng, 10.0);
    scene.obstacles.push_back({id, Box{lo + j, hi + j}});
  };
  auto pole = [&](const std::string& id, double px, double py, double radius) {
    const Vec3 j = jitter(rng, 10.0);
    scene.obstacles.push_back(
        {id, Capsule{{px + j.x(), py + j.y(), 0.0}, {px + j.x(), py + j.y(), 1800.0}, radius}});
  };
  if (preset == "head-side-vertical") {
    pole("iv-pole", x + 100.0, 620.0, 20.0);
  } else if (preset == "full-head-vertical") {
    box("anesthesia-cart", {x + 300.0, -400.0, 0.0}, {x + 800.0, 400.0, 1200.0});
  } else if (preset == "left-side-vertical") {
    box("monitor", {x - 150.0, 700.0, 1200.0}, {x + 150.0, 800.0, 1500.0});
  } else if (preset == "right-side-vertical") {
    scene.obstacles.push_back(
        {"staff", Capsule{{x, -750.0, 150.0}, {x, -750.0, 1650.0}, 150.0}});
  } else if (preset == "full-left-vertical") {
    box("supply-cart", {x - 300.0, 1050.0, 0.0}, {x + 300.0, 1400.0, 1100.0});
  } else if (preset == "full-right-vertical") {
    box("arm-board", {x - 100.0, -700.0, kVtrBedTop - 20.0}, {x + 100.0, -300.0, kVtrBedTop});
  } else if (preset == "head-side-cart") {
    box("instrument-cart", {x - 250.0, 400.0, 0.0}, {x + 250.0, 800.0, 700.0});
  } else if (preset == "full-head-pole") {
    pole("iv-pole", x, 1250.0, 20.0);
  } else if (preset == "left-side-monitor") {
    box("ceiling-monitor", {x - 300.0, -200.0, 1700.0}, {x + 300.0, 200.0, 1900.0});
  }
  // right-side-clear: patient and table only.
}

}  // namespace

CameraRig default_rig() {
  Intrinsics<double> k;
  k.fx = k.fy = 525.0;
  k.cx = 319.5;
  k.cy = 239.5;
  k.image_width = 640;
  k.image_height = 480;
  return {
      look_at("cam1", k, {1800.0, 0.0, 2600.0}, {0.0, 0.0, 900.0}),
      look_at("cam2", k, {-300.0, 1900.0, 2600.0}, {-300.0, 0.0, 900.0}),
      look_at("cam3", k, {-1600.0, -1500.0, 2600.0}, {-300.0, 0.0, 900.0}),
  };
}

void MotionScript::validate() const {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].timestep < events[i - 1].timestep) {
      throw Error(Errc::InvalidArgument, "script timesteps must be non-decreasing");
    }
  }
}

std::vector<std::string> vtr_presets() { return kVtrPresets; }

std::vector<std::string> positioning_presets() {
  std::vector<std::string> out;
  for (int s = 0; s < 3; ++s) {
    for (int c = 0; c < 3; ++c) {
      out.push_back("position-s" + std::to_string(s) + "-c" + std::to_string(c));
    }
  }
  return out;
}

std::vector<std::string> all_presets() {
  std::vector<std::string> out{"lab"};
  for (const auto& p : kVtrPresets) out.push_back(p);
  for (const auto& p : positioning_presets()) out.push_back(p);
  return out;
}

Scene generate_scene(std::uint64_t seed, const std::string& preset) {
  const auto names = all_presets();
  if (std::find(names.begin(), names.end(), preset) == names.end()) {
    throw Error(Errc::UnknownPreset, "unknown scene preset '" + preset + "'");
  }
  std::mt19937_64 rng(derive_seed(seed, fnv1a(preset)));
  Scene scene;
  scene.preset = preset;
  scene.seed = seed;
  scene.cameras = default_rig();
  scene.targets = default_targets();

  double bed_x = 0.0;
  double bed_top = kBedTop;
  int carm_slot = 1;
  const bool vtr = std::find(kVtrPresets.begin(), kVtrPresets.end(), preset) != kVtrPresets.end();
  if (vtr) bed_top = kVtrBedTop;
  if (preset.rfind("position-", 0) == 0) {
    const int s = preset[10] - '0';
    carm_slot = preset[13] - '0';
    bed_x = -200.0 + 200.0 * s;
    bed_top = kBedTop - 50.0 + 50.0 * s;
  }
  place_patient(scene, bed_x, bed_top, rng);
  scene.markers = default_markers(0.0);

  const JointPositions joints = forward_kinematics(scene.skeleton, scene.patient);
  const Vec3 neck = joints[at(JointId::Neck)];
  if (vtr) {
    // Head scan: isocenter in the head, C-arm parked at the sweep start.
    const Vec3 iso(neck.x() + 110.0, 0.0, neck.z());
    scene.protocol = head_scan_protocol(iso);
    scene.carm_pose = scene.protocol.steps.front();
    add_vtr_obstacles(scene, preset, rng);
  } else {
    // Initial C-arm placements: over the chest, at the head, at the pelvis.
    const std::array<double, 3> iso_dx = {-250.0, 110.0, -560.0};
    const std::array<double, 3> angles = {0.0, 90.0, -45.0};
    const Vec3 iso(neck.x() + iso_dx[static_cast<std::size_t>(carm_slot)], 0.0, neck.z());
    scene.carm_pose.isocenter = iso;
    scene.carm_pose.angle_deg = angles[static_cast<std::size_t>(carm_slot)];
    scene.protocol = head_scan_protocol(Vec3(neck.x() + 110.0, 0.0, neck.z()));
  }
  return scene;
}

MotionScript default_script(const Scene& scene, int timesteps) {
  MotionScript script;
  if (scene.preset.rfind("position-", 0) != 0 && scene.preset != "lab") return script;
  const JointPositions joints = forward_kinematics(scene.skeleton, scene.patient);
  // A staff member leans between cam3 and the right arm, then a sheet
  // covers the legs for cam2.
  const Vec3 cam3 = scene.cameras[2].extrinsics.center();
  const Vec3 wrist = joints[at(JointId::RightWrist)];
  const Vec3 staff_center = wrist + 0.35 * (cam3 - wrist);
  const int start = std::max(1, timesteps / 3);
  const int duration = std::max(1, std::min(15, timesteps / 3));
  script.events.push_back(
      {start, Occlude{"cam3", Sphere{staff_center, 250.0}, duration}});
  const Vec3 knee = joints[at(JointId::LeftKnee)];
  const Vec3 cam2 = scene.cameras[1].extrinsics.center();
  script.events.push_back(
      {start + 3, Occlude{"cam2", Sphere{knee + 0.3 * (cam2 - knee), 200.0}, duration}});
  return script;
}

GroundTruth ground_truth(const Scene& scene, int timestep, const MotionScript& script) {
  GroundTruth gt;
  gt.joints = forward_kinematics(scene.skeleton, scene.patient);
  gt.body_orientation = scene.patient.root_orientation;
  gt.obstacles = scene.obstacles;
  for (const auto& timed : script.events) {
    if (timed.timestep > timestep) break;
    if (const auto* move = std::get_if<MoveJoint>(&timed.event)) {
      // Shift the joint and its subtree.
      std::array<bool, kNumJoints> moved{};
      for (JointId j : scene.skeleton.order) {
        const auto& parent = scene.skeleton.parent[at(j)];
        moved[at(j)] = j == move->joint || (parent && moved[at(*parent)]);
        if (moved[at(j)]) gt.joints[at(j)] += move->delta;
      }
    } else if (const auto* mo = std::get_if<MoveObstacle>(&timed.event)) {
      for (auto& o : gt.obstacles) {
        if (o.id == mo->id) o.shape = translated(o.shape, mo->delta);
      }
    }
  }
  for (const auto& target : scene.targets) {
    gt.targets.emplace_back(target.name,
                            locate_target(gt.joints, gt.body_orientation, target));
  }
  return gt;
}

std::vector<Primitive> occluders_at(const Scene& scene, const MotionScript& script, int timestep,
                                    const std::string& camera_id) {
  const GroundTruth gt = ground_truth(scene, timestep, script);
  std::vector<Primitive> out;
  for (const auto& o : gt.obstacles) out.push_back(o.shape);
  for (const auto& p : carm_primitives(scene.carm, scene.carm_pose)) out.push_back(p);
  for (const auto& timed : script.events) {
    if (timed.timestep > timestep) break;
    if (const auto* occ = std::get_if<Occlude>(&timed.event)) {
      if (occ->camera_id == camera_id && timestep < timed.timestep + occ->duration) {
        out.push_back(occ->shape);
      }
    }
  }
  return out;
}

NoiseConfig noise_at(const MotionScript& script, int timestep, const NoiseConfig& base) {
  NoiseConfig noise = base;
  for (const auto& timed : script.events) {
    if (timed.timestep > timestep) break;
    if (const auto* nc = std::get_if<NoiseChange>(&timed.event)) noise = nc->noise;
  }
  return noise;
}

std::vector<Primitive> scene_primitives(const Scene& scene) {
  std::vector<Primitive> prims;
  if (scene.floor) prims.emplace_back(Box{{-5000.0, -5000.0, -50.0}, {5000.0, 5000.0, 0.0}});
  prims.emplace_back(scene.bed);
  const JointPositions joints = forward_kinematics(scene.skeleton, scene.patient);
  for (JointId j : scene.skeleton.order) {
    const auto& parent = scene.skeleton.parent[at(j)];
    const double r = scene.limb_radius[at(j)];
    if (!parent || r <= 0.0) continue;
    prims.emplace_back(Capsule{joints[at(*parent)], joints[at(j)], r});
  }
  for (const auto& o : scene.obstacles) prims.push_back(o.shape);
  for (const auto& p : carm_primitives(scene.carm, scene.carm_pose)) prims.push_back(p);
  return prims;
}

namespace {

struct Bound {
  Vec3 center;
  double radius;
};

Bound bounding_sphere(const Primitive& prim) {
  struct Visitor {
    Bound operator()(const Box& b) const {
      return {b.center(), 0.5 * (b.max_corner - b.min_corner).norm()};
    }
    Bound operator()(const Sphere& s) const { return {s.center, s.radius}; }
    Bound operator()(const Capsule& c) const {
      return {0.5 * (c.a + c.b), 0.5 * (c.b - c.a).norm() + c.radius};
    }
    Bound operator()(const OrientedBox& b) const { return {b.center, b.half_extents.norm()}; }
  };
  return std::visit(Visitor{}, prim);
}

}  // namespace

DepthImage render_depth(const std::vector<Primitive>& primitives, const Camera& camera) {
  const auto& k = camera.intrinsics;
  DepthImage depth(k.image_width, k.image_height);
  const Vec3 origin = camera.extrinsics.center();
  const Vec3 axis = camera.extrinsics.rotation.row(2).transpose();
  std::vector<Bound> bounds;
  bounds.reserve(primitives.size());
  for (const auto& p : primitives) bounds.push_back(bounding_sphere(p));

  for (int v = 0; v < k.image_height; ++v) {
    for (int u = 0; u < k.image_width; ++u) {
      const Ray ray{origin, pixel_ray(camera, Vec2(u, v))};
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < primitives.size(); ++i) {
        // Skip primitives whose bounding sphere the ray misses or that lie
        // entirely behind the current hit.
        const Vec3 oc = bounds[i].center - origin;
        const double along = oc.dot(ray.direction);
        const double perp2 = oc.squaredNorm() - along * along;
        if (perp2 > bounds[i].radius * bounds[i].radius) continue;
        if (along - bounds[i].radius > best) continue;
        if (const auto t = intersect(ray, primitives[i]); t && *t < best) best = *t;
      }
      if (std::isfinite(best)) depth.at(u, v) = best * ray.direction.dot(axis);
    }
  }
  return depth;
}

DepthImage render_depth(const Scene& scene, const Camera& camera) {
  return render_depth(scene_primitives(scene), camera);
}

std::vector<Correspondence> marker_correspondences(const Scene& scene, const Camera& camera,
                                                   double pixel_sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Correspondence> out;
  for (const auto& m : scene.markers) {
    const double gx = gauss(rng);
    const double gy = gauss(rng);
    if (camera.extrinsics.to_camera(m).z() <= kMinDepth) continue;
    const Vec2 px = project(camera, m);
    if (!camera.intrinsics.contains(px)) continue;
    out.push_back({m, px + pixel_sigma * Vec2(gx, gy)});
  }
  return out;
}

}  // namespace carm
