// Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
// budget. Exit status is non-zero if any criterion fails.

#include "carm/bodyfit.hpp"
#include "carm/ks.hpp"
#include "carm/metrics.hpp"
#include "carm/pipeline.hpp"
#include "carm/scenesim.hpp"
#include "carm/temporal.hpp"
#include "carm/triangulation.hpp"
#include "carm/vtr.hpp"
#include "support.hpp"
#include "vtr_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace carm;

namespace {

std::size_t at(JointId j) { return static_cast<std::size_t>(index(j)); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const Vec3 kTarget(0, 0, 950);

CameraRig random_rig(std::mt19937_64& rng) {
  CameraRig rig;
  for (int i = 0; i < 3; ++i) rig.push_back(test::camera_around(rng, "cam" + std::to_string(i + 1), kTarget, 2500.0));
  return rig;
}

// -- weighted triangulation selection -----------------------------------------

/// Outer objective written out independently: rho-weighted pixel distance
/// over every visible view, including those outside the candidate subset.
double oracle_cost(const Vec3& x, const std::vector<JointView>& views) {
  double s = 0.0;
  for (const auto& v : views) {
    if (v.observation.visibility == 0) continue;
    const Vec2 d = project(*v.camera, x) - v.observation.pixel;
    s += v.observation.confidence * std::sqrt(d.x() * d.x() + d.y() * d.y());
  }
  return s;
}

/// Argmin by successive filtering: least cost, then largest subset, then
/// least mean error, then smallest id list.
std::vector<std::string> oracle_winner(const std::vector<Candidate3D>& cands,
                                       const std::vector<JointView>& views, double tol) {
  std::vector<double> cost;
  for (const auto& c : cands) cost.push_back(oracle_cost(c.position, views));
  const double best = *std::min_element(cost.begin(), cost.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cost[i] - best <= tol) keep.push_back(i);
  }
  std::size_t biggest = 0;
  for (auto i : keep) biggest = std::max(biggest, cands[i].subset.size());
  std::erase_if(keep, [&](std::size_t i) { return cands[i].subset.size() != biggest; });
  double sharpest = std::numeric_limits<double>::infinity();
  for (auto i : keep) sharpest = std::min(sharpest, cands[i].mean_reproj_error);
  std::erase_if(keep, [&](std::size_t i) { return cands[i].mean_reproj_error - sharpest > tol; });
  std::vector<std::string> out = cands[keep.front()].subset;
  for (auto i : keep) out = std::min(out, cands[i].subset);
  return out;
}

Outcome criterion_selection() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g(0.0, 2.0);
  std::uniform_real_distribution<double> rho(0.05, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const TriangulationOptions options;
  int match = 0;
  int ties = 0;
  int two_view = 0;
  const int scenes = 1000;
  for (int s = 0; s < scenes; ++s) {
    const CameraRig rig = random_rig(rng);
    const Vec3 p = test::uniform_in_box(rng, Vec3(-300, -200, 850), Vec3(300, 200, 1050));
    // Kinds: exact with equal rho (cost ties), noisy, noisy with one gross
    // outlier, noisy with one invisible view.
    const int kind = s % 4;
    std::vector<JointView> views;
    for (const auto& c : rig) {
      const double dx = g(rng);
      const double dy = g(rng);
      const double r = rho(rng);
      Observation2D o{JointId::Neck, project(c, p), 0.9, 1};
      if (kind != 0) {
        o.pixel += Vec2(dx, dy);
        o.confidence = r;
      }
      views.push_back({&c, o});
    }
    const auto k = static_cast<std::size_t>(3 * unit(rng));
    if (kind == 2) {
      const double a = 2 * kPi * unit(rng);
      views[k].observation.pixel += 80.0 * Vec2(std::cos(a), std::sin(a));
    }
    if (kind == 3) views[k].observation.visibility = 0;

    const CandidateSet set = enumerate_candidates(views, options);
    const ScoredKeypoint3D got = select_best(set.candidates, views, JointId::Neck, 0, options);
    const auto want = oracle_winner(set.candidates, views, options.tie_tolerance);
    match += got.winning_subset == want ? 1 : 0;
    ties += kind == 0 ? 1 : 0;
    two_view += set.candidates.size() == 1 ? 1 : 0;
  }
  return {match == scenes, std::to_string(match) + "/" + std::to_string(scenes) + " scenes match the oracle argmin (" +
                               std::to_string(ties) + " all-tie scenes, " + std::to_string(two_view) +
                               " single-candidate scenes)"};
}

// -- corrupted view -----------------------------------------------------------

double mean_joint_error(const std::vector<ScoredKeypoint3D>& kps, const JointPositions& truth) {
  double sum = 0.0;
  for (const auto& k : kps) sum += (k.position - truth[at(k.joint)]).norm();
  return kps.empty() ? std::numeric_limits<double>::infinity() : sum / kps.size();
}

Outcome criterion_corrupted_view() {
  const CameraRig rig = default_rig();
  const SkeletonTemplate sk = default_template();
  int ok = 0;
  double worst_ratio = 0.0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(5000 + static_cast<std::uint64_t>(trial));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BodyParams params;
    const double dx = u(rng);
    const double dy = u(rng);
    const double yaw = u(rng);
    params.root_position = Vec3(450 + 150 * dx, 100 * dy, 960);
    params.root_orientation = Eigen::AngleAxisd(0.3 * yaw, Vec3::UnitZ()).toRotationMatrix();
    const JointPositions joints = forward_kinematics(sk, params);

    std::vector<FrameObservations> clean;
    for (std::size_t c = 0; c < rig.size(); ++c) {
      clean.push_back(synth_detect(joints, rig[c], {}, NoiseConfig{2.0, 0, 0, 0, 0, 97 * static_cast<std::uint64_t>(trial) + c}, 0));
    }
    // One view: every joint 80 px off in a random direction, rho <= 0.1.
    std::vector<FrameObservations> corrupted = clean;
    const std::size_t bad = static_cast<std::size_t>(trial) % rig.size();
    FrameObservations f(clean[bad].camera_id(), 0);
    for (const auto& o : clean[bad].observations()) {
      const double a = kPi * (u(rng) + 1.0);
      Observation2D copy = o;
      copy.pixel += 80.0 * Vec2(std::cos(a), std::sin(a));
      copy.confidence = std::min(0.1, 0.1 * o.confidence);
      f.set(copy);
    }
    corrupted[bad] = f;

    const double e_clean = mean_joint_error(triangulate_frame(rig, clean, 0).keypoints, joints);
    const double e_bad = mean_joint_error(triangulate_frame(rig, corrupted, 0).keypoints, joints);
    ok += e_bad <= 2.0 * e_clean ? 1 : 0;
    worst_ratio = std::max(worst_ratio, e_bad / e_clean);
  }
  return {ok >= 95, std::to_string(ok) + "/" + std::to_string(trials) +
                        " trials within 2x the clean error (need 95); worst ratio " + fmt("%.2f", worst_ratio)};
}

// -- KS -------------------------------------------------------------------------

/// sup |F_a - F_b| * n * m as an integer, from both ECDFs at every sample point.
long brute_force_scaled_d(const std::vector<double>& a, const std::vector<double>& b) {
  const long n = static_cast<long>(a.size());
  const long m = static_cast<long>(b.size());
  long best = 0;
  for (const auto* s : {&a, &b}) {
    for (double x : *s) {
      const long ca = std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; });
      const long cb = std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; });
      best = std::max(best, std::abs(ca * m - cb * n));
    }
  }
  return best;
}

ScoredKeypoint3D stationary_entry(int t, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_real_distribution<double> rho(0.8, 0.95);
  std::uniform_real_distribution<double> err(0.5, 2.0);
  ScoredKeypoint3D e;
  e.joint = JointId::HeadTop;
  e.timestep = t;
  const double dx = g(rng);
  const double dy = g(rng);
  const double dz = g(rng);
  e.position = Vec3(450 + dx, dy, 1100 + dz);
  const double r = rho(rng);
  e.score = {r, 1.0, 1.0 / err(rng)};
  return e;
}

Outcome criterion_ks() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(1, 30);
  std::uniform_int_distribution<int> level(0, 12);
  std::normal_distribution<double> g(0.0, 1.0);
  int exact = 0;
  const int pairs = 500;
  for (int trial = 0; trial < pairs; ++trial) {
    const bool ties = trial % 2 == 0;
    std::vector<double> a(static_cast<std::size_t>(size(rng)));
    std::vector<double> b(static_cast<std::size_t>(size(rng)));
    const double shift = 0.5 * g(rng);
    for (auto& v : a) v = ties ? level(rng) : g(rng);
    for (auto& v : b) v = ties ? level(rng) + std::round(4 * shift) : g(rng) + shift;
    const double nm = static_cast<double>(a.size() * b.size());
    const long want = brute_force_scaled_d(a, b);
    const double d = stats::ks_two_sample(a, b).statistic;
    exact += std::lround(d * nm) == want && std::abs(d - want / nm) <= 1e-15 ? 1 : 0;
  }

  const DriftConfig cfg;
  int alarms = 0;
  const int windows = 2000;
  for (int w = 0; w < windows; ++w) {
    DriftWindow win;
    win.config = cfg;
    for (int t = 0; t < cfg.window_size; ++t) win.push(stationary_entry(t, rng));
    alarms += detect_drift(win).drift_detected ? 1 : 0;
  }
  const double rate = static_cast<double>(alarms) / windows;
  return {exact == pairs && rate <= 0.08, std::to_string(exact) + "/" + std::to_string(pairs) +
                                              " statistics exact; false-drift rate " + fmt("%.4f", rate) +
                                              " over " + std::to_string(windows) + " windows (limit 0.08)"};
}

// -- consolidation --------------------------------------------------------------

/// Sphere on the line of sight from `cam` to `joint`, 60% of the way there.
Primitive blocker(const Camera& cam, const Vec3& joint) {
  const Vec3 c = cam.extrinsics.center();
  return Sphere{c + 0.6 * (joint - c), 120.0};
}

const ScoredKeypoint3D* consolidated(const FrameResult& f, JointId j) {
  for (const auto& k : f.consolidated) {
    if (k.joint == j) return &k;
  }
  return nullptr;
}

Outcome criterion_consolidation() {
  PositioningConfig config;
  config.timesteps = 40;
  const int runs = 50;
  const int occ_begin = 20;
  const int occ_len = 15;
  const int t0 = 20;
  const double tol = 15.0;
  int held = 0;
  int tracked = 0;
  double worst_hold = 0.0;
  double worst_track = 0.0;
  for (int seed = 0; seed < runs; ++seed) {
    const Scene scene = generate_scene(static_cast<std::uint64_t>(seed), "lab");
    config.noise.seed = 900 + static_cast<std::uint64_t>(seed);

    // Two of three cameras lose sight of the head for 15 frames.
    const Vec3 head = forward_kinematics(scene.skeleton, scene.patient)[at(JointId::HeadTop)];
    MotionScript occlusion;
    for (std::size_t c = 0; c < 2; ++c) {
      occlusion.events.push_back({occ_begin, Occlude{scene.cameras[c].id, blocker(scene.cameras[c], head), occ_len}});
    }
    const PositioningRun occ = run_positioning(scene, occlusion, config);
    bool ok = true;
    for (const auto& f : occ.frames) {
      if (f.timestep < occ_begin || f.timestep >= occ_begin + occ_len) continue;
      const auto* k = consolidated(f, JointId::HeadTop);
      const double e = k ? (k->position - head).norm() : std::numeric_limits<double>::infinity();
      worst_hold = std::max(worst_hold, e);
      ok = ok && e < tol;
    }
    held += ok ? 1 : 0;

    // The right forearm slides 200 mm along the table.
    MotionScript motion;
    motion.events.push_back({t0, MoveJoint{JointId::RightWrist, Vec3(200, 0, 0)}});
    const PositioningRun mov = run_positioning(scene, motion, config);
    ok = true;
    for (const auto& f : mov.frames) {
      if (f.timestep < t0 + config.drift.stat_size - 1) continue;
      const auto* k = consolidated(f, JointId::RightWrist);
      const double e = k ? (k->position - f.truth.joints[at(JointId::RightWrist)]).norm()
                         : std::numeric_limits<double>::infinity();
      worst_track = std::max(worst_track, e);
      ok = ok && e < tol;
    }
    tracked += ok ? 1 : 0;
  }
  return {held == runs && tracked == runs,
          "occlusion held " + std::to_string(held) + "/" + std::to_string(runs) + " (worst " +
              fmt("%.1f", worst_hold) + " mm), motion tracked within 10 steps " + std::to_string(tracked) + "/" +
              std::to_string(runs) + " (worst " + fmt("%.1f", worst_track) + " mm); tolerance 15 mm"};
}

// -- VTR -------------------------------------------------------------------------

Outcome criterion_vtr_exact() {
  std::mt19937_64 rng(505);
  int small_ok = 0;
  const int small = 50;
  for (int i = 0; i < small; ++i) {
    const auto s = test::random_small_scene(rng);
    const auto got = metrics::collision_cells(detect_collisions(s.room, s.model, s.protocol, s.grid));
    const auto want = test::pairwise_collisions(s.room, s.model, s.protocol, s.grid);
    small_ok += metrics::cdp(got, want) == 100.0 && metrics::collision_recall(got, want) == 100.0 ? 1 : 0;
  }
  int preset_ok = 0;
  int colliding = 0;
  const auto presets = vtr_presets();
  for (const auto& preset : presets) {
    const Scene scene = generate_scene(0, preset);
    const VtrConfig config;
    const VtrResult r = run_vtr(make_vtr_input(scene), config);
    const auto got = metrics::collision_cells(r.report);
    const auto want = test::sorted_set_collisions(r.residual, scene.carm, scene.protocol, config.grid);
    preset_ok += metrics::cdp(got, want) == 100.0 && metrics::collision_recall(got, want) == 100.0 ? 1 : 0;
    colliding += r.report.collided ? 1 : 0;
  }
  return {small_ok == small && preset_ok == static_cast<int>(presets.size()),
          "CDP and recall 100% on " + std::to_string(small_ok) + "/" + std::to_string(small) + " random scenes and " +
              std::to_string(preset_ok) + "/" + std::to_string(presets.size()) + " presets (" +
              std::to_string(colliding) + " colliding)"};
}

Outcome criterion_vtr_timing() {
  double worst = 0.0;
  std::size_t steps = 0;
  for (const auto& preset : vtr_presets()) {
    const Scene scene = generate_scene(0, preset);
    const VtrInput input = make_vtr_input(scene);
    steps = std::max(steps, input.protocol.steps.size());
    std::vector<double> runs;
    for (int i = 0; i < 3; ++i) runs.push_back(metrics::timing([&] { (void)run_vtr(input, VtrConfig{}); }));
    std::sort(runs.begin(), runs.end());
    worst = std::max(worst, runs[1]);
  }
  return {worst < 2.0 && steps == 60, "slowest preset median " + fmt("%.3f", worst) + " s for " +
                                          std::to_string(steps) + " steps on a 100^3 grid (limit 2 s)"};
}

// -- positioning ------------------------------------------------------------------

Outcome criterion_positioning() {
  const PositioningConfig config;  // 2 px noise, default occlusion scripts
  int runs = 0;
  int ok = 0;
  double worst_head = 0.0;
  double worst_radial = 0.0;
  double sum_head = 0.0;
  double sum_radial = 0.0;
  for (const auto& preset : positioning_presets()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Scene scene = generate_scene(seed, preset);
      const PositioningRun run = run_positioning(scene, default_script(scene, config.timesteps), config);
      const auto targets = run.final_targets();
      bool all = targets.size() == 2;
      for (const auto& t : targets) {
        all = all && t.success;
        if (t.name == TargetName::HeadTop) {
          worst_head = std::max(worst_head, t.error);
          sum_head += t.error;
        } else {
          worst_radial = std::max(worst_radial, t.error);
          sum_radial += t.error;
        }
      }
      ok += all ? 1 : 0;
      ++runs;
    }
  }
  return {ok == runs, std::to_string(ok) + "/" + std::to_string(runs) + " runs under 25 mm; HeadTop mean " +
                          fmt("%.1f", sum_head / runs) + " / worst " + fmt("%.1f", worst_head) +
                          " mm, radial artery mean " + fmt("%.1f", sum_radial / runs) + " / worst " +
                          fmt("%.1f", worst_radial) + " mm (reference hardware system: 8.6 and 23.4 mm)"};
}

// -- detection metrics --------------------------------------------------------------

Outcome criterion_detection_metrics() {
  const double sigma = 2.0;
  const double rayleigh = sigma * std::sqrt(kPi / 2.0);
  std::vector<metrics::PoseFrame<2>> frames;
  for (const auto& preset : positioning_presets()) {
    const Scene scene = generate_scene(1, preset);
    const JointPositions joints = forward_kinematics(scene.skeleton, scene.patient);
    for (int t = 0; t < 40; ++t) {
      for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
        const Camera& cam = scene.cameras[c];
        const NoiseConfig noise{sigma, 0, 0, 0, 0, 1000 * static_cast<std::uint64_t>(t) + c};
        const FrameObservations obs = synth_detect(joints, cam, occluders_at(scene, MotionScript{}, t, cam.id), noise, t);
        metrics::PoseFrame<2> f;
        for (JointId j : kAllJoints) {
          const Vec2 px = project(cam, joints[at(j)]);
          if (cam.intrinsics.contains(px)) f.ground_truth[at(j)] = px;
          if (const auto* o = obs.find(j); o && o->visibility == 1) f.predicted[at(j)] = o->pixel;
        }
        frames.push_back(f);
      }
    }
  }
  const double m = metrics::mpjpe_2d(frames).pixels;
  const double p = metrics::pck<2>(frames, 0.3);
  const double rel = std::abs(m - rayleigh) / rayleigh;
  return {rel <= 0.10 && p >= 99.0, "MPJPE " + fmt("%.3f", m) + " px vs Rayleigh mean " + fmt("%.3f", rayleigh) +
                                        " (" + fmt("%.1f", 100 * rel) + "% off, limit 10%), PCK-torso@0.3 " +
                                        fmt("%.2f", p) + "% (need 99)"};
}

// -- geometry invariants ---------------------------------------------------------------

Outcome criterion_geometry() {
  std::mt19937_64 rng(909);
  const int cases = 200;
  double round_trip = 0.0;
  double pnp = 0.0;
  double tri = 0.0;
  double fk = 0.0;

  for (int i = 0; i < cases; ++i) {
    const Camera cam = test::camera_around(rng, "cam", kTarget, 2500.0);
    const Vec3 p = test::uniform_in_box(rng, Vec3(-400, -300, 700), Vec3(400, 300, 1200));
    const Vec2 px = project(cam, p);
    const double z = (cam.extrinsics.rotation * p + cam.extrinsics.translation).z();
    const Vec3 ray = pixel_ray(cam, px);
    const Vec3 back = cam.extrinsics.center() + ray * (z / (cam.extrinsics.rotation * ray).z());
    round_trip = std::max(round_trip, (back - p).norm());
  }

  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < cases; ++i) {
    const Camera cam = test::camera_around(rng, "cam", kTarget, 2500.0);
    std::vector<Correspondence> corr;
    for (int k = 0; k < 10; ++k) {
      const Vec3 p = test::uniform_in_box(rng, Vec3(-500, -500, 500), Vec3(500, 500, 1500));
      const double dx = g(rng);
      const double dy = g(rng);
      corr.push_back({p, project(cam, p) + Vec2(dx, dy)});
    }
    const Extrinsics<double> a = solve_pnp(corr, cam.intrinsics, true);
    std::shuffle(corr.begin(), corr.end(), rng);
    const Extrinsics<double> b = solve_pnp(corr, cam.intrinsics, true);
    // Rotation difference scaled to mm at the working distance.
    pnp = std::max({pnp, (a.translation - b.translation).norm(), 2500.0 * (a.rotation - b.rotation).norm()});
  }

  for (int i = 0; i < cases; ++i) {
    const CameraRig rig = random_rig(rng);
    const Vec3 p = test::uniform_in_box(rng, Vec3(-300, -200, 850), Vec3(300, 200, 1050));
    std::vector<JointView> views;
    for (const auto& c : rig) {
      const double dx = 2.0 * g(rng);
      const double dy = 2.0 * g(rng);
      views.push_back({&c, {JointId::Neck, project(c, p) + Vec2(dx, dy), 0.9, 1}});
    }
    const Mat3 r = test::random_rotation(rng);
    const Vec3 t = test::uniform_in_box(rng, Vec3(-2000, -2000, -2000), Vec3(2000, 2000, 2000));
    CameraRig moved;
    for (const auto& c : rig) moved.push_back(test::transform_camera(c, r, t));
    std::vector<JointView> moved_views = views;
    for (std::size_t k = 0; k < views.size(); ++k) moved_views[k].camera = &moved[k];
    const auto a = select_best(enumerate_candidates(views).candidates, views, JointId::Neck, 0);
    const auto b = select_best(enumerate_candidates(moved_views).candidates, moved_views, JointId::Neck, 0);
    tri = std::max(tri, a.winning_subset == b.winning_subset ? (r * a.position + t - b.position).norm()
                                                             : std::numeric_limits<double>::infinity());
  }

  const SkeletonTemplate sk = default_template();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < cases; ++i) {
    BodyParams params;
    const Vec3 root = test::uniform_in_box(rng, Vec3(-500, -300, 900), Vec3(500, 300, 1100));
    params.root_position = root;
    params.root_orientation = test::random_rotation(rng);
    for (JointId j : kAllJoints) {
      const double a = u(rng);
      const double b = u(rng);
      const double c = u(rng);
      const double s = u(rng);
      params.joint_rotations[at(j)] = rotation_from_vector(Vec3(0.2 * a, 0.2 * b, 0.2 * c));
      params.bone_scales[at(j)] = 1.0 + 0.1 * s;
    }
    const JointPositions before = forward_kinematics(sk, params);
    const Mat3 r = test::random_rotation(rng);
    const Vec3 t = test::uniform_in_box(rng, Vec3(-2000, -2000, -2000), Vec3(2000, 2000, 2000));
    params.root_position = r * params.root_position + t;
    params.root_orientation = r * params.root_orientation;
    const JointPositions after = forward_kinematics(sk, params);
    for (JointId j : kAllJoints) fk = std::max(fk, (r * before[at(j)] + t - after[at(j)]).norm());
  }

  const double worst = std::max({round_trip, pnp, tri, fk});
  return {worst < 1e-6, "worst deviation over 200 cases each: projection round trip " + fmt("%.1e", round_trip) +
                            ", PnP permutation " + fmt("%.1e", pnp) + ", triangulation rigid motion " +
                            fmt("%.1e", tri) + ", FK rigid motion " + fmt("%.1e", fk) + " mm (limit 1e-6)"};
}

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "weighted triangulation selection equals the oracle argmin", 30.0, criterion_selection},
      {2, "robustness to one corrupted view", 60.0, criterion_corrupted_view},
      {3, "KS statistic and false-drift rate", 60.0, criterion_ks},
      {4, "consolidation holds occlusions and tracks motion", 60.0, criterion_consolidation},
      {5, "VTR collision cells equal the brute-force oracle", 120.0, criterion_vtr_exact},
      {6, "VTR 60-step sweep under 2 s", 60.0, criterion_vtr_timing},
      {7, "end-to-end positioning under 25 mm", 300.0, criterion_positioning},
      {8, "2D detection metrics at 2 px noise", 60.0, criterion_detection_metrics},
      {9, "geometry invariants", 60.0, criterion_geometry},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    metrics::Stopwatch clock;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = clock.seconds();
    const bool pass = out.pass && seconds < c.budget_seconds;
    failed += pass ? 0 : 1;
    std::printf("%s  %d  %s: %s [%.1f s, budget %.0f s]\n", pass ? "PASS" : "FAIL", c.number, c.name,
                out.detail.c_str(), seconds, c.budget_seconds);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
