#include "carm/pipeline.hpp"

#include <algorithm>
#include <map>

namespace carm {

int PositioningRun::successful_frames() const {
  return static_cast<int>(std::count_if(frames.begin(), frames.end(), [](const FrameResult& f) {
    return !f.targets.empty() &&
           std::all_of(f.targets.begin(), f.targets.end(),
                       [](const TargetResult& t) { return t.success; });
  }));
}

int PositioningRun::failed_frames() const {
  return static_cast<int>(frames.size()) - successful_frames();
}

std::vector<TargetResult> PositioningRun::final_targets() const {
  for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
    if (it->fit) return it->targets;
  }
  return {};
}

PositioningRun run_positioning(const Scene& scene, const MotionScript& script,
                               const PositioningConfig& config) {
  script.validate();
  PositioningRun run;
  run.preset = scene.preset;
  std::map<JointId, JointConsolidator> trackers;

  for (int t = 0; t < config.timesteps; ++t) {
    FrameResult frame;
    frame.timestep = t;
    frame.truth = ground_truth(scene, t, script);
    const NoiseConfig base = noise_at(script, t, config.noise);
    for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
      const Camera& cam = scene.cameras[c];
      NoiseConfig noise = base;
      noise.seed = derive_seed(base.seed, static_cast<std::uint64_t>(t), c);
      frame.observations.push_back(synth_detect(frame.truth.joints, cam,
                                                occluders_at(scene, script, t, cam.id), noise, t));
    }
    FrameTriangulation tri =
        triangulate_frame(scene.cameras, frame.observations, t, config.triangulation);
    frame.keypoints = tri.keypoints;
    frame.log = std::move(tri.log);

    for (const auto& kp : frame.keypoints) {
      auto it = trackers.find(kp.joint);
      if (it == trackers.end()) {
        it = trackers.emplace(kp.joint, JointConsolidator(kp.joint, config.drift, config.thresholds))
                 .first;
      }
      const Consolidation c = it->second.push(kp);
      if (c.partition.drift_detected) run.drift_events.push_back(it->second.events().back());
    }
    for (const auto& [joint, tracker] : trackers) {
      // Joints missing this frame keep reporting their last consolidation.
      frame.consolidated.push_back(consolidate(tracker.window(), config.thresholds).output);
    }

    try {
      frame.fit = fit_body(frame.consolidated, scene.skeleton, config.fit);
      for (TargetName name : config.targets) {
        const AnatomicalTarget& target = find_target(scene.targets, name);
        TargetResult r;
        r.name = name;
        r.predicted = locate_target(frame.fit->params, scene.skeleton, target);
        for (const auto& [gt_name, pos] : frame.truth.targets) {
          if (gt_name == name) r.ground_truth = pos;
        }
        r.error = positioning_error(r.predicted, r.ground_truth);
        r.success = r.error < kPositioningSuccessMm;
        frame.targets.push_back(r);
      }
    } catch (const Error& e) {
      frame.log.push_back("t=" + std::to_string(t) + " fit: " + e.what());
      frame.fit.reset();
    }
    run.frames.push_back(std::move(frame));
  }
  return run;
}

std::vector<metrics::PoseFrame<2>> detection_frames(const Scene& scene, const PositioningRun& run) {
  std::vector<metrics::PoseFrame<2>> out;
  for (const auto& frame : run.frames) {
    for (const auto& obs : frame.observations) {
      auto cam = std::find_if(scene.cameras.begin(), scene.cameras.end(),
                              [&](const Camera& c) { return c.id == obs.camera_id(); });
      if (cam == scene.cameras.end()) continue;
      metrics::PoseFrame<2> pf;
      for (JointId j : kAllJoints) {
        const auto k = static_cast<std::size_t>(index(j));
        const Vec3& p = frame.truth.joints[k];
        if (cam->extrinsics.to_camera(p).z() > kMinDepth) pf.ground_truth[k] = project(*cam, p);
      }
      for (const auto& o : obs.observations()) {
        if (o.visibility != 0) pf.predicted[static_cast<std::size_t>(index(o.joint))] = o.pixel;
      }
      out.push_back(pf);
    }
  }
  return out;
}

std::vector<metrics::PoseFrame<3>> keypoint_frames(const PositioningRun& run) {
  std::vector<metrics::PoseFrame<3>> out;
  for (const auto& frame : run.frames) {
    metrics::PoseFrame<3> pf;
    for (JointId j : kAllJoints) {
      const auto k = static_cast<std::size_t>(index(j));
      pf.ground_truth[k] = frame.truth.joints[k];
    }
    for (const auto& kp : frame.consolidated) {
      pf.predicted[static_cast<std::size_t>(index(kp.joint))] = kp.position;
    }
    out.push_back(pf);
  }
  return out;
}

VtrInput make_vtr_input(const Scene& scene) {
  VtrInput input;
  const std::vector<Primitive> prims = scene_primitives(scene);
  for (const auto& cam : scene.cameras) input.frames.emplace_back(cam, render_depth(prims, cam));
  input.carm = scene.carm;
  input.current_pose = scene.carm_pose;
  input.protocol = scene.protocol;
  return input;
}

}  // namespace carm
