// carm: simulate, calibrate, position, vtr, evaluate, all.
// Exit codes: 0 success, 1 pipeline failure, 2 usage or config error.

#include "carm/io.hpp"
#include "carm/metrics.hpp"
#include "carm/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace carm;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr const char* kConfigPathEnv = "CARM_CONFIG_PATH";
constexpr const char* kDefaultConfigName = "carm.json";

/// Pipeline ran but produced nothing usable.
struct PipelineFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int verbosity = 1;

void info(const std::string& msg) {
  if (verbosity >= 1) std::cerr << msg << '\n';
}

void debug(const std::string& msg) {
  if (verbosity >= 2) std::cerr << msg << '\n';
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::vector<fs::path> search_dirs() {
  std::vector<fs::path> dirs;
  const char* env = std::getenv(kConfigPathEnv);
  if (env == nullptr) return dirs;
  std::stringstream ss(env);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (!dir.empty()) dirs.emplace_back(dir);
  }
  return dirs;
}

/// An explicit name is used as given, else looked up in the search path;
/// without a name the first default config on the search path is used.
std::optional<fs::path> resolve_config(const std::string& name) {
  if (!name.empty()) {
    if (fs::exists(name) || fs::path(name).is_absolute()) return fs::path(name);
    for (const auto& dir : search_dirs()) {
      if (fs::exists(dir / name)) return dir / name;
    }
    return fs::path(name);  // reading it reports the missing path
  }
  for (const auto& dir : search_dirs()) {
    if (fs::exists(dir / kDefaultConfigName)) return dir / kDefaultConfigName;
  }
  return std::nullopt;
}

/// Flags shared by the run commands; unset ones leave the config alone.
struct RunFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string scene_file;
  std::string script_file;
  std::string output_dir;
  std::optional<int> timesteps;
  bool render = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("-c,--config", config, "Run config (JSON); searched in $CARM_CONFIG_PATH");
    cmd.add_option("--preset", preset, "Scene preset");
    cmd.add_option("--seed", seed, "Scene seed");
    cmd.add_option("--scene", scene_file, "Scene file (overrides preset and seed)");
    cmd.add_option("--script", script_file, "Motion script file");
    cmd.add_option("-o,--out", output_dir, "Output directory");
    cmd.add_option("--timesteps", timesteps, "Positioning timesteps");
  }

  [[nodiscard]] io::RunConfig resolve() const {
    io::RunConfig c;
    if (const auto path = resolve_config(config)) {
      debug("config: " + path->string());
      c = io::run_config_from_json(io::read_json(*path));
    }
    if (!preset.empty()) c.preset = preset;
    if (seed) c.seed = *seed;
    if (!scene_file.empty()) c.scene_file = scene_file;
    if (!script_file.empty()) c.script_file = script_file;
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (timesteps) c.positioning.timesteps = *timesteps;
    if (render) c.vtr.render = true;
    c.verbosity = verbosity;
    // Round-trip so flag values go through the same validation as the file.
    return io::run_config_from_json(io::run_config_to_json(c));
  }
};

Scene load_scene(const io::RunConfig& c) {
  if (!c.scene_file.empty()) return io::scene_from_json(io::read_json(c.scene_file));
  return generate_scene(c.seed, c.preset);
}

MotionScript load_script(const io::RunConfig& c, const Scene& scene) {
  if (!c.script_file.empty()) return io::script_from_json(io::read_json(c.script_file));
  return default_script(scene, c.positioning.timesteps);
}

/// Resolved config without fields that do not affect results.
json provenance(const io::RunConfig& c) {
  json doc = io::run_config_to_json(c);
  doc.erase("verbosity");
  doc.erase("output_dir");
  return doc;
}

/// Wall-clock timing lives apart from the deterministic reports.
void record_timing(const fs::path& dir, const std::string& command, double seconds) {
  const fs::path path = dir / "timing.json";
  json doc = json::object();
  if (fs::exists(path)) doc = io::read_json(path);
  doc[command] = seconds;
  io::write_json(path, doc);
}

template <typename Fn>
void write_lines(const fs::path& path, Fn fn) {
  std::ostringstream out;
  fn(out);
  io::write_text(path, out.str());
}

// -- simulate -----------------------------------------------------------------

struct SimulateFlags {
  double marker_sigma = 0.5;
  bool depth = false;
};

void cmd_simulate(const io::RunConfig& c, const SimulateFlags& flags) {
  const fs::path out = c.output_dir;
  const Scene scene = load_scene(c);
  io::write_json(out / "scene.json", io::scene_to_json(scene));
  io::write_json(out / "script.json", io::script_to_json(load_script(c, scene)));

  std::vector<io::MarkerSet> markers;
  for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
    const Camera& cam = scene.cameras[i];
    markers.push_back({cam.id, cam.intrinsics,
                       marker_correspondences(scene, cam, flags.marker_sigma, c.seed * 131 + i)});
  }
  io::write_json(out / "markers.json", io::markers_to_json(markers));

  if (flags.depth) {
    const auto prims = scene_primitives(scene);
    for (const auto& cam : scene.cameras) {
      write_lines(out / "depth" / (cam.id + ".csv"),
                  [&](std::ostream& os) { io::write_depth_csv(os, render_depth(prims, cam)); });
    }
  }
  info("scene '" + scene.preset + "' seed " + std::to_string(scene.seed) + " written to " + out.string());
}

// -- calibrate ----------------------------------------------------------------

struct CalibrateFlags {
  std::string markers;
  std::string rig_out;
  bool robust = true;
};

void cmd_calibrate(const CalibrateFlags& flags) {
  const auto sets = io::markers_from_json(io::read_json(flags.markers));
  if (sets.empty()) throw Error(Errc::InvalidArgument, "no cameras in '" + flags.markers + "'");
  CameraRig rig;
  for (const auto& s : sets) {
    if (s.correspondences.size() < 6) {
      throw Error(Errc::InvalidArgument, s.camera_id + ": need at least 6 marker correspondences, got " +
                                             std::to_string(s.correspondences.size()));
    }
    Camera cam;
    cam.id = s.camera_id;
    cam.intrinsics = s.intrinsics;
    try {
      cam.extrinsics = solve_pnp(s.correspondences, s.intrinsics, flags.robust);
    } catch (const Error& e) {
      throw PipelineFailure(s.camera_id + ": calibration failed: " + e.what());
    }
    std::cout << cam.id << " rms " << fixed(reprojection_rms(cam, s.correspondences), 4) << " px\n";
    rig.push_back(std::move(cam));
  }
  io::write_json(flags.rig_out, io::rig_to_json(rig));
}

// -- position -----------------------------------------------------------------

json target_to_json(const TargetResult& r) {
  return {{"target", target_name(r.name)},
          {"predicted", io::to_json(r.predicted)},
          {"ground_truth", io::to_json(r.ground_truth)},
          {"positioning_error", r.error},
          {"success", r.success}};
}

void cmd_position(const io::RunConfig& c) {
  const fs::path out = c.output_dir;
  const Scene scene = load_scene(c);
  const MotionScript script = load_script(c, scene);
  metrics::Stopwatch clock;
  const PositioningRun run = run_positioning(scene, script, c.positioning);
  const double elapsed = clock.seconds();

  io::write_json(out / "rig.json", io::rig_to_json(scene.cameras));
  write_lines(out / "observations.jsonl", [&](std::ostream& os) {
    for (const auto& f : run.frames) io::write_observations(os, f.observations);
  });
  write_lines(out / "keypoints3d.jsonl", [&](std::ostream& os) {
    for (const auto& f : run.frames) io::write_keypoints(os, f.keypoints, false);
  });
  write_lines(out / "consolidated.jsonl", [&](std::ostream& os) {
    for (const auto& f : run.frames) io::write_keypoints(os, f.consolidated, true);
  });
  write_lines(out / "bodyparams.jsonl", [&](std::ostream& os) {
    for (const auto& f : run.frames) {
      if (!f.fit) continue;
      json rec = {{"t", f.timestep},
                  {"params", io::body_params_to_json(f.fit->params)},
                  {"residual_rms", f.fit->residual_rms},
                  {"joints_used", f.fit->joints_used},
                  {"iterations", f.fit->iterations}};
      os << rec.dump() << '\n';
    }
  });

  json frames = json::array();
  for (const auto& f : run.frames) {
    json targets = json::array();
    for (const auto& t : f.targets) targets.push_back(target_to_json(t));
    frames.push_back({{"t", f.timestep}, {"fitted", f.fit.has_value()}, {"targets", targets}, {"log", f.log}});
    for (const auto& line : f.log) debug("t=" + std::to_string(f.timestep) + " " + line);
  }
  json final_targets = json::array();
  for (const auto& t : run.final_targets()) final_targets.push_back(target_to_json(t));
  json drift = json::array();
  for (const auto& e : run.drift_events) drift.push_back(io::drift_event_to_json(e));
  const bool ok = run.successful_frames() > 0;
  io::write_json(out / "positioning_report.json",
                 {{"format_version", io::kFormatVersion},
                  {"config", provenance(c)},
                  {"preset", scene.preset},
                  {"frames", frames},
                  {"successful_frames", run.successful_frames()},
                  {"failed_frames", run.failed_frames()},
                  {"final_targets", final_targets},
                  {"drift_events", drift},
                  {"success", ok}});
  record_timing(out, "position", elapsed);

  for (const auto& t : run.final_targets()) {
    info(std::string(target_name(t.name)) + ": error " + fixed(t.error, 2) + " mm" +
         (t.success ? "" : " (above 25 mm)"));
  }
  info(std::to_string(run.successful_frames()) + "/" + std::to_string(run.frames.size()) +
       " frames within 25 mm");
  if (!ok) throw PipelineFailure("every frame failed");
}

// -- vtr ----------------------------------------------------------------------

void cmd_vtr(const io::RunConfig& c) {
  const fs::path out = c.output_dir;
  const Scene scene = load_scene(c);
  const VtrInput input = make_vtr_input(scene);
  const VtrResult result = run_vtr(input, c.vtr.config);
  json report = io::collision_report_to_json(result.report, c.vtr.config.grid);
  report["config"] = provenance(c);
  report["protocol"] = io::protocol_to_json(scene.protocol);
  report["fused_points"] = result.fused_points;
  report["residual_points"] = result.residual.size();
  io::write_json(out / "vtr_report.json", report);
  io::write_cloud(out / "vtr_residual.csv", result.residual);
  if (c.vtr.render) {
    render_snapshot((out / "vtr_snapshot.ppm").string(), result.residual, scene.carm, scene.protocol,
                    result.report, c.vtr.config.grid);
  }
  record_timing(out, "vtr", result.report.elapsed);
  info(std::string(result.report.collided ? "collision" : "clear") + ": " +
       std::to_string(result.report.regions.size()) + " colliding steps of " +
       std::to_string(scene.protocol.steps.size()) + ", " + fixed(result.report.elapsed, 3) + " s");
}

// -- evaluate -----------------------------------------------------------------

std::size_t at(JointId j) { return static_cast<std::size_t>(index(j)); }

json evaluate_positioning(const fs::path& dir, const Scene& scene, const MotionScript& script) {
  std::ifstream obs_in(dir / "observations.jsonl");
  const auto observations = io::read_observations(obs_in);
  std::vector<metrics::PoseFrame<2>> frames2;
  for (const auto& f : observations) {
    const auto cam = std::find_if(scene.cameras.begin(), scene.cameras.end(),
                                  [&](const Camera& c) { return c.id == f.camera_id(); });
    if (cam == scene.cameras.end()) throw Error(Errc::InvalidArgument, "unknown camera '" + f.camera_id() + "'");
    const GroundTruth gt = ground_truth(scene, f.timestep(), script);
    metrics::PoseFrame<2> frame;
    for (JointId j : kAllJoints) {
      const Vec2 px = project(*cam, gt.joints[at(j)]);
      if (cam->intrinsics.contains(px)) frame.ground_truth[at(j)] = px;
      if (const auto* o = f.find(j); o && o->visibility == 1) frame.predicted[at(j)] = o->pixel;
    }
    frames2.push_back(frame);
  }

  std::ifstream kp_in(dir / "consolidated.jsonl");
  const auto consolidated = io::read_keypoints(kp_in);
  std::map<int, metrics::PoseFrame<3>> by_time;
  for (const auto& kp : consolidated) {
    auto [it, fresh] = by_time.try_emplace(kp.timestep);
    if (fresh) {
      const GroundTruth gt = ground_truth(scene, kp.timestep, script);
      for (JointId j : kAllJoints) it->second.ground_truth[at(j)] = gt.joints[at(j)];
    }
    it->second.predicted[at(kp.joint)] = kp.position;
  }
  std::vector<metrics::PoseFrame<3>> frames3;
  for (auto& [t, f] : by_time) frames3.push_back(f);

  const json report = io::read_json(dir / "positioning_report.json");
  json targets = json::object();
  for (const auto& t : report.at("final_targets")) {
    targets[t.at("target").get<std::string>()] = {{"positioning_error", t.at("positioning_error")},
                                                  {"success", t.at("success")}};
  }
  json out = {{"detection_frames", frames2.size()},
              {"mpjpe_2d_px", metrics::mpjpe_2d(frames2).pixels},
              {"pck_torso_0.15", metrics::pck<2>(frames2, 0.15)},
              {"pck_torso_0.3", metrics::pck<2>(frames2, 0.3)},
              {"final_targets", targets},
              {"successful_frames", report.at("successful_frames")},
              {"failed_frames", report.at("failed_frames")}};
  if (!frames3.empty()) {
    out["mpjpe_3d_mm"] = metrics::mpjpe<3>(frames3);
    out["pck3d_torso_0.1"] = metrics::pck<3>(frames3, 0.1);
  }
  return out;
}

json evaluate_vtr(const fs::path& dir, const Scene& scene) {
  const json report = io::read_json(dir / "vtr_report.json");
  const VoxelGridConfig grid = io::grid_from_json(report.at("grid"));
  const TrajectoryProtocol protocol = io::protocol_from_json(report.at("protocol"));
  std::vector<metrics::CellKey> predicted;
  for (const auto& region : report.at("regions")) {
    for (const auto& v : region.at("voxels")) predicted.emplace_back(region.at("step").get<int>(), v.get<std::int64_t>());
  }
  const PointCloud residual = io::read_cloud(dir / "vtr_residual.csv");
  const auto reference = metrics::reference_collision_cells(residual, scene.carm, protocol, grid);
  return {{"collided", report.at("collided")},
          {"predicted_cells", predicted.size()},
          {"reference_cells", reference.size()},
          {"cdp", metrics::cdp(predicted, reference)},
          {"recall", metrics::collision_recall(predicted, reference)}};
}

void write_metrics_csv(const fs::path& path, const json& doc) {
  std::ostringstream out;
  out << "section,metric,value\n";
  for (const auto& [section, values] : doc.items()) {
    if (!values.is_object() || section == "config") continue;
    for (const auto& [name, value] : values.items()) {
      if (value.is_object()) {
        for (const auto& [sub, v] : value.items()) out << section << ',' << name << '.' << sub << ',' << v.dump() << '\n';
      } else {
        out << section << ',' << name << ',' << value.dump() << '\n';
      }
    }
  }
  io::write_text(path, out.str());
}

void cmd_evaluate(const fs::path& dir) {
  metrics::Stopwatch clock;
  const fs::path config_path = dir / "config.json";
  const io::RunConfig c = io::run_config_from_json(io::read_json(config_path));
  const Scene scene = load_scene(c);
  json doc = {{"format_version", io::kFormatVersion}, {"config", provenance(c)}};
  bool any = false;
  if (fs::exists(dir / "positioning_report.json")) {
    doc["positioning"] = evaluate_positioning(dir, scene, load_script(c, scene));
    any = true;
  }
  if (fs::exists(dir / "vtr_report.json")) {
    doc["vtr"] = evaluate_vtr(dir, scene);
    any = true;
  }
  if (!any) throw Error(Errc::InvalidArgument, "no run outputs in '" + dir.string() + "'");
  io::write_json(dir / "metrics.json", doc);
  write_metrics_csv(dir / "metrics.csv", doc);
  record_timing(dir, "evaluate", clock.seconds());
  if (doc.contains("positioning")) {
    info("mpjpe_2d " + fixed(doc["positioning"]["mpjpe_2d_px"].get<double>(), 3) + " px, pck@0.3 " +
         fixed(doc["positioning"]["pck_torso_0.3"].get<double>(), 2) + " %");
  }
  if (doc.contains("vtr")) {
    info("cdp " + fixed(doc["vtr"]["cdp"].get<double>(), 2) + " %, recall " +
         fixed(doc["vtr"]["recall"].get<double>(), 2) + " %");
  }
}

void save_config(const io::RunConfig& c) {
  io::write_json(fs::path(c.output_dir) / "config.json", io::run_config_to_json(c));
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::ParseError:
    case Errc::UnknownPreset:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C-arm positioning and virtual trajectory rehearsal on synthetic scenes"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More log output (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  RunFlags sim_flags;
  SimulateFlags sim_extra;
  auto* simulate = app.add_subcommand("simulate", "Write a scene, motion script and marker observations");
  sim_flags.add_to(*simulate);
  simulate->add_option("--marker-noise", sim_extra.marker_sigma, "Marker pixel noise sigma (px)")
      ->check(CLI::NonNegativeNumber);
  simulate->add_flag("--depth", sim_extra.depth, "Also write per-camera depth images");

  CalibrateFlags cal_flags;
  auto* calibrate = app.add_subcommand("calibrate", "Camera extrinsics from marker correspondences");
  calibrate->add_option("markers", cal_flags.markers, "Marker observations file")->required();
  calibrate->add_option("-o,--out", cal_flags.rig_out, "Rig file to write")->required();
  calibrate->add_flag("!--no-robust", cal_flags.robust, "Plain least squares instead of robust PnP");

  RunFlags pos_flags;
  auto* position = app.add_subcommand("position", "Detect, triangulate, consolidate, fit and locate targets");
  pos_flags.add_to(*position);

  RunFlags vtr_flags;
  auto* vtr = app.add_subcommand("vtr", "Virtual trajectory rehearsal collision check");
  vtr_flags.add_to(*vtr);
  vtr->add_flag("--render", vtr_flags.render, "Write a PPM snapshot");

  std::string eval_dir;
  auto* evaluate = app.add_subcommand("evaluate", "Metrics of a run directory against ground truth");
  evaluate->add_option("run_dir", eval_dir, "Output directory of a position/vtr run")->required();

  RunFlags all_flags;
  auto* all = app.add_subcommand("all", "simulate, calibrate, position, vtr and evaluate in one directory");
  all_flags.add_to(*all);
  all->add_flag("--render", all_flags.render, "Write a PPM snapshot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  verbosity = quiet ? 0 : 1 + verbose;

  try {
    if (simulate->parsed()) {
      const auto c = sim_flags.resolve();
      save_config(c);
      cmd_simulate(c, sim_extra);
    } else if (calibrate->parsed()) {
      cmd_calibrate(cal_flags);
    } else if (position->parsed()) {
      const auto c = pos_flags.resolve();
      save_config(c);
      cmd_position(c);
    } else if (vtr->parsed()) {
      const auto c = vtr_flags.resolve();
      save_config(c);
      cmd_vtr(c);
    } else if (evaluate->parsed()) {
      cmd_evaluate(eval_dir);
    } else if (all->parsed()) {
      const auto c = all_flags.resolve();
      const fs::path out = c.output_dir;
      save_config(c);
      cmd_simulate(c, SimulateFlags{});
      cmd_calibrate({(out / "markers.json").string(), (out / "calibrated_rig.json").string(), true});
      cmd_vtr(c);
      cmd_position(c);
      cmd_evaluate(out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const PipelineFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed document: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
