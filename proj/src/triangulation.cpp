#include "carm/triangulation.hpp"

#include "carm/lsq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace carm {

namespace {

std::vector<JointView> usable(std::span<const JointView> views) {
  std::vector<JointView> out;
  for (const auto& v : views) {
    if (v.camera != nullptr && v.observation.visibility != 0) out.push_back(v);
  }
  std::sort(out.begin(), out.end(),
            [](const JointView& a, const JointView& b) { return a.camera->id < b.camera->id; });
  return out;
}

std::string join(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : ",") + id;
  return s;
}

struct PointProblem {
  std::span<const JointView> views;

  [[nodiscard]] int block_size() const { return 2; }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const auto n = static_cast<Eigen::Index>(views.size());
    r.resize(2 * n);
    if (jac != nullptr) jac->resize(2 * n, 3);
    const Vec3 point = x.head<3>();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& view = views[static_cast<std::size_t>(i)];
      const auto& k = view.camera->intrinsics;
      const Mat3& rot = view.camera->extrinsics.rotation;
      const Vec3 pc = view.camera->extrinsics.to_camera(point);
      const double z = std::max(pc.z(), kMinDepth);
      r(2 * i) = k.fx * pc.x() / z + k.cx - view.observation.pixel.x();
      r(2 * i + 1) = k.fy * pc.y() / z + k.cy - view.observation.pixel.y();
      if (jac != nullptr) {
        jac->row(2 * i) = k.fx * (rot.row(0) / z - pc.x() * rot.row(2) / (z * z));
        jac->row(2 * i + 1) = k.fy * (rot.row(1) / z - pc.y() * rot.row(2) / (z * z));
      }
    }
  }
};

}  // namespace

Candidate3D triangulate_subset(std::span<const JointView> views,
                               const TriangulationOptions& options) {
  if (views.size() < 2) {
    throw Error(Errc::InsufficientViews, "triangulation needs at least two views");
  }
  // Normalized frame X = origin + scale * X' keeps the homogeneous system
  // well conditioned for millimeter coordinates.
  Vec3 origin = Vec3::Zero();
  for (const auto& v : views) origin += v.camera->extrinsics.center();
  origin /= static_cast<double>(views.size());
  constexpr double scale = 1000.0;

  const auto n = static_cast<Eigen::Index>(views.size());
  Eigen::MatrixXd a(2 * n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& view = views[static_cast<std::size_t>(i)];
    const auto& k = view.camera->intrinsics;
    const Vec2 xn((view.observation.pixel.x() - k.cx) / k.fx,
                  (view.observation.pixel.y() - k.cy) / k.fy);
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = view.camera->extrinsics.rotation * scale;
    p.col(3) = view.camera->extrinsics.to_camera(origin);
    a.row(2 * i) = xn.x() * p.row(2) - p.row(0);
    a.row(2 * i + 1) = xn.y() * p.row(2) - p.row(1);
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double nrm = a.row(i).norm();
    if (nrm > 0) a.row(i) /= nrm;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // The rank-3 part of the system degenerates when rays are near parallel.
  const double condition = sv(2) > 0 ? sv(0) / sv(2) : std::numeric_limits<double>::infinity();
  if (!(condition <= options.max_condition)) {
    throw Error(Errc::NearParallelRays, "rays are near parallel (condition " +
                                            std::to_string(condition) + ")");
  }
  const Eigen::Vector4d h = svd.matrixV().col(3);
  Vec3 init = origin;
  if (std::abs(h(3)) > 1e-15) init = origin + scale * h.head<3>() / h(3);

  PointProblem problem{views};
  Eigen::VectorXd x = init;
  lsq::Options opts;
  opts.huber_delta = options.huber_delta;
  opts.max_iterations = options.max_iterations;
  // Run to the floating-point floor so results are equivariant to 1e-6 mm.
  opts.step_tolerance = 1e-12;
  opts.cost_tolerance = 1e-15;
  const lsq::Summary summary = lsq::solve(problem, x, opts);
  if (!summary.converged) {
    throw Error(Errc::NoConvergence, "triangulation refinement hit the iteration cap");
  }

  Candidate3D cand;
  cand.position = x.head<3>();
  double total = 0.0;
  for (const auto& v : views) {
    cand.subset.push_back(v.camera->id);
    total += reprojection_error(*v.camera, v.observation.pixel, cand.position);
  }
  std::sort(cand.subset.begin(), cand.subset.end());
  cand.mean_reproj_error = total / static_cast<double>(views.size());
  return cand;
}

CandidateSet enumerate_candidates(std::span<const JointView> views,
                                  const TriangulationOptions& options) {
  const std::vector<JointView> live = usable(views);
  if (live.size() < 2) {
    throw Error(Errc::InsufficientViews, "fewer than two cameras observed the joint");
  }
  if (live.size() > 20) {
    throw Error(Errc::InvalidArgument, "too many views for subset enumeration");
  }
  CandidateSet out;
  const unsigned full = (1U << live.size()) - 1U;
  // Ordered by subset size, then by the bitmask over id-sorted views.
  std::vector<unsigned> masks;
  for (unsigned mask = 1; mask <= full; ++mask) {
    if (std::popcount(mask) >= 2) masks.push_back(mask);
  }
  std::stable_sort(masks.begin(), masks.end(),
                   [](unsigned a, unsigned b) { return std::popcount(a) < std::popcount(b); });
  for (unsigned mask : masks) {
    std::vector<JointView> subset;
    for (std::size_t i = 0; i < live.size(); ++i) {
      if ((mask >> i) & 1U) subset.push_back(live[i]);
    }
    try {
      out.candidates.push_back(triangulate_subset(subset, options));
    } catch (const Error& e) {
      SkippedSubset skip;
      for (const auto& v : subset) skip.subset.push_back(v.camera->id);
      skip.reason = e.what();
      out.skipped.push_back(std::move(skip));
    }
  }
  return out;
}

double weighted_cost(const Vec3& position, std::span<const JointView> views) {
  double cost = 0.0;
  for (const auto& v : views) {
    if (v.camera == nullptr || v.observation.visibility == 0) continue;
    const Vec3 pc = v.camera->extrinsics.to_camera(position);
    if (pc.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
    cost += v.observation.confidence * reprojection_error(*v.camera, v.observation.pixel, position);
  }
  return cost;
}

bool candidate_precedes(const Candidate3D& a, double cost_a, const Candidate3D& b, double cost_b,
                        double tie_tolerance) {
  if (std::abs(cost_a - cost_b) > tie_tolerance) return cost_a < cost_b;
  if (a.subset.size() != b.subset.size()) return a.subset.size() > b.subset.size();
  if (std::abs(a.mean_reproj_error - b.mean_reproj_error) > tie_tolerance) {
    return a.mean_reproj_error < b.mean_reproj_error;
  }
  return a.subset < b.subset;
}

ScoredKeypoint3D select_best(std::span<const Candidate3D> candidates,
                             std::span<const JointView> views, JointId joint, int timestep,
                             const TriangulationOptions& options) {
  if (candidates.empty()) throw Error(Errc::EmptyInput, "no candidates to select from");
  std::size_t best = 0;
  double best_cost = weighted_cost(candidates[0].position, views);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double c = weighted_cost(candidates[i].position, views);
    if (candidate_precedes(candidates[i], c, candidates[best], best_cost, options.tie_tolerance)) {
      best = i;
      best_cost = c;
    }
  }
  const Candidate3D& win = candidates[best];

  ScoredKeypoint3D out;
  out.joint = joint;
  out.timestep = timestep;
  out.position = win.position;
  out.winning_subset = win.subset;
  double rho = 0.0;
  double vis = 0.0;
  int count = 0;
  for (const auto& v : views) {
    if (v.camera == nullptr) continue;
    if (!std::binary_search(win.subset.begin(), win.subset.end(), v.camera->id)) continue;
    rho += v.observation.confidence;
    vis += v.observation.visibility;
    ++count;
  }
  if (count > 0) {
    out.score.confidence = rho / count;
    out.score.visibility = vis / count;
  }
  out.score.inv_err = 1.0 / std::max(win.mean_reproj_error, options.error_floor);
  return out;
}

FrameTriangulation triangulate_frame(const CameraRig& rig,
                                     std::span<const FrameObservations> frames, int timestep,
                                     const TriangulationOptions& options) {
  FrameTriangulation result;
  for (JointId joint : kAllJoints) {
    std::vector<JointView> views;
    for (const auto& frame : frames) {
      const Observation2D* obs = frame.find(joint);
      if (obs == nullptr) continue;
      auto cam = std::find_if(rig.begin(), rig.end(),
                              [&](const Camera& c) { return c.id == frame.camera_id(); });
      if (cam == rig.end()) continue;
      views.push_back({&*cam, *obs});
    }
    try {
      const CandidateSet set = enumerate_candidates(views, options);
      for (const auto& skip : set.skipped) {
        result.log.push_back("t=" + std::to_string(timestep) + " " +
                             std::string(joint_name(joint)) + " skipped {" + join(skip.subset) +
                             "}: " + skip.reason);
      }
      if (set.candidates.empty()) continue;
      result.keypoints.push_back(select_best(set.candidates, views, joint, timestep, options));
    } catch (const Error& e) {
      result.log.push_back("t=" + std::to_string(timestep) + " " +
                           std::string(joint_name(joint)) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace carm
