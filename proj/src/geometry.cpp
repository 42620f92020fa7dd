#include "carm/geometry.hpp"

#include "carm/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace carm {

Camera look_at(std::string id, const Intrinsics<double>& intrinsics, const Vec3& eye,
               const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitX());
  x.normalize();
  const Vec3 y = z.cross(x);
  Camera cam;
  cam.id = std::move(id);
  cam.intrinsics = intrinsics;
  cam.extrinsics.rotation.row(0) = x.transpose();
  cam.extrinsics.rotation.row(1) = y.transpose();
  cam.extrinsics.rotation.row(2) = z.transpose();
  cam.extrinsics.translation = -cam.extrinsics.rotation * eye;
  return cam;
}

namespace {

void check_configuration(std::span<const Correspondence> corr, double ratio) {
  if (corr.size() < 6) {
    throw Error(Errc::DegenerateConfiguration, "PnP needs at least 6 correspondences");
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& c : corr) mean += c.point_room;
  mean /= static_cast<double>(corr.size());
  Eigen::MatrixXd centered(corr.size(), 3);
  for (std::size_t i = 0; i < corr.size(); ++i) {
    centered.row(static_cast<Eigen::Index>(i)) = (corr[i].point_room - mean).transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(2) < ratio * sv(0)) {
    throw Error(Errc::DegenerateConfiguration,
                "marker points are collinear, coplanar or coincident");
  }
}

// Normalized DLT on K^-1 pixels: returns an initial [R | t].
Extrinsics<double> dlt_pose(std::span<const Correspondence> corr, const Intrinsics<double>& k) {
  const Mat3 k_inv = k.matrix().inverse();
  const auto n = static_cast<Eigen::Index>(corr.size());

  Vec3 mean = Vec3::Zero();
  for (const auto& c : corr) mean += c.point_room;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& c : corr) spread += (c.point_room - mean).norm();
  spread /= static_cast<double>(n);
  const double scale = std::sqrt(3.0) / spread;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = corr[static_cast<std::size_t>(i)];
    const Vec3 xn = k_inv * c.point_pixel.homogeneous();
    Eigen::Vector4d p;
    p << (c.point_room - mean) * scale, 1.0;
    a.block<1, 4>(2 * i, 0) = p.transpose();
    a.block<1, 4>(2 * i, 8) = -xn.x() * p.transpose();
    a.block<1, 4>(2 * i + 1, 4) = p.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -xn.y() * p.transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(), h.segment<4>(8).transpose();

  // Undo the point normalization: X_norm = scale * (X - mean).
  Mat3 m = proj.leftCols<3>() * scale;
  Vec3 t = proj.col(3) - m * mean;

  const Eigen::JacobiSVD<Mat3> msvd(m);
  const double s = msvd.singularValues().mean();
  m /= s;
  t /= s;
  if (m.determinant() < 0) {
    m = -m;
    t = -t;
  }
  Extrinsics<double> pose;
  pose.rotation = nearest_rotation(m);
  pose.translation = t;
  // Points must sit in front of the camera; otherwise the sign was wrong.
  int behind = 0;
  for (const auto& c : corr) {
    if (pose.to_camera(c.point_room).z() <= 0) ++behind;
  }
  if (2 * behind > static_cast<int>(corr.size())) {
    pose.rotation = nearest_rotation(Mat3(-m));
    pose.translation = -t;
  }
  return pose;
}

double median_reprojection_error(const Extrinsics<double>& pose,
                                 std::span<const Correspondence> corr,
                                 const Intrinsics<double>& k) {
  const Camera cam{"", k, pose};
  std::vector<double> errors;
  errors.reserve(corr.size());
  for (const auto& c : corr) {
    errors.push_back(cam.extrinsics.to_camera(c.point_room).z() > kMinDepth
                         ? reprojection_error(cam, c.point_pixel, c.point_room)
                         : std::numeric_limits<double>::infinity());
  }
  const auto mid = errors.begin() + static_cast<std::ptrdiff_t>(errors.size() / 2);
  std::nth_element(errors.begin(), mid, errors.end());
  return *mid;
}

// Least-median-of-squares over minimal DLT subsets: exhaustive for small
// sets, a fixed-seed sample otherwise.
Extrinsics<double> lmeds_pose(std::span<const Correspondence> corr, const Intrinsics<double>& k,
                              double degenerate_ratio) {
  constexpr std::size_t kSubset = 6;
  constexpr int kMaxSubsets = 500;
  Extrinsics<double> best = dlt_pose(corr, k);
  double best_error = median_reprojection_error(best, corr, k);

  auto try_subset = [&](const std::vector<std::size_t>& idx) {
    std::vector<Correspondence> sub;
    for (std::size_t i : idx) sub.push_back(corr[i]);
    try {
      check_configuration(sub, degenerate_ratio);
    } catch (const Error&) {
      return;
    }
    const Extrinsics<double> pose = dlt_pose(sub, k);
    const double e = median_reprojection_error(pose, corr, k);
    if (e < best_error) {
      best_error = e;
      best = pose;
    }
  };

  const std::size_t n = corr.size();
  double combos = 1.0;
  for (std::size_t i = 0; i < kSubset; ++i) {
    combos *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  }
  if (combos <= kMaxSubsets) {
    std::vector<bool> mask(n, false);
    std::fill(mask.begin(), mask.begin() + kSubset, true);
    do {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask[i]) idx.push_back(i);
      }
      try_subset(idx);
    } while (std::prev_permutation(mask.begin(), mask.end()));
  } else {
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (int s = 0; s < kMaxSubsets; ++s) {
      std::shuffle(all.begin(), all.end(), rng);
      try_subset({all.begin(), all.begin() + kSubset});
    }
  }

  // Refit on the inliers of the best minimal pose; a 6-point DLT alone is
  // too noise-sensitive to start from.
  const double sigma = 1.4826 * (1.0 + 5.0 / static_cast<double>(n - kSubset)) * best_error;
  const double threshold = std::max(2.5 * sigma, 1e-6);
  const Camera cam{"", k, best};
  std::vector<Correspondence> inliers;
  for (const auto& c : corr) {
    if (cam.extrinsics.to_camera(c.point_room).z() > kMinDepth &&
        reprojection_error(cam, c.point_pixel, c.point_room) <= threshold) {
      inliers.push_back(c);
    }
  }
  if (inliers.size() > kSubset) {
    try {
      check_configuration(inliers, degenerate_ratio);
      const Extrinsics<double> refit = dlt_pose(inliers, k);
      if (median_reprojection_error(refit, corr, k) <= 2.0 * best_error) return refit;
    } catch (const Error&) {
    }
  }
  return best;
}

struct PnpProblem {
  std::span<const Correspondence> corr;
  const Intrinsics<double>& k;
  Mat3 base_rotation;

  [[nodiscard]] int block_size() const { return 2; }

  [[nodiscard]] Extrinsics<double> pose(const Eigen::VectorXd& x) const {
    Extrinsics<double> e;
    e.rotation = rotation_from_vector<double>(x.head<3>()) * base_rotation;
    e.translation = x.tail<3>();
    return e;
  }

  [[nodiscard]] Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    const Extrinsics<double> e = pose(x);
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(corr.size()));
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const Vec3 pc = e.to_camera(corr[i].point_room);
      const double z = std::max(pc.z(), kMinDepth);
      r(2 * i) = k.fx * pc.x() / z + k.cx - corr[i].point_pixel.x();
      r(2 * i + 1) = k.fy * pc.y() / z + k.cy - corr[i].point_pixel.y();
    }
    return r;
  }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    r = residuals(x);
    if (jac != nullptr) {
      *jac = lsq::numeric_jacobian([this](const Eigen::VectorXd& v) { return residuals(v); }, x,
                                   r.size());
    }
  }
};


// Correspondences within three robust sigmas (at least `min_threshold`) of
// the pose; empty when the remainder would be unusable or nothing is dropped.
std::vector<Correspondence> gate_inliers(const Extrinsics<double>& pose,
                                         std::span<const Correspondence> corr,
                                         const Intrinsics<double>& k, double min_threshold,
                                         double degenerate_ratio) {
  const Camera cam{"", k, pose};
  std::vector<double> errors;
  for (const auto& c : corr) {
    errors.push_back(cam.extrinsics.to_camera(c.point_room).z() > kMinDepth
                         ? reprojection_error(cam, c.point_pixel, c.point_room)
                         : std::numeric_limits<double>::infinity());
  }
  std::vector<double> sorted = errors;
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double threshold = std::max(3.0 * 1.4826 * *mid, min_threshold);
  std::vector<Correspondence> inliers;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (errors[i] <= threshold) inliers.push_back(corr[i]);
  }
  if (inliers.size() < 6 || inliers.size() == corr.size()) return {};
  try {
    check_configuration(inliers, degenerate_ratio);
  } catch (const Error&) {
    return {};
  }
  return inliers;
}

Extrinsics<double> refine_pose(std::span<const Correspondence> corr, const Intrinsics<double>& k,
                               const Extrinsics<double>& init, const lsq::Options& opts) {
  PnpProblem problem{corr, k, init.rotation};
  Eigen::VectorXd x(6);
  x << 0, 0, 0, init.translation;
  if (!lsq::solve(problem, x, opts).converged) {
    throw Error(Errc::NoConvergence, "PnP refinement hit the iteration cap");
  }
  return problem.pose(x);
}

}  // namespace

Extrinsics<double> solve_pnp(std::span<const Correspondence> correspondences,
                             const Intrinsics<double>& intrinsics, bool robust,
                             const PnpOptions& options) {
  intrinsics.validate();
  check_configuration(correspondences, options.degenerate_ratio);
  // Canonical order makes the result independent of the input ordering.
  std::vector<Correspondence> corr(correspondences.begin(), correspondences.end());
  std::sort(corr.begin(), corr.end(), [](const Correspondence& a, const Correspondence& b) {
    return std::lexicographical_compare(a.point_room.data(), a.point_room.data() + 3,
                                        b.point_room.data(), b.point_room.data() + 3) ||
           (a.point_room == b.point_room &&
            std::lexicographical_compare(a.point_pixel.data(), a.point_pixel.data() + 2,
                                         b.point_pixel.data(), b.point_pixel.data() + 2));
  });

  lsq::Options opts;
  opts.max_iterations = options.max_iterations;
  opts.step_tolerance = options.step_tolerance;
  opts.cost_tolerance = options.cost_tolerance;
  opts.huber_delta = robust ? options.huber_delta : 0.0;

  Extrinsics<double> pose;
  if (!robust) {
    pose = refine_pose(corr, intrinsics, dlt_pose(corr, intrinsics), opts);
  } else {
    // Consensus start, Huber refinement on its inliers, then one more pass
    // after re-gating against the refined pose: Huber alone still lets gross
    // outliers pull with force delta.
    const Extrinsics<double> init = lmeds_pose(corr, intrinsics, options.degenerate_ratio);
    std::vector<Correspondence> active =
        gate_inliers(init, corr, intrinsics, 3.0 * options.huber_delta, options.degenerate_ratio);
    if (active.empty()) active = corr;
    pose = refine_pose(active, intrinsics, init, opts);
    const std::vector<Correspondence> inliers =
        gate_inliers(pose, corr, intrinsics, options.huber_delta, options.degenerate_ratio);
    if (!inliers.empty() && inliers.size() != active.size()) {
      pose = refine_pose(inliers, intrinsics, pose, opts);
    }
  }
  pose.rotation = nearest_rotation(pose.rotation);
  return pose;
}

double reprojection_rms(const Camera& camera, std::span<const Correspondence> correspondences) {
  if (correspondences.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : correspondences) {
    const double e = reprojection_error(camera, c.point_pixel, c.point_room);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(correspondences.size()));
}

void DepthImage::validate() const {
  if (width < 0 || height < 0 ||
      values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::InvalidArgument, "depth image size does not match its header");
  }
  for (double d : values) {
    if (!std::isfinite(d) || d < 0.0) {
      throw Error(Errc::InvalidArgument, "depth values must be finite and non-negative");
    }
  }
}

PointCloud unproject_depth(const Camera& camera, const DepthImage& depth, int stride) {
  if (stride < 1) throw Error(Errc::InvalidArgument, "stride must be positive");
  const auto& k = camera.intrinsics;
  const Mat3 rt = camera.extrinsics.rotation.transpose();
  const Vec3& t = camera.extrinsics.translation;
  PointCloud cloud;
  for (int v = 0; v < depth.height; v += stride) {
    for (int u = 0; u < depth.width; u += stride) {
      const double d = depth.at(u, v);
      if (d <= 0.0) continue;
      const Vec3 pc((u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d);
      cloud.points.emplace_back(rt * (pc - t));
    }
  }
  return cloud;
}

}  // namespace carm
