#pragma once

#include "carm/error.hpp"
#include "carm/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace carm {

template <typename Scalar>
struct Intrinsics {
  Scalar fx{1};
  Scalar fy{1};
  Scalar cx{0};
  Scalar cy{0};
  int image_width{1};
  int image_height{1};

  [[nodiscard]] Matrix3<Scalar> matrix() const {
    Matrix3<Scalar> k;
    k << fx, Scalar(0), cx, Scalar(0), fy, cy, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }

  [[nodiscard]] bool contains(const Vector2<Scalar>& pixel) const {
    return pixel.x() >= Scalar(0) && pixel.y() >= Scalar(0) &&
           pixel.x() < Scalar(image_width) && pixel.y() < Scalar(image_height);
  }

  void validate() const {
    if (!(fx > Scalar(0) && fy > Scalar(0))) {
      throw Error(Errc::InvalidArgument, "focal lengths must be positive");
    }
    if (!(cx >= Scalar(0) && cx < Scalar(image_width) && cy >= Scalar(0) &&
          cy < Scalar(image_height))) {
      throw Error(Errc::InvalidArgument, "principal point outside the image");
    }
  }
};

/// Rigid room-to-camera transform; translation in millimeters.
template <typename Scalar>
struct Extrinsics {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  [[nodiscard]] Vector3<Scalar> to_camera(const Vector3<Scalar>& point_room) const {
    return rotation * point_room + translation;
  }
  [[nodiscard]] Vector3<Scalar> to_room(const Vector3<Scalar>& point_camera) const {
    return rotation.transpose() * (point_camera - translation);
  }
  [[nodiscard]] Vector3<Scalar> center() const { return -rotation.transpose() * translation; }

  [[nodiscard]] bool is_valid(Scalar tol = Scalar(1e-9)) const {
    const Scalar ortho = (rotation.transpose() * rotation - Matrix3<Scalar>::Identity())
                             .cwiseAbs()
                             .maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - Scalar(1)) <= tol;
  }
};

template <typename Scalar>
struct CameraModel {
  std::string id;
  Intrinsics<Scalar> intrinsics;
  Extrinsics<Scalar> extrinsics;
};

using Camera = CameraModel<double>;
using CameraRig = std::vector<Camera>;

inline constexpr double kMinDepth = 1e-9;

/// Pinhole projection of a room-frame point; throws NonPositiveDepth when the
/// point is on or behind the camera plane.
template <typename Scalar>
Vector2<Scalar> project(const CameraModel<Scalar>& camera, const Vector3<Scalar>& point_room) {
  const Vector3<Scalar> pc = camera.extrinsics.to_camera(point_room);
  if (!(pc.z() > Scalar(kMinDepth))) {
    throw Error(Errc::NonPositiveDepth, "point is behind camera " + camera.id);
  }
  const auto& k = camera.intrinsics;
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

template <typename Scalar>
Scalar reprojection_error(const CameraModel<Scalar>& camera, const Vector2<Scalar>& pixel,
                          const Vector3<Scalar>& point_room) {
  return (project(camera, point_room) - pixel).norm();
}

/// Unit ray direction in the room frame through pixel (u, v).
template <typename Scalar>
Vector3<Scalar> pixel_ray(const CameraModel<Scalar>& camera, const Vector2<Scalar>& pixel) {
  const auto& k = camera.intrinsics;
  const Vector3<Scalar> dir_cam((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, Scalar(1));
  return (camera.extrinsics.rotation.transpose() * dir_cam).normalized();
}

/// Camera at `eye` whose optical axis points at `target`; image y follows -up.
Camera look_at(std::string id, const Intrinsics<double>& intrinsics, const Vec3& eye,
               const Vec3& target, const Vec3& up = Vec3::UnitZ());

struct Correspondence {
  Vec3 point_room;
  Vec2 point_pixel;
};

struct PnpOptions {
  double huber_delta = 1.0;
  int max_iterations = 200;
  double step_tolerance = 1e-8;
  double cost_tolerance = 1e-10;
  double degenerate_ratio = 1e-6;
};

/// Camera pose from >= 6 non-degenerate 2D-3D correspondences: normalized
/// DLT followed by Levenberg-Marquardt refinement (Huber when `robust`).
Extrinsics<double> solve_pnp(std::span<const Correspondence> correspondences,
                             const Intrinsics<double>& intrinsics, bool robust,
                             const PnpOptions& options = {});

/// Root-mean-square reprojection error of a pose over correspondences.
double reprojection_rms(const Camera& camera, std::span<const Correspondence> correspondences);

/// Depth in millimeters along the optical axis; 0 marks an invalid pixel.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

  [[nodiscard]] double& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  [[nodiscard]] double at(int u, int v) const {
    return values[static_cast<std::size_t>(v) * width + u];
  }
  void validate() const;
};

PointCloud unproject_depth(const Camera& camera, const DepthImage& depth, int stride = 1);

}  // namespace carm
