#pragma once

#include "carm/geometry.hpp"
#include "carm/observation.hpp"

#include <random>

namespace carm::test {

inline Intrinsics<double> vga_intrinsics() {
  Intrinsics<double> k;
  k.fx = k.fy = 525.0;
  k.cx = 319.5;
  k.cy = 239.5;
  k.image_width = 640;
  k.image_height = 480;
  return k;
}

inline Vec3 uniform_in_box(std::mt19937_64& rng, const Vec3& lo, const Vec3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng);
  const double b = u(rng);
  const double c = u(rng);
  return lo + Vec3(a, b, c).cwiseProduct(hi - lo);
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double x = g(rng);
  const double y = g(rng);
  const double z = g(rng);
  const double w = g(rng);
  return Eigen::Quaterniond(w, x, y, z).normalized().toRotationMatrix();
}

/// Camera about `distance` mm from `target`, looking at it from above.
inline Camera camera_around(std::mt19937_64& rng, std::string id, const Vec3& target,
                            double distance) {
  std::uniform_real_distribution<double> az(-kPi, kPi);
  std::uniform_real_distribution<double> el(deg2rad(35.0), deg2rad(80.0));
  const double a = az(rng);
  const double e = el(rng);
  const Vec3 eye =
      target + distance * Vec3(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e));
  return look_at(std::move(id), vga_intrinsics(), eye, target);
}

/// Applies the room transform p -> r p + t to a camera so that it sees the
/// transformed scene exactly as it saw the original.
inline Camera transform_camera(const Camera& cam, const Mat3& r, const Vec3& t) {
  Camera out = cam;
  out.extrinsics.rotation = cam.extrinsics.rotation * r.transpose();
  out.extrinsics.translation = cam.extrinsics.translation - out.extrinsics.rotation * t;
  return out;
}

}  // namespace carm::test
