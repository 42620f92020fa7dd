#pragma once

#include "carm/types.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace carm {

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

/// Axis-aligned box given by its min and max corners.
struct Box {
  Vec3 min_corner;
  Vec3 max_corner;

  [[nodiscard]] Vec3 center() const { return 0.5 * (min_corner + max_corner); }
  [[nodiscard]] bool contains(const Vec3& p) const {
    return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
  }
};

struct Sphere {
  Vec3 center;
  double radius = 0.0;
};

/// Segment with a radius; used for skeleton limbs and arc segments.
struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
};

/// Box with half extents along the columns of `axes` (room frame).
struct OrientedBox {
  Vec3 center;
  Mat3 axes = Mat3::Identity();
  Vec3 half_extents;
};

using Primitive = std::variant<Box, Sphere, Capsule, OrientedBox>;

/// Smallest ray parameter t > t_min at which the ray enters the primitive.
std::optional<double> intersect(const Ray& ray, const Box& box, double t_min = 1e-6);
std::optional<double> intersect(const Ray& ray, const Sphere& sphere, double t_min = 1e-6);
std::optional<double> intersect(const Ray& ray, const Capsule& capsule, double t_min = 1e-6);
std::optional<double> intersect(const Ray& ray, const OrientedBox& box, double t_min = 1e-6);
std::optional<double> intersect(const Ray& ray, const Primitive& primitive, double t_min = 1e-6);

/// Unsigned distance from a point to the primitive surface (0 inside solids
/// is not reported: interior points return their distance to the boundary).
double surface_distance(const Vec3& p, const Primitive& primitive);

/// Signed distance: negative inside the solid.
double signed_distance(const Vec3& p, const Primitive& primitive);

Primitive translated(const Primitive& primitive, const Vec3& delta);

}  // namespace carm
