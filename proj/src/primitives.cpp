#include "carm/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace carm {

namespace {

std::optional<double> slab_intersect(const Vec3& origin, const Vec3& dir, const Vec3& lo,
                                     const Vec3& hi, double t_min) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dir(i)) < 1e-15) {
      if (origin(i) < lo(i) || origin(i) > hi(i)) return std::nullopt;
      continue;
    }
    double a = (lo(i) - origin(i)) / dir(i);
    double b = (hi(i) - origin(i)) / dir(i);
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 > t_min) return t0;
  if (t1 > t_min) return t1;
  return std::nullopt;
}

std::optional<double> sphere_hit(const Vec3& origin, const Vec3& dir, const Vec3& center,
                                 double radius, double t_min) {
  const Vec3 oc = origin - center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0) return std::nullopt;
  const double s = std::sqrt(disc);
  if (-b - s > t_min) return -b - s;
  if (-b + s > t_min) return -b + s;
  return std::nullopt;
}

double box_signed_distance(const Vec3& p, const Vec3& center, const Vec3& half) {
  const Vec3 q = (p - center).cwiseAbs() - half;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

}  // namespace

std::optional<double> intersect(const Ray& ray, const Box& box, double t_min) {
  return slab_intersect(ray.origin, ray.direction, box.min_corner, box.max_corner, t_min);
}

std::optional<double> intersect(const Ray& ray, const Sphere& sphere, double t_min) {
  return sphere_hit(ray.origin, ray.direction, sphere.center, sphere.radius, t_min);
}

std::optional<double> intersect(const Ray& ray, const Capsule& capsule, double t_min) {
  // Infinite cylinder clipped to the segment, plus the two end caps.
  std::optional<double> best;
  auto consider = [&](std::optional<double> t) {
    if (t && (!best || *t < *best)) best = t;
  };
  const Vec3 axis = capsule.b - capsule.a;
  const double len = axis.norm();
  if (len > 1e-12) {
    const Vec3 u = axis / len;
    const Vec3 oc = ray.origin - capsule.a;
    const Vec3 d_perp = ray.direction - ray.direction.dot(u) * u;
    const Vec3 o_perp = oc - oc.dot(u) * u;
    const double a = d_perp.squaredNorm();
    const double b = o_perp.dot(d_perp);
    const double c = o_perp.squaredNorm() - capsule.radius * capsule.radius;
    const double disc = b * b - a * c;
    if (a > 1e-15 && disc >= 0) {
      const double s = std::sqrt(disc);
      for (double t : {(-b - s) / a, (-b + s) / a}) {
        if (t <= t_min) continue;
        const double h = (oc + t * ray.direction).dot(u);
        if (h >= 0 && h <= len) {
          consider(t);
          break;
        }
      }
    }
  }
  consider(sphere_hit(ray.origin, ray.direction, capsule.a, capsule.radius, t_min));
  consider(sphere_hit(ray.origin, ray.direction, capsule.b, capsule.radius, t_min));
  return best;
}

std::optional<double> intersect(const Ray& ray, const OrientedBox& box, double t_min) {
  const Vec3 o = box.axes.transpose() * (ray.origin - box.center);
  const Vec3 d = box.axes.transpose() * ray.direction;
  return slab_intersect(o, d, -box.half_extents, box.half_extents, t_min);
}

std::optional<double> intersect(const Ray& ray, const Primitive& primitive, double t_min) {
  return std::visit([&](const auto& p) { return intersect(ray, p, t_min); }, primitive);
}

double signed_distance(const Vec3& p, const Primitive& primitive) {
  struct Visitor {
    const Vec3& p;
    double operator()(const Box& b) const {
      return box_signed_distance(p, b.center(), 0.5 * (b.max_corner - b.min_corner));
    }
    double operator()(const Sphere& s) const { return (p - s.center).norm() - s.radius; }
    double operator()(const Capsule& c) const {
      const Vec3 ab = c.b - c.a;
      const double len2 = ab.squaredNorm();
      const double h = len2 > 0 ? std::clamp((p - c.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      return (p - (c.a + h * ab)).norm() - c.radius;
    }
    double operator()(const OrientedBox& b) const {
      return box_signed_distance(b.axes.transpose() * (p - b.center), Vec3::Zero(),
                                 b.half_extents);
    }
  };
  return std::visit(Visitor{p}, primitive);
}

double surface_distance(const Vec3& p, const Primitive& primitive) {
  return std::abs(signed_distance(p, primitive));
}

Primitive translated(const Primitive& primitive, const Vec3& delta) {
  struct Visitor {
    const Vec3& d;
    Primitive operator()(Box b) const {
      b.min_corner += d;
      b.max_corner += d;
      return b;
    }
    Primitive operator()(Sphere s) const {
      s.center += d;
      return s;
    }
    Primitive operator()(Capsule c) const {
      c.a += d;
      c.b += d;
      return c;
    }
    Primitive operator()(OrientedBox b) const {
      b.center += d;
      return b;
    }
  };
  return std::visit(Visitor{delta}, primitive);
}

}  // namespace carm
