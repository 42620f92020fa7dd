#pragma once

#include <Eigen/Dense>

#include <vector>

namespace carm {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;
using Vec3i = Eigen::Vector3i;

// Fixed-size Eigen members inside std::vector need no aligned allocator for
// these sizes (no vectorized 16-byte types), so plain vectors are used.
using Points3 = std::vector<Vec3>;

struct PointCloud {
  Points3 points;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
};

/// Rotation about a unit axis by `angle` radians.
template <typename Scalar>
Matrix3<Scalar> axis_angle(const Vector3<Scalar>& axis, Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, axis.normalized()).toRotationMatrix();
}

/// Rodrigues map from a rotation vector to a rotation matrix.
template <typename Scalar>
Matrix3<Scalar> rotation_from_vector(const Vector3<Scalar>& omega) {
  const Scalar theta = omega.norm();
  if (theta < Scalar(1e-12)) {
    Matrix3<Scalar> skew;
    skew << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(),
        omega.x(), 0;
    return Matrix3<Scalar>::Identity() + skew;
  }
  return Eigen::AngleAxis<Scalar>(theta, omega / theta).toRotationMatrix();
}

template <typename Scalar>
Vector3<Scalar> vector_from_rotation(const Matrix3<Scalar>& rotation) {
  const Eigen::AngleAxis<Scalar> aa(rotation);
  return aa.axis() * aa.angle();
}

/// Project a near-rotation onto SO(3) via SVD.
template <typename Scalar>
Matrix3<Scalar> nearest_rotation(const Matrix3<Scalar>& m) {
  Eigen::JacobiSVD<Matrix3<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<Scalar> d = Matrix3<Scalar>::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? Scalar(-1) : Scalar(1);
  return svd.matrixU() * d * svd.matrixV().transpose();
}

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

}  // namespace carm
