#include "handxfer/transform.hpp"

#include <algorithm>
#include <cmath>

namespace handxfer {

Quat normalized_if_needed(const Quat& q) {
  const double n = q.norm();
  if (std::abs(n - 1.0) > 1e-12) {
    return Quat(q.coeffs() / n);
  }
  return q;
}

RigidTransform::RigidTransform(const Quat& rotation, const Vec3& translation)
    : rotation_(normalized_if_needed(rotation)), translation_(translation) {}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle) {
  return from_rotation(Quat(Eigen::AngleAxisd(angle, axis.normalized())));
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  return {rotation_ * other.rotation_,
          rotation_ * other.translation_ + translation_};
}

RigidTransform RigidTransform::inverse() const {
  const Quat inv = rotation_.conjugate();
  return {inv, -(inv * translation_)};
}

double geodesic_angle(const Quat& a, const Quat& b) {
  const double dot = std::min(1.0, std::abs(a.coeffs().dot(b.coeffs())));
  return 2.0 * std::acos(dot);
}

Vec3 rotation_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

}  // namespace handxfer
