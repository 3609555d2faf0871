#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace handxfer {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Rigid body pose. Rotation is a unit quaternion stored (w, x, y, z),
// right-handed, active. Applying the transform to a point p gives R p + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Quat::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Quat& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) {
    return {Quat::Identity(), t};
  }
  static RigidTransform from_rotation(const Quat& q) { return {q, Vec3::Zero()}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle);

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  // this * other: apply `other` first, then `this`.
  RigidTransform compose(const RigidTransform& other) const;
  RigidTransform inverse() const;

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

  RigidTransform operator*(const RigidTransform& other) const {
    return compose(other);
  }

  bool operator==(const RigidTransform& other) const {
    return rotation_.coeffs() == other.rotation_.coeffs() &&
           translation_ == other.translation_;
  }

 private:
  Quat rotation_;
  Vec3 translation_;
};

// Geodesic angle between two orientations, in [0, pi].
double geodesic_angle(const Quat& a, const Quat& b);

// Rotation vector (axis * angle) of `q`, angle in [0, pi].
Vec3 rotation_log(const Quat& q);

// Quaternion renormalized only when it drifts more than 1e-12 from unit
// length, so values read back from disk keep their exact bits.
Quat normalized_if_needed(const Quat& q);

}  // namespace handxfer
