#include "semsplat/camera.hpp"

#include <cmath>

#include "semsplat/errors.hpp"

namespace semsplat {

bool CameraIntrinsics::valid() const {
  return fx > 0 && fy > 0 && near > 0 && near < far && width >= 1 && height >= 1;
}

void CameraIntrinsics::validate() const {
  if (!valid()) throw ContractViolation("CameraIntrinsics: invalid parameters");
}

CameraIntrinsics CameraIntrinsics::desk(int width, int height) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = 50.0 * width / 64.0;
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  return k;
}

Pose Pose::from_matrix(const Mat3& r, const Vec3& t) {
  Pose p;
  p.rotation = Eigen::Quaterniond(r);
  p.rotation.normalize();
  p.translation = t;
  return p;
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up);
  if (right.norm() < 1e-12) right = fwd.cross(Vec3::UnitX());
  right.normalize();
  Vec3 down = fwd.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = fwd;
  return from_matrix(r, eye);
}

Pose Pose::inverse() const {
  Pose p;
  p.rotation = rotation.conjugate();
  p.translation = -(p.rotation * translation);
  return p;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose p;
  p.rotation = rotation * rhs.rotation;
  p.rotation.normalize();
  p.translation = rotation * rhs.translation + translation;
  return p;
}

void Pose::normalize() { rotation.normalize(); }

bool Pose::valid(double tol) const {
  return std::abs(rotation.norm() - 1.0) <= tol && translation.allFinite() &&
         rotation.coeffs().allFinite();
}

Vec3 camera_to_world(const Pose& pose, const Vec3& p_cam) {
  return pose.rotation_matrix() * p_cam + pose.translation;
}

Vec3 world_to_camera(const Pose& pose, const Vec3& p_world) {
  return pose.rotation_matrix().transpose() * (p_world - pose.translation);
}

Eigen::Vector2d project(const CameraIntrinsics& intr, const Vec3& p_cam) {
  return {intr.fx * p_cam.x() / p_cam.z() + intr.cx, intr.fy * p_cam.y() / p_cam.z() + intr.cy};
}

Vec3 unproject(const CameraIntrinsics& intr, double u, double v, double depth) {
  return {(u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth};
}

double rotation_angle_deg(const Pose& a, const Pose& b) {
  Eigen::Quaterniond rel = a.rotation.conjugate() * b.rotation;
  double w = std::min(1.0, std::abs(rel.normalized().w()));
  return 2.0 * std::acos(w) * 180.0 / M_PI;
}

double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation - b.translation).norm();
}

}  // namespace semsplat
