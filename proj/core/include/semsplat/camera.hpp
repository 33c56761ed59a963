#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace semsplat {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole camera. Pixel (u, v) has its center at coordinates (u, v);
/// camera frame is x right, y down, z forward.
struct CameraIntrinsics {
  double fx = 50.0;
  double fy = 50.0;
  double cx = 31.5;
  double cy = 23.5;
  int width = 64;
  int height = 48;
  double near = 0.01;
  double far = 20.0;

  bool valid() const;
  void validate() const;  // throws ContractViolation

  /// Default desk-scale camera (about 65 degrees horizontal field of view).
  static CameraIntrinsics desk(int width, int height);
};

/// Rigid world-from-camera transform. The quaternion is kept unit-norm.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_matrix(const Mat3& r, const Vec3& t);
  /// Camera at `eye` looking at `target`; `up` is the world up direction.
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
  Vec3 forward() const { return rotation * Vec3::UnitZ(); }
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
  void normalize();
  bool valid(double tol = 1e-9) const;
};

Vec3 camera_to_world(const Pose& pose, const Vec3& p_cam);
Vec3 world_to_camera(const Pose& pose, const Vec3& p_world);

/// Projects a camera-frame point to pixel coordinates.
Eigen::Vector2d project(const CameraIntrinsics& intr, const Vec3& p_cam);
/// Camera-frame point at z-depth `depth` through pixel coordinates (u, v).
Vec3 unproject(const CameraIntrinsics& intr, double u, double v, double depth);

/// Angle of the relative rotation between two poses, in degrees.
double rotation_angle_deg(const Pose& a, const Pose& b);
double translation_distance(const Pose& a, const Pose& b);

}  // namespace semsplat
