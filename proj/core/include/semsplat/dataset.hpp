#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semsplat/camera.hpp"
#include "semsplat/gaussian_map.hpp"

namespace semsplat {

enum class PrimitiveKind { Box, Sphere };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Box;
  Vec3 center = Vec3::Zero();
  Vec3 half_extent = Vec3::Constant(0.5);  // boxes
  double radius = 0.5;                     // spheres
  int class_id = 0;
  Vec3 albedo = Vec3::Constant(0.7);
  /// Checker period in meters; 0 disables the texture.
  double checker = 0.0;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  Vec3 bounds_min = Vec3::Constant(-5.0);
  Vec3 bounds_max = Vec3::Constant(5.0);
  int num_classes = 6;
  /// Seeded random primitives added inside the bounds by generate_scene.
  int random_primitives = 0;
  std::uint64_t seed = 0;
};

struct Scene {
  std::vector<Primitive> primitives;
  int num_classes = 6;
  Vec3 light_direction = Vec3(-0.4, -0.3, -1.0).normalized();  // direction light travels
  double ambient = 0.35;
  /// Color is averaged over an n x n grid of rays per pixel, like a sensor
  /// integrating over its area. Depth and label come from the center ray.
  int color_samples = 4;
};

/// Validates the spec and expands its random primitives. Deterministic in the seed.
Scene generate_scene(const SceneSpec& spec);

/// Floor plus three boxes and two spheres, six classes.
SceneSpec room0_synth_spec();

enum class TrajectoryKind { Orbit, Lissajous, Straight };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Orbit;
  int frames = 100;
  Vec3 target = Vec3::Zero();
  // Orbit: circle of `radius` at `height` above the target, sweeping `arc_deg`
  // from `start_deg`; the last frame lies at start + arc. The default arc over
  // 100 frames moves the camera about 1.1 cm and 0.4 degrees per frame.
  double radius = 1.6;
  double height = 0.9;
  double start_deg = 0.0;
  double arc_deg = 40.0;
  // Lissajous: eye = center + amplitude * sin(2 pi frequency t + phase), t in [0,1].
  Vec3 center = Vec3(1.2, 0.0, 0.9);
  Vec3 amplitude = Vec3(0.2, 0.3, 0.1);
  Vec3 frequency = Vec3(1.0, 2.0, 3.0);
  Vec3 phase = Vec3(0.0, 0.5, 0.0);
  // Straight line from start to end.
  Vec3 start = Vec3(1.5, -0.3, 0.9);
  Vec3 end = Vec3(1.5, 0.3, 0.9);

  void validate() const;
};

std::vector<Pose> generate_trajectory(const TrajectorySpec& spec);

/// Nearest-hit ray cast per pixel: exact z-depth, Lambertian-shaded albedo,
/// class label. Misses give depth 0, black color and kIgnoreLabel.
Frame render_ground_truth(const Scene& scene, const Pose& pose, const CameraIntrinsics& intr, int threads = 1);

/// Ray parameter of the nearest intersection with t > t_min, or +inf.
double intersect(const Primitive& prim, const Vec3& origin, const Vec3& dir, double t_min, Vec3* normal = nullptr);

struct Sequence {
  CameraIntrinsics intr;
  int num_classes = 6;
  std::uint64_t scene_seed = 0;
  std::vector<Frame> frames;
  std::vector<Pose> gt_poses;
};

Sequence generate_sequence(const Scene& scene, const TrajectorySpec& traj, const CameraIntrinsics& intr,
                           std::uint64_t scene_seed, int threads = 1);

/// Layout: rgb/%06d.ppm, depth/%06d.pfm, label/%06d.pgm, gt_traj.txt, meta.json.
void save_sequence(const std::filesystem::path& dir, const Sequence& seq);
/// Throws InputError naming the offending file.
Sequence load_sequence(const std::filesystem::path& dir);

std::string frame_file_name(int index, const std::string& ext);

}  // namespace semsplat
