#pragma once

#include <filesystem>
#include <vector>

#include "semsplat/camera.hpp"
#include "semsplat/gaussian_map.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/renderer.hpp"
#include "semsplat/semantics.hpp"

namespace semsplat {

struct TrackerConfig {
  int iterations = 60;
  double learning_rate = 0.0005;
  double tolerance = 1e-6;   // loss changes smaller than this count as flat
  int patience = 5;          // consecutive flat iterations before stopping
  // The camera is parameterized by a pivot on its optical axis, this fraction of the
  // frame's median depth ahead of the camera (0 puts the pivot at the camera center).
  double pivot_depth_fraction = 1.0;
  // Pivot coordinates are optimized in units of this many meters.
  double translation_step_scale = 8.0;
  // Quaternion components likewise, in units of this scale.
  double rotation_step_scale = 4.0;
  LossWeights weights;
  RenderOptions render;

  void validate() const;
};

/// Constant linear and angular velocity extrapolation from the two previous poses.
Pose init_pose(const Pose& prev, const Pose& prev2);

struct TrackResult {
  Pose pose;
  double loss = 0.0;
  double initial_loss = 0.0;
  int iterations = 0;
};

/// Refines `init` against the frame by Adam on the masked tracking loss.
/// Returns the best pose seen; the map is never modified.
TrackResult track(const GaussianMap& map, const SemanticNets& nets, const Frame& frame, const Pose& init,
                  const CameraIntrinsics& intr, const TrackerConfig& cfg);

/// Tracking loss of a pose (renders once).
double evaluate_tracking_loss(const GaussianMap& map, const SemanticNets& nets, const Frame& frame, const Pose& pose,
                              const CameraIntrinsics& intr, const TrackerConfig& cfg);

/// Lines of "frame_index tx ty tz qx qy qz qw".
void write_tum_trajectory(const std::filesystem::path& path, const std::vector<Pose>& poses,
                          const std::vector<int>& indices = {});
void append_tum_pose(const std::filesystem::path& path, int index, const Pose& pose);
std::vector<Pose> read_tum_trajectory(const std::filesystem::path& path, std::vector<double>* stamps = nullptr);

}  // namespace semsplat
