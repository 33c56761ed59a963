#pragma once

#include <vector>

#include "semsplat/camera.hpp"
#include "semsplat/gaussian_map.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/renderer.hpp"
#include "semsplat/semantics.hpp"

namespace semsplat {

/// Multipliers on the mapping learning rate per parameter group. Positions and
/// radii are in meters, where a full 0.005 step is about a pixel at desk depth.
struct LearningRateScales {
  double position = 0.2;
  double radius = 0.2;
  double opacity = 1.0;
  double color = 1.0;
  double feature = 1.0;
  double decoder = 1.0;
};

struct MapperConfig {
  int iterations = 40;
  double learning_rate = 0.005;
  LearningRateScales lr_scale;
  int keyframe_stride = 5;
  double prune_opacity = 0.005;
  double prune_radius = 0.5;   // meters
  int window_size = 10;
  /// Restrict optimization losses to pixels of the densification mask.
  bool masked_optimization = false;
  double min_radius = 1e-6;
  LossWeights weights;
  RenderOptions render;

  void validate() const;
};

/// A keyframe held in the mapping window. `features` is the encoder output for
/// the frame (H x W x 3), used when new Gaussians are inserted.
struct Keyframe {
  Frame frame;
  Pose pose;
  ImageD features;
};

bool is_keyframe(int frame_index, const MapperConfig& cfg);

/// Appends one Gaussian per densification-mask pixel with valid depth. Returns the number added.
std::size_t densify(GaussianMap& map, const Keyframe& kf, const CameraIntrinsics& intr, const LossWeights& weights,
                    const RenderOptions& render_opts = {});

struct OptimizeReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool accepted = true;
  int iterations = 0;
};

/// Window loss summed over keyframes at the current parameters.
double window_loss(const GaussianMap& map, const SemanticNets& nets, const std::vector<Keyframe>& window,
                   const CameraIntrinsics& intr, const MapperConfig& cfg);

/// Adam on all Gaussian parameters and the decoder, one window frame per step
/// (round-robin). The pre-optimization state is restored if the window loss rose.
OptimizeReport optimize_map(GaussianMap& map, SemanticNets& nets, const std::vector<Keyframe>& window,
                            const CameraIntrinsics& intr, const MapperConfig& cfg);

/// Removes Gaussians with opacity below or radius above the thresholds; returns count removed.
std::size_t prune_basic(GaussianMap& map, const MapperConfig& cfg);

}  // namespace semsplat
