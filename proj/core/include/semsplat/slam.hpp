#pragma once

#include <functional>
#include <vector>

#include "semsplat/config.hpp"
#include "semsplat/dataset.hpp"
#include "semsplat/eval.hpp"
#include "semsplat/gaussian_map.hpp"
#include "semsplat/semantics.hpp"

namespace semsplat {

struct FrameLog {
  int index = 0;
  bool keyframe = false;
  double track_loss = 0.0;
  int track_iterations = 0;
  std::size_t added = 0;
  std::size_t flagged = 0;
  std::size_t pruned = 0;
  std::size_t map_size = 0;
  bool map_update_accepted = true;
};

/// Final-map render of one keyframe at its estimated pose.
struct KeyframeView {
  int index = 0;
  Pose pose;
  ImageD color;
  ImageD depth;
  LabelImage labels;  // decoder argmax of the rendered semantic feature
};

struct FrameMetrics {
  int index = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double depth_l1 = 0.0;
  double miou = 0.0;
};

struct RunMetrics {
  double ate_rmse = 0.0;
  double trajectory_length = 0.0;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  double depth_l1 = 0.0;
  double miou = 0.0;  // pooled over all evaluated views
  std::vector<FrameMetrics> per_frame;
};

struct SlamResult {
  std::vector<Pose> trajectory;  // one per input frame
  std::vector<int> indices;
  std::vector<int> keyframes;
  GaussianMap map;
  SemanticNets nets;
  std::vector<FrameLog> log;
  std::vector<double> scff_losses;
};

struct SlamHooks {
  /// Called after each keyframe's map update with the keyframe count so far.
  std::function<void(int keyframe_count, const GaussianMap&, const SemanticNets&)> after_keyframe;
  /// Called after every frame.
  std::function<void(const FrameLog&)> after_frame;
};

/// Full pipeline: network warmup on the first keyframes, then per frame track,
/// keyframe check, densify, map optimization, virtual-view pruning and basic pruning.
/// Frame 0 is anchored at the identity pose. `cfg` must have been finalized.
SlamResult run_slam(const Sequence& seq, const SlamConfig& cfg, const SlamHooks& hooks = {});

/// Renders the map at each keyframe's estimated pose.
std::vector<KeyframeView> render_keyframes(const SlamResult& result, const CameraIntrinsics& intr, int threads = 1);

/// Compares views against ground-truth frames with the same index and computes ATE.
RunMetrics evaluate_views(const std::vector<KeyframeView>& views, const Sequence& gt, const std::vector<Pose>& est,
                          const std::vector<int>& est_indices, int num_classes);

double trajectory_length(const std::vector<Pose>& poses);

}  // namespace semsplat
