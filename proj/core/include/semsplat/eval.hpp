#pragma once

#include <vector>

#include "semsplat/camera.hpp"
#include "semsplat/image.hpp"

namespace semsplat {

/// Rigid (no scale) least-squares alignment of estimated to ground-truth
/// positions, then RMSE of the position residuals.
double ate_rmse(const std::vector<Pose>& est, const std::vector<Pose>& gt);

inline constexpr double kPsnrCap = 99.0;

/// Peak 1.0; identical images give kPsnrCap.
double psnr(const ImageD& a, const ImageD& b);

/// Mean absolute difference over valid pixels (mask != 0, or gt > 0 without a mask).
double depth_l1_metric(const ImageD& rendered, const ImageD& gt, const MaskImage* valid = nullptr);

/// Mean IoU over classes present in gt; `ignore` pixels are excluded. Returns 0 if gt has no labels.
double miou(const LabelImage& pred, const LabelImage& gt, int num_classes, std::uint8_t ignore = kIgnoreLabel);

/// Per-class intersection and union counts, accumulated across frames.
struct ConfusionCounts {
  explicit ConfusionCounts(int num_classes = 0);
  void add(const LabelImage& pred, const LabelImage& gt, std::uint8_t ignore = kIgnoreLabel);
  double miou() const;

  std::vector<long long> intersection, union_, gt_count;
};

}  // namespace semsplat
