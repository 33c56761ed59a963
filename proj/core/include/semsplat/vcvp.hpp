#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "semsplat/camera.hpp"
#include "semsplat/gaussian_map.hpp"
#include "semsplat/renderer.hpp"

namespace semsplat {

struct VcvpConfig {
  double theta_deg = 5.0;
  double visibility_threshold = 0.05;  // tau_vis on max composited weight
  double opacity_decay = 0.1;          // gamma
  int window_frames = 5;               // keyframes checked per pass
  RenderOptions render;

  void validate() const;
};

/// Four accompanying cameras rotated +-theta about the camera's vertical axis
/// (VC1, VC2) and horizontal axis (VC3, VC4), both through the pivot point
/// `pivot_depth` ahead on the optical axis.
std::array<Pose, 4> make_virtual_cameras(const Pose& pose, double pivot_depth, double theta_deg);

/// visible[i] != 0 iff Gaussian i's maximum composited weight reaches the threshold.
std::vector<std::uint8_t> visible_set(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr,
                                      double visibility_threshold, const RenderOptions& opts = {});

/// Median of D / Sil over pixels with Sil >= 0.5; falls back to the median
/// in-frustum Gaussian depth, and returns 0 when nothing is visible.
double median_rendered_depth(const RenderOutput& r);

struct VcvpResult {
  std::vector<std::uint32_t> outliers;  // ascending ids
  double pivot_depth = 0.0;
};

/// Flags Gaussians visible in the real view but in none of the four virtual
/// views and multiplies their opacity by gamma.
VcvpResult vcvp_prune(GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr, const VcvpConfig& cfg);

}  // namespace semsplat
