#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/camera.hpp"
#include "semsplat/image.hpp"

namespace semsplat {

/// Structure-of-arrays store of isotropic Gaussians. Vector-valued
/// parameters are packed xyz / rgb / 3-feature triples.
struct GaussianMap {
  std::vector<double> positions;  // 3N, world frame
  std::vector<double> radii;      // N
  std::vector<double> opacities;  // N
  std::vector<double> colors;     // 3N, in [0,1]
  std::vector<double> features;   // 3N, compressed semantic feature in [0,1]

  std::size_t size() const { return radii.size(); }
  bool empty() const { return radii.empty(); }

  Vec3 position(std::size_t i) const { return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]}; }
  Vec3 color(std::size_t i) const { return {colors[3 * i], colors[3 * i + 1], colors[3 * i + 2]}; }
  Vec3 feature(std::size_t i) const { return {features[3 * i], features[3 * i + 1], features[3 * i + 2]}; }

  void reserve(std::size_t n);
  void push_back(const Vec3& mu, double radius, double opacity, const Vec3& color, const Vec3& feature);
  void append(const GaussianMap& other);
  /// Keeps Gaussians with keep[i] != 0, preserving relative order.
  void filter(std::span<const std::uint8_t> keep);
  /// Reapplies parameter bounds after an optimizer step.
  void clamp(double min_radius = 1e-6);

  /// Returns an empty string when every invariant holds, otherwise a description.
  std::string check_invariants() const;
  /// FNV-1a over the raw parameter bytes.
  std::uint64_t checksum() const;

  bool operator==(const GaussianMap&) const = default;
};

/// One time step of RGB-D input with per-pixel class labels.
struct Frame {
  ImageD rgb;          // H x W x 3, [0,1]
  ImageD depth;        // H x W, meters, 0 = invalid
  LabelImage labels;   // H x W, class ids, kIgnoreLabel = no label
  int index = 0;

  void validate(const CameraIntrinsics& intr) const;
};

/// Features supplied per pixel by the caller (H x W x 3).
GaussianMap backproject(const Frame& frame, const Pose& pose, const CameraIntrinsics& intr,
                        const MaskImage& pixel_mask, const ImageD& pixel_features);

inline constexpr double kNewGaussianOpacity = 0.5;

}  // namespace semsplat
