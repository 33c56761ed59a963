#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "semsplat/camera.hpp"
#include "semsplat/gaussian_map.hpp"
#include "semsplat/image.hpp"

namespace semsplat {

/// Footprint support in units of the splatted radius.
inline constexpr double kFootprintCutoff = 3.0;
/// Per-pixel compositing stops once transmittance drops below this.
inline constexpr double kMinTransmittance = 1e-7;

/// Splatted footprint shape for squared normalized distance q = |p - mu|^2 / r^2.
/// exp(-q/2) minus its tangent at the cutoff, rescaled to 1 at the center: value
/// and slope both reach zero at the cutoff, so the footprint is C1 everywhere.
double footprint_profile(double q);
double footprint_profile_derivative(double q);  // d profile / dq

/// Per-Gaussian screen-space data for one camera.
struct SplatProjection {
  std::vector<Vec3> cam_points;    // camera-frame centers
  std::vector<double> mean_u;      // px
  std::vector<double> mean_v;      // px
  std::vector<double> radius_px;   // r * fx / d
  std::vector<double> depth;       // camera z
  std::vector<std::uint8_t> in_frustum;
  std::vector<std::uint32_t> order;  // in-frustum ids, depth ascending, ties by id
};

SplatProjection project_splats(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr);

struct Contribution {
  std::uint32_t local;    // index into the tile's Gaussian list
  double alpha;           // f^gs at the pixel
  double transmittance;   // transmittance before this Gaussian
};

/// Compositing record of one screen tile, replayed by the backward pass.
struct TileCache {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel range [x0,x1) x [y0,y1)
  std::vector<std::uint32_t> gaussians;  // depth-ordered Gaussian ids overlapping the tile
  std::vector<std::uint32_t> pixel_offsets;  // row-major within tile, size npix+1
  std::vector<Contribution> contributions;
};

struct RenderOptions {
  int threads = 1;
  int tile_size = 16;
  bool record_max_weight = false;
};

struct RenderOutput {
  ImageD color;       // H x W x 3
  ImageD depth;       // H x W
  ImageD semantic;    // H x W x 3
  ImageD silhouette;  // H x W
  std::vector<double> max_weight;  // per Gaussian, only if requested

  SplatProjection projection;
  std::vector<TileCache> tiles;
  Pose pose;
  CameraIntrinsics intr;
  std::size_t gaussian_count = 0;
};

RenderOutput render(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr,
                    const RenderOptions& opts = {});

/// dLoss/d(rendered channel). Empty images are treated as zero.
struct ChannelGradients {
  ImageD color;
  ImageD depth;
  ImageD semantic;
  ImageD silhouette;

  static ChannelGradients zeros(const CameraIntrinsics& intr);
};

/// Pose gradient is w.r.t. the raw quaternion (w, x, y, z) and translation.
struct MapGradients {
  std::vector<double> positions;
  std::vector<double> radii;
  std::vector<double> opacities;
  std::vector<double> colors;
  std::vector<double> features;
  Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
  Vec3 translation = Vec3::Zero();

  void resize(std::size_t n);
};

MapGradients render_backward(const GaussianMap& map, const RenderOutput& fwd,
                             const ChannelGradients& upstream, const RenderOptions& opts = {});

/// d R(q / |q|) / d q contracted with dL/dR, for raw quaternion (w, x, y, z).
Eigen::Vector4d rotation_gradient_to_quaternion(const Eigen::Quaterniond& q, const Mat3& dl_dr);

}  // namespace semsplat
