#include "semsplat/vcvp.hpp"

#include <algorithm>
#include <cmath>

#include "semsplat/errors.hpp"

namespace semsplat {

void VcvpConfig::validate() const {
  require(theta_deg >= 0, "VcvpConfig: theta must be non-negative");
  require(visibility_threshold > 0 && visibility_threshold < 1, "VcvpConfig: visibility threshold must be in (0,1)");
  require(opacity_decay > 0 && opacity_decay < 1, "VcvpConfig: opacity decay must be in (0,1)");
  require(window_frames >= 1, "VcvpConfig: window_frames must be >= 1");
}

std::array<Pose, 4> make_virtual_cameras(const Pose& pose, double pivot_depth, double theta_deg) {
  require(pivot_depth > 0, "make_virtual_cameras: pivot depth must be positive");
  const Mat3 rot = pose.rotation_matrix();
  const Vec3 pivot = pose.translation + pivot_depth * rot.col(2);
  const double theta = theta_deg * M_PI / 180.0;
  const Vec3 vertical = rot.col(1);
  const Vec3 horizontal = rot.col(0);

  auto orbit = [&](const Vec3& axis, double angle) {
    const Eigen::AngleAxisd turn(angle, axis);
    Pose p;
    p.rotation = Eigen::Quaterniond(turn) * pose.rotation;
    p.rotation.normalize();
    p.translation = pivot + turn * (pose.translation - pivot);
    return p;
  };
  return {orbit(vertical, theta), orbit(vertical, -theta), orbit(horizontal, theta), orbit(horizontal, -theta)};
}

std::vector<std::uint8_t> visible_set(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr,
                                      double visibility_threshold, const RenderOptions& opts) {
  RenderOptions o = opts;
  o.record_max_weight = true;
  const RenderOutput r = render(map, pose, intr, o);
  std::vector<std::uint8_t> vis(map.size(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) vis[i] = r.max_weight[i] >= visibility_threshold ? 1 : 0;
  return vis;
}

double median_rendered_depth(const RenderOutput& r) {
  std::vector<double> depths;
  for (std::size_t i = 0; i < r.silhouette.size(); ++i) {
    if (r.silhouette[i] >= 0.5) depths.push_back(r.depth[i] / r.silhouette[i]);
  }
  if (depths.empty()) {
    for (std::uint32_t id : r.projection.order) depths.push_back(r.projection.depth[id]);
  }
  if (depths.empty()) return 0.0;
  const auto mid = depths.begin() + static_cast<std::ptrdiff_t>(depths.size() / 2);
  std::nth_element(depths.begin(), mid, depths.end());
  return *mid;
}

VcvpResult vcvp_prune(GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr, const VcvpConfig& cfg) {
  cfg.validate();
  VcvpResult result;
  if (map.empty()) return result;

  RenderOptions opts = cfg.render;
  opts.record_max_weight = true;
  const RenderOutput real = render(map, pose, intr, opts);
  result.pivot_depth = median_rendered_depth(real);
  if (!(result.pivot_depth > 0)) return result;

  std::vector<std::uint8_t> candidate(map.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < map.size(); ++i) {
    candidate[i] = real.max_weight[i] >= cfg.visibility_threshold ? 1 : 0;
    any = any || candidate[i];
  }
  if (!any) return result;

  for (const Pose& vc : make_virtual_cameras(pose, result.pivot_depth, cfg.theta_deg)) {
    const std::vector<std::uint8_t> seen = visible_set(map, vc, intr, cfg.visibility_threshold, cfg.render);
    for (std::size_t i = 0; i < map.size(); ++i)
      if (seen[i]) candidate[i] = 0;
  }
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!candidate[i]) continue;
    map.opacities[i] *= cfg.opacity_decay;
    result.outliers.push_back(static_cast<std::uint32_t>(i));
  }
  return result;
}

}  // namespace semsplat
