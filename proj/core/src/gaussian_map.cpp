#include "semsplat/gaussian_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "semsplat/errors.hpp"

namespace semsplat {

void GaussianMap::reserve(std::size_t n) {
  positions.reserve(3 * n);
  radii.reserve(n);
  opacities.reserve(n);
  colors.reserve(3 * n);
  features.reserve(3 * n);
}

void GaussianMap::push_back(const Vec3& mu, double radius, double opacity, const Vec3& color,
                            const Vec3& feature) {
  for (int k = 0; k < 3; ++k) {
    positions.push_back(mu[k]);
    colors.push_back(color[k]);
    features.push_back(feature[k]);
  }
  radii.push_back(radius);
  opacities.push_back(opacity);
}

void GaussianMap::append(const GaussianMap& other) {
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  radii.insert(radii.end(), other.radii.begin(), other.radii.end());
  opacities.insert(opacities.end(), other.opacities.begin(), other.opacities.end());
  colors.insert(colors.end(), other.colors.begin(), other.colors.end());
  features.insert(features.end(), other.features.begin(), other.features.end());
}

void GaussianMap::filter(std::span<const std::uint8_t> keep) {
  require(keep.size() == size(), "GaussianMap::filter: mask size mismatch");
  std::size_t out = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!keep[i]) continue;
    if (out != i) {
      for (int k = 0; k < 3; ++k) {
        positions[3 * out + k] = positions[3 * i + k];
        colors[3 * out + k] = colors[3 * i + k];
        features[3 * out + k] = features[3 * i + k];
      }
      radii[out] = radii[i];
      opacities[out] = opacities[i];
    }
    ++out;
  }
  positions.resize(3 * out);
  colors.resize(3 * out);
  features.resize(3 * out);
  radii.resize(out);
  opacities.resize(out);
}

void GaussianMap::clamp(double min_radius) {
  auto unit = [](double v) { return std::clamp(v, 0.0, 1.0); };
  for (auto& o : opacities) o = unit(o);
  for (auto& c : colors) c = unit(c);
  for (auto& f : features) f = unit(f);
  for (auto& r : radii) r = std::max(r, min_radius);
}

std::string GaussianMap::check_invariants() const {
  const std::size_t n = size();
  std::ostringstream err;
  if (positions.size() != 3 * n || opacities.size() != n || colors.size() != 3 * n ||
      features.size() != 3 * n) {
    return "parameter arrays have inconsistent lengths";
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(radii[i] > 0) || !std::isfinite(radii[i])) err << "radius[" << i << "] not positive; ";
    if (!(opacities[i] >= 0 && opacities[i] <= 1)) err << "opacity[" << i << "] out of [0,1]; ";
    for (int k = 0; k < 3; ++k) {
      if (!std::isfinite(positions[3 * i + k])) err << "position[" << i << "] not finite; ";
      if (!(colors[3 * i + k] >= 0 && colors[3 * i + k] <= 1)) err << "color[" << i << "] out of [0,1]; ";
      if (!(features[3 * i + k] >= 0 && features[3 * i + k] <= 1)) err << "feature[" << i << "] out of [0,1]; ";
    }
    if (err.tellp() > 400) break;
  }
  return err.str();
}

namespace {
void fnv(std::uint64_t& h, const std::vector<double>& v) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t i = 0; i < v.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
}
}  // namespace

std::uint64_t GaussianMap::checksum() const {
  std::uint64_t h = 14695981039346656037ULL;
  fnv(h, positions);
  fnv(h, radii);
  fnv(h, opacities);
  fnv(h, colors);
  fnv(h, features);
  return h;
}

void Frame::validate(const CameraIntrinsics& intr) const {
  require(rgb.height() == intr.height && rgb.width() == intr.width && rgb.channels() == 3,
          "Frame: rgb does not match intrinsics");
  require(depth.height() == intr.height && depth.width() == intr.width && depth.channels() == 1,
          "Frame: depth does not match intrinsics");
  require(labels.height() == intr.height && labels.width() == intr.width,
          "Frame: labels do not match intrinsics");
}

GaussianMap backproject(const Frame& frame, const Pose& pose, const CameraIntrinsics& intr,
                        const MaskImage& pixel_mask, const ImageD& pixel_features) {
  frame.validate(intr);
  require(pixel_mask.same_extent(frame.depth), "backproject: mask dimensions mismatch");
  require(pixel_features.same_extent(frame.depth) && pixel_features.channels() == 3,
          "backproject: feature dimensions mismatch");
  require(pose.valid(), "backproject: invalid pose");

  const Mat3 rot = pose.rotation_matrix();
  GaussianMap out;
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const double d = frame.depth(v, u);
      if (!pixel_mask(v, u) || !(d > 0)) continue;
      const Vec3 world = rot * unproject(intr, u, v, d) + pose.translation;
      const Vec3 color(frame.rgb(v, u, 0), frame.rgb(v, u, 1), frame.rgb(v, u, 2));
      const Vec3 feat(pixel_features(v, u, 0), pixel_features(v, u, 1), pixel_features(v, u, 2));
      out.push_back(world, d / intr.fx, kNewGaussianOpacity, color, feat);
    }
  }
  return out;
}

}  // namespace semsplat
