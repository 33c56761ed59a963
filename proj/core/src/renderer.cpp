#include "semsplat/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "semsplat/errors.hpp"
#include "semsplat/parallel.hpp"

namespace semsplat {

namespace {

constexpr double kCutoffSq = kFootprintCutoff * kFootprintCutoff;
const double kTail = std::exp(-0.5 * kCutoffSq);
// Subtracting the tangent line of exp(-q/2) at the cutoff makes the profile
// and its slope both vanish there; the scale restores profile(0) = 1.
const double kTailScale = 1.0 / (1.0 - kTail * (1.0 + 0.5 * kCutoffSq));

// Channel layout of a composited value: r g b | depth | f0 f1 f2 | silhouette.
constexpr int kChannels = 8;
using ChannelVec = std::array<double, kChannels>;

struct PixelRange {
  int x0, x1, y0, y1;  // inclusive
};

PixelRange footprint_pixels(double u, double v, double radius, int width, int height) {
  const double reach = kFootprintCutoff * radius;
  PixelRange r;
  r.x0 = std::max(0, static_cast<int>(std::ceil(u - reach)));
  r.x1 = std::min(width - 1, static_cast<int>(std::floor(u + reach)));
  r.y0 = std::max(0, static_cast<int>(std::ceil(v - reach)));
  r.y1 = std::min(height - 1, static_cast<int>(std::floor(v + reach)));
  return r;
}

Mat3 rotation_of(const Pose& pose) { return pose.rotation.normalized().toRotationMatrix(); }

}  // namespace

double footprint_profile(double q) {
  if (q >= kCutoffSq) return 0.0;
  return (std::exp(-0.5 * q) - kTail * (1.0 + 0.5 * (kCutoffSq - q))) * kTailScale;
}

double footprint_profile_derivative(double q) {
  if (q >= kCutoffSq) return 0.0;
  return -0.5 * (std::exp(-0.5 * q) - kTail) * kTailScale;
}

SplatProjection project_splats(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr) {
  const std::size_t n = map.size();
  SplatProjection p;
  p.cam_points.resize(n);
  p.mean_u.assign(n, 0.0);
  p.mean_v.assign(n, 0.0);
  p.radius_px.assign(n, 0.0);
  p.depth.assign(n, 0.0);
  p.in_frustum.assign(n, 0);

  const Mat3 rt = rotation_of(pose).transpose();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 pc = rt * (map.position(i) - pose.translation);
    p.cam_points[i] = pc;
    const double z = pc.z();
    p.depth[i] = z;
    if (!(z > intr.near && z < intr.far)) continue;
    const double u = intr.fx * pc.x() / z + intr.cx;
    const double v = intr.fy * pc.y() / z + intr.cy;
    const double rho = map.radii[i] * intr.fx / z;
    p.mean_u[i] = u;
    p.mean_v[i] = v;
    p.radius_px[i] = rho;
    const PixelRange r = footprint_pixels(u, v, rho, intr.width, intr.height);
    if (r.x0 > r.x1 || r.y0 > r.y1) continue;
    p.in_frustum[i] = 1;
    p.order.push_back(static_cast<std::uint32_t>(i));
  }
  std::stable_sort(p.order.begin(), p.order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return p.depth[a] < p.depth[b];
  });
  return p;
}

RenderOutput render(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr,
                    const RenderOptions& opts) {
  intr.validate();
  require(opts.tile_size >= 1, "render: tile_size must be positive");
  const int W = intr.width;
  const int H = intr.height;

  RenderOutput out;
  out.pose = pose;
  out.intr = intr;
  out.gaussian_count = map.size();
  out.color = ImageD(H, W, 3);
  out.depth = ImageD(H, W, 1);
  out.semantic = ImageD(H, W, 3);
  out.silhouette = ImageD(H, W, 1);
  out.projection = project_splats(map, pose, intr);
  const SplatProjection& proj = out.projection;

  const int ts = opts.tile_size;
  const int tiles_x = (W + ts - 1) / ts;
  const int tiles_y = (H + ts - 1) / ts;
  out.tiles.resize(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      TileCache& t = out.tiles[ty * tiles_x + tx];
      t.x0 = tx * ts;
      t.y0 = ty * ts;
      t.x1 = std::min(W, t.x0 + ts);
      t.y1 = std::min(H, t.y0 + ts);
    }
  }
  for (std::uint32_t id : proj.order) {
    const PixelRange r = footprint_pixels(proj.mean_u[id], proj.mean_v[id], proj.radius_px[id], W, H);
    for (int ty = r.y0 / ts; ty <= r.y1 / ts; ++ty) {
      for (int tx = r.x0 / ts; tx <= r.x1 / ts; ++tx) out.tiles[ty * tiles_x + tx].gaussians.push_back(id);
    }
  }

  std::vector<std::vector<double>> tile_max;
  if (opts.record_max_weight) tile_max.resize(out.tiles.size());

  parallel_for(out.tiles.size(), opts.threads, [&](std::size_t tile_id) {
    TileCache& t = out.tiles[tile_id];
    const std::size_t ng = t.gaussians.size();
    const int tw = t.x1 - t.x0;
    const int npix = tw * (t.y1 - t.y0);
    t.pixel_offsets.assign(npix + 1, 0);
    std::vector<double> local_max;
    if (opts.record_max_weight) local_max.assign(ng, 0.0);

    std::vector<double> inv_r2(ng);
    for (std::size_t k = 0; k < ng; ++k) {
      const double rho = proj.radius_px[t.gaussians[k]];
      inv_r2[k] = 1.0 / (rho * rho);
    }

    for (int py = t.y0; py < t.y1; ++py) {
      for (int px = t.x0; px < t.x1; ++px) {
        const int pix = (py - t.y0) * tw + (px - t.x0);
        t.pixel_offsets[pix] = static_cast<std::uint32_t>(t.contributions.size());
        double trans = 1.0;
        ChannelVec acc{};
        for (std::size_t k = 0; k < ng; ++k) {
          const std::uint32_t id = t.gaussians[k];
          const double dx = px - proj.mean_u[id];
          const double dy = py - proj.mean_v[id];
          const double q = (dx * dx + dy * dy) * inv_r2[k];
          if (q >= kCutoffSq) continue;
          const double alpha = map.opacities[id] * footprint_profile(q);
          const double w = alpha * trans;
          acc[0] += w * map.colors[3 * id];
          acc[1] += w * map.colors[3 * id + 1];
          acc[2] += w * map.colors[3 * id + 2];
          acc[3] += w * proj.depth[id];
          acc[4] += w * map.features[3 * id];
          acc[5] += w * map.features[3 * id + 1];
          acc[6] += w * map.features[3 * id + 2];
          acc[7] += w;
          if (!local_max.empty()) local_max[k] = std::max(local_max[k], w);
          t.contributions.push_back({static_cast<std::uint32_t>(k), alpha, trans});
          trans *= (1.0 - alpha);
          if (trans < kMinTransmittance) break;
        }
        out.color(py, px, 0) = acc[0];
        out.color(py, px, 1) = acc[1];
        out.color(py, px, 2) = acc[2];
        out.depth(py, px) = acc[3];
        out.semantic(py, px, 0) = acc[4];
        out.semantic(py, px, 1) = acc[5];
        out.semantic(py, px, 2) = acc[6];
        out.silhouette(py, px) = acc[7];
      }
    }
    t.pixel_offsets[npix] = static_cast<std::uint32_t>(t.contributions.size());
    if (opts.record_max_weight) tile_max[tile_id] = std::move(local_max);
  });

  if (opts.record_max_weight) {
    out.max_weight.assign(map.size(), 0.0);
    for (std::size_t ti = 0; ti < out.tiles.size(); ++ti) {
      const auto& ids = out.tiles[ti].gaussians;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        out.max_weight[ids[k]] = std::max(out.max_weight[ids[k]], tile_max[ti][k]);
      }
    }
  }
  return out;
}

ChannelGradients ChannelGradients::zeros(const CameraIntrinsics& intr) {
  ChannelGradients g;
  g.color = ImageD(intr.height, intr.width, 3);
  g.depth = ImageD(intr.height, intr.width, 1);
  g.semantic = ImageD(intr.height, intr.width, 3);
  g.silhouette = ImageD(intr.height, intr.width, 1);
  return g;
}

void MapGradients::resize(std::size_t n) {
  positions.assign(3 * n, 0.0);
  radii.assign(n, 0.0);
  opacities.assign(n, 0.0);
  colors.assign(3 * n, 0.0);
  features.assign(3 * n, 0.0);
  rotation.setZero();
  translation.setZero();
}

Eigen::Vector4d rotation_gradient_to_quaternion(const Eigen::Quaterniond& q, const Mat3& g) {
  const double norm = q.norm();
  const double w = q.w() / norm, x = q.x() / norm, y = q.y() / norm, z = q.z() / norm;
  Mat3 dw, dx, dy, dz;
  dw << 0, -z, y, z, 0, -x, -y, x, 0;
  dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  Eigen::Vector4d unit_grad(2 * (g.cwiseProduct(dw)).sum(), 2 * (g.cwiseProduct(dx)).sum(),
                            2 * (g.cwiseProduct(dy)).sum(), 2 * (g.cwiseProduct(dz)).sum());
  const Eigen::Vector4d qhat(w, x, y, z);
  return (unit_grad - qhat * qhat.dot(unit_grad)) / norm;
}

namespace {

// Screen-space gradient slots per Gaussian.
enum Slot { kU, kV, kRho, kDepth, kOpacity, kR, kG, kB, kF0, kF1, kF2, kSlots };

const double* channel_ptr(const ImageD& img, int y, int x, int c) {
  return img.empty() ? nullptr : &img(y, x, c);
}

}  // namespace

MapGradients render_backward(const GaussianMap& map, const RenderOutput& fwd,
                             const ChannelGradients& upstream, const RenderOptions& opts) {
  const CameraIntrinsics& intr = fwd.intr;
  require(fwd.gaussian_count == map.size(), "render_backward: map does not match forward cache");
  auto check = [&](const ImageD& img, int ch, const char* name) {
    require(img.empty() || (img.height() == intr.height && img.width() == intr.width && img.channels() == ch),
            std::string("render_backward: upstream ") + name + " gradient has wrong shape");
  };
  check(upstream.color, 3, "color");
  check(upstream.depth, 1, "depth");
  check(upstream.semantic, 3, "semantic");
  check(upstream.silhouette, 1, "silhouette");

  const SplatProjection& proj = fwd.projection;
  const std::size_t n = map.size();
  std::vector<std::vector<double>> partial(fwd.tiles.size());

  parallel_for(fwd.tiles.size(), opts.threads, [&](std::size_t tile_id) {
    const TileCache& t = fwd.tiles[tile_id];
    std::vector<double>& grad = partial[tile_id];
    grad.assign(t.gaussians.size() * kSlots, 0.0);
    const int tw = t.x1 - t.x0;
    for (int py = t.y0; py < t.y1; ++py) {
      for (int px = t.x0; px < t.x1; ++px) {
        const int pix = (py - t.y0) * tw + (px - t.x0);
        const std::uint32_t begin = t.pixel_offsets[pix];
        const std::uint32_t end = t.pixel_offsets[pix + 1];
        if (begin == end) continue;
        ChannelVec g{};
        auto load = [&](const ImageD& img, int c, int slot) {
          if (const double* p = channel_ptr(img, py, px, c)) g[slot] = *p;
        };
        load(upstream.color, 0, 0);
        load(upstream.color, 1, 1);
        load(upstream.color, 2, 2);
        load(upstream.depth, 0, 3);
        load(upstream.semantic, 0, 4);
        load(upstream.semantic, 1, 5);
        load(upstream.semantic, 2, 6);
        load(upstream.silhouette, 0, 7);
        if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;

        ChannelVec behind{};
        for (std::uint32_t c = end; c-- > begin;) {
          const Contribution& e = t.contributions[c];
          const std::uint32_t id = t.gaussians[e.local];
          const ChannelVec val{map.colors[3 * id], map.colors[3 * id + 1], map.colors[3 * id + 2],
                               proj.depth[id], map.features[3 * id], map.features[3 * id + 1],
                               map.features[3 * id + 2], 1.0};
          const double w = e.alpha * e.transmittance;
          double* gg = &grad[e.local * kSlots];
          gg[kR] += w * g[0];
          gg[kG] += w * g[1];
          gg[kB] += w * g[2];
          gg[kDepth] += w * g[3];
          gg[kF0] += w * g[4];
          gg[kF1] += w * g[5];
          gg[kF2] += w * g[6];

          double dalpha = 0.0;
          for (int ch = 0; ch < kChannels; ++ch) {
            dalpha += g[ch] * (val[ch] - behind[ch]);
            behind[ch] = e.alpha * val[ch] + (1.0 - e.alpha) * behind[ch];
          }
          dalpha *= e.transmittance;

          const double rho = proj.radius_px[id];
          const double dx = px - proj.mean_u[id];
          const double dy = py - proj.mean_v[id];
          const double inv_r2 = 1.0 / (rho * rho);
          const double q = (dx * dx + dy * dy) * inv_r2;
          gg[kOpacity] += dalpha * footprint_profile(q);
          const double dq = dalpha * map.opacities[id] * footprint_profile_derivative(q);
          gg[kU] += dq * (-2.0 * dx * inv_r2);
          gg[kV] += dq * (-2.0 * dy * inv_r2);
          gg[kRho] += dq * (-2.0 * q / rho);
        }
      }
    }
  });

  // Fixed tile order keeps the reduction independent of the worker count.
  std::vector<double> screen(n * kSlots, 0.0);
  for (std::size_t ti = 0; ti < fwd.tiles.size(); ++ti) {
    const auto& ids = fwd.tiles[ti].gaussians;
    const auto& grad = partial[ti];
    for (std::size_t k = 0; k < ids.size(); ++k) {
      double* dst = &screen[ids[k] * kSlots];
      const double* src = &grad[k * kSlots];
      for (int s = 0; s < kSlots; ++s) dst[s] += src[s];
    }
  }

  MapGradients out;
  out.resize(n);
  const Mat3 rot = rotation_of(fwd.pose);
  Mat3 grad_rot = Mat3::Zero();
  for (std::uint32_t id : proj.order) {
    const double* s = &screen[id * kSlots];
    const Vec3& pc = proj.cam_points[id];
    const double z = pc.z();
    const double inv_z = 1.0 / z;
    const double r = map.radii[id];

    out.opacities[id] = s[kOpacity];
    for (int k = 0; k < 3; ++k) {
      out.colors[3 * id + k] = s[kR + k];
      out.features[3 * id + k] = s[kF0 + k];
    }
    out.radii[id] = s[kRho] * intr.fx * inv_z;

    const Vec3 g_cam(s[kU] * intr.fx * inv_z, s[kV] * intr.fy * inv_z,
                     -s[kU] * intr.fx * pc.x() * inv_z * inv_z - s[kV] * intr.fy * pc.y() * inv_z * inv_z -
                         s[kRho] * r * intr.fx * inv_z * inv_z + s[kDepth]);
    const Vec3 g_world = rot * g_cam;
    for (int k = 0; k < 3; ++k) out.positions[3 * id + k] = g_world[k];
    out.translation -= g_world;
    grad_rot += (map.position(id) - fwd.pose.translation) * g_cam.transpose();
  }
  out.rotation = rotation_gradient_to_quaternion(fwd.pose.rotation, grad_rot);
  return out;
}

}  // namespace semsplat
