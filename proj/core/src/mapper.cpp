#include "semsplat/mapper.hpp"

#include <span>

#include "semsplat/errors.hpp"
#include "semsplat/optim.hpp"

namespace semsplat {

void MapperConfig::validate() const {
  require(iterations >= 0, "MapperConfig: iterations must be non-negative");
  require(learning_rate > 0, "MapperConfig: learning rate must be positive");
  require(lr_scale.position > 0 && lr_scale.radius > 0 && lr_scale.opacity > 0 && lr_scale.color > 0 &&
              lr_scale.feature > 0 && lr_scale.decoder > 0,
          "MapperConfig: learning-rate scales must be positive");
  require(keyframe_stride >= 1, "MapperConfig: keyframe stride must be >= 1");
  require(prune_opacity > 0 && prune_radius > 0 && window_size >= 1, "MapperConfig: thresholds must be positive");
  weights.validate();
}

bool is_keyframe(int frame_index, const MapperConfig& cfg) {
  return frame_index == 0 || frame_index % cfg.keyframe_stride == 0;
}

std::size_t densify(GaussianMap& map, const Keyframe& kf, const CameraIntrinsics& intr, const LossWeights& weights,
                    const RenderOptions& render_opts) {
  const RenderOutput r = render(map, kf.pose, intr, render_opts);
  const MaskImage mask =
      densification_mask(r.silhouette, r.depth, kf.frame.depth, weights.sil_threshold, weights.depth_threshold);
  const GaussianMap fresh = backproject(kf.frame, kf.pose, intr, mask, kf.features);
  map.append(fresh);
  return fresh.size();
}

double window_loss(const GaussianMap& map, const SemanticNets& nets, const std::vector<Keyframe>& window,
                   const CameraIntrinsics& intr, const MapperConfig& cfg) {
  double total = 0.0;
  for (const Keyframe& kf : window) {
    const RenderOutput r = render(map, kf.pose, intr, cfg.render);
    total += weighted_multichannel_loss(r, kf.frame, nets, cfg.weights, nullptr, nullptr).total;
  }
  return total;
}

namespace {

std::span<double> span_of(nn::Param& p) { return {p.value.data(), static_cast<std::size_t>(p.value.size())}; }
std::span<const double> grad_of(const nn::Param& p) {
  return {p.grad.data(), static_cast<std::size_t>(p.grad.size())};
}

}  // namespace

OptimizeReport optimize_map(GaussianMap& map, SemanticNets& nets, const std::vector<Keyframe>& window,
                            const CameraIntrinsics& intr, const MapperConfig& cfg) {
  cfg.validate();
  require(!window.empty(), "optimize_map: empty keyframe window");
  OptimizeReport report;
  if (cfg.iterations == 0 || map.empty()) return report;

  const GaussianMap saved_map = map;
  const SemanticNets saved_nets = nets;
  report.loss_before = window_loss(map, nets, window, intr, cfg);

  const double lr = cfg.learning_rate;
  const LearningRateScales& sc = cfg.lr_scale;
  Adam pos(lr * sc.position), rad(lr * sc.radius), opa(lr * sc.opacity), col(lr * sc.color), feat(lr * sc.feature);
  auto decoder = nets.decoder_params();
  std::vector<Adam> dec_opt(decoder.size(), Adam(lr * sc.decoder));

  // Masks for masked optimization are fixed per keyframe at the start.
  std::vector<ImageD> masks;
  if (cfg.masked_optimization) {
    for (const Keyframe& kf : window) {
      const RenderOutput r = render(map, kf.pose, intr, cfg.render);
      const MaskImage m = densification_mask(r.silhouette, r.depth, kf.frame.depth, cfg.weights.sil_threshold,
                                             cfg.weights.depth_threshold);
      ImageD w(m.height(), m.width(), 1);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = m[i] ? 1.0 : 0.0;
      masks.push_back(std::move(w));
    }
  }

  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t k = static_cast<std::size_t>(it) % window.size();
    const Keyframe& kf = window[k];
    const RenderOutput r = render(map, kf.pose, intr, cfg.render);
    nets.zero_grad();
    const LossResult loss = weighted_multichannel_loss(r, kf.frame, nets, cfg.weights,
                                                       cfg.masked_optimization ? &masks[k] : nullptr, &nets);
    const MapGradients g = render_backward(map, r, loss.grads, cfg.render);
    pos.step(map.positions, g.positions);
    rad.step(map.radii, g.radii);
    opa.step(map.opacities, g.opacities);
    col.step(map.colors, g.colors);
    feat.step(map.features, g.features);
    for (std::size_t i = 0; i < decoder.size(); ++i) dec_opt[i].step(span_of(*decoder[i]), grad_of(*decoder[i]));
    map.clamp(cfg.min_radius);
    report.iterations = it + 1;
  }
  nets.zero_grad();

  report.loss_after = window_loss(map, nets, window, intr, cfg);
  if (report.loss_after > report.loss_before) {
    map = saved_map;
    nets = saved_nets;
    report.accepted = false;
    report.loss_after = report.loss_before;
  }
  return report;
}

std::size_t prune_basic(GaussianMap& map, const MapperConfig& cfg) {
  std::vector<std::uint8_t> keep(map.size(), 1);
  std::size_t removed = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.opacities[i] < cfg.prune_opacity || map.radii[i] > cfg.prune_radius) {
      keep[i] = 0;
      ++removed;
    }
  }
  if (removed > 0) map.filter(keep);
  return removed;
}

}  // namespace semsplat
