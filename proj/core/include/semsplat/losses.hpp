#pragma once

#include "semsplat/gaussian_map.hpp"
#include "semsplat/image.hpp"
#include "semsplat/nn.hpp"
#include "semsplat/renderer.hpp"
#include "semsplat/semantics.hpp"

namespace semsplat {

struct LossWeights {
  double ssim_mix = 0.8;         // lambda: L1 weight inside the color loss
  double color = 0.5;            // lambda_c
  double depth = 1.0;            // lambda_d
  double semantic = 0.1;         // lambda_s
  double sil_threshold = 0.5;    // T_s
  double depth_threshold = 0.05; // T_d, meters

  void validate() const;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over all fully contained 11x11 Gaussian windows, averaged over channels.
double ssim(const ImageD& a, const ImageD& b);

/// Mean over windows of weight(window center) * SSIM. If grad_a is non-null it
/// receives d/da of the returned value. A null weight means all ones.
double ssim_weighted(const ImageD& a, const ImageD& b, const ImageD* center_weight, ImageD* grad_a);

double l1_mean(const ImageD& a, const ImageD& b);

/// lambda * L1 + (1 - lambda) * (1 - SSIM).
double color_loss(const ImageD& rendered, const ImageD& gt, double lambda);

/// Mean |D_render - D_gt| over pixels with D_gt > 0 (and mask set, if given).
double depth_loss(const ImageD& rendered, const ImageD& gt, const MaskImage* mask = nullptr);

/// Mean softmax cross-entropy of per-pixel logits (rows) against labels; kIgnoreLabel skipped.
double semantic_ce(const nn::Matrix& logits, const LabelImage& labels);

/// True where Sil < T_s, or where D_gt is valid and D_gt - D_render > T_d.
MaskImage densification_mask(const ImageD& silhouette, const ImageD& rendered_depth, const ImageD& gt_depth,
                             double sil_threshold, double depth_threshold);

struct LossResult {
  double total = 0.0;
  double color = 0.0;
  double depth = 0.0;
  double semantic = 0.0;
  ChannelGradients grads;  // dLoss/dC, dLoss/dD, dLoss/dS
};

/// lambda_c L_c + lambda_d L_d + lambda_s L_CE over the whole frame. Decoder
/// parameter gradients are accumulated into `nets`.
LossResult mapping_loss(const RenderOutput& render, const Frame& frame, SemanticNets& nets,
                        const LossWeights& weights);

/// Same terms with every per-pixel contribution scaled by pixel_weight (H x W)
/// before reduction; normalizers are unchanged so all-ones equals the full loss.
/// If decoder_grads is non-null, decoder parameter gradients are accumulated there.
LossResult weighted_multichannel_loss(const RenderOutput& render, const Frame& frame, const SemanticNets& nets,
                                      const LossWeights& weights, const ImageD* pixel_weight,
                                      SemanticNets* decoder_grads);

/// Tracking loss: per-pixel weight 1 - M(p), so only well-reconstructed pixels count.
LossResult tracking_loss(const RenderOutput& render, const Frame& frame, const SemanticNets& nets,
                         const LossWeights& weights, const MaskImage& densify_mask);

/// Per-pixel tracking weights (1 - M) as an image.
ImageD tracking_weights(const MaskImage& densify_mask);

}  // namespace semsplat
