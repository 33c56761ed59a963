#include "semsplat/losses.hpp"

#include <array>
#include <cmath>

#include "semsplat/errors.hpp"

namespace semsplat {

namespace {

using Kernel = std::array<double, kSsimWindow>;

const Kernel& gaussian_kernel() {
  static const Kernel k = [] {
    Kernel g{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double x = i - kSsimWindow / 2;
      g[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
      sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
  }();
  return k;
}

// Plane of one channel, row-major H x W.
struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane channel_plane(const ImageD& img, int c) {
  Plane p(img.height(), img.width());
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) p.at(y, x) = img(y, x, c);
  return p;
}

// Valid-mode separable Gaussian filter: H x W -> (H-10) x (W-10).
Plane filter_valid(const Plane& in) {
  const Kernel& g = gaussian_kernel();
  const int ow = in.w - kSsimWindow + 1, oh = in.h - kSsimWindow + 1;
  Plane tmp(in.h, ow);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * in.at(y, x + k);
      tmp.at(y, x) = s;
    }
  Plane out(oh, ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * tmp.at(y + k, x);
      out.at(y, x) = s;
    }
  return out;
}

// Adjoint of filter_valid: (H-10) x (W-10) -> H x W.
Plane filter_valid_adjoint(const Plane& in, int h, int w) {
  const Kernel& g = gaussian_kernel();
  Plane tmp(h, in.w);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      const double v = in.at(y, x);
      for (int k = 0; k < kSsimWindow; ++k) tmp.at(y + k, x) += g[k] * v;
    }
  Plane out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < in.w; ++x) {
      const double v = tmp.at(y, x);
      for (int k = 0; k < kSsimWindow; ++k) out.at(y, x + k) += g[k] * v;
    }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p(a.h, a.w);
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
  return p;
}

void check_same(const ImageD& a, const ImageD& b, const char* what) {
  if (!a.same_shape(b)) throw ContractViolation(std::string(what) + ": image dimensions mismatch");
}

}  // namespace

void LossWeights::validate() const {
  require(ssim_mix >= 0 && ssim_mix <= 1, "LossWeights: lambda must be in [0,1]");
  require(color >= 0 && depth >= 0 && semantic >= 0, "LossWeights: channel weights must be non-negative");
  require(sil_threshold > 0 && sil_threshold < 1, "LossWeights: T_s must be in (0,1)");
  require(depth_threshold > 0, "LossWeights: T_d must be positive");
}

double ssim_weighted(const ImageD& a, const ImageD& b, const ImageD* center_weight, ImageD* grad_a) {
  check_same(a, b, "ssim");
  require(a.height() >= kSsimWindow && a.width() >= kSsimWindow, "ssim: image smaller than the 11x11 window");
  if (center_weight) {
    require(center_weight->height() == a.height() && center_weight->width() == a.width(),
            "ssim: weight dimensions mismatch");
  }
  const int H = a.height(), W = a.width(), C = a.channels();
  const int oh = H - kSsimWindow + 1, ow = W - kSsimWindow + 1;
  const int half = kSsimWindow / 2;
  const double norm = 1.0 / (static_cast<double>(oh) * ow * C);
  if (grad_a) *grad_a = ImageD(H, W, C);

  double total = 0.0;
  for (int c = 0; c < C; ++c) {
    const Plane x = channel_plane(a, c);
    const Plane y = channel_plane(b, c);
    const Plane mx = filter_valid(x), my = filter_valid(y);
    const Plane exx = filter_valid(product(x, x)), eyy = filter_valid(product(y, y));
    const Plane exy = filter_valid(product(x, y));

    Plane g_mx(oh, ow), g_exx(oh, ow), g_exy(oh, ow);
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const double ux = mx.at(i, j), uy = my.at(i, j);
        const double a1 = 2.0 * ux * uy + kSsimC1;
        const double a2 = 2.0 * (exy.at(i, j) - ux * uy) + kSsimC2;
        const double b1 = ux * ux + uy * uy + kSsimC1;
        const double b2 = exx.at(i, j) - ux * ux + eyy.at(i, j) - uy * uy + kSsimC2;
        const double s = (a1 * a2) / (b1 * b2);
        const double wgt = center_weight ? (*center_weight)(i + half, j + half) : 1.0;
        total += wgt * s * norm;
        if (grad_a) {
          const double k = wgt * norm;
          g_exy.at(i, j) = k * 2.0 * a1 / (b1 * b2);
          g_exx.at(i, j) = k * (-s / b2);
          g_mx.at(i, j) = k * (2.0 * uy * (a2 - a1) / (b1 * b2) - 2.0 * ux * s * (1.0 / b1 - 1.0 / b2));
        }
      }
    }
    if (grad_a) {
      const Plane t_mx = filter_valid_adjoint(g_mx, H, W);
      const Plane t_exx = filter_valid_adjoint(g_exx, H, W);
      const Plane t_exy = filter_valid_adjoint(g_exy, H, W);
      for (int yy = 0; yy < H; ++yy)
        for (int xx = 0; xx < W; ++xx)
          (*grad_a)(yy, xx, c) = t_mx.at(yy, xx) + 2.0 * x.at(yy, xx) * t_exx.at(yy, xx) + y.at(yy, xx) * t_exy.at(yy, xx);
    }
  }
  return total;
}

double ssim(const ImageD& a, const ImageD& b) { return ssim_weighted(a, b, nullptr, nullptr); }

double l1_mean(const ImageD& a, const ImageD& b) {
  check_same(a, b, "l1_mean");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double color_loss(const ImageD& rendered, const ImageD& gt, double lambda) {
  require(lambda >= 0 && lambda <= 1, "color_loss: lambda must be in [0,1]");
  check_same(rendered, gt, "color_loss");
  double loss = lambda * l1_mean(rendered, gt);
  if (lambda < 1.0) loss += (1.0 - lambda) * (1.0 - ssim(rendered, gt));
  return loss;
}

double depth_loss(const ImageD& rendered, const ImageD& gt, const MaskImage* mask) {
  check_same(rendered, gt, "depth_loss");
  if (mask) require(mask->same_extent(gt), "depth_loss: mask dimensions mismatch");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!(gt[i] > 0) || (mask && !(*mask)[i])) continue;
    s += std::abs(rendered[i] - gt[i]);
    ++n;
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

double semantic_ce(const nn::Matrix& logits, const LabelImage& labels) {
  require(static_cast<std::size_t>(logits.rows()) == labels.pixels(), "semantic_ce: logits/labels size mismatch");
  require(logits.allFinite(), "semantic_ce: logits must be finite");
  double s = 0.0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y == kIgnoreLabel) continue;
    require(y < logits.cols(), "semantic_ce: label exceeds class count");
    const double mx = logits.row(i).maxCoeff();
    const double z = (logits.row(i).array() - mx).exp().sum();
    s += std::log(z) + mx - logits(i, y);
    ++n;
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

MaskImage densification_mask(const ImageD& silhouette, const ImageD& rendered_depth, const ImageD& gt_depth,
                             double sil_threshold, double depth_threshold) {
  require(silhouette.same_shape(rendered_depth) && silhouette.same_shape(gt_depth),
          "densification_mask: dimensions mismatch");
  MaskImage m(silhouette.height(), silhouette.width(), 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool sparse = silhouette[i] < sil_threshold;
    const bool under = gt_depth[i] > 0 && (gt_depth[i] - rendered_depth[i]) > depth_threshold;
    m[i] = (sparse || under) ? 1 : 0;
  }
  return m;
}

ImageD tracking_weights(const MaskImage& densify_mask) {
  ImageD w(densify_mask.height(), densify_mask.width(), 1);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = densify_mask[i] ? 0.0 : 1.0;
  return w;
}

LossResult weighted_multichannel_loss(const RenderOutput& render, const Frame& frame, const SemanticNets& nets,
                                      const LossWeights& weights, const ImageD* pixel_weight,
                                      SemanticNets* decoder_grads) {
  weights.validate();
  frame.validate(render.intr);
  const int H = render.intr.height, W = render.intr.width;
  if (pixel_weight) {
    require(pixel_weight->height() == H && pixel_weight->width() == W, "loss: pixel weight dimensions mismatch");
  }
  auto pw = [&](std::size_t pix) { return pixel_weight ? (*pixel_weight)[pix] : 1.0; };

  LossResult res;
  res.grads = ChannelGradients::zeros(render.intr);
  const std::size_t npix = static_cast<std::size_t>(H) * W;

  // Color: lambda * mean|I_r - I_gt| + (1 - lambda) * mean_windows(w * (1 - SSIM)).
  {
    const double lam = weights.ssim_mix;
    double l1 = 0.0;
    const double inv = 1.0 / static_cast<double>(npix * 3);
    for (std::size_t p = 0; p < npix; ++p) {
      const double wp = pw(p);
      for (int c = 0; c < 3; ++c) {
        const double d = render.color[3 * p + c] - frame.rgb[3 * p + c];
        l1 += wp * std::abs(d) * inv;
        const double sgn = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        res.grads.color[3 * p + c] += weights.color * lam * wp * sgn * inv;
      }
    }
    double ssim_term = 0.0;
    if (lam < 1.0) {
      ImageD g;
      // Sum of window weights at full weight equals one, so (1 - SSIM) becomes mean(w) - mean(w * SSIM).
      const double s = ssim_weighted(render.color, frame.rgb, pixel_weight, &g);
      double mean_w = 1.0;
      if (pixel_weight) {
        const int half = kSsimWindow / 2;
        const int oh = H - kSsimWindow + 1, ow = W - kSsimWindow + 1;
        double acc = 0.0;
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) acc += (*pixel_weight)(i + half, j + half);
        mean_w = acc / (static_cast<double>(oh) * ow);
      }
      ssim_term = mean_w - s;
      for (std::size_t i = 0; i < g.size(); ++i) res.grads.color[i] -= weights.color * (1.0 - lam) * g[i];
    }
    res.color = lam * l1 + (1.0 - lam) * ssim_term;
  }

  // Depth: mean over valid gt pixels.
  {
    std::size_t valid = 0;
    for (std::size_t p = 0; p < npix; ++p)
      if (frame.depth[p] > 0) ++valid;
    if (valid > 0) {
      const double inv = 1.0 / static_cast<double>(valid);
      double s = 0.0;
      for (std::size_t p = 0; p < npix; ++p) {
        if (!(frame.depth[p] > 0)) continue;
        const double d = render.depth[p] - frame.depth[p];
        s += pw(p) * std::abs(d) * inv;
        const double sgn = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        res.grads.depth[p] = weights.depth * pw(p) * sgn * inv;
      }
      res.depth = s;
    }
  }

  // Semantic cross-entropy on decoded rendered features.
  if (weights.semantic > 0 || decoder_grads) {
    const Eigen::Map<const nn::Matrix> feats(render.semantic.data(), static_cast<Eigen::Index>(npix), 3);
    const nn::Matrix logits = decode(nets, feats);
    const int K = static_cast<int>(logits.cols());
    std::size_t labelled = 0;
    for (std::size_t p = 0; p < npix; ++p)
      if (frame.labels[p] != kIgnoreLabel) ++labelled;
    if (labelled > 0) {
      const double inv = 1.0 / static_cast<double>(labelled);
      nn::Matrix dlogits = nn::Matrix::Zero(logits.rows(), K);
      double s = 0.0;
      for (std::size_t p = 0; p < npix; ++p) {
        const int y = frame.labels[p];
        if (y == kIgnoreLabel) continue;
        require(y < K, "loss: label exceeds class count");
        const auto i = static_cast<Eigen::Index>(p);
        const double mx = logits.row(i).maxCoeff();
        double z = 0.0;
        for (int c = 0; c < K; ++c) z += std::exp(logits(i, c) - mx);
        const double wp = pw(p);
        s += wp * (std::log(z) + mx - logits(i, y)) * inv;
        const double scale = weights.semantic * wp * inv;
        for (int c = 0; c < K; ++c) dlogits(i, c) = scale * std::exp(logits(i, c) - mx) / z;
        dlogits(i, y) -= scale;
      }
      res.semantic = s;
      const nn::Matrix dfeat = decoder_grads ? decode_backward(*decoder_grads, feats, dlogits)
                                             : decode_input_gradient(nets, feats, dlogits);
      std::copy(dfeat.data(), dfeat.data() + dfeat.size(), res.grads.semantic.data());
    }
  }

  res.total = weights.color * res.color + weights.depth * res.depth + weights.semantic * res.semantic;
  return res;
}

LossResult mapping_loss(const RenderOutput& render, const Frame& frame, SemanticNets& nets,
                        const LossWeights& weights) {
  return weighted_multichannel_loss(render, frame, nets, weights, nullptr, &nets);
}

LossResult tracking_loss(const RenderOutput& render, const Frame& frame, const SemanticNets& nets,
                         const LossWeights& weights, const MaskImage& densify_mask) {
  require(densify_mask.height() == render.intr.height && densify_mask.width() == render.intr.width,
          "tracking_loss: mask dimensions mismatch");
  const ImageD w = tracking_weights(densify_mask);
  return weighted_multichannel_loss(render, frame, nets, weights, &w, nullptr);
}

}  // namespace semsplat
