#include <gtest/gtest.h>

#include <cmath>

#include "semsplat/errors.hpp"
#include "semsplat/losses.hpp"
#include "test_support.hpp"

using namespace semsplat;
using namespace semsplat::testing;

namespace {

// Direct 11x11 double loop per window, no separable filtering.
double ssim_reference(const ImageD& a, const ImageD& b, const ImageD* center_weight = nullptr) {
  double g[11];
  double gsum = 0.0;
  for (int k = 0; k < 11; ++k) {
    g[k] = std::exp(-(k - 5) * (k - 5) / (2 * 1.5 * 1.5));
    gsum += g[k];
  }
  for (double& v : g) v /= gsum;
  const int oh = a.height() - 10, ow = a.width() - 10;
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int u = 0; u < 11; ++u)
          for (int v = 0; v < 11; ++v) {
            const double w = g[u] * g[v];
            const double x = a(i + u, j + v, c), y = b(i + u, j + v, c);
            mx += w * x;
            my += w * y;
            sxx += w * x * x;
            syy += w * y * y;
            sxy += w * x * y;
          }
        const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        const double c1 = 1e-4, c2 = 9e-4;
        const double s = (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        total += (center_weight ? (*center_weight)(i + 5, j + 5) : 1.0) * s;
      }
    }
  }
  return total / (static_cast<double>(oh) * ow * a.channels());
}

ImageD random_image(Rng& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
  ImageD img(h, w, c);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = uniform(rng, lo, hi);
  return img;
}

struct LossFixture {
  CameraIntrinsics intr = CameraIntrinsics::desk(16, 14);
  RenderOutput render;
  Frame frame;
  SemanticNets nets{small_semantic_config(4)};
};

LossFixture random_fixture(Rng& rng) {
  LossFixture f;
  const int h = f.intr.height, w = f.intr.width;
  f.render.intr = f.intr;
  f.render.color = random_image(rng, h, w, 3);
  f.render.depth = random_image(rng, h, w, 1, 0.5, 3.0);
  f.render.semantic = random_image(rng, h, w, 3);
  f.render.silhouette = random_image(rng, h, w, 1);
  LabelImage labels(h, w);
  ImageD depth = random_image(rng, h, w, 1, 0.5, 3.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = uniform(rng, 0, 1) < 0.1 ? kIgnoreLabel : static_cast<std::uint8_t>(uniform(rng, 0, 4 - 1e-9));
    if (uniform(rng, 0, 1) < 0.1) depth[i] = 0.0;
  }
  f.frame = make_frame(random_image(rng, h, w, 3), depth, labels);
  return f;
}

}  // namespace

TEST(Ssim, IdenticalImagesGiveOne) {
  Rng rng(1);
  const ImageD a = random_image(rng, 20, 24, 3);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ZeroVersusOneMatchesClosedForm) {
  // Constant images: variances and covariance vanish, leaving C1 / (1 + C1).
  const ImageD zero(16, 16, 3, 0.0), one(16, 16, 3, 1.0);
  EXPECT_NEAR(ssim(zero, one), kSsimC1 / (1.0 + kSsimC1), 1e-12);
}

TEST(Ssim, TinyNoiseStaysHigh) {
  Rng rng(2);
  const ImageD a = random_image(rng, 24, 24, 3, 0.2, 0.8);
  ImageD b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += uniform(rng, -0.005, 0.005);
  const double s = ssim(a, b);
  EXPECT_GT(s, 0.99);
  EXPECT_NEAR(s, ssim_reference(a, b), 1e-12);
}

TEST(Ssim, MatchesDirectReferenceAndIsSymmetric) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const ImageD a = random_image(rng, 13, 17, 3), b = random_image(rng, 13, 17, 3);
    EXPECT_NEAR(ssim(a, b), ssim_reference(a, b), 1e-12);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    const ImageD w = random_image(rng, 13, 17, 1);
    EXPECT_NEAR(ssim_weighted(a, b, &w, nullptr), ssim_reference(a, b, &w), 1e-12);
  }
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  ImageD a = random_image(rng, 12, 13, 3), b = random_image(rng, 12, 13, 3);
  const ImageD w = random_image(rng, 12, 13, 1);
  ImageD g;
  ssim_weighted(a, b, &w, &g);
  for (int t = 0; t < 40; ++t) {
    const auto i = static_cast<std::size_t>(uniform(rng, 0, static_cast<double>(a.size()) - 1e-9));
    const double orig = a[i], h = 1e-5;
    a[i] = orig + h;
    const double up = ssim_weighted(a, b, &w, nullptr);
    a[i] = orig - h;
    const double dn = ssim_weighted(a, b, &w, nullptr);
    a[i] = orig;
    EXPECT_NEAR(g[i], (up - dn) / (2 * h), 1e-8);
  }
}

TEST(Ssim, ErrorsOnMismatchOrTinyImage) {
  EXPECT_THROW(ssim(ImageD(12, 12, 3), ImageD(12, 13, 3)), ContractViolation);
  EXPECT_THROW(ssim(ImageD(8, 8, 3), ImageD(8, 8, 3)), ContractViolation);
}

TEST(ColorLoss, Examples) {
  Rng rng(5);
  const ImageD a = random_image(rng, 16, 16, 3), b = random_image(rng, 16, 16, 3);
  EXPECT_NEAR(color_loss(a, a, 0.8), 0.0, 1e-12);
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
  l1 /= static_cast<double>(a.size());
  EXPECT_NEAR(color_loss(a, b, 1.0), l1, 1e-14);
  EXPECT_NEAR(color_loss(a, b, 0.8), 0.8 * l1 + 0.2 * (1.0 - ssim_reference(a, b)), 1e-12);
  EXPECT_THROW(color_loss(a, b, 1.5), ContractViolation);
}

TEST(DepthLoss, Examples) {
  Rng rng(6);
  ImageD gt = random_image(rng, 6, 7, 1, 0.5, 2.0);
  EXPECT_EQ(depth_loss(gt, gt), 0.0);
  ImageD r = gt;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += 0.1;
  EXPECT_NEAR(depth_loss(r, gt), 0.1, 1e-14);
  gt[0] = 0.0;  // invalid pixels are skipped
  r[0] = 100.0;
  EXPECT_NEAR(depth_loss(r, gt), 0.1, 1e-14);
  MaskImage mask(6, 7, 1, 0);
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = uniform(rng, 0, 3);
    mask[i] = i % 2;
    if (mask[i] && gt[i] > 0) {
      s += std::abs(r[i] - gt[i]);
      ++n;
    }
  }
  EXPECT_NEAR(depth_loss(r, gt, &mask), s / n, 1e-14);
}

TEST(SemanticCe, Examples) {
  LabelImage labels(1, 3, 1, 0);
  labels[1] = 2;
  labels[2] = kIgnoreLabel;
  nn::Matrix logits = nn::Matrix::Zero(3, 4);
  EXPECT_NEAR(semantic_ce(logits, labels), std::log(4.0), 1e-14);
  logits(0, 0) = 1e3;
  logits(1, 2) = 1e3;
  EXPECT_NEAR(semantic_ce(logits, labels), 0.0, 1e-12);

  Rng rng(7);
  nn::Matrix r(3, 4);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = uniform(rng, -3, 3);
  double ref = 0.0;
  for (int p = 0; p < 2; ++p) {
    double z = 0.0;
    for (int c = 0; c < 4; ++c) z += std::exp(r(p, c));
    ref += -std::log(std::exp(r(p, labels[p])) / z);
  }
  EXPECT_NEAR(semantic_ce(r, labels), ref / 2, 1e-12);

  logits(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(semantic_ce(logits, labels), ContractViolation);
}

TEST(DensificationMask, Examples) {
  ImageD sil(3, 3, 1, 1.0), dr(3, 3, 1, 2.0), dg(3, 3, 1, 2.0);
  MaskImage m = densification_mask(sil, dr, dg, 0.5, 0.05);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(m[i], 0);
  sil(1, 1) = 0.0;
  dg(0, 2) = 2.0 + 2 * 0.05;
  dg(2, 0) = 2.0 - 2 * 0.05;  // over-rendered depth does not trigger
  m = densification_mask(sil, dr, dg, 0.5, 0.05);
  EXPECT_EQ(m(1, 1), 1);
  EXPECT_EQ(m(0, 2), 1);
  EXPECT_EQ(m(2, 0), 0);
  EXPECT_EQ(m(0, 0), 0);
}

TEST(DensificationMask, MonotoneInSilhouetteThreshold) {
  Rng rng(8);
  const ImageD sil = random_image(rng, 10, 10, 1), dr = random_image(rng, 10, 10, 1, 1, 2),
               dg = random_image(rng, 10, 10, 1, 1, 2);
  MaskImage prev = densification_mask(sil, dr, dg, 0.05, 0.05);
  for (double ts = 0.1; ts < 1.0; ts += 0.05) {
    const MaskImage m = densification_mask(sil, dr, dg, ts, 0.05);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (prev[i]) {
        EXPECT_TRUE(m[i]);
      }
    prev = m;
  }
}

TEST(MappingLoss, PerfectRenderIsZeroForColorAndDepth) {
  Rng rng(9);
  LossFixture f = random_fixture(rng);
  f.render.color = f.frame.rgb;
  f.render.depth = f.frame.depth;
  LossWeights w;
  w.semantic = 0.0;
  const LossResult r = mapping_loss(f.render, f.frame, f.nets, w);
  EXPECT_NEAR(r.total, 0.0, 1e-12);
}

TEST(MappingLoss, SemanticWeightZeroReducesToColorPlusDepth) {
  Rng rng(10);
  LossFixture f = random_fixture(rng);
  LossWeights w;
  w.semantic = 0.0;
  const LossResult r = mapping_loss(f.render, f.frame, f.nets, w);
  EXPECT_NEAR(r.total, w.color * color_loss(f.render.color, f.frame.rgb, w.ssim_mix) +
                           w.depth * depth_loss(f.render.depth, f.frame.depth), 1e-12);
}

TEST(MappingLoss, TermsMatchStandaloneLosses) {
  Rng rng(11);
  LossFixture f = random_fixture(rng);
  LossWeights w;
  const LossResult r = mapping_loss(f.render, f.frame, f.nets, w);
  const Eigen::Map<const nn::Matrix> feats(f.render.semantic.data(), 16 * 14, 3);
  EXPECT_NEAR(r.semantic, semantic_ce(decode(f.nets, feats), f.frame.labels), 1e-12);
  EXPECT_NEAR(r.color, color_loss(f.render.color, f.frame.rgb, w.ssim_mix), 1e-12);
  EXPECT_NEAR(r.depth, depth_loss(f.render.depth, f.frame.depth), 1e-12);
}

TEST(MappingLoss, ChannelGradientsMatchFiniteDifferences) {
  Rng rng(12);
  LossFixture f = random_fixture(rng);
  LossWeights w;
  w.semantic = 0.7;
  auto total = [&] { return weighted_multichannel_loss(f.render, f.frame, f.nets, w, nullptr, nullptr).total; };
  const LossResult r = weighted_multichannel_loss(f.render, f.frame, f.nets, w, nullptr, nullptr);
  for (auto [img, grad] : {std::pair{&f.render.color, &r.grads.color}, std::pair{&f.render.depth, &r.grads.depth},
                           std::pair{&f.render.semantic, &r.grads.semantic}}) {
    for (int t = 0; t < 25; ++t) {
      const auto i = static_cast<std::size_t>(uniform(rng, 0, static_cast<double>(img->size()) - 1e-9));
      const double orig = (*img)[i], h = 1e-6;
      (*img)[i] = orig + h;
      const double up = total();
      (*img)[i] = orig - h;
      const double dn = total();
      (*img)[i] = orig;
      const double fd = (up - dn) / (2 * h);
      EXPECT_NEAR((*grad)[i], fd, 1e-3 * std::max(1e-4, std::abs(fd)));
    }
  }
}

TEST(MappingLoss, DecoderGradientsMatchFiniteDifferences) {
  Rng rng(13);
  LossFixture f = random_fixture(rng);
  LossWeights w;
  f.nets.zero_grad();
  mapping_loss(f.render, f.frame, f.nets, w);
  nn::Param& p = f.nets.dec2.weight;
  for (int t = 0; t < 10; ++t) {
    const auto i = static_cast<Eigen::Index>(uniform(rng, 0, static_cast<double>(p.value.size()) - 1e-9));
    const double orig = p.value.data()[i], h = 1e-6;
    p.value.data()[i] = orig + h;
    const double up = weighted_multichannel_loss(f.render, f.frame, f.nets, w, nullptr, nullptr).total;
    p.value.data()[i] = orig - h;
    const double dn = weighted_multichannel_loss(f.render, f.frame, f.nets, w, nullptr, nullptr).total;
    p.value.data()[i] = orig;
    EXPECT_NEAR(p.grad.data()[i], (up - dn) / (2 * h), 1e-7);
  }
}

TEST(TrackingLoss, FullMaskGivesZeroAndEmptyMaskEqualsMappingLoss) {
  Rng rng(14);
  LossFixture f = random_fixture(rng);
  LossWeights w;
  const MaskImage all(14, 16, 1, 1), none(14, 16, 1, 0);
  EXPECT_NEAR(tracking_loss(f.render, f.frame, f.nets, w, all).total, 0.0, 1e-14);
  SemanticNets copy = f.nets;
  EXPECT_NEAR(tracking_loss(f.render, f.frame, f.nets, w, none).total,
              mapping_loss(f.render, f.frame, copy, w).total, 1e-12);
}

TEST(TrackingLoss, RandomMaskMatchesScalarLoop) {
  Rng rng(15);
  LossFixture f = random_fixture(rng);
  LossWeights w;
  MaskImage m(14, 16);
  ImageD keep(14, 16);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = uniform(rng, 0, 1) < 0.3;
    keep[i] = m[i] ? 0.0 : 1.0;
  }
  const LossResult r = tracking_loss(f.render, f.frame, f.nets, w, m);

  double l1 = 0.0, depth = 0.0, ce = 0.0;
  int valid = 0, labelled = 0;
  const Eigen::Map<const nn::Matrix> feats(f.render.semantic.data(), 14 * 16, 3);
  const nn::Matrix logits = decode(f.nets, feats);
  for (int y = 0; y < 14; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double k = keep(y, x);
      for (int c = 0; c < 3; ++c) l1 += k * std::abs(f.render.color(y, x, c) - f.frame.rgb(y, x, c));
      if (f.frame.depth(y, x) > 0) {
        depth += k * std::abs(f.render.depth(y, x) - f.frame.depth(y, x));
        ++valid;
      }
      const int label = f.frame.labels(y, x);
      if (label != kIgnoreLabel) {
        const auto row = logits.row(y * 16 + x);
        ce += k * (std::log(row.array().exp().sum()) - row(label));
        ++labelled;
      }
    }
  }
  l1 /= 14 * 16 * 3;
  double mean_keep = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) mean_keep += keep(i + 5, j + 5) / 24.0;
  const double color = w.ssim_mix * l1 + (1 - w.ssim_mix) * (mean_keep - ssim_reference(f.render.color, f.frame.rgb, &keep));
  const double expected = w.color * color + w.depth * depth / valid + w.semantic * ce / labelled;
  EXPECT_NEAR(r.total, expected, 1e-12);
}

TEST(LossWeights, ValidationRejectsOutOfRange) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.ssim_mix = 1.2;
  EXPECT_THROW(w.validate(), ContractViolation);
  w = LossWeights{};
  w.sil_threshold = 1.0;
  EXPECT_THROW(w.validate(), ContractViolation);
  w = LossWeights{};
  w.depth = -1;
  EXPECT_THROW(w.validate(), ContractViolation);
}
