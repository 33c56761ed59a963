#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "semsplat/mapper.hpp"
#include "semsplat/renderer.hpp"
#include "test_support.hpp"

using namespace semsplat;
using namespace semsplat::testing;

// Randomized properties that cut across the renderer and the mapper. Each test
// draws its own cases from a fixed seed, so failures reproduce.

namespace {

constexpr int kCases = 200;

const CameraIntrinsics& intr() {
  static const CameraIntrinsics k = CameraIntrinsics::desk(24, 18);
  return k;
}

GaussianMap with_random_features(GaussianMap m, Rng& rng) {
  for (double& f : m.features) f = uniform(rng, 0, 1);
  return m;
}

GaussianMap permuted(const GaussianMap& m, const std::vector<std::size_t>& order) {
  GaussianMap out;
  for (std::size_t i : order) out.push_back(m.position(i), m.radii[i], m.opacities[i], m.color(i), m.feature(i));
  return out;
}

double max_diff(const RenderOutput& a, const RenderOutput& b) {
  return std::max({max_abs_diff(a.color, b.color), max_abs_diff(a.depth, b.depth),
                   max_abs_diff(a.semantic, b.semantic), max_abs_diff(a.silhouette, b.silhouette)});
}

}  // namespace

TEST(RenderProperty, ChannelsStayInRange) {
  Rng rng(101);
  for (int c = 0; c < kCases; ++c) {
    const Pose pose = random_pose(rng);
    const GaussianMap m = with_random_features(random_map(rng, 1 + static_cast<int>(rng() % 60), pose, intr()), rng);
    const RenderOutput r = render(m, pose, intr());
    for (std::size_t i = 0; i < r.silhouette.size(); ++i) {
      const double s = r.silhouette[i];
      ASSERT_GE(s, 0.0);
      ASSERT_LE(s, 1.0);
      // Color and feature are convex blends of [0,1] values weighted by Sil.
      for (int k = 0; k < 3; ++k) {
        ASSERT_GE(r.color[3 * i + k], 0.0);
        ASSERT_LE(r.color[3 * i + k], s + 1e-12);
        ASSERT_LE(r.semantic[3 * i + k], s + 1e-12);
      }
      ASSERT_GE(r.depth[i], 0.0);
    }
  }
}

TEST(RenderProperty, SilhouetteNeverDropsWhenAGaussianIsAdded) {
  Rng rng(102);
  for (int c = 0; c < kCases; ++c) {
    const Pose pose = random_pose(rng);
    GaussianMap m = random_map(rng, 1 + static_cast<int>(rng() % 40), pose, intr());
    const RenderOutput before = render(m, pose, intr());
    const GaussianMap extra = random_map(rng, 1, pose, intr(), 0.5, 4.0);
    m.push_back(extra.position(0), extra.radii[0], extra.opacities[0], extra.color(0), extra.feature(0));
    const RenderOutput after = render(m, pose, intr());
    for (std::size_t i = 0; i < before.silhouette.size(); ++i)
      ASSERT_GE(after.silhouette[i], before.silhouette[i] - 1e-12) << "case " << c << " pixel " << i;
  }
}

TEST(RenderProperty, StorageOrderDoesNotMatter) {
  Rng rng(103);
  for (int c = 0; c < kCases; ++c) {
    const Pose pose = random_pose(rng);
    const GaussianMap m = with_random_features(random_map(rng, 2 + static_cast<int>(rng() % 50), pose, intr()), rng);
    std::vector<std::size_t> order(m.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    ASSERT_LT(max_diff(render(m, pose, intr()), render(permuted(m, order), pose, intr())), 1e-12) << "case " << c;
  }
}

TEST(RenderProperty, TransparentGaussianIsANoOp) {
  Rng rng(104);
  for (int c = 0; c < kCases; ++c) {
    const Pose pose = random_pose(rng);
    GaussianMap m = random_map(rng, 1 + static_cast<int>(rng() % 40), pose, intr());
    const RenderOutput before = render(m, pose, intr());
    const GaussianMap extra = random_map(rng, 1, pose, intr());
    m.push_back(extra.position(0), extra.radii[0], 0.0, extra.color(0), extra.feature(0));
    ASSERT_EQ(max_diff(before, render(m, pose, intr())), 0.0) << "case " << c;
  }
}

// Moving the world and the camera together changes nothing in the image.
TEST(RenderProperty, RigidMotionOfWorldAndCamera) {
  Rng rng(105);
  for (int c = 0; c < kCases / 4; ++c) {
    const Pose pose = random_pose(rng);
    const GaussianMap m = with_random_features(random_map(rng, 30, pose, intr()), rng);
    const Pose motion = random_pose(rng, 2.0);
    GaussianMap moved = m;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Vec3 p = camera_to_world(motion, m.position(i));
      for (int k = 0; k < 3; ++k) moved.positions[3 * i + k] = p[k];
    }
    ASSERT_LT(max_diff(render(m, pose, intr()), render(moved, motion * pose, intr())), 1e-9) << "case " << c;
  }
}

// Scaling the whole scene (positions, radii, camera position) scales depth and nothing else.
TEST(RenderProperty, UniformScaleScalesOnlyDepth) {
  Rng rng(106);
  for (int c = 0; c < kCases / 4; ++c) {
    const Pose pose = random_pose(rng);
    const GaussianMap m = with_random_features(random_map(rng, 30, pose, intr()), rng);
    const double s = uniform(rng, 0.5, 2.0);
    GaussianMap scaled = m;
    for (double& p : scaled.positions) p *= s;
    for (double& r : scaled.radii) r *= s;
    Pose scaled_pose = pose;
    scaled_pose.translation *= s;
    const RenderOutput a = render(m, pose, intr()), b = render(scaled, scaled_pose, intr());
    EXPECT_LT(max_abs_diff(a.color, b.color), 1e-9);
    EXPECT_LT(max_abs_diff(a.silhouette, b.silhouette), 1e-9);
    EXPECT_LT(max_abs_diff(a.semantic, b.semantic), 1e-9);
    for (std::size_t i = 0; i < a.depth.size(); ++i) ASSERT_NEAR(b.depth[i], s * a.depth[i], 1e-9 * s) << "case " << c;
  }
}

// Whatever the data, map optimization leaves a valid map with clamped features.
TEST(MapperProperty, OptimizationPreservesMapInvariants) {
  Rng rng(107);
  MapperConfig cfg;
  cfg.iterations = 4;
  cfg.learning_rate = 0.05;  // large steps push parameters against their bounds
  for (int c = 0; c < 15; ++c) {
    const Pose pose = random_pose(rng);
    GaussianMap m = with_random_features(random_map(rng, 40, pose, intr()), rng);
    Frame f;
    f.rgb = ImageD(intr().height, intr().width, 3);
    f.depth = ImageD(intr().height, intr().width, 1);
    f.labels = LabelImage(intr().height, intr().width, 1, 0);
    for (std::size_t i = 0; i < f.rgb.size(); ++i) f.rgb[i] = uniform(rng, 0, 1);
    for (std::size_t i = 0; i < f.depth.size(); ++i) f.depth[i] = uniform(rng, 0.5, 3.0);
    for (std::size_t i = 0; i < f.labels.size(); ++i) f.labels[i] = static_cast<std::uint8_t>(rng() % 6);
    SemanticNets nets(small_semantic_config());
    const std::size_t n = m.size();
    const OptimizeReport rep = optimize_map(m, nets, {plain_keyframe(f, pose)}, intr(), cfg);
    EXPECT_EQ(m.check_invariants(), "") << "case " << c;
    EXPECT_EQ(m.size(), n);
    EXPECT_LE(rep.loss_after, rep.loss_before);
  }
}
