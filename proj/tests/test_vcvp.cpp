#include <gtest/gtest.h>

#include <cmath>

#include "semsplat/errors.hpp"
#include "semsplat/vcvp.hpp"
#include "test_support.hpp"

using namespace semsplat;
using namespace semsplat::testing;

namespace {

constexpr double kWallDepth = 2.0;

// Opaque wall at z = kWallDepth, wide enough to fill every virtual view. Spacing
// and radius match what backprojection produces at that depth (one pixel).
// Much heavier overlap makes coplanar splats compete on compositing order, and
// a rotated view can then push one below the visibility threshold.
GaussianMap wall() {
  GaussianMap m;
  for (double x = -2.0; x <= 2.0 + 1e-9; x += 0.04)
    for (double y = -1.6; y <= 1.6 + 1e-9; y += 0.04)
      m.push_back(Vec3(x, y, kWallDepth), 0.04, 0.99, Vec3(0.6, 0.6, 0.6), Vec3(0.5, 0.5, 0.5));
  return m;
}

Vec3 centre_of(const Pose& p) { return p.translation; }

}  // namespace

TEST(VcvpConfig, Validation) {
  VcvpConfig c;
  EXPECT_NO_THROW(c.validate());
  c.visibility_threshold = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.visibility_threshold = 1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.opacity_decay = 1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.theta_deg = -1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.window_frames = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(VirtualCameras, ZeroAngleGivesTheInputPose) {
  const Pose p = Pose::look_at(Vec3(1, 2, 3), Vec3(0, 0, 0));
  for (const Pose& vc : make_virtual_cameras(p, 1.5, 0.0)) {
    EXPECT_LT(translation_distance(vc, p), 1e-12);
    EXPECT_LT(rotation_angle_deg(vc, p), 1e-9);
  }
}

TEST(VirtualCameras, QuarterTurnAboutVerticalAxis) {
  const Pose vc1 = make_virtual_cameras(Pose::identity(), 2.0, 90.0)[0];
  EXPECT_LT((vc1.translation - Vec3(-2, 0, 2)).norm(), 1e-12);
  EXPECT_LT((vc1.forward() - Vec3(1, 0, 0)).norm(), 1e-12);
}

TEST(VirtualCameras, AllFourLookAtThePivot) {
  const CameraIntrinsics intr = CameraIntrinsics::desk(64, 48);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose p = random_pose(rng, 1.0);
    const double depth = uniform(rng, 0.3, 4.0);
    const Vec3 pivot = p.translation + depth * p.forward();
    const auto vcs = make_virtual_cameras(p, depth, uniform(rng, 1.0, 20.0));
    for (const Pose& vc : vcs) {
      EXPECT_TRUE(vc.valid());
      EXPECT_NEAR((centre_of(vc) - pivot).norm(), depth, 1e-12);
      const Eigen::Vector2d uv = project(intr, world_to_camera(vc, pivot));
      EXPECT_NEAR(uv.x(), intr.cx, 1e-9);
      EXPECT_NEAR(uv.y(), intr.cy, 1e-9);
    }
    // The pairs sit symmetrically about the real camera.
    EXPECT_LT((centre_of(vcs[0]) + centre_of(vcs[1]) - 2 * centre_of(p)).cwiseAbs().maxCoeff(), 0.1 * depth);
    EXPECT_NEAR(rotation_angle_deg(vcs[0], p), rotation_angle_deg(vcs[1], p), 1e-9);
    EXPECT_NEAR(rotation_angle_deg(vcs[2], p), rotation_angle_deg(vcs[3], p), 1e-9);
  }
}

TEST(VirtualCameras, NonPositivePivotIsAnError) {
  EXPECT_THROW(make_virtual_cameras(Pose::identity(), 0.0, 5.0), ContractViolation);
  EXPECT_THROW(make_virtual_cameras(Pose::identity(), -1.0, 5.0), ContractViolation);
}

TEST(VisibleSet, OnAxisOpaqueGaussianIsVisible) {
  GaussianMap m;
  m.push_back(Vec3(0, 0, 2), 0.05, 0.95, Vec3(1, 0, 0), Vec3(0, 0, 0));
  EXPECT_EQ(visible_set(m, Pose::identity(), CameraIntrinsics::desk(32, 24), 0.05), std::vector<std::uint8_t>{1});
}

TEST(VisibleSet, GaussianBehindTheCameraIsInvisible) {
  GaussianMap m;
  m.push_back(Vec3(0, 0, -2), 0.05, 0.95, Vec3(1, 0, 0), Vec3(0, 0, 0));
  EXPECT_EQ(visible_set(m, Pose::identity(), CameraIntrinsics::desk(32, 24), 0.05), std::vector<std::uint8_t>{0});
}

TEST(VisibleSet, GaussianBehindAnOpaqueWallIsInvisible) {
  const CameraIntrinsics intr = CameraIntrinsics::desk(32, 24);
  GaussianMap m = wall();
  // The wall alone already saturates the pixels the hidden Gaussian would cover.
  const OracleImages o = oracle_render(m, Pose::identity(), intr);
  EXPECT_GT(o.silhouette(12, 16), 0.999);
  m.push_back(Vec3(0, 0, 3), 0.05, 0.95, Vec3(1, 0, 0), Vec3(0, 0, 0));
  const auto vis = visible_set(m, Pose::identity(), intr, 0.05);
  EXPECT_EQ(vis.back(), 0);
}

TEST(MedianRenderedDepth, WallAndEmpty) {
  const CameraIntrinsics intr = CameraIntrinsics::desk(32, 24);
  EXPECT_NEAR(median_rendered_depth(render(wall(), Pose::identity(), intr)), kWallDepth, 1e-9);
  EXPECT_EQ(median_rendered_depth(render(GaussianMap{}, Pose::identity(), intr)), 0.0);
}

TEST(VcvpPrune, EmptyMapIsANoOp) {
  GaussianMap m;
  const VcvpResult r = vcvp_prune(m, Pose::identity(), CameraIntrinsics::desk(32, 24), {});
  EXPECT_TRUE(r.outliers.empty());
  EXPECT_TRUE(m.empty());
}

TEST(VcvpPrune, WellSampledWallIsNeverFlagged) {
  GaussianMap m = wall();
  const GaussianMap before = m;
  const VcvpResult r = vcvp_prune(m, Pose::identity(), CameraIntrinsics::desk(64, 48), {});
  EXPECT_NEAR(r.pivot_depth, kWallDepth, 1e-9);
  EXPECT_TRUE(r.outliers.empty());
  EXPECT_EQ(m, before);
}

TEST(VcvpPrune, FloaterInFrontOfTheWallIsStillSeenByVirtualViews) {
  GaussianMap m = wall();
  m.push_back(Vec3(0, 0, kWallDepth - 0.5), 0.03, 0.6, Vec3(1, 0, 0), Vec3(0, 0, 0));
  const VcvpResult r = vcvp_prune(m, Pose::identity(), CameraIntrinsics::desk(64, 48), {});
  EXPECT_TRUE(r.outliers.empty());
}

// Each virtual camera's ray to the floater is blocked by an opaque blob near
// that camera; the real camera's ray is clear. The blobs also shadow a patch of
// wall right behind the floater in every virtual view, and the real view sees
// that patch through the half-transparent floater, so those splats are
// legitimately flagged too. Nothing else may be.
TEST(VcvpPrune, FloaterHiddenFromEveryVirtualViewIsFlagged) {
  const CameraIntrinsics intr = CameraIntrinsics::desk(64, 48);
  const VcvpConfig cfg;
  const Vec3 floater(0, 0, kWallDepth - 0.5);
  GaussianMap m = wall();
  const std::size_t wall_size = m.size();
  for (const Pose& vc : make_virtual_cameras(Pose::identity(), kWallDepth, cfg.theta_deg)) {
    const Vec3 blocker = vc.translation + 0.3 * (floater - vc.translation);
    m.push_back(blocker, 0.05, 0.999, Vec3(0, 0, 1), Vec3(0, 0, 0));
  }
  const std::uint32_t id = static_cast<std::uint32_t>(m.size());
  m.push_back(floater, 0.03, 0.6, Vec3(1, 0, 0), Vec3(0, 0, 0));

  ASSERT_EQ(visible_set(m, Pose::identity(), intr, cfg.visibility_threshold).back(), 1);
  const VcvpResult r = vcvp_prune(m, Pose::identity(), intr, cfg);
  // The blockers' footprints pull the median in a little from the wall.
  EXPECT_GT(r.pivot_depth, floater.z());
  EXPECT_LE(r.pivot_depth, kWallDepth + 1e-9);
  ASSERT_FALSE(r.outliers.empty());
  EXPECT_EQ(r.outliers.back(), id);
  EXPECT_DOUBLE_EQ(m.opacities[id], 0.6 * cfg.opacity_decay);
  for (std::size_t k = 0; k + 1 < r.outliers.size(); ++k) {
    const std::uint32_t i = r.outliers[k];
    ASSERT_LT(i, wall_size) << "a blocker was flagged";
    EXPECT_LT(m.position(i).head<2>().cwiseAbs().maxCoeff(), 0.15) << "wall splat " << i << " outside the shadow";
  }
}

// Random maps and poses: the documented invariants hold in every case.
TEST(VcvpProperty, InvariantsOnRandomMaps) {
  const CameraIntrinsics intr = CameraIntrinsics::desk(32, 24);
  Rng rng(11);
  int flagged_cases = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose pose = random_pose(rng);
    GaussianMap m = random_map(rng, 40, pose, intr, 0.3, 3.0);
    // A few Gaussians behind the camera, which no view can see.
    for (int k = 0; k < 3; ++k)
      m.push_back(camera_to_world(pose, Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), -uniform(rng, 0.5, 2))), 0.05,
                  0.9, Vec3(0.5, 0.5, 0.5), Vec3(0.5, 0.5, 0.5));
    VcvpConfig cfg;
    cfg.theta_deg = uniform(rng, 2.0, 30.0);
    const GaussianMap before = m;
    const auto real_visible = visible_set(m, pose, intr, cfg.visibility_threshold);

    GaussianMap again = m;
    const VcvpResult r = vcvp_prune(m, pose, intr, cfg);
    EXPECT_EQ(vcvp_prune(again, pose, intr, cfg).outliers, r.outliers);
    EXPECT_EQ(again, m);

    EXPECT_EQ(m.positions, before.positions);
    EXPECT_EQ(m.radii, before.radii);
    EXPECT_EQ(m.colors, before.colors);
    EXPECT_EQ(m.features, before.features);
    std::size_t next = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const bool flagged = next < r.outliers.size() && r.outliers[next] == i;
      if (flagged) {
        ++next;
        EXPECT_TRUE(real_visible[i]) << "trial " << trial << " id " << i;
        EXPECT_EQ(m.opacities[i], before.opacities[i] * cfg.opacity_decay);
      } else {
        EXPECT_EQ(m.opacities[i], before.opacities[i]);
      }
    }
    EXPECT_EQ(next, r.outliers.size()) << "outlier ids must be ascending and in range";
    flagged_cases += !r.outliers.empty();

    GaussianMap still = before;
    cfg.theta_deg = 0.0;
    EXPECT_TRUE(vcvp_prune(still, pose, intr, cfg).outliers.empty());
    EXPECT_EQ(still, before);
  }
  // Large angles on cluttered maps do flag something, so the loop above is not vacuous.
  EXPECT_GT(flagged_cases, 0);
}
