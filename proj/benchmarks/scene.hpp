#pragma once

#include <random>

#include "semsplat/gaussian_map.hpp"

namespace semsplat::bench {

// n Gaussians spread over the view of an identity camera, 1 to 3 m away.
inline GaussianMap random_scene(int n, const CameraIntrinsics& intr, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GaussianMap m;
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 + 2.0 * u(rng);
    const double x = (u(rng) * intr.width - intr.cx) * z / intr.fx;
    const double y = (u(rng) * intr.height - intr.cy) * z / intr.fy;
    const double radius = (1.0 + 3.0 * u(rng)) * z / intr.fx;
    m.push_back(Vec3(x, y, z), radius, 0.2 + 0.7 * u(rng), Vec3(u(rng), u(rng), u(rng)),
                Vec3(u(rng), u(rng), u(rng)));
  }
  return m;
}

}  // namespace semsplat::bench
