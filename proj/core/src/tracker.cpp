#include "semsplat/tracker.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "semsplat/errors.hpp"
#include "semsplat/optim.hpp"

namespace semsplat {

void TrackerConfig::validate() const {
  require(iterations >= 1, "TrackerConfig: iterations must be >= 1");
  require(learning_rate > 0, "TrackerConfig: learning rate must be positive");
  require(patience >= 1, "TrackerConfig: patience must be >= 1");
  require(pivot_depth_fraction >= 0, "TrackerConfig: pivot depth fraction must be >= 0");
  require(translation_step_scale > 0 && rotation_step_scale > 0, "TrackerConfig: step scales must be positive");
  weights.validate();
}

Pose init_pose(const Pose& prev, const Pose& prev2) {
  Pose out;
  out.translation = prev.translation + (prev.translation - prev2.translation);
  out.rotation = prev.rotation * (prev2.rotation.conjugate() * prev.rotation);
  out.rotation.normalize();
  return out;
}

namespace {

struct Evaluation {
  double loss;
  RenderOutput render;
  LossResult terms;
};

Evaluation evaluate(const GaussianMap& map, const SemanticNets& nets, const Frame& frame, const Pose& pose,
                    const CameraIntrinsics& intr, const TrackerConfig& cfg) {
  Evaluation e{0.0, render(map, pose, intr, cfg.render), {}};
  const MaskImage m = densification_mask(e.render.silhouette, e.render.depth, frame.depth,
                                         cfg.weights.sil_threshold, cfg.weights.depth_threshold);
  e.terms = tracking_loss(e.render, frame, nets, cfg.weights, m);
  e.loss = e.terms.total;
  return e;
}

}  // namespace

double evaluate_tracking_loss(const GaussianMap& map, const SemanticNets& nets, const Frame& frame, const Pose& pose,
                              const CameraIntrinsics& intr, const TrackerConfig& cfg) {
  return evaluate(map, nets, frame, pose, intr, cfg).loss;
}

namespace {

double median_valid_depth(const ImageD& depth) {
  std::vector<double> v;
  for (std::size_t i = 0; i < depth.size(); ++i)
    if (depth[i] > 0) v.push_back(depth[i]);
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

TrackResult track(const GaussianMap& map, const SemanticNets& nets, const Frame& frame, const Pose& init,
                  const CameraIntrinsics& intr, const TrackerConfig& cfg) {
  cfg.validate();
  if (map.empty()) throw ContractViolation("track: map is empty, tracking impossible");
  frame.validate(intr);

  // Parameters: quaternion (w, x, y, z) then a pivot point on the optical axis at the
  // frame's median depth; the camera center is pivot - d * forward. Small rotations
  // about the pivot barely move the image, so Adam's per-coordinate scaling takes full
  // steps along the direction where translation and rotation nearly cancel.
  const double d = cfg.pivot_depth_fraction * median_valid_depth(frame.depth);
  const double ts = cfg.translation_step_scale;
  const Vec3 pivot0 = init.translation + d * (init.rotation * Vec3::UnitZ());
  const double rs = cfg.rotation_step_scale;
  std::array<double, 7> params{init.rotation.w() / rs, init.rotation.x() / rs, init.rotation.y() / rs,
                               init.rotation.z() / rs,
                               pivot0.x() / ts, pivot0.y() / ts, pivot0.z() / ts};
  auto to_pose = [d, ts](const std::array<double, 7>& p) {
    Pose pose;
    pose.rotation = Eigen::Quaterniond(p[0], p[1], p[2], p[3]);  // scale cancels on normalization
    pose.rotation.normalize();
    pose.translation = ts * Vec3(p[4], p[5], p[6]) - d * (pose.rotation * Vec3::UnitZ());
    return pose;
  };

  Adam opt(cfg.learning_rate);
  opt.reset(params.size());
  TrackResult result;
  result.pose = init;
  result.loss = std::numeric_limits<double>::infinity();

  int stalled = 0;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    const Pose pose = it == 0 ? init : to_pose(params);
    const Evaluation e = evaluate(map, nets, frame, pose, intr, cfg);
    if (it == 0) result.initial_loss = e.loss;
    // Adam overshoots early on, so a rising loss is not a stall; only a flat one is.
    stalled = std::abs(previous - e.loss) < cfg.tolerance ? stalled + 1 : 0;
    previous = e.loss;
    if (e.loss < result.loss) {
      result.loss = e.loss;
      result.pose = pose;
    }
    if (it == cfg.iterations || stalled >= cfg.patience) break;

    const MapGradients g = render_backward(map, e.render, e.terms.grads, cfg.render);
    // t = pivot - d * R e_z, so dL/dpivot = dL/dt and dL/dR gains -d * dL/dt in its last column.
    const Eigen::Quaterniond q = Eigen::Quaterniond(params[0], params[1], params[2], params[3]).normalized();
    Mat3 dl_dr = Mat3::Zero();
    dl_dr.col(2) = -d * g.translation;
    const Eigen::Vector4d gq = g.rotation + rotation_gradient_to_quaternion(q, dl_dr);
    const std::array<double, 7> grad{rs * gq[0], rs * gq[1], rs * gq[2], rs * gq[3], ts * g.translation.x(), ts * g.translation.y(),
                                     ts * g.translation.z()};
    opt.step(params, grad);
    // Project back onto the sphere of radius 1 / rs.
    const double n = rs * std::sqrt(params[0] * params[0] + params[1] * params[1] + params[2] * params[2] +
                                    params[3] * params[3]);
    for (int k = 0; k < 4; ++k) params[k] /= n;
    result.iterations = it + 1;
  }
  return result;
}

void write_tum_trajectory(const std::filesystem::path& path, const std::vector<Pose>& poses,
                          const std::vector<int>& indices) {
  require(indices.empty() || indices.size() == poses.size(), "write_tum_trajectory: index count mismatch");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write trajectory file: " + path.string());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Pose& p = poses[i];
    char line[256];
    std::snprintf(line, sizeof line, "%d %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n",
                  indices.empty() ? static_cast<int>(i) : indices[i], p.translation.x(), p.translation.y(),
                  p.translation.z(), p.rotation.x(), p.rotation.y(), p.rotation.z(), p.rotation.w());
    out << line;
  }
}

void append_tum_pose(const std::filesystem::path& path, int index, const Pose& p) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw InputError("cannot append to trajectory file: " + path.string());
  char line[256];
  std::snprintf(line, sizeof line, "%d %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", index, p.translation.x(),
                p.translation.y(), p.translation.z(), p.rotation.x(), p.rotation.y(), p.rotation.z(),
                p.rotation.w());
  out << line;
}

std::vector<Pose> read_tum_trajectory(const std::filesystem::path& path, std::vector<double>* stamps) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read trajectory file: " + path.string());
  std::vector<Pose> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double stamp, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> stamp >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed trajectory line");
    }
    Pose p;
    p.translation = Vec3(tx, ty, tz);
    p.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
    if (p.rotation.norm() < 1e-12) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": zero quaternion");
    }
    p.rotation.normalize();
    poses.push_back(p);
    if (stamps) stamps->push_back(stamp);
  }
  return poses;
}

}  // namespace semsplat
