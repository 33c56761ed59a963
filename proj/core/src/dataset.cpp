#include "semsplat/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"
#include "semsplat/parallel.hpp"
#include "semsplat/tracker.hpp"

namespace semsplat {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool inside(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

void validate_primitive(const Primitive& p, const SceneSpec& spec, std::size_t i) {
  const std::string where = "scene primitive " + std::to_string(i);
  require(p.class_id >= 0 && p.class_id < spec.num_classes, where + ": class id out of range");
  require((p.albedo.array() >= 0).all() && (p.albedo.array() <= 1).all(), where + ": albedo outside [0,1]");
  require(p.checker >= 0, where + ": negative checker period");
  Vec3 ext;
  if (p.kind == PrimitiveKind::Box) {
    require((p.half_extent.array() > 0).all(), where + ": box extents must be positive");
    ext = p.half_extent;
  } else {
    require(p.radius > 0, where + ": sphere radius must be positive");
    ext = Vec3::Constant(p.radius);
  }
  require(inside(p.center - ext, spec.bounds_min, spec.bounds_max) &&
              inside(p.center + ext, spec.bounds_min, spec.bounds_max),
          where + ": outside scene bounds");
}

double checker_factor(const Primitive& p, const Vec3& x) {
  if (p.checker <= 0) return 1.0;
  // Small offset keeps face-aligned hits from sitting on a cell boundary.
  const Vec3 c = ((x.array() + 1e-4) / p.checker).floor();
  const long parity = static_cast<long>(c.x()) + static_cast<long>(c.y()) + static_cast<long>(c.z());
  return (parity & 1) ? 0.55 : 1.0;
}

Pose look_at_target(const Vec3& eye, const Vec3& target) { return Pose::look_at(eye, target, Vec3::UnitZ()); }

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  require(spec.num_classes >= 1 && spec.num_classes < kIgnoreLabel, "SceneSpec: class count out of range");
  require((spec.bounds_max.array() > spec.bounds_min.array()).all(), "SceneSpec: empty bounds");
  require(spec.random_primitives >= 0, "SceneSpec: negative random primitive count");
  Scene scene;
  scene.num_classes = spec.num_classes;
  scene.primitives = spec.primitives;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec3 span = spec.bounds_max - spec.bounds_min;
  const double max_size = 0.15 * span.minCoeff();
  for (int i = 0; i < spec.random_primitives; ++i) {
    Primitive p;
    p.kind = unit(rng) < 0.5 ? PrimitiveKind::Box : PrimitiveKind::Sphere;
    p.half_extent = Vec3(0.2 + 0.8 * unit(rng), 0.2 + 0.8 * unit(rng), 0.2 + 0.8 * unit(rng)) * max_size;
    p.radius = (0.2 + 0.8 * unit(rng)) * max_size;
    const Vec3 ext = p.kind == PrimitiveKind::Box ? p.half_extent : Vec3::Constant(p.radius);
    for (int a = 0; a < 3; ++a) {
      const double lo = spec.bounds_min[a] + ext[a], hi = spec.bounds_max[a] - ext[a];
      p.center[a] = lo + (hi - lo) * unit(rng);
    }
    p.class_id = static_cast<int>(rng() % static_cast<std::uint64_t>(spec.num_classes));
    p.albedo = Vec3(0.2 + 0.8 * unit(rng), 0.2 + 0.8 * unit(rng), 0.2 + 0.8 * unit(rng));
    scene.primitives.push_back(p);
  }
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) validate_primitive(scene.primitives[i], spec, i);
  return scene;
}

SceneSpec room0_synth_spec() {
  SceneSpec spec;
  spec.num_classes = 6;
  spec.seed = 0;
  spec.bounds_min = Vec3(-2.0, -2.0, -0.2);
  spec.bounds_max = Vec3(2.0, 2.0, 2.0);

  auto box = [](Vec3 c, Vec3 h, int cls, Vec3 albedo, double checker = 0.0) {
    Primitive p;
    p.kind = PrimitiveKind::Box;
    p.center = c;
    p.half_extent = h;
    p.class_id = cls;
    p.albedo = albedo;
    p.checker = checker;
    return p;
  };
  auto sphere = [](Vec3 c, double r, int cls, Vec3 albedo, double checker = 0.0) {
    Primitive p;
    p.kind = PrimitiveKind::Sphere;
    p.center = c;
    p.radius = r;
    p.class_id = cls;
    p.albedo = albedo;
    p.checker = checker;
    return p;
  };

  spec.primitives = {
      box({0.0, 0.0, -0.05}, {1.8, 1.8, 0.05}, 0, {0.85, 0.8, 0.7}, 0.2),
      box({0.35, 0.3, 0.15}, {0.18, 0.14, 0.15}, 1, {0.85, 0.25, 0.2}, 0.1),
      box({-0.35, 0.25, 0.1}, {0.12, 0.2, 0.1}, 2, {0.2, 0.7, 0.3}, 0.1),
      box({-0.05, -0.4, 0.22}, {0.16, 0.12, 0.22}, 3, {0.25, 0.35, 0.85}, 0.1),
      sphere({0.4, -0.3, 0.14}, 0.14, 4, {0.9, 0.8, 0.2}, 0.07),
      sphere({-0.45, -0.25, 0.12}, 0.12, 5, {0.7, 0.3, 0.8}, 0.07),
  };
  return spec;
}

void TrajectorySpec::validate() const {
  require(frames >= 2, "TrajectorySpec: at least two frames required");
  if (kind == TrajectoryKind::Orbit) require(radius > 0, "TrajectorySpec: orbit radius must be positive");
}

std::vector<Pose> generate_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(spec.frames));
  for (int i = 0; i < spec.frames; ++i) {
    const double t = static_cast<double>(i) / (spec.frames - 1);
    Vec3 eye;
    switch (spec.kind) {
      case TrajectoryKind::Orbit: {
        const double phi = (spec.start_deg + spec.arc_deg * t) * M_PI / 180.0;
        eye = spec.target + Vec3(spec.radius * std::cos(phi), spec.radius * std::sin(phi), spec.height);
        break;
      }
      case TrajectoryKind::Lissajous: {
        const Eigen::Array3d arg = 2.0 * M_PI * spec.frequency.array() * t + spec.phase.array();
        eye = spec.center + (spec.amplitude.array() * arg.sin()).matrix();
        break;
      }
      case TrajectoryKind::Straight:
        eye = spec.start + t * (spec.end - spec.start);
        break;
    }
    require((eye - spec.target).norm() > 1e-9, "generate_trajectory: camera coincides with target");
    poses.push_back(look_at_target(eye, spec.target));
  }
  return poses;
}

double intersect(const Primitive& prim, const Vec3& origin, const Vec3& dir, double t_min, Vec3* normal) {
  if (prim.kind == PrimitiveKind::Sphere) {
    const Vec3 oc = origin - prim.center;
    const double a = dir.squaredNorm();
    const double b = oc.dot(dir);
    const double c = oc.squaredNorm() - prim.radius * prim.radius;
    const double disc = b * b - a * c;
    if (disc < 0) return kInf;
    const double s = std::sqrt(disc);
    double t = (-b - s) / a;
    if (!(t > t_min)) t = (-b + s) / a;
    if (!(t > t_min)) return kInf;
    if (normal) *normal = (origin + t * dir - prim.center).normalized();
    return t;
  }
  const Vec3 lo = prim.center - prim.half_extent, hi = prim.center + prim.half_extent;
  double t_near = -kInf, t_far = kInf;
  int near_axis = -1, far_axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return kInf;
      continue;
    }
    double t0 = (lo[a] - origin[a]) / dir[a], t1 = (hi[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) { t_near = t0; near_axis = a; }
    if (t1 < t_far) { t_far = t1; far_axis = a; }
  }
  if (t_near > t_far) return kInf;
  double t = t_near;
  int axis = near_axis;
  if (!(t > t_min)) {
    t = t_far;
    axis = far_axis;
  }
  if (!(t > t_min) || axis < 0) return kInf;
  if (normal) {
    *normal = Vec3::Zero();
    (*normal)[axis] = dir[axis] > 0 ? -1.0 : 1.0;
    if (t == t_far && t_near <= t_min) (*normal)[axis] = -(*normal)[axis];
  }
  return t;
}

namespace {

struct Hit {
  double t = kInf;
  const Primitive* prim = nullptr;
  Vec3 normal = Vec3::Zero();
};

Hit trace(const Scene& scene, const Vec3& origin, const Vec3& dir, const CameraIntrinsics& intr) {
  Hit h;
  for (const Primitive& p : scene.primitives) {
    Vec3 n;
    const double t = intersect(p, origin, dir, intr.near, &n);
    if (t < h.t) {
      h.t = t;
      h.prim = &p;
      h.normal = n;
    }
  }
  if (h.t > intr.far) h.prim = nullptr;
  return h;
}

Vec3 shade(const Scene& scene, const Hit& h, const Vec3& point) {
  const double lambert = std::max(0.0, h.normal.dot(-scene.light_direction));
  const double s = (scene.ambient + (1.0 - scene.ambient) * lambert) * checker_factor(*h.prim, point);
  return (h.prim->albedo * s).cwiseMin(1.0);
}

}  // namespace

Frame render_ground_truth(const Scene& scene, const Pose& pose, const CameraIntrinsics& intr, int threads) {
  intr.validate();
  require(scene.color_samples >= 1, "render_ground_truth: color_samples must be >= 1");
  Frame f;
  f.rgb = ImageD(intr.height, intr.width, 3);
  f.depth = ImageD(intr.height, intr.width, 1);
  f.labels = LabelImage(intr.height, intr.width, 1, kIgnoreLabel);
  const Mat3 rot = pose.rotation_matrix();
  const Vec3 origin = pose.translation;
  const int n = scene.color_samples;

  parallel_for(static_cast<std::size_t>(intr.height), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < intr.width; ++x) {
      // Camera-frame directions with unit z, so the ray parameter is the z-depth.
      auto ray = [&](double u, double v) { return Vec3(rot * Vec3((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0)); };
      const Vec3 dir = ray(x, y);
      const Hit center = trace(scene, origin, dir, intr);
      if (center.prim) {
        f.depth(y, x) = center.t;
        f.labels(y, x) = static_cast<std::uint8_t>(center.prim->class_id);
      }
      Vec3 color = Vec3::Zero();
      if (n == 1) {
        if (center.prim) color = shade(scene, center, origin + center.t * dir);
      } else {
        for (int sy = 0; sy < n; ++sy) {
          for (int sx = 0; sx < n; ++sx) {
            const Vec3 d = ray(x - 0.5 + (sx + 0.5) / n, y - 0.5 + (sy + 0.5) / n);
            const Hit h = trace(scene, origin, d, intr);
            if (h.prim) color += shade(scene, h, origin + h.t * d);
          }
        }
        color /= static_cast<double>(n * n);
      }
      for (int c = 0; c < 3; ++c) f.rgb(y, x, c) = color[c];
    }
  });
  return f;
}

Sequence generate_sequence(const Scene& scene, const TrajectorySpec& traj, const CameraIntrinsics& intr,
                           std::uint64_t scene_seed, int threads) {
  Sequence seq;
  seq.intr = intr;
  seq.num_classes = scene.num_classes;
  seq.scene_seed = scene_seed;
  seq.gt_poses = generate_trajectory(traj);
  for (std::size_t i = 0; i < seq.gt_poses.size(); ++i) {
    Frame f = render_ground_truth(scene, seq.gt_poses[i], intr, threads);
    f.index = static_cast<int>(i);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::string frame_file_name(int index, const std::string& ext) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index << ext;
  return os.str();
}

void save_sequence(const std::filesystem::path& dir, const Sequence& seq) {
  namespace fs = std::filesystem;
  require(seq.frames.size() == seq.gt_poses.size(), "save_sequence: frame and pose counts differ");
  for (const char* sub : {"rgb", "depth", "label"}) fs::create_directories(dir / sub);
  std::vector<int> indices;
  for (const Frame& f : seq.frames) {
    f.validate(seq.intr);
    write_ppm(dir / "rgb" / frame_file_name(f.index, ".ppm"), f.rgb);
    write_pfm(dir / "depth" / frame_file_name(f.index, ".pfm"), f.depth);
    write_pgm(dir / "label" / frame_file_name(f.index, ".pgm"), f.labels);
    indices.push_back(f.index);
  }
  write_tum_trajectory(dir / "gt_traj.txt", seq.gt_poses, indices);

  nlohmann::ordered_json meta;
  meta["width"] = seq.intr.width;
  meta["height"] = seq.intr.height;
  meta["fx"] = seq.intr.fx;
  meta["fy"] = seq.intr.fy;
  meta["cx"] = seq.intr.cx;
  meta["cy"] = seq.intr.cy;
  meta["near"] = seq.intr.near;
  meta["far"] = seq.intr.far;
  meta["num_classes"] = seq.num_classes;
  meta["scene_seed"] = seq.scene_seed;
  meta["frames"] = seq.frames.size();
  std::ofstream out(dir / "meta.json");
  if (!out) throw InputError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << "\n";
}

Sequence load_sequence(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw InputError("cannot open " + meta_path.string());
  Sequence seq;
  std::size_t count = 0;
  try {
    const auto meta = nlohmann::json::parse(in);
    seq.intr.width = meta.at("width").get<int>();
    seq.intr.height = meta.at("height").get<int>();
    seq.intr.fx = meta.at("fx").get<double>();
    seq.intr.fy = meta.at("fy").get<double>();
    seq.intr.cx = meta.at("cx").get<double>();
    seq.intr.cy = meta.at("cy").get<double>();
    seq.intr.near = meta.value("near", 0.01);
    seq.intr.far = meta.value("far", 20.0);
    seq.num_classes = meta.at("num_classes").get<int>();
    seq.scene_seed = meta.value("scene_seed", std::uint64_t{0});
    count = meta.at("frames").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(meta_path.string() + ": " + e.what());
  }
  if (!seq.intr.valid()) throw InputError(meta_path.string() + ": invalid intrinsics");
  if (seq.num_classes < 1 || seq.num_classes >= kIgnoreLabel) throw InputError(meta_path.string() + ": bad num_classes");

  std::vector<double> stamps;
  seq.gt_poses = read_tum_trajectory(dir / "gt_traj.txt", &stamps);
  if (seq.gt_poses.size() != count)
    throw InputError((dir / "gt_traj.txt").string() + ": pose count does not match meta.json frame count");

  for (std::size_t i = 0; i < count; ++i) {
    Frame f;
    f.index = static_cast<int>(std::lround(stamps[i]));
    const auto rgb_path = dir / "rgb" / frame_file_name(f.index, ".ppm");
    const auto depth_path = dir / "depth" / frame_file_name(f.index, ".pfm");
    const auto label_path = dir / "label" / frame_file_name(f.index, ".pgm");
    f.rgb = read_ppm(rgb_path);
    f.depth = read_pfm(depth_path);
    f.labels = read_pgm(label_path);
    if (f.rgb.height() != seq.intr.height || f.rgb.width() != seq.intr.width)
      throw InputError(rgb_path.string() + ": size does not match meta.json");
    if (!f.depth.same_extent(f.rgb)) throw InputError(depth_path.string() + ": size does not match rgb");
    if (!f.labels.same_extent(f.rgb)) throw InputError(label_path.string() + ": size does not match rgb");
    for (std::size_t p = 0; p < f.labels.size(); ++p) {
      const int l = f.labels[p];
      if (l != kIgnoreLabel && l >= seq.num_classes) throw InputError(label_path.string() + ": label out of range");
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace semsplat
