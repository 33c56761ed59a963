#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "semsplat/config.hpp"
#include "semsplat/dataset.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/eval.hpp"
#include "semsplat/image_io.hpp"
#include "semsplat/map_io.hpp"
#include "semsplat/mapper.hpp"
#include "semsplat/slam.hpp"
#include "semsplat/tracker.hpp"
#include "semsplat/vcvp.hpp"

namespace semsplat::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Bad user input reported as InputError so the exit code is 2.
template <typename F>
auto as_input(F&& f) {
  try {
    return f();
  } catch (const ContractViolation& e) {
    throw InputError(e.what());
  }
}

std::pair<int, int> parse_resolution(const std::string& s) {
  int w = 0, h = 0;
  char x = 0;
  std::istringstream is(s);
  if (!(is >> w >> x >> h) || x != 'x' || w < 1 || h < 1 || !is.eof())
    throw InputError("bad --resolution '" + s + "' (expected WxH)");
  return {w, h};
}

Pose parse_pose(const std::string& s) {
  std::istringstream is(s);
  double v[7];
  for (double& d : v)
    if (!(is >> d)) throw InputError("bad --pose '" + s + "' (expected \"tx ty tz qx qy qz qw\")");
  Pose p;
  p.translation = Vec3(v[0], v[1], v[2]);
  p.rotation = Eigen::Quaterniond(v[6], v[3], v[4], v[5]);
  if (!(p.rotation.norm() > 1e-12)) throw InputError("bad --pose: zero quaternion");
  p.normalize();
  return p;
}

ImageD colorize_labels(const LabelImage& labels) {
  static const double palette[][3] = {{0.55, 0.55, 0.55}, {0.9, 0.2, 0.2}, {0.2, 0.8, 0.3}, {0.2, 0.4, 0.95},
                                      {0.95, 0.85, 0.2}, {0.75, 0.3, 0.85}, {0.2, 0.85, 0.85}, {0.95, 0.55, 0.2}};
  constexpr int n = sizeof(palette) / sizeof(palette[0]);
  ImageD out(labels.height(), labels.width(), 3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    for (int c = 0; c < 3; ++c) out[3 * i + c] = palette[labels[i] % n][c];
  }
  return out;
}

Image<std::uint8_t> silhouette_bytes(const ImageD& sil) {
  Image<std::uint8_t> out(sil.height(), sil.width(), 1);
  for (std::size_t i = 0; i < sil.size(); ++i) out[i] = to_byte(sil[i]);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

ordered_json metrics_json(const RunMetrics& m) {
  ordered_json j;
  j["ate_rmse"] = m.ate_rmse;
  j["trajectory_length"] = m.trajectory_length;
  j["psnr_mean"] = m.psnr_mean;
  j["ssim_mean"] = m.ssim_mean;
  j["depth_l1"] = m.depth_l1;
  j["miou"] = m.miou;
  j["lpips"] = nullptr;
  j["per_frame"] = ordered_json::array();
  for (const FrameMetrics& f : m.per_frame) {
    j["per_frame"].push_back(
        {{"index", f.index}, {"psnr", f.psnr}, {"ssim", f.ssim}, {"depth_l1", f.depth_l1}, {"miou", f.miou}});
  }
  return j;
}

std::map<std::string, std::string> intrinsics_params(const CameraIntrinsics& intr) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {{"width", std::to_string(intr.width)}, {"height", std::to_string(intr.height)},
          {"fx", num(intr.fx)}, {"fy", num(intr.fy)}, {"cx", num(intr.cx)}, {"cy", num(intr.cy)},
          {"near", num(intr.near)}, {"far", num(intr.far)}};
}

CameraIntrinsics intrinsics_from_metadata(const fs::path& map_path) {
  const MapMetadata meta = load_map_metadata(map_path);
  const auto& p = meta.parameters;
  auto get = [&](const char* key) {
    const auto it = p.find(key);
    if (it == p.end()) throw InputError(metadata_path(map_path).string() + ": missing parameter '" + key + "'");
    try {
      return std::stod(it->second);
    } catch (const std::logic_error&) {
      throw InputError(metadata_path(map_path).string() + ": bad parameter '" + key + "'");
    }
  };
  CameraIntrinsics intr;
  intr.width = static_cast<int>(get("width"));
  intr.height = static_cast<int>(get("height"));
  intr.fx = get("fx");
  intr.fy = get("fy");
  intr.cx = get("cx");
  intr.cy = get("cy");
  intr.near = get("near");
  intr.far = get("far");
  if (!intr.valid()) throw InputError(metadata_path(map_path).string() + ": invalid intrinsics");
  return intr;
}

void save_map_with_metadata(const fs::path& path, const GaussianMap& map, const SemanticNets& nets,
                            const CameraIntrinsics& intr, const std::string& scene) {
  save_map(path, map, nets);
  save_map_metadata(path, {nets.num_classes(), scene, intrinsics_params(intr)});
}

void write_views(const fs::path& dir, const std::vector<KeyframeView>& views) {
  for (const char* sub : {"rgb", "depth", "label", "semantic"}) fs::create_directories(dir / sub);
  for (const KeyframeView& v : views) {
    write_ppm(dir / "rgb" / frame_file_name(v.index, ".ppm"), v.color);
    write_pfm(dir / "depth" / frame_file_name(v.index, ".pfm"), v.depth);
    write_pgm(dir / "label" / frame_file_name(v.index, ".pgm"), v.labels);
    write_ppm(dir / "semantic" / frame_file_name(v.index, ".ppm"), colorize_labels(v.labels));
  }
}

// ---------------------------------------------------------------- commands

struct GenArgs {
  std::string preset = "room0-synth";
  long long scene_seed = -1;
  int frames = 100;
  std::string resolution = "64x48";
  std::string trajectory = "orbit";
  double arc_deg = 40.0;
  std::string out;
  int threads = 0;
};

int cmd_gen(const GenArgs& a) {
  const auto [w, h] = parse_resolution(a.resolution);
  SceneSpec spec;
  std::string scene_name = a.preset;
  if (a.scene_seed >= 0) {
    spec.num_classes = 6;
    spec.seed = static_cast<std::uint64_t>(a.scene_seed);
    spec.bounds_min = Vec3(-1.0, -1.0, 0.0);
    spec.bounds_max = Vec3(1.0, 1.0, 0.8);
    spec.random_primitives = 10;
    scene_name = "random-" + std::to_string(a.scene_seed);
  } else if (a.preset == "room0-synth") {
    spec = room0_synth_spec();
  } else {
    throw InputError("unknown preset '" + a.preset + "'");
  }
  TrajectorySpec traj;
  traj.frames = a.frames;
  traj.arc_deg = a.arc_deg;
  if (a.trajectory == "orbit") {
    traj.kind = TrajectoryKind::Orbit;
  } else if (a.trajectory == "lissajous") {
    traj.kind = TrajectoryKind::Lissajous;
  } else if (a.trajectory == "straight") {
    traj.kind = TrajectoryKind::Straight;
  } else {
    throw InputError("unknown trajectory '" + a.trajectory + "'");
  }
  const Scene scene = as_input([&] { return generate_scene(spec); });
  const Sequence seq = as_input([&] {
    return generate_sequence(scene, traj, CameraIntrinsics::desk(w, h), spec.seed, a.threads);
  });
  save_sequence(a.out, seq);
  std::cout << "wrote " << seq.frames.size() << " frames (" << scene_name << ", " << w << "x" << h << ") to "
            << a.out << "\n";
  return kExitOk;
}

struct RunArgs {
  std::string data;
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  int threads = -1;
  int checkpoint_every = -1;
};

int cmd_run(const RunArgs& a) {
  SlamConfig cfg;
  cfg.threads = 0;
  if (!a.config.empty()) apply_config(cfg, KeyValues::load(a.config));
  KeyValues flags;
  for (const std::string& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("bad --set '" + kv + "' (expected key=value)");
    flags.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.threads >= 0) flags.set("threads", std::to_string(a.threads));
  if (a.checkpoint_every >= 0) flags.set("checkpoint_every", std::to_string(a.checkpoint_every));
  apply_config(cfg, flags);

  const Sequence seq = load_sequence(a.data);
  cfg.semantic.num_classes = seq.num_classes;
  as_input([&] {
    cfg.finalize();
    return 0;
  });

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "config_resolved.txt", config_to_text(cfg));

  SlamHooks hooks;
  hooks.after_frame = [](const FrameLog& l) {
    std::cerr << "frame " << l.index << (l.keyframe ? " [kf]" : "") << " loss " << l.track_loss << " map "
              << l.map_size << "\n";
  };
  if (cfg.checkpoint_every > 0) {
    hooks.after_keyframe = [&](int count, const GaussianMap& map, const SemanticNets& nets) {
      if (count % cfg.checkpoint_every != 0) return;
      fs::create_directories(out / "checkpoints");
      save_map_with_metadata(out / "checkpoints" / ("map_kf" + frame_file_name(count, ".neds")), map, nets,
                             seq.intr, a.data);
    };
  }

  const SlamResult result = run_slam(seq, cfg, hooks);
  write_tum_trajectory(out / "est_traj.txt", result.trajectory, result.indices);
  save_map_with_metadata(out / "map.neds", result.map, result.nets, seq.intr, fs::path(a.data).filename().string());

  const auto views = render_keyframes(result, seq.intr, cfg.threads);
  write_views(out / "renders", views);
  const RunMetrics metrics = evaluate_views(views, seq, result.trajectory, result.indices, seq.num_classes);
  write_text(out / "metrics.json", metrics_json(metrics).dump(2) + "\n");
  std::cout << "ATE RMSE " << metrics.ate_rmse << " m, PSNR " << metrics.psnr_mean << " dB, depth L1 "
            << metrics.depth_l1 << " m, mIoU " << metrics.miou << ", " << result.map.size() << " Gaussians\n";
  return kExitOk;
}

struct RenderArgs {
  std::string map;
  std::string pose;
  std::string out;
  std::string resolution;
  int threads = 0;
};

int cmd_render(const RenderArgs& a) {
  const LoadedMap loaded = load_map(a.map);
  CameraIntrinsics intr = fs::exists(metadata_path(a.map)) ? intrinsics_from_metadata(a.map)
                                                            : CameraIntrinsics::desk(64, 48);
  if (!a.resolution.empty()) {
    const auto [w, h] = parse_resolution(a.resolution);
    intr = CameraIntrinsics::desk(w, h);
  }
  const Pose pose = parse_pose(a.pose);
  RenderOptions opts;
  opts.threads = a.threads;
  const RenderOutput r = render(loaded.map, pose, intr, opts);

  fs::path base(a.out);
  const fs::path stem = base.parent_path() / base.stem();
  if (!base.parent_path().empty()) fs::create_directories(base.parent_path());
  write_ppm(base, r.color);
  write_pfm(fs::path(stem.string() + "_depth.pfm"), r.depth);
  write_pgm(fs::path(stem.string() + "_silhouette.pgm"), silhouette_bytes(r.silhouette));
  const LabelImage labels = decode_labels(loaded.nets, r.semantic);
  write_pgm(fs::path(stem.string() + "_label.pgm"), labels);
  write_ppm(fs::path(stem.string() + "_semantic.ppm"), colorize_labels(labels));
  std::cout << "rendered " << loaded.map.size() << " Gaussians at " << intr.width << "x" << intr.height << "\n";
  return kExitOk;
}

struct PruneArgs {
  std::string map;
  std::string traj;
  std::string out;
  double theta = 5.0;
  double tau = 0.05;
  double gamma = 0.1;
  int threads = 0;
};

int cmd_prune(const PruneArgs& a) {
  LoadedMap loaded = load_map(a.map);
  const CameraIntrinsics intr = intrinsics_from_metadata(a.map);
  const MapMetadata meta = load_map_metadata(a.map);
  const std::vector<Pose> poses = read_tum_trajectory(a.traj);
  VcvpConfig vc;
  vc.theta_deg = a.theta;
  vc.visibility_threshold = a.tau;
  vc.opacity_decay = a.gamma;
  vc.render.threads = a.threads;
  as_input([&] {
    vc.validate();
    return 0;
  });

  const std::size_t before = loaded.map.size();
  std::size_t flagged = 0;
  for (const Pose& p : poses) flagged += vcvp_prune(loaded.map, p, intr, vc).outliers.size();
  const std::size_t removed = prune_basic(loaded.map, MapperConfig{});
  save_map(a.out, loaded.map, loaded.nets);
  save_map_metadata(a.out, meta);
  std::cout << "before " << before << " flagged " << flagged << " removed " << removed << " after "
            << loaded.map.size() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string est;
  std::string gt;
  std::string renders;
  std::string gt_data;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  std::vector<double> est_stamps, gt_stamps;
  const std::vector<Pose> est = read_tum_trajectory(a.est, &est_stamps);
  const std::vector<Pose> gt_poses = read_tum_trajectory(a.gt, &gt_stamps);
  Sequence gt = load_sequence(a.gt_data);
  // The --gt trajectory takes precedence over the one stored with the sequence.
  for (std::size_t j = 0; j < gt.frames.size(); ++j) {
    for (std::size_t k = 0; k < gt_stamps.size(); ++k)
      if (std::lround(gt_stamps[k]) == gt.frames[j].index) gt.gt_poses[j] = gt_poses[k];
  }
  std::vector<int> est_indices;
  for (double s : est_stamps) est_indices.push_back(static_cast<int>(std::lround(s)));

  std::vector<KeyframeView> views;
  const fs::path rd(a.renders);
  if (fs::exists(rd / "rgb")) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(rd / "rgb"))
      if (e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      KeyframeView v;
      try {
        v.index = std::stoi(f.stem().string());
      } catch (const std::logic_error&) {
        throw InputError(f.string() + ": file name is not a frame index");
      }
      v.color = read_ppm(f);
      v.depth = read_pfm(rd / "depth" / frame_file_name(v.index, ".pfm"));
      v.labels = read_pgm(rd / "label" / frame_file_name(v.index, ".pgm"));
      views.push_back(std::move(v));
    }
  }
  const RunMetrics m = evaluate_views(views, gt, est, est_indices, gt.num_classes);
  const std::string text = metrics_json(m).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
  }
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Semantic Gaussian-splatting SLAM on RGB-D sequences"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-dataset", "Generate a synthetic RGB-D sequence");
  g->add_option("--preset", gen.preset, "Scene preset")->capture_default_str();
  g->add_option("--scene-seed", gen.scene_seed, "Random 10-primitive scene with this seed instead of a preset");
  g->add_option("--frames", gen.frames, "Frame count")->capture_default_str();
  g->add_option("--resolution", gen.resolution, "WxH")->capture_default_str();
  g->add_option("--trajectory", gen.trajectory, "orbit | lissajous | straight")->capture_default_str();
  g->add_option("--arc", gen.arc_deg, "Orbit sweep in degrees")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--threads", gen.threads, "Worker threads (0 = all cores)")->capture_default_str();

  RunArgs runa;
  auto* r = app.add_subcommand("run", "Run SLAM on a sequence directory");
  r->add_option("--data", runa.data, "Sequence directory")->required();
  r->add_option("--config", runa.config, "key = value config file");
  r->add_option("--out", runa.out, "Output directory")->required();
  r->add_option("--set", runa.overrides, "Override a config key (key=value), repeatable");
  r->add_option("--threads", runa.threads, "Worker threads (0 = all cores)");
  r->add_option("--checkpoint-every", runa.checkpoint_every, "Write a map checkpoint every N keyframes");

  RenderArgs rend;
  auto* rn = app.add_subcommand("render", "Render a saved map from a pose");
  rn->add_option("--map", rend.map, "Map file")->required();
  rn->add_option("--pose", rend.pose, "\"tx ty tz qx qy qz qw\"")->required();
  rn->add_option("--out", rend.out, "Output PPM; depth, silhouette and labels are written alongside")->required();
  rn->add_option("--resolution", rend.resolution, "WxH (default: from map metadata)");
  rn->add_option("--threads", rend.threads, "Worker threads (0 = all cores)");

  PruneArgs pr;
  auto* p = app.add_subcommand("prune", "Offline virtual-view pruning over a trajectory");
  p->add_option("--map", pr.map, "Map file")->required();
  p->add_option("--traj", pr.traj, "TUM trajectory")->required();
  p->add_option("--out", pr.out, "Output map file")->required();
  p->add_option("--theta", pr.theta, "Virtual camera angle, degrees")->capture_default_str();
  p->add_option("--visibility", pr.tau, "Visibility weight threshold")->capture_default_str();
  p->add_option("--decay", pr.gamma, "Opacity decay factor")->capture_default_str();
  p->add_option("--threads", pr.threads, "Worker threads (0 = all cores)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compute trajectory and rendering metrics");
  e->add_option("--est", ev.est, "Estimated TUM trajectory")->required();
  e->add_option("--gt", ev.gt, "Ground-truth TUM trajectory")->required();
  e->add_option("--renders", ev.renders, "Render directory (rgb/, depth/, label/)")->required();
  e->add_option("--gt-data", ev.gt_data, "Ground-truth sequence directory")->required();
  e->add_option("--out", ev.out, "Metrics JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*r) return cmd_run(runa);
    if (*rn) return cmd_render(rend);
    if (*p) return cmd_prune(pr);
    if (*e) return cmd_eval(ev);
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitBadInput;
  } catch (const InvariantViolation& err) {
    std::cerr << "invariant violation: " << err.what() << "\n";
    return kExitInvariant;
  } catch (const ContractViolation& err) {
    std::cerr << "invariant violation: " << err.what() << "\n";
    return kExitInvariant;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("semsplat");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace semsplat::cli
