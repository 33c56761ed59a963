#include "semsplat/slam.hpp"

#include <algorithm>
#include <deque>

#include "semsplat/errors.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/mapper.hpp"
#include "semsplat/tracker.hpp"
#include "semsplat/vcvp.hpp"

namespace semsplat {
namespace {

struct FrameInputs {
  Frame frame;  // labels replaced by segmentation-head labels
  nn::FeatureMap semantic;
  nn::FeatureMap spatial;
};

FrameInputs prepare(const Frame& gt, const MockSemanticExtractor& extractor) {
  FrameInputs in;
  in.frame = gt;
  const auto seed = static_cast<std::uint64_t>(gt.index);
  in.frame.labels = extractor.head_labels(gt.labels, seed);
  in.semantic = extractor.extract(gt.labels, seed);
  in.spatial = mock_spatial_extractor(gt.depth);
  return in;
}

}  // namespace

double trajectory_length(const std::vector<Pose>& poses) {
  double len = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) len += translation_distance(poses[i], poses[i - 1]);
  return len;
}

SlamResult run_slam(const Sequence& seq, const SlamConfig& cfg_in, const SlamHooks& hooks) {
  if (seq.frames.empty()) throw InputError("run_slam: sequence has no frames");
  seq.intr.validate();
  SlamConfig cfg = cfg_in;
  cfg.semantic.num_classes = seq.num_classes;
  cfg.finalize();

  const CameraIntrinsics& intr = seq.intr;
  const MockSemanticExtractor extractor(cfg.extractor);
  SlamResult result{{}, {}, {}, {}, SemanticNets(cfg.semantic), {}, {}};

  // Network warmup on the first keyframes, then the fusion network and encoder are frozen.
  {
    std::vector<ScffSample> samples;
    for (const Frame& f : seq.frames) {
      if (static_cast<int>(samples.size()) >= cfg.scff_warmup_frames) break;
      if (!is_keyframe(f.index, cfg.mapper)) continue;
      FrameInputs in = prepare(f, extractor);
      samples.push_back({std::move(in.semantic), std::move(in.spatial), std::move(in.frame.labels)});
    }
    if (samples.empty()) {
      FrameInputs in = prepare(seq.frames.front(), extractor);
      samples.push_back({std::move(in.semantic), std::move(in.spatial), std::move(in.frame.labels)});
    }
    result.scff_losses = train_scff(result.nets, samples, cfg.scff_iterations, cfg.scff_learning_rate,
                                    cfg.scff_fusion_lr_scale).losses;
  }

  std::deque<Keyframe> window;
  Pose prev = Pose::identity(), prev2 = Pose::identity();
  int keyframe_count = 0;

  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const Frame& gt = seq.frames[i];
    gt.validate(intr);
    FrameInputs in = prepare(gt, extractor);
    FrameLog log;
    log.index = gt.index;

    Pose pose = Pose::identity();
    if (i > 0) {
      const Pose init = init_pose(prev, i > 1 ? prev2 : prev);
      if (result.map.empty()) {
        pose = init;
      } else {
        const TrackResult tr = track(result.map, result.nets, in.frame, init, intr, cfg.tracker);
        pose = tr.pose;
        log.track_loss = tr.loss;
        log.track_iterations = tr.iterations;
      }
    }
    result.trajectory.push_back(pose);
    result.indices.push_back(gt.index);
    prev2 = prev;
    prev = pose;

    log.keyframe = i == 0 || is_keyframe(gt.index, cfg.mapper);
    if (log.keyframe) {
      ++keyframe_count;
      result.keyframes.push_back(gt.index);
      Keyframe kf{in.frame, pose, encode_frame(result.nets, in.semantic, in.spatial)};
      log.added = densify(result.map, kf, intr, cfg.mapper.weights, cfg.mapper.render);
      window.push_back(std::move(kf));
      while (static_cast<int>(window.size()) > cfg.mapper.window_size) window.pop_front();

      const std::vector<Keyframe> win(window.begin(), window.end());
      log.map_update_accepted = optimize_map(result.map, result.nets, win, intr, cfg.mapper).accepted;

      if (cfg.use_vcvp && !result.map.empty()) {
        const std::size_t checked = std::min<std::size_t>(window.size(), static_cast<std::size_t>(cfg.vcvp.window_frames));
        for (std::size_t k = window.size() - checked; k < window.size(); ++k)
          log.flagged += vcvp_prune(result.map, window[k].pose, intr, cfg.vcvp).outliers.size();
      }
      log.pruned = prune_basic(result.map, cfg.mapper);

      const std::string problem = result.map.check_invariants();
      if (!problem.empty()) throw InvariantViolation("map invariant violated after frame " + std::to_string(gt.index) + ": " + problem);
      if (hooks.after_keyframe) hooks.after_keyframe(keyframe_count, result.map, result.nets);
    }
    log.map_size = result.map.size();
    if (!pose.valid(1e-6)) throw InvariantViolation("non-unit quaternion at frame " + std::to_string(gt.index));
    result.log.push_back(log);
    if (hooks.after_frame) hooks.after_frame(log);
  }
  return result;
}

std::vector<KeyframeView> render_keyframes(const SlamResult& result, const CameraIntrinsics& intr, int threads) {
  std::vector<KeyframeView> views;
  RenderOptions opts;
  opts.threads = threads;
  for (int kf : result.keyframes) {
    const auto it = std::find(result.indices.begin(), result.indices.end(), kf);
    require(it != result.indices.end(), "render_keyframes: keyframe without pose");
    KeyframeView v;
    v.index = kf;
    v.pose = result.trajectory[static_cast<std::size_t>(it - result.indices.begin())];
    RenderOutput r = render(result.map, v.pose, intr, opts);
    v.labels = decode_labels(result.nets, r.semantic);
    v.color = std::move(r.color);
    v.depth = std::move(r.depth);
    views.push_back(std::move(v));
  }
  return views;
}

RunMetrics evaluate_views(const std::vector<KeyframeView>& views, const Sequence& gt, const std::vector<Pose>& est,
                          const std::vector<int>& est_indices, int num_classes) {
  RunMetrics m;
  std::vector<Pose> gt_poses;
  std::vector<Pose> est_matched;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const int idx = est_indices.empty() ? static_cast<int>(i) : est_indices[i];
    for (std::size_t j = 0; j < gt.frames.size(); ++j) {
      if (gt.frames[j].index == idx) {
        gt_poses.push_back(gt.gt_poses[j]);
        est_matched.push_back(est[i]);
        break;
      }
    }
  }
  if (est_matched.size() != est.size()) throw InputError("evaluate: estimated frame index missing from ground truth");
  m.trajectory_length = trajectory_length(gt_poses);
  m.ate_rmse = est_matched.size() >= 3 ? ate_rmse(est_matched, gt_poses) : 0.0;

  ConfusionCounts pooled(num_classes);
  for (const KeyframeView& v : views) {
    const Frame* g = nullptr;
    for (const Frame& f : gt.frames)
      if (f.index == v.index) g = &f;
    if (!g) throw InputError("evaluate: no ground-truth frame " + std::to_string(v.index));
    FrameMetrics fm;
    fm.index = v.index;
    fm.psnr = psnr(v.color, g->rgb);
    fm.ssim = ssim(v.color, g->rgb);
    fm.depth_l1 = depth_l1_metric(v.depth, g->depth);
    fm.miou = miou(v.labels, g->labels, num_classes);
    pooled.add(v.labels, g->labels);
    m.per_frame.push_back(fm);
  }
  if (!m.per_frame.empty()) {
    const double n = static_cast<double>(m.per_frame.size());
    for (const FrameMetrics& fm : m.per_frame) {
      m.psnr_mean += fm.psnr / n;
      m.ssim_mean += fm.ssim / n;
      m.depth_l1 += fm.depth_l1 / n;
    }
    m.miou = pooled.miou();
  }
  return m;
}

}  // namespace semsplat
