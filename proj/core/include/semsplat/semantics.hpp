#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/image.hpp"
#include "semsplat/nn.hpp"

namespace semsplat {

struct SemanticConfig {
  int feature_dim = 384;  // D_f
  int spatial_dim = 1;    // D_s
  int fused_dim = 32;
  int hidden_dim = 16;
  int num_classes = 6;
  /// false: the encoder reads raw semantic features (no fusion network).
  bool use_fusion = true;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Fusion network, 32->3 encoder and 3->K decoder.
///
/// Semantic branch: conv3x3 D_f->256, ReLU, 256->128, ReLU, 128->16.
/// Spatial branch: conv3x3 D_s->16. The two 16-channel maps are
/// concatenated and passed through a linear conv3x3 32->fused_dim.
/// Encoder: dense fused_dim->16, ReLU, 16->3, sigmoid.
/// Decoder: dense 3->16, ReLU, 16->K logits.
class SemanticNets {
 public:
  explicit SemanticNets(const SemanticConfig& cfg = {});

  const SemanticConfig& config() const { return cfg_; }
  int num_classes() const { return cfg_.num_classes; }

  nn::Conv3x3 sem1, sem2, sem3, spatial, fuse;
  nn::Dense enc1, enc2, dec1, dec2;

  std::vector<nn::Param*> fusion_params();
  std::vector<nn::Param*> encoder_params();
  std::vector<nn::Param*> decoder_params();
  std::vector<nn::Param*> all_params();
  std::vector<const nn::Param*> all_params() const;
  void zero_grad();

  /// Length-prefixed blob body: config header, then per tensor a shape header and f32 data.
  std::vector<std::uint8_t> serialize() const;
  static SemanticNets deserialize(std::span<const std::uint8_t> blob);

  bool same_weights(const SemanticNets& other) const;

 private:
  SemanticConfig cfg_;
};

/// F_df, F_ds -> F^32 (semantic branch + spatial branch + fusion conv).
nn::FeatureMap scff_fuse(const SemanticNets& nets, const nn::FeatureMap& semantic, const nn::FeatureMap& spatial);
/// Per-row MLP with sigmoid output; every component lies in [0,1].
nn::Matrix encode(const SemanticNets& nets, const nn::Matrix& fused);
/// Per-row class logits.
nn::Matrix decode(const SemanticNets& nets, const nn::Matrix& features);

/// dL/dfeatures for dL/dlogits, without touching parameter gradients.
nn::Matrix decode_input_gradient(const SemanticNets& nets, const nn::Matrix& features, const nn::Matrix& d_logits);
/// Accumulates decoder parameter gradients; returns dL/dfeatures.
nn::Matrix decode_backward(SemanticNets& nets, const nn::Matrix& features, const nn::Matrix& d_logits);

/// Encoder input for a frame: fused features, or raw semantic features when fusion is off.
nn::FeatureMap encoder_input(const SemanticNets& nets, const nn::FeatureMap& semantic, const nn::FeatureMap& spatial);
/// Compressed 3-channel per-pixel feature image (H x W x 3).
ImageD encode_frame(const SemanticNets& nets, const nn::FeatureMap& semantic, const nn::FeatureMap& spatial);
/// Decoder argmax per pixel for an H x W x 3 feature image.
LabelImage decode_labels(const SemanticNets& nets, const ImageD& features);

struct ScffSample {
  nn::FeatureMap semantic;
  nn::FeatureMap spatial;
  LabelImage labels;  // supervision, kIgnoreLabel excluded
};

struct ScffTrainReport {
  std::vector<double> losses;  // cross-entropy per iteration
};

/// Cross-entropy of decode(encode(...)) against the sample's labels; accumulates
/// parameter gradients into `nets`.
double scff_loss_and_gradients(SemanticNets& nets, const ScffSample& sample);

/// Jointly trains fusion, encoder and decoder with Adam on per-pixel cross-entropy.
/// Iteration i uses sample i mod n. The fusion convolutions step at lr * fusion_lr_scale.
ScffTrainReport train_scff(SemanticNets& nets, std::span<const ScffSample> samples, int iterations, double lr,
                           double fusion_lr_scale = 0.1);

/// Pixel accuracy of decode(encode(...)) against labels, ignoring kIgnoreLabel.
double scff_pixel_accuracy(const SemanticNets& nets, const ScffSample& sample);

struct MockExtractorConfig {
  int feature_dim = 384;
  int num_classes = 6;
  double noise_sigma = 0.0;
  double inconsistency_rate = 0.0;  // per-frame swap probability
  int swap_class_a = 1;
  int swap_class_b = 2;
  /// When set, the mock segmentation head mislabels the pair in swapped frames too.
  bool swap_head_labels = true;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Stand-in for a pretrained feature extractor: class embedding plus noise,
/// with whole-frame swaps of one class pair.
class MockSemanticExtractor {
 public:
  explicit MockSemanticExtractor(const MockExtractorConfig& cfg);

  const MockExtractorConfig& config() const { return cfg_; }
  const nn::Matrix& embeddings() const { return embeddings_; }  // K x D_f, unit rows
  bool frame_swapped(std::uint64_t frame_seed) const;
  nn::FeatureMap extract(const LabelImage& gt_labels, std::uint64_t frame_seed) const;
  /// Segmentation-head labels for the frame.
  LabelImage head_labels(const LabelImage& gt_labels, std::uint64_t frame_seed) const;

 private:
  int effective_class(int label, bool swapped) const;

  MockExtractorConfig cfg_;
  nn::Matrix embeddings_;
};

/// Per-frame min-max normalized depth; invalid pixels and degenerate ranges map to 0.
nn::FeatureMap mock_spatial_extractor(const ImageD& depth);

}  // namespace semsplat
