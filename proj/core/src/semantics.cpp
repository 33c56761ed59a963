#include "semsplat/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semsplat/bytes.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/optim.hpp"

namespace semsplat {

using nn::FeatureMap;
using nn::Matrix;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t salt) {
  return splitmix(splitmix(a ^ splitmix(salt)) ^ b);
}

constexpr double kReluGain = 6.0;
constexpr double kLinearGain = 3.0;

}  // namespace

void SemanticConfig::validate() const {
  require(feature_dim >= 1 && spatial_dim >= 1 && fused_dim >= 1 && hidden_dim >= 1,
          "SemanticConfig: dimensions must be positive");
  require(num_classes >= 2 && num_classes <= 255, "SemanticConfig: num_classes must be in [2, 255]");
}

SemanticNets::SemanticNets(const SemanticConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int enc_in = cfg.use_fusion ? cfg.fused_dim : cfg.feature_dim;
  std::mt19937_64 rng(cfg.seed);
  if (cfg.use_fusion) {
    sem1 = nn::Conv3x3("scff.sem1", cfg.feature_dim, 256);
    sem2 = nn::Conv3x3("scff.sem2", 256, 128);
    sem3 = nn::Conv3x3("scff.sem3", 128, 16);
    spatial = nn::Conv3x3("scff.spatial", cfg.spatial_dim, 16);
    fuse = nn::Conv3x3("scff.fuse", 32, cfg.fused_dim);
    nn::init_uniform(sem1.weight, 9 * cfg.feature_dim, kReluGain, rng);
    nn::init_uniform(sem2.weight, 9 * 256, kReluGain, rng);
    nn::init_uniform(sem3.weight, 9 * 128, kLinearGain, rng);
    nn::init_uniform(spatial.weight, 9 * cfg.spatial_dim, kLinearGain, rng);
    nn::init_uniform(fuse.weight, 9 * 32, kLinearGain, rng);
  }
  enc1 = nn::Dense("encoder.fc1", enc_in, cfg.hidden_dim);
  enc2 = nn::Dense("encoder.fc2", cfg.hidden_dim, 3);
  dec1 = nn::Dense("decoder.fc1", 3, cfg.hidden_dim);
  dec2 = nn::Dense("decoder.fc2", cfg.hidden_dim, cfg.num_classes);
  nn::init_uniform(enc1.weight, enc_in, kReluGain, rng);
  nn::init_uniform(enc2.weight, cfg.hidden_dim, kLinearGain, rng);
  nn::init_uniform(dec1.weight, 3, kReluGain, rng);
  nn::init_uniform(dec2.weight, cfg.hidden_dim, kLinearGain, rng);
}

std::vector<nn::Param*> SemanticNets::fusion_params() {
  if (!cfg_.use_fusion) return {};
  return {&sem1.weight, &sem1.bias, &sem2.weight, &sem2.bias, &sem3.weight, &sem3.bias,
          &spatial.weight, &spatial.bias, &fuse.weight, &fuse.bias};
}
std::vector<nn::Param*> SemanticNets::encoder_params() { return {&enc1.weight, &enc1.bias, &enc2.weight, &enc2.bias}; }
std::vector<nn::Param*> SemanticNets::decoder_params() { return {&dec1.weight, &dec1.bias, &dec2.weight, &dec2.bias}; }

std::vector<nn::Param*> SemanticNets::all_params() {
  std::vector<nn::Param*> all = fusion_params();
  for (auto* p : encoder_params()) all.push_back(p);
  for (auto* p : decoder_params()) all.push_back(p);
  return all;
}

std::vector<const nn::Param*> SemanticNets::all_params() const {
  auto ps = const_cast<SemanticNets*>(this)->all_params();
  return {ps.begin(), ps.end()};
}

void SemanticNets::zero_grad() {
  for (auto* p : all_params()) p->zero_grad();
}

bool SemanticNets::same_weights(const SemanticNets& other) const {
  auto a = all_params();
  auto b = other.all_params();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->value.rows() != b[i]->value.rows() || a[i]->value.cols() != b[i]->value.cols()) return false;
    if (a[i]->value != b[i]->value) return false;
  }
  return true;
}

std::vector<std::uint8_t> SemanticNets::serialize() const {
  ByteWriter w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.feature_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.spatial_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.fused_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.hidden_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.num_classes));
  w.put<std::uint32_t>(cfg_.use_fusion ? 1u : 0u);
  const auto params = all_params();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const nn::Param* p : params) {
    w.put<std::uint32_t>(2);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.cols()));
    w.put_f32_array({p->value.data(), static_cast<std::size_t>(p->value.size())});
  }
  return std::move(w.bytes());
}

SemanticNets SemanticNets::deserialize(std::span<const std::uint8_t> blob) {
  ByteReader r(blob, "semantic network blob");
  SemanticConfig cfg;
  cfg.feature_dim = static_cast<int>(r.get<std::uint32_t>());
  cfg.spatial_dim = static_cast<int>(r.get<std::uint32_t>());
  cfg.fused_dim = static_cast<int>(r.get<std::uint32_t>());
  cfg.hidden_dim = static_cast<int>(r.get<std::uint32_t>());
  cfg.num_classes = static_cast<int>(r.get<std::uint32_t>());
  cfg.use_fusion = r.get<std::uint32_t>() != 0;
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    throw InputError(std::string("semantic network blob: ") + e.what());
  }
  SemanticNets nets(cfg);
  auto params = nets.all_params();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) throw InputError("semantic network blob: tensor count mismatch");
  std::vector<double> values;
  for (nn::Param* p : params) {
    const auto rank = r.get<std::uint32_t>();
    if (rank != 2) throw InputError("semantic network blob: unsupported tensor rank");
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw InputError("semantic network blob: shape mismatch for " + p->name);
    }
    r.get_f32_array(values, static_cast<std::size_t>(rows) * cols);
    std::copy(values.begin(), values.end(), p->value.data());
    p->zero_grad();
  }
  return nets;
}

namespace {

struct FusionActivations {
  FeatureMap s1, s2, s3, sp, cat, fused;
};

FusionActivations fusion_forward(const SemanticNets& nets, const FeatureMap& semantic, const FeatureMap& spatial) {
  require(semantic.height == spatial.height && semantic.width == spatial.width,
          "scff_fuse: semantic/spatial dimensions mismatch");
  require(semantic.channels() == nets.config().feature_dim, "scff_fuse: semantic channel count mismatch");
  require(spatial.channels() == nets.config().spatial_dim, "scff_fuse: spatial channel count mismatch");
  FusionActivations a;
  a.s1 = nets.sem1.forward(semantic);
  FeatureMap r1{a.s1.height, a.s1.width, 0};
  r1.data = nn::relu(a.s1.data);
  a.s2 = nets.sem2.forward(r1);
  FeatureMap r2{a.s2.height, a.s2.width, 0};
  r2.data = nn::relu(a.s2.data);
  a.s3 = nets.sem3.forward(r2);
  a.sp = nets.spatial.forward(spatial);
  a.cat = FeatureMap(semantic.height, semantic.width, 32);
  a.cat.data.leftCols(16) = a.s3.data;
  a.cat.data.rightCols(16) = a.sp.data;
  a.fused = nets.fuse.forward(a.cat);
  return a;
}

struct HeadActivations {
  Matrix h1, z_pre, z, d1, logits;
};

HeadActivations head_forward(const SemanticNets& nets, const Matrix& input) {
  HeadActivations a;
  a.h1 = nets.enc1.forward(input);
  a.z_pre = nets.enc2.forward(nn::relu(a.h1));
  a.z = nn::sigmoid(a.z_pre);
  a.d1 = nets.dec1.forward(a.z);
  a.logits = nets.dec2.forward(nn::relu(a.d1));
  return a;
}

// Mean softmax cross-entropy over labelled rows; fills dlogits.
double cross_entropy(const Matrix& logits, const LabelImage& labels, Matrix& dlogits) {
  const Eigen::Index n = logits.rows();
  const int k = static_cast<int>(logits.cols());
  dlogits = Matrix::Zero(n, k);
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] != kIgnoreLabel) ++count;
  }
  if (count == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y == kIgnoreLabel) continue;
    require(y < k, "cross_entropy: label exceeds class count");
    const double mx = logits.row(i).maxCoeff();
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(logits(i, c) - mx);
    loss += (std::log(z) + mx - logits(i, y)) * inv;
    for (int c = 0; c < k; ++c) dlogits(i, c) = std::exp(logits(i, c) - mx) / z * inv;
    dlogits(i, y) -= inv;
  }
  return loss;
}

}  // namespace

FeatureMap scff_fuse(const SemanticNets& nets, const FeatureMap& semantic, const FeatureMap& spatial) {
  require(nets.config().use_fusion, "scff_fuse: network was built without the fusion branch");
  return fusion_forward(nets, semantic, spatial).fused;
}

Matrix encode(const SemanticNets& nets, const Matrix& fused) {
  return nn::sigmoid(nets.enc2.forward(nn::relu(nets.enc1.forward(fused))));
}

Matrix decode(const SemanticNets& nets, const Matrix& features) {
  require(features.cols() == 3, "decode: features must have 3 columns");
  return nets.dec2.forward(nn::relu(nets.dec1.forward(features)));
}

Matrix decode_input_gradient(const SemanticNets& nets, const Matrix& features, const Matrix& d_logits) {
  const Matrix h = nets.dec1.forward(features);
  const Matrix dh = nn::relu_backward(h, d_logits * nets.dec2.weight.value.transpose());
  return dh * nets.dec1.weight.value.transpose();
}

Matrix decode_backward(SemanticNets& nets, const Matrix& features, const Matrix& d_logits) {
  const Matrix h = nets.dec1.forward(features);
  const Matrix dh = nn::relu_backward(h, nets.dec2.backward(nn::relu(h), d_logits));
  return nets.dec1.backward(features, dh);
}

FeatureMap encoder_input(const SemanticNets& nets, const FeatureMap& semantic, const FeatureMap& spatial) {
  if (nets.config().use_fusion) return scff_fuse(nets, semantic, spatial);
  require(semantic.channels() == nets.config().feature_dim, "encoder_input: semantic channel count mismatch");
  return semantic;
}

ImageD encode_frame(const SemanticNets& nets, const FeatureMap& semantic, const FeatureMap& spatial) {
  const FeatureMap in = encoder_input(nets, semantic, spatial);
  const Matrix z = encode(nets, in.data);
  ImageD out(in.height, in.width, 3);
  std::copy(z.data(), z.data() + z.size(), out.data());
  return out;
}

LabelImage decode_labels(const SemanticNets& nets, const ImageD& features) {
  require(features.channels() == 3, "decode_labels: features must have 3 channels");
  const Eigen::Map<const Matrix> f(features.data(), static_cast<Eigen::Index>(features.pixels()), 3);
  const Matrix logits = decode(nets, f);
  LabelImage out(features.height(), features.width(), 1);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best;
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

double scff_loss_and_gradients(SemanticNets& nets, const ScffSample& s) {
  require(s.labels.pixels() == static_cast<std::size_t>(s.semantic.data.rows()),
          "train_scff: label/feature size mismatch");
  const bool fusion = nets.config().use_fusion;
  FusionActivations fa;
  const Matrix* input = &s.semantic.data;
  if (fusion) {
    fa = fusion_forward(nets, s.semantic, s.spatial);
    input = &fa.fused.data;
  }
  const HeadActivations ha = head_forward(nets, *input);
  Matrix dlogits;
  const double loss = cross_entropy(ha.logits, s.labels, dlogits);

  const Matrix dd1 = nn::relu_backward(ha.d1, nets.dec2.backward(nn::relu(ha.d1), dlogits));
  const Matrix dz = nets.dec1.backward(ha.z, dd1);
  const Matrix dz_pre = dz.cwiseProduct(ha.z.cwiseProduct((1.0 - ha.z.array()).matrix()));
  const Matrix dh1 = nn::relu_backward(ha.h1, nets.enc2.backward(nn::relu(ha.h1), dz_pre));
  Matrix dinput = nets.enc1.backward(*input, dh1, fusion);
  if (!fusion) return loss;

  FeatureMap dfused{fa.fused.height, fa.fused.width, 0};
  dfused.data = std::move(dinput);
  const FeatureMap dcat = nets.fuse.backward(fa.cat, dfused);
  FeatureMap ds3{dcat.height, dcat.width, 0};
  ds3.data = dcat.data.leftCols(16);
  FeatureMap dsp{dcat.height, dcat.width, 0};
  dsp.data = dcat.data.rightCols(16);
  nets.spatial.backward(s.spatial, dsp, false);
  FeatureMap r2{fa.s2.height, fa.s2.width, 0};
  r2.data = nn::relu(fa.s2.data);
  FeatureMap dr2 = nets.sem3.backward(r2, ds3);
  dr2.data = nn::relu_backward(fa.s2.data, dr2.data);
  FeatureMap r1{fa.s1.height, fa.s1.width, 0};
  r1.data = nn::relu(fa.s1.data);
  FeatureMap dr1 = nets.sem2.backward(r1, dr2);
  dr1.data = nn::relu_backward(fa.s1.data, dr1.data);
  nets.sem1.backward(s.semantic, dr1, false);
  return loss;
}

ScffTrainReport train_scff(SemanticNets& nets, std::span<const ScffSample> samples, int iterations, double lr,
                           double fusion_lr_scale) {
  require(!samples.empty(), "train_scff: empty training set");
  require(iterations >= 0 && lr > 0 && fusion_lr_scale > 0, "train_scff: invalid iteration count or learning rate");
  const auto fusion = nets.fusion_params();
  auto params = nets.all_params();
  std::vector<Adam> opt;
  for (nn::Param* p : params) {
    const bool in_fusion = std::find(fusion.begin(), fusion.end(), p) != fusion.end();
    opt.emplace_back(in_fusion ? lr * fusion_lr_scale : lr);
  }
  ScffTrainReport report;
  for (int it = 0; it < iterations; ++it) {
    nets.zero_grad();
    report.losses.push_back(scff_loss_and_gradients(nets, samples[static_cast<std::size_t>(it) % samples.size()]));
    for (std::size_t i = 0; i < params.size(); ++i) {
      nn::Param& p = *params[i];
      opt[i].step({p.value.data(), static_cast<std::size_t>(p.value.size())},
                  {p.grad.data(), static_cast<std::size_t>(p.grad.size())});
    }
  }
  nets.zero_grad();
  return report;
}

double scff_pixel_accuracy(const SemanticNets& nets, const ScffSample& sample) {
  const ImageD feats = encode_frame(nets, sample.semantic, sample.spatial);
  const LabelImage pred = decode_labels(nets, feats);
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (sample.labels[i] == kIgnoreLabel) continue;
    ++total;
    if (pred[i] == sample.labels[i]) ++hit;
  }
  return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

void MockExtractorConfig::validate() const {
  require(feature_dim >= 1 && num_classes >= 2, "MockExtractorConfig: invalid dimensions");
  require(noise_sigma >= 0, "MockExtractorConfig: noise sigma must be non-negative");
  require(inconsistency_rate >= 0 && inconsistency_rate <= 1, "MockExtractorConfig: rate must be in [0,1]");
  require(swap_class_a >= 0 && swap_class_a < num_classes && swap_class_b >= 0 && swap_class_b < num_classes,
          "MockExtractorConfig: swap classes out of range");
}

MockSemanticExtractor::MockSemanticExtractor(const MockExtractorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(mix(cfg.seed, 0, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  embeddings_ = Matrix(cfg.num_classes, cfg.feature_dim);
  for (Eigen::Index i = 0; i < embeddings_.size(); ++i) embeddings_.data()[i] = normal(rng);
  embeddings_.rowwise().normalize();
}

bool MockSemanticExtractor::frame_swapped(std::uint64_t frame_seed) const {
  if (cfg_.inconsistency_rate <= 0) return false;
  if (cfg_.inconsistency_rate >= 1) return true;
  std::mt19937_64 rng(mix(cfg_.seed, frame_seed, 2));
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg_.inconsistency_rate;
}

int MockSemanticExtractor::effective_class(int label, bool swapped) const {
  if (!swapped) return label;
  if (label == cfg_.swap_class_a) return cfg_.swap_class_b;
  if (label == cfg_.swap_class_b) return cfg_.swap_class_a;
  return label;
}

FeatureMap MockSemanticExtractor::extract(const LabelImage& gt_labels, std::uint64_t frame_seed) const {
  const bool swapped = frame_swapped(frame_seed);
  FeatureMap f(gt_labels.height(), gt_labels.width(), cfg_.feature_dim);
  std::mt19937_64 rng(mix(cfg_.seed, frame_seed, 3));
  std::normal_distribution<double> normal(0.0, cfg_.noise_sigma > 0 ? cfg_.noise_sigma : 1.0);
  for (std::size_t i = 0; i < gt_labels.pixels(); ++i) {
    const int label = gt_labels[i];
    auto row = f.data.row(static_cast<Eigen::Index>(i));
    if (label != kIgnoreLabel) {
      require(label < cfg_.num_classes, "mock_semantic_extractor: label exceeds class count");
      row = embeddings_.row(effective_class(label, swapped));
    }
    if (cfg_.noise_sigma > 0) {
      for (int c = 0; c < cfg_.feature_dim; ++c) row(c) += normal(rng);
    }
  }
  return f;
}

LabelImage MockSemanticExtractor::head_labels(const LabelImage& gt_labels, std::uint64_t frame_seed) const {
  if (!cfg_.swap_head_labels) return gt_labels;
  const bool swapped = frame_swapped(frame_seed);
  LabelImage out = gt_labels;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] != kIgnoreLabel) out[i] = static_cast<std::uint8_t>(effective_class(out[i], swapped));
  }
  return out;
}

FeatureMap mock_spatial_extractor(const ImageD& depth) {
  FeatureMap f(depth.height(), depth.width(), 1);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < depth.pixels(); ++i) {
    if (depth[i] > 0) {
      lo = std::min(lo, depth[i]);
      hi = std::max(hi, depth[i]);
    }
  }
  if (!(hi > lo)) return f;
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < depth.pixels(); ++i) {
    if (depth[i] > 0) f.data(static_cast<Eigen::Index>(i), 0) = (depth[i] - lo) * inv;
  }
  return f;
}

}  // namespace semsplat
