#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "semsplat/mapper.hpp"
#include "semsplat/semantics.hpp"
#include "semsplat/tracker.hpp"
#include "semsplat/vcvp.hpp"

namespace semsplat {

/// Every tunable of a SLAM run.
struct SlamConfig {
  TrackerConfig tracker;
  MapperConfig mapper;
  VcvpConfig vcvp;
  SemanticConfig semantic;
  MockExtractorConfig extractor;

  bool use_vcvp = true;
  int scff_iterations = 50;
  double scff_learning_rate = 0.005;
  double scff_fusion_lr_scale = 0.1;  // the deep fusion convolutions step at this fraction
  int scff_warmup_frames = 5;      // first N keyframes used for network warmup
  int checkpoint_every = 0;        // keyframes between map checkpoints, 0 = off
  int threads = 1;

  /// Propagates shared settings (loss weights, threads) into the sub-configs and validates them.
  void finalize();
};

/// Parsed "key = value" lines; '#' starts a comment. Later keys override earlier ones.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& source = "<config>");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Applies recognized keys on top of `cfg`. Unknown keys and unparsable values throw InputError.
void apply_config(SlamConfig& cfg, const KeyValues& kv);

/// All keys with their current values, one "key = value" per line, sorted.
std::string config_to_text(const SlamConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace semsplat
