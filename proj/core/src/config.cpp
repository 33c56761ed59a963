#include "semsplat/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "semsplat/errors.hpp"

namespace semsplat {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
  } else if constexpr (std::is_floating_point_v<T>) {
    std::istringstream is(text);
    is.imbue(std::locale::classic());
    if (is >> v && is.peek() == std::char_traits<char>::eof()) return v;
  } else {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && ptr == text.data() + text.size()) return v;
  }
  throw InputError("config: invalid value '" + text + "' for key '" + key + "'");
}

template <typename T>
std::string format_value(const T& v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  if constexpr (std::is_same_v<T, bool>) {
    os << (v ? "true" : "false");
  } else if constexpr (std::is_floating_point_v<T>) {
    os << std::setprecision(17) << v;
  } else {
    os << v;
  }
  return os.str();
}

struct Entry {
  std::function<void(SlamConfig&, const std::string&)> set;
  std::function<std::string(const SlamConfig&)> get;
};

template <typename T>
Entry field(T SlamConfig::*member) {
  return {[member](SlamConfig& c, const std::string& s) { c.*member = parse_value<T>("", s); },
          [member](const SlamConfig& c) { return format_value(c.*member); }};
}

template <typename Sub, typename T>
Entry field(Sub SlamConfig::*sub, T Sub::*member) {
  return {[sub, member](SlamConfig& c, const std::string& s) { (c.*sub).*member = parse_value<T>("", s); },
          [sub, member](const SlamConfig& c) { return format_value((c.*sub).*member); }};
}

template <typename Sub, typename Inner, typename T>
Entry sub(Sub SlamConfig::*outer, Inner Sub::*mid, T Inner::*member) {
  return {[=](SlamConfig& c, const std::string& s) { ((c.*outer).*mid).*member = parse_value<T>("", s); },
          [=](const SlamConfig& c) { return format_value(((c.*outer).*mid).*member); }};
}

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> table = [] {
    std::map<std::string, Entry> t;
    t["threads"] = field(&SlamConfig::threads);
    t["use_vcvp"] = field(&SlamConfig::use_vcvp);
    t["checkpoint_every"] = field(&SlamConfig::checkpoint_every);

    // Loss weights live in the tracker config and are copied to the mapper by finalize().
    t["loss.ssim_mix"] = {[](SlamConfig& c, const std::string& s) { c.tracker.weights.ssim_mix = parse_value<double>("", s); },
                          [](const SlamConfig& c) { return format_value(c.tracker.weights.ssim_mix); }};
    t["loss.color"] = {[](SlamConfig& c, const std::string& s) { c.tracker.weights.color = parse_value<double>("", s); },
                       [](const SlamConfig& c) { return format_value(c.tracker.weights.color); }};
    t["loss.depth"] = {[](SlamConfig& c, const std::string& s) { c.tracker.weights.depth = parse_value<double>("", s); },
                       [](const SlamConfig& c) { return format_value(c.tracker.weights.depth); }};
    t["loss.semantic"] = {[](SlamConfig& c, const std::string& s) { c.tracker.weights.semantic = parse_value<double>("", s); },
                          [](const SlamConfig& c) { return format_value(c.tracker.weights.semantic); }};
    t["loss.sil_threshold"] = {
        [](SlamConfig& c, const std::string& s) { c.tracker.weights.sil_threshold = parse_value<double>("", s); },
        [](const SlamConfig& c) { return format_value(c.tracker.weights.sil_threshold); }};
    t["loss.depth_threshold"] = {
        [](SlamConfig& c, const std::string& s) { c.tracker.weights.depth_threshold = parse_value<double>("", s); },
        [](const SlamConfig& c) { return format_value(c.tracker.weights.depth_threshold); }};

    t["tracker.iterations"] = field(&SlamConfig::tracker, &TrackerConfig::iterations);
    t["tracker.learning_rate"] = field(&SlamConfig::tracker, &TrackerConfig::learning_rate);
    t["tracker.tolerance"] = field(&SlamConfig::tracker, &TrackerConfig::tolerance);
    t["tracker.patience"] = field(&SlamConfig::tracker, &TrackerConfig::patience);
    t["tracker.pivot_depth_fraction"] = field(&SlamConfig::tracker, &TrackerConfig::pivot_depth_fraction);
    t["tracker.translation_step_scale"] = field(&SlamConfig::tracker, &TrackerConfig::translation_step_scale);
    t["tracker.rotation_step_scale"] = field(&SlamConfig::tracker, &TrackerConfig::rotation_step_scale);

    t["mapper.iterations"] = field(&SlamConfig::mapper, &MapperConfig::iterations);
    t["mapper.learning_rate"] = field(&SlamConfig::mapper, &MapperConfig::learning_rate);
    t["mapper.lr_scale.position"] = sub(&SlamConfig::mapper, &MapperConfig::lr_scale, &LearningRateScales::position);
    t["mapper.lr_scale.radius"] = sub(&SlamConfig::mapper, &MapperConfig::lr_scale, &LearningRateScales::radius);
    t["mapper.lr_scale.opacity"] = sub(&SlamConfig::mapper, &MapperConfig::lr_scale, &LearningRateScales::opacity);
    t["mapper.lr_scale.color"] = sub(&SlamConfig::mapper, &MapperConfig::lr_scale, &LearningRateScales::color);
    t["mapper.lr_scale.feature"] = sub(&SlamConfig::mapper, &MapperConfig::lr_scale, &LearningRateScales::feature);
    t["mapper.lr_scale.decoder"] = sub(&SlamConfig::mapper, &MapperConfig::lr_scale, &LearningRateScales::decoder);
    t["mapper.keyframe_stride"] = field(&SlamConfig::mapper, &MapperConfig::keyframe_stride);
    t["mapper.prune_opacity"] = field(&SlamConfig::mapper, &MapperConfig::prune_opacity);
    t["mapper.prune_radius"] = field(&SlamConfig::mapper, &MapperConfig::prune_radius);
    t["mapper.window_size"] = field(&SlamConfig::mapper, &MapperConfig::window_size);
    t["mapper.masked_optimization"] = field(&SlamConfig::mapper, &MapperConfig::masked_optimization);

    t["vcvp.theta_deg"] = field(&SlamConfig::vcvp, &VcvpConfig::theta_deg);
    t["vcvp.visibility_threshold"] = field(&SlamConfig::vcvp, &VcvpConfig::visibility_threshold);
    t["vcvp.opacity_decay"] = field(&SlamConfig::vcvp, &VcvpConfig::opacity_decay);
    t["vcvp.window_frames"] = field(&SlamConfig::vcvp, &VcvpConfig::window_frames);

    t["semantic.feature_dim"] = field(&SlamConfig::semantic, &SemanticConfig::feature_dim);
    t["semantic.fused_dim"] = field(&SlamConfig::semantic, &SemanticConfig::fused_dim);
    t["semantic.use_fusion"] = field(&SlamConfig::semantic, &SemanticConfig::use_fusion);
    t["semantic.seed"] = field(&SlamConfig::semantic, &SemanticConfig::seed);
    t["scff.iterations"] = field(&SlamConfig::scff_iterations);
    t["scff.learning_rate"] = field(&SlamConfig::scff_learning_rate);
    t["scff.fusion_lr_scale"] = field(&SlamConfig::scff_fusion_lr_scale);
    t["scff.warmup_frames"] = field(&SlamConfig::scff_warmup_frames);

    t["extractor.noise_sigma"] = field(&SlamConfig::extractor, &MockExtractorConfig::noise_sigma);
    t["extractor.inconsistency_rate"] = field(&SlamConfig::extractor, &MockExtractorConfig::inconsistency_rate);
    t["extractor.swap_class_a"] = field(&SlamConfig::extractor, &MockExtractorConfig::swap_class_a);
    t["extractor.swap_class_b"] = field(&SlamConfig::extractor, &MockExtractorConfig::swap_class_b);
    t["extractor.swap_head_labels"] = field(&SlamConfig::extractor, &MockExtractorConfig::swap_head_labels);
    t["extractor.seed"] = field(&SlamConfig::extractor, &MockExtractorConfig::seed);
    return t;
  }();
  return table;
}

}  // namespace

void SlamConfig::finalize() {
  require(threads >= 0, "config: threads must be >= 0");
  require(scff_iterations >= 0, "config: scff.iterations must be >= 0");
  require(scff_learning_rate > 0, "config: scff.learning_rate must be positive");
  require(scff_fusion_lr_scale > 0, "config: scff.fusion_lr_scale must be positive");
  require(scff_warmup_frames >= 1, "config: scff.warmup_frames must be >= 1");
  require(checkpoint_every >= 0, "config: checkpoint_every must be >= 0");
  mapper.weights = tracker.weights;
  tracker.render.threads = threads;
  mapper.render.threads = threads;
  vcvp.render.threads = threads;
  extractor.feature_dim = semantic.feature_dim;
  extractor.num_classes = semantic.num_classes;
  tracker.validate();
  mapper.validate();
  vcvp.validate();
  semantic.validate();
  extractor.validate();
}

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InputError(source + ":" + std::to_string(lineno) + ": empty key or value");
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void apply_config(SlamConfig& cfg, const KeyValues& kv) {
  const auto& table = registry();
  for (const auto& [key, value] : kv.values()) {
    const auto it = table.find(key);
    if (it == table.end()) throw InputError("config: unknown key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const InputError&) {
      throw InputError("config: invalid value '" + value + "' for key '" + key + "'");
    }
  }
}

std::string config_to_text(const SlamConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, entry] : registry()) os << key << " = " << entry.get(cfg) << "\n";
  return os.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, entry] : registry()) keys.push_back(key);
  return keys;
}

}  // namespace semsplat
