#include "semsplat/map_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "semsplat/bytes.hpp"
#include "semsplat/errors.hpp"

namespace semsplat {

std::vector<std::uint8_t> serialize_map(const GaussianMap& map, const SemanticNets& nets) {
  ByteWriter w;
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(kMapMagic), 4});
  w.put<std::uint32_t>(kMapVersion);
  w.put<std::uint64_t>(map.size());
  w.put_f32_array(map.positions);
  w.put_f32_array(map.radii);
  w.put_f32_array(map.opacities);
  w.put_f32_array(map.colors);
  w.put_f32_array(map.features);
  const std::vector<std::uint8_t> blob = nets.serialize();
  w.put<std::uint64_t>(blob.size());
  w.put_bytes(blob);
  return std::move(w.bytes());
}

LoadedMap deserialize_map(std::span<const std::uint8_t> bytes, const std::string& what) {
  ByteReader r(bytes, what);
  const auto magic = r.get_bytes(4);
  if (std::memcmp(magic.data(), kMapMagic, 4) != 0) throw InputError(what + ": bad magic (not a map file)");
  const auto version = r.get<std::uint32_t>();
  if (version != kMapVersion) throw InputError(what + ": unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint64_t>();
  // Each Gaussian needs 11 floats; reject counts the buffer cannot hold before allocating.
  if (count > r.remaining() / (11 * sizeof(float))) throw InputError(what + ": truncated parameter arrays");
  const std::size_t n = static_cast<std::size_t>(count);

  GaussianMap map;
  r.get_f32_array(map.positions, 3 * n);
  r.get_f32_array(map.radii, n);
  r.get_f32_array(map.opacities, n);
  r.get_f32_array(map.colors, 3 * n);
  r.get_f32_array(map.features, 3 * n);
  const std::string problem = map.check_invariants();
  if (!problem.empty()) throw InputError(what + ": " + problem);

  const auto blob_len = r.get<std::uint64_t>();
  if (blob_len > r.remaining()) throw InputError(what + ": truncated network blob");
  const auto blob = r.get_bytes(static_cast<std::size_t>(blob_len));
  if (r.remaining() != 0) throw InputError(what + ": trailing bytes after network blob");
  return {std::move(map), SemanticNets::deserialize(blob)};
}

void save_map(const std::filesystem::path& path, const GaussianMap& map, const SemanticNets& nets) {
  const auto bytes = serialize_map(map, nets);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

LoadedMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_map(bytes, path.string());
}

std::filesystem::path metadata_path(const std::filesystem::path& map_path) {
  auto p = map_path;
  p += ".json";
  return p;
}

void save_map_metadata(const std::filesystem::path& map_path, const MapMetadata& meta) {
  nlohmann::ordered_json j;
  j["num_classes"] = meta.num_classes;
  j["scene_name"] = meta.scene_name;
  j["parameters"] = meta.parameters;
  std::ofstream out(metadata_path(map_path));
  if (!out) throw InputError("cannot write " + metadata_path(map_path).string());
  out << j.dump(2) << "\n";
}

MapMetadata load_map_metadata(const std::filesystem::path& map_path) {
  const auto path = metadata_path(map_path);
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    MapMetadata meta;
    meta.num_classes = j.at("num_classes").get<int>();
    meta.scene_name = j.value("scene_name", "");
    if (j.contains("parameters")) meta.parameters = j.at("parameters").get<std::map<std::string, std::string>>();
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void quantize_to_f32(GaussianMap& map) {
  for (auto* v : {&map.positions, &map.radii, &map.opacities, &map.colors, &map.features})
    for (double& x : *v) x = static_cast<float>(x);
}

}  // namespace semsplat
