#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semsplat/gaussian_map.hpp"
#include "semsplat/semantics.hpp"

namespace semsplat {

inline constexpr char kMapMagic[4] = {'N', 'E', 'D', 'S'};
inline constexpr std::uint32_t kMapVersion = 1;

// Little-endian layout: magic, u32 version, u64 count, f32 arrays positions[3N],
// radii[N], opacities[N], colors[3N], features[3N], u64 blob length, network blob.
// Parameters are stored as f32, so only f32-representable maps round-trip exactly.

std::vector<std::uint8_t> serialize_map(const GaussianMap& map, const SemanticNets& nets);

struct LoadedMap {
  GaussianMap map;
  SemanticNets nets;
};

/// Throws InputError on malformed data or violated map invariants.
LoadedMap deserialize_map(std::span<const std::uint8_t> bytes, const std::string& what = "map");

void save_map(const std::filesystem::path& path, const GaussianMap& map, const SemanticNets& nets);
LoadedMap load_map(const std::filesystem::path& path);

struct MapMetadata {
  int num_classes = 0;
  std::string scene_name;
  std::map<std::string, std::string> parameters;
};

/// Sidecar metadata stored next to the map as <map>.json.
std::filesystem::path metadata_path(const std::filesystem::path& map_path);
void save_map_metadata(const std::filesystem::path& map_path, const MapMetadata& meta);
MapMetadata load_map_metadata(const std::filesystem::path& map_path);

/// Rounds every parameter to f32 precision, so that the map survives a file round-trip unchanged.
void quantize_to_f32(GaussianMap& map);

}  // namespace semsplat
