#pragma once

#include <filesystem>

#include "semsplat/image.hpp"

namespace semsplat {

// Binary PPM (P6, 8-bit RGB), PFM (single-channel f32, little-endian) and
// PGM (P5, 8-bit). Readers throw InputError naming the file on malformed input.

void write_ppm(const std::filesystem::path& path, const ImageD& rgb);
ImageD read_ppm(const std::filesystem::path& path);

void write_pfm(const std::filesystem::path& path, const ImageD& depth);
ImageD read_pfm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Image<std::uint8_t>& gray);
Image<std::uint8_t> read_pgm(const std::filesystem::path& path);

/// [0,1] -> 0..255 with rounding; out-of-range values are clamped.
std::uint8_t to_byte(double v);

}  // namespace semsplat
