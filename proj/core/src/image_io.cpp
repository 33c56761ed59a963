#include "semsplat/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "semsplat/errors.hpp"

namespace semsplat {
namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::string& header, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << header;
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw InputError("write failed: " + path.string());
}

// Parses whitespace-separated header tokens (with '#' comments) and returns
// the offset of the raster, which starts after exactly one whitespace byte.
struct Header {
  std::vector<std::string> tokens;
  std::size_t data_offset = 0;
};

Header parse_header(const std::vector<char>& buf, int count, const std::filesystem::path& path) {
  Header h;
  std::size_t i = 0;
  while (static_cast<int>(h.tokens.size()) < count) {
    while (i < buf.size() && std::isspace(static_cast<unsigned char>(buf[i]))) ++i;
    if (i < buf.size() && buf[i] == '#') {
      while (i < buf.size() && buf[i] != '\n') ++i;
      continue;
    }
    if (i >= buf.size()) throw InputError(path.string() + ": truncated header");
    std::string tok;
    while (i < buf.size() && !std::isspace(static_cast<unsigned char>(buf[i]))) tok += buf[i++];
    h.tokens.push_back(tok);
  }
  if (i >= buf.size()) throw InputError(path.string() + ": missing raster");
  h.data_offset = i + 1;
  return h;
}

int parse_dim(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size() || v <= 0 || v > (1 << 16)) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw InputError(path.string() + ": bad header value '" + s + "'");
  }
}

}  // namespace

std::uint8_t to_byte(double v) {
  if (!(v > 0)) return 0;
  if (v >= 1) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

void write_ppm(const std::filesystem::path& path, const ImageD& rgb) {
  require(rgb.channels() == 3, "write_ppm: expected 3 channels");
  std::vector<std::uint8_t> bytes(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) bytes[i] = to_byte(rgb[i]);
  std::ostringstream hdr;
  hdr << "P6\n" << rgb.width() << " " << rgb.height() << "\n255\n";
  write_all(path, hdr.str(), bytes.data(), bytes.size());
}

ImageD read_ppm(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  const Header h = parse_header(buf, 4, path);
  if (h.tokens[0] != "P6") throw InputError(path.string() + ": not a binary PPM (P6)");
  const int w = parse_dim(h.tokens[1], path), ht = parse_dim(h.tokens[2], path);
  if (h.tokens[3] != "255") throw InputError(path.string() + ": only 8-bit PPM supported");
  const std::size_t n = static_cast<std::size_t>(w) * ht * 3;
  if (buf.size() < h.data_offset + n) throw InputError(path.string() + ": truncated raster");
  ImageD img(ht, w, 3);
  for (std::size_t i = 0; i < n; ++i) img[i] = static_cast<unsigned char>(buf[h.data_offset + i]) / 255.0;
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image<std::uint8_t>& gray) {
  require(gray.channels() == 1, "write_pgm: expected 1 channel");
  std::ostringstream hdr;
  hdr << "P5\n" << gray.width() << " " << gray.height() << "\n255\n";
  write_all(path, hdr.str(), gray.data(), gray.size());
}

Image<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  const Header h = parse_header(buf, 4, path);
  if (h.tokens[0] != "P5") throw InputError(path.string() + ": not a binary PGM (P5)");
  const int w = parse_dim(h.tokens[1], path), ht = parse_dim(h.tokens[2], path);
  if (h.tokens[3] != "255") throw InputError(path.string() + ": only 8-bit PGM supported");
  const std::size_t n = static_cast<std::size_t>(w) * ht;
  if (buf.size() < h.data_offset + n) throw InputError(path.string() + ": truncated raster");
  Image<std::uint8_t> img(ht, w, 1);
  std::memcpy(img.data(), buf.data() + h.data_offset, n);
  return img;
}

// PFM stores scanlines bottom to top; a negative scale marks little-endian data.
void write_pfm(const std::filesystem::path& path, const ImageD& depth) {
  require(depth.channels() == 1, "write_pfm: expected 1 channel");
  static_assert(std::endian::native == std::endian::little);
  const int w = depth.width(), h = depth.height();
  std::vector<float> raster(depth.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      raster[static_cast<std::size_t>(h - 1 - y) * w + x] = static_cast<float>(depth(y, x));
  std::ostringstream hdr;
  hdr << "Pf\n" << w << " " << h << "\n-1.0\n";
  write_all(path, hdr.str(), raster.data(), raster.size() * sizeof(float));
}

ImageD read_pfm(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  const Header hd = parse_header(buf, 4, path);
  if (hd.tokens[0] != "Pf") throw InputError(path.string() + ": not a single-channel PFM (Pf)");
  const int w = parse_dim(hd.tokens[1], path), h = parse_dim(hd.tokens[2], path);
  double scale = 0;
  try {
    scale = std::stod(hd.tokens[3]);
  } catch (const std::logic_error&) {
    throw InputError(path.string() + ": bad PFM scale");
  }
  if (!(scale < 0)) throw InputError(path.string() + ": big-endian PFM not supported");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (buf.size() < hd.data_offset + n * sizeof(float)) throw InputError(path.string() + ": truncated raster");
  std::vector<float> raster(n);
  std::memcpy(raster.data(), buf.data() + hd.data_offset, n * sizeof(float));
  ImageD img(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = raster[static_cast<std::size_t>(h - 1 - y) * w + x];
      if (!std::isfinite(v) || v < 0) throw InputError(path.string() + ": invalid depth value");
      img(y, x) = v;
    }
  return img;
}

}  // namespace semsplat
