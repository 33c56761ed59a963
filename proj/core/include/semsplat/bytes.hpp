#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "semsplat/errors.hpp"

namespace semsplat {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.insert(buf_.end(), raw, raw + sizeof(T));
  }
  void put_bytes(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void put_f32_array(std::span<const double> values) {
    for (double v : values) put(static_cast<float>(v));
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; throws InputError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data, std::string what = "buffer")
      : data_(data), what_(std::move(what)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void get_f32_array(std::vector<double>& out, std::size_t n) {
    need(n * sizeof(float));
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = get<float>();
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw InputError(what_ + ": unexpected end of data");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace semsplat
