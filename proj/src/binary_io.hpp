#pragma once

// Little-endian writer/reader for the MFM1 and ENC1 containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "facecoder/errors.hpp"

namespace facecoder::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
 public:
  void magic(const char (&tag)[5]) { bytes_.insert(bytes_.end(), tag, tag + 4); }
  void u32(std::uint32_t v) { append(&v, sizeof v); }
  void f32(float v) { append(&v, sizeof v); }
  template <typename Range>
  void f32_array(const Range& values) {
    for (auto v : values) f32(static_cast<float>(v));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void append(const void* p, std::size_t n) {
    auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(const char (&tag)[5]) {
    if (bytes_.size() < 4 || std::memcmp(bytes_.data(), tag, 4) != 0) {
      throw Error(ErrorKind::MagicMismatch, std::string("expected magic '") + tag + "'", "header");
    }
    pos_ = 4;
  }
  std::uint32_t u32(const char* section) {
    std::uint32_t v;
    read(&v, sizeof v, section);
    return v;
  }
  float f32(const char* section) {
    float v;
    read(&v, sizeof v, section);
    return v;
  }
  void require(std::size_t n, const char* section) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::Truncated,
                  "file ends after " + std::to_string(bytes_.size()) + " bytes", section);
    }
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void read(void* out, std::size_t n, const char* section) {
    require(n, section);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace facecoder::detail
