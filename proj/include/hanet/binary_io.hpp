#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "hanet/error.hpp"

namespace hanet::binary {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

inline void put_f32(std::string& out, float v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

inline void put_bytes(std::string& out, std::string_view bytes) { out.append(bytes); }

// Bounds-checked cursor over an in-memory file image.
class Reader {
 public:
  Reader(std::string_view data, std::string source)
      : data_(data), source_(std::move(source)) {}

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }
  float f32() {
    float v;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }
  std::string_view bytes(std::size_t n) { return take(n); }
  void floats(std::span<float> out) {
    const auto raw = take(out.size() * 4);
    std::memcpy(out.data(), raw.data(), raw.size());
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  const std::string& source() const { return source_; }

 private:
  std::string_view take(std::size_t n) {
    if (n > remaining()) {
      throw DataError(DataError::Code::kTruncated,
                      source_ + ": truncated payload at byte " + std::to_string(pos_) +
                          " (needed " + std::to_string(n) + ", have " +
                          std::to_string(remaining()) + ")");
    }
    auto view = data_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace hanet::binary
