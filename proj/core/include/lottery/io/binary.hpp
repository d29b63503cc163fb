#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "lottery/errors.hpp"

namespace lottery::io {

static_assert(std::endian::native == std::endian::little, "artifact formats assume a little-endian host");

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void bytes(std::string_view s) { buf_.append(s); }
  void raw(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
  // u16 length prefix; throws ArgumentError for names longer than 65535 bytes.
  void short_string(std::string_view s);

  const std::string& buffer() const noexcept { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) {
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
  }
  std::string buf_;
};

// Every read checks bounds and throws LoadError carrying the offset reached.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1, "u8")); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2, "u16")); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4, "u32")); }
  std::uint64_t u64() { return get_le(8, "u64"); }
  std::string_view bytes(std::size_t n, const char* what = "bytes");
  void raw(void* out, std::size_t n, const char* what = "data") {
    std::string_view s = bytes(n, what);
    std::memcpy(out, s.data(), n);
  }
  std::string short_string(const char* what = "name");
  void expect(std::string_view magic, const char* what);

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& message) const { throw LoadError(message, pos_); }

 private:
  std::uint64_t get_le(int n, const char* what);
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace lottery::io
