#include "lottery/io/binary.hpp"

#include <fstream>
#include <sstream>

namespace lottery::io {

void ByteWriter::short_string(std::string_view s) {
  if (s.size() > 0xFFFFu) {
    throw ArgumentError("name too long for u16 length prefix: " + std::to_string(s.size()));
  }
  u16(static_cast<std::uint16_t>(s.size()));
  bytes(s);
}

std::string_view ByteReader::bytes(std::size_t n, const char* what) {
  if (n > remaining()) {
    fail(std::string("truncated ") + what + ": need " + std::to_string(n) + " bytes, " +
         std::to_string(remaining()) + " left");
  }
  std::string_view s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::string ByteReader::short_string(const char* what) {
  std::uint16_t n = u16();
  return std::string(bytes(n, what));
}

void ByteReader::expect(std::string_view magic, const char* what) {
  const std::size_t at = pos_;
  std::string_view got = bytes(magic.size(), what);
  if (got != magic) {
    throw LoadError(std::string("bad ") + what + ": expected '" + std::string(magic) + "'", at);
  }
}

std::uint64_t ByteReader::get_le(int n, const char* what) {
  std::string_view s = bytes(static_cast<std::size_t>(n), what);
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError("cannot open '" + path.string() + "'", 0);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot write '" + tmp.string() + "'");
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) {
      throw Error("short write to '" + tmp.string() + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lottery::io
