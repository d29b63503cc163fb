#include "lottery/io/fingerprint.hpp"

#include <openssl/evp.h>

#include "lottery/errors.hpp"

namespace lottery {

Digest sha256(std::string_view data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error("SHA-256 computation failed");
  }
  return out;
}

std::string to_hex(const Digest& digest) {
  static const char* const kHex = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : digest) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xF]);
  }
  return s;
}

Digest digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) {
    throw ArgumentError("fingerprint must be 64 hex digits");
  }
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') {
      return c - '0';
    }
    if (c >= 'a' && c <= 'f') {
      return c - 'a' + 10;
    }
    if (c >= 'A' && c <= 'F') {
      return c - 'A' + 10;
    }
    throw ArgumentError("fingerprint contains a non-hex digit");
  };
  Digest d{};
  for (std::size_t i = 0; i < 32; ++i) {
    d[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) * 16 + nibble(hex[2 * i + 1]));
  }
  return d;
}

}  // namespace lottery
