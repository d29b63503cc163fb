#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace lottery {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
std::string to_hex(const Digest& digest);
// Throws ArgumentError unless `hex` is 64 hex digits.
Digest digest_from_hex(std::string_view hex);

}  // namespace lottery
