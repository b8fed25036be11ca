#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rsagame {

// SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);

// First 8 bytes of the SHA-256 digest as an integer. Stable across platforms.
std::uint64_t stable_hash64(std::string_view data);

}  // namespace rsagame
