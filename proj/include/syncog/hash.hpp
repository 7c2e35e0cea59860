#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace syncog {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// First 8 bytes of SHA-256, big-endian. Stable across platforms.
std::uint64_t stable_hash64(std::string_view bytes);

/// 16-digit lowercase hex rendering of a 64-bit value.
std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view s);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace syncog
