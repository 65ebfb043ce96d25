#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace augagent {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Returns nullopt on any character outside the base64 alphabet.
std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text);

// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t state = 0xcbf29ce484222325ULL);

// FNV-1a of the text followed by the 8 little-endian bytes of value.
std::uint64_t hash_text_and_u64(std::string_view text, std::uint64_t value);

std::uint64_t splitmix64(std::uint64_t x);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Fixed-point rendering used by every on-disk format: 6 decimal places.
std::string format_fixed6(double value);

}  // namespace augagent
