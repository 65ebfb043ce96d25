#include "augagent/codec.hpp"

#include <boost/beast/core/detail/base64.hpp>

#include <cstdio>

namespace augagent {

namespace b64 = boost::beast::detail::base64;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text) {
  std::size_t padded = text.size();
  while (padded > 0 && text[padded - 1] == '=') --padded;
  if (text.size() % 4 != 0 || text.size() - padded > 2) return std::nullopt;
  std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
  const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  if (read < padded) return std::nullopt;
  out.resize(written);
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::uint64_t hash_text_and_u64(std::string_view text, std::uint64_t value) {
  char le[8];
  for (int i = 0; i < 8; ++i) le[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  return fnv1a64(std::string_view(le, 8), fnv1a64(text));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

}  // namespace augagent
