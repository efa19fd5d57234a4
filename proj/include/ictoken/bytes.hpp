#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ictoken {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// 32-byte value used for every identifier and hash in the protocol
/// (ICID, PID, EDID, markHash, keyHash, publicID, block hashes).
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Digest&) const = default;

  bool isZero() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }

  std::string toHex() const;
  static std::optional<Digest> fromHex(std::string_view hex);
};

std::string toHex(ByteView data);
std::optional<Bytes> fromHex(std::string_view hex);

inline void append(Bytes& out, ByteView data) {
  out.insert(out.end(), data.begin(), data.end());
}

inline void appendU64be(Bytes& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t readU64be(ByteView data) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | data[static_cast<std::size_t>(i)];
  return v;
}

inline ByteView asView(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes toBytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

}  // namespace ictoken
