#include "ictoken/bytes.hpp"

namespace ictoken {

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;  // uppercase rejected: one canonical spelling per byte
}
}  // namespace

std::string toHex(ByteView data) {
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0f]);
  }
  return out;
}

std::optional<Bytes> fromHex(std::string_view hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = hexValue(hex[i]);
    int lo = hexValue(hex[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::string Digest::toHex() const {
  return ictoken::toHex(bytes);
}

std::optional<Digest> Digest::fromHex(std::string_view hex) {
  if (hex.size() != 64) return std::nullopt;
  auto raw = ictoken::fromHex(hex);
  if (!raw) return std::nullopt;
  Digest d;
  std::copy(raw->begin(), raw->end(), d.bytes.begin());
  return d;
}

}  // namespace ictoken
