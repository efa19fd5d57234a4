#include "ictoken/ledger.hpp"

#include <charconv>

namespace ictoken {

Digest computeTokenRoot(const std::vector<ICtoken>& tokens) {
  std::vector<Digest> leaves;
  leaves.reserve(tokens.size());
  for (const auto& t : tokens) leaves.push_back(sha256(canonicalEncode(t)));
  return merkleRoot(std::move(leaves));
}

Digest computeBlockHash(std::uint64_t index, const Digest& prev, const Digest& root) {
  Bytes header;
  appendU64be(header, index);
  Sha256 h;
  h.update(header).update(prev.bytes).update(root.bytes);
  return h.finish();
}

Block sealBlock(std::uint64_t index, const Digest& prev, std::vector<ICtoken> tokens) {
  Block b;
  b.index = index;
  b.prevBlockHash = prev;
  b.tokens = std::move(tokens);
  b.tokenRoot = computeTokenRoot(b.tokens);
  b.blockHash = computeBlockHash(b.index, b.prevBlockHash, b.tokenRoot);
  return b;
}

std::string blockToText(const Block& b) {
  std::string out = "block index=" + std::to_string(b.index);
  out += " prev=" + b.prevBlockHash.toHex();
  out += " root=" + b.tokenRoot.toHex();
  out += " hash=" + b.blockHash.toHex();
  out += " count=" + std::to_string(b.tokens.size());
  for (const auto& t : b.tokens) {
    out += " | ";
    out += tokenToText(t);
  }
  return out;
}

namespace {

bool takeField(std::string_view& rest, std::string_view key, std::string& value) {
  if (!rest.starts_with(key)) return false;
  rest.remove_prefix(key.size());
  if (!rest.starts_with('=')) return false;
  rest.remove_prefix(1);
  std::size_t end = rest.find(' ');
  std::string_view v = end == std::string_view::npos ? rest : rest.substr(0, end);
  if (v.empty()) return false;
  value.assign(v);
  rest.remove_prefix(v.size());
  if (rest.starts_with(' ')) rest.remove_prefix(1);
  return true;
}

bool parseDec(const std::string& s, std::uint64_t& out) {
  if (s.empty() || (s.size() > 1 && s[0] == '0')) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Result<Block> blockFromText(std::string_view line) {
  auto fail = [](std::string_view what) {
    return Result<Block>(ErrorClass::ParseError,
                         "block record: " + std::string(what));
  };
  if (!line.starts_with("block ")) return fail("missing prefix");
  line.remove_prefix(6);

  Block b;
  std::string v;
  std::uint64_t num = 0;
  if (!takeField(line, "index", v) || !parseDec(v, b.index)) return fail("index");
  if (!takeField(line, "prev", v)) return fail("prev");
  auto prev = Digest::fromHex(v);
  if (!prev) return fail("prev");
  b.prevBlockHash = *prev;
  if (!takeField(line, "root", v)) return fail("root");
  auto root = Digest::fromHex(v);
  if (!root) return fail("root");
  b.tokenRoot = *root;
  if (!takeField(line, "hash", v)) return fail("hash");
  auto hash = Digest::fromHex(v);
  if (!hash) return fail("hash");
  b.blockHash = *hash;
  if (!takeField(line, "count", v) || !parseDec(v, num) || num == 0)
    return fail("count");

  for (std::uint64_t i = 0; i < num; ++i) {
    if (!line.starts_with("| ")) return fail("token separator");
    line.remove_prefix(2);
    std::size_t end = line.find(" | ");
    std::string_view tokenText =
        end == std::string_view::npos ? line : line.substr(0, end);
    auto token = tokenFromText(tokenText);
    if (!token) return Result<Block>(token.error());
    b.tokens.push_back(std::move(token.value()));
    line.remove_prefix(tokenText.size());
    if (line.starts_with(' ')) line.remove_prefix(1);
  }
  if (!line.empty()) return fail("trailing data");
  return b;
}

}  // namespace ictoken
