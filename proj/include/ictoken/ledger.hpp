#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ictoken/token.hpp"

namespace ictoken {

/// One sealed unit of the hash chain. Holds between 1 and blockCapacity
/// committed tokens.
struct Block {
  std::uint64_t index = 0;
  Digest prevBlockHash;  // all-zero for the genesis block
  Digest tokenRoot;      // merkle root over sha256(canonicalEncode(token))
  std::vector<ICtoken> tokens;
  Digest blockHash;      // sha256(index_be8 || prevBlockHash || tokenRoot)

  bool operator==(const Block&) const = default;
};

Digest computeTokenRoot(const std::vector<ICtoken>& tokens);
Digest computeBlockHash(std::uint64_t index, const Digest& prev, const Digest& root);
Block sealBlock(std::uint64_t index, const Digest& prev, std::vector<ICtoken> tokens);

struct Ledger {
  std::vector<Block> blocks;
  std::uint64_t nextSeq = 0;  // total tokens across sealed blocks

  Digest headHash() const {
    return blocks.empty() ? Digest{} : blocks.back().blockHash;
  }

  bool operator==(const Ledger&) const = default;
};

/// One line per block in the ledger file; the parse is strict and a loaded
/// line must re-serialize to the same bytes.
std::string blockToText(const Block& b);
Result<Block> blockFromText(std::string_view line);

}  // namespace ictoken
