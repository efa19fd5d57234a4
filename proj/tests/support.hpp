#pragma once

// Shared fixtures and independent oracles. Everything here must stay
// independent of the implementation paths it is used to check.

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "ictoken/crypto.hpp"
#include "ictoken/token.hpp"
#include "ictoken/wallet.hpp"

namespace testsupport {

using namespace ictoken;

/// Deterministic shared key pairs; deriveKeyPair memoizes, so every suite in
/// the binary reuses the same underlying RSA keys.
inline const KeyPair& testKeys(std::uint64_t i) {
  static std::map<std::uint64_t, KeyPair> pool;
  auto it = pool.find(i);
  if (it == pool.end()) it = pool.emplace(i, deriveKeyPair(900000 + i)).first;
  return it->second;
}

inline Owner testOwner(const std::string& role, std::uint64_t i) {
  const KeyPair& kp = testKeys(i);
  return Owner{publicIDof(kp.publicKey), kp, role};
}

inline Digest randomDigest(Drbg& rng) {
  Digest d;
  rng.fill(d.bytes);
  return d;
}

/// Brute-force merkle oracle, independent of the library's level loop.
inline Digest oracleLeaf(const Digest& d) {
  Sha256 h;
  h.update(std::uint8_t{0x00}).update(d.bytes);
  return h.finish();
}

inline Digest oracleJoin(const Digest& l, const Digest& r) {
  Sha256 h;
  h.update(std::uint8_t{0x01}).update(l.bytes).update(r.bytes);
  return h.finish();
}

/// Tree shapes for 1..7 distinct sorted leaves, written out by hand.
inline Digest oracleSmallRoot(const std::vector<Digest>& s) {
  std::vector<Digest> L;
  for (const auto& d : s) L.push_back(oracleLeaf(d));
  switch (L.size()) {
    case 1: return L[0];
    case 2: return oracleJoin(L[0], L[1]);
    case 3: return oracleJoin(oracleJoin(L[0], L[1]), L[2]);
    case 4: return oracleJoin(oracleJoin(L[0], L[1]), oracleJoin(L[2], L[3]));
    case 5:
      return oracleJoin(oracleJoin(oracleJoin(L[0], L[1]), oracleJoin(L[2], L[3])),
                        L[4]);
    case 6:
      return oracleJoin(oracleJoin(oracleJoin(L[0], L[1]), oracleJoin(L[2], L[3])),
                        oracleJoin(L[4], L[5]));
    case 7:
      return oracleJoin(oracleJoin(oracleJoin(L[0], L[1]), oracleJoin(L[2], L[3])),
                        oracleJoin(oracleJoin(L[4], L[5]), L[6]));
    default: throw std::runtime_error("oracleSmallRoot handles 1..7 leaves");
  }
}

/// Recursive construction for arbitrary sizes: each recursion consumes one
/// tree level, pairing neighbours and promoting an odd trailing node.
inline std::vector<Digest> oraclePairUp(const std::vector<Digest>& level) {
  std::vector<Digest> next;
  std::size_t i = 0;
  for (; i + 1 < level.size(); i += 2) next.push_back(oracleJoin(level[i], level[i + 1]));
  if (i < level.size()) next.push_back(level[i]);
  return next;
}

inline Digest oracleMerkleRoot(std::vector<Digest> leaves) {
  std::sort(leaves.begin(), leaves.end());
  leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());
  if (leaves.size() <= 7 && !leaves.empty()) return oracleSmallRoot(leaves);
  std::vector<Digest> level;
  for (const auto& d : leaves) level.push_back(oracleLeaf(d));
  while (level.size() > 1) level = oraclePairUp(level);
  return level.front();
}

/// Independent whitespace normalizer for the marking rule.
inline std::string oracleNormalize(const std::string& in) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : in) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(cur);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

/// Well-formed token with pseudo-random content (signature is random bytes,
/// not valid; codec tests do not verify it).
inline ICtoken randomToken(Drbg& rng) {
  ICtoken t;
  t.metadata.icid = randomDigest(rng);
  if (rng.coin()) {
    t.metadata.pid = randomDigest(rng);
    if (rng.coin()) t.metadata.edid = randomDigest(rng);
  }
  t.metadata.markHash = randomDigest(rng);
  t.metadata.stage = static_cast<Stage>(1 + rng.below(4));
  t.metadata.status = static_cast<Status>(rng.below(2));
  t.metadata.version = static_cast<std::uint8_t>(rng.below(256));
  if (t.metadata.version == 0)
    t.metadata.prevVer.reset();
  else
    t.metadata.prevVer = rng.nextU64();
  t.metadata.isDefective = rng.coin();
  rng.fill(t.key.keyEncr.bytes);
  t.key.keyHash = randomDigest(rng);
  t.ownerID = randomDigest(rng);
  rng.fill(t.trnsaxnID.bytes);
  return t;
}

}  // namespace testsupport
