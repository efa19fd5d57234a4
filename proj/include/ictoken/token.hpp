#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ictoken/bytes.hpp"
#include "ictoken/crypto.hpp"
#include "ictoken/errors.hpp"

namespace ictoken {

/// Production stage of the IC the token is bound to.
enum class Stage : std::uint8_t {
  Fabrication = 1,
  PcbAssembly = 2,
  SystemIntegration = 3,
  EndUser = 4,
};

enum class Status : std::uint8_t {
  InProgress = 0,
  Completed = 1,
};

std::string_view stageName(Stage s);
bool stageFromCode(unsigned code, Stage& out);

struct ICMetadata {
  Digest icid;                        // sha256 of the device UID
  std::optional<Digest> pid;          // merkle root of the board's ICIDs
  std::optional<Digest> edid;         // merkle root of the device's PIDs
  Digest markHash;                    // sha256 of normalized package markings
  Stage stage = Stage::Fabrication;
  Status status = Status::InProgress;
  std::optional<std::uint64_t> prevVer;  // ledger sequence index of the previous version
  std::uint8_t version = 0;
  bool isDefective = false;

  bool operator==(const ICMetadata&) const = default;
};

struct ICKeyBox {
  Ciphertext keyEncr;  // metering key under the current owner's public key
  Digest keyHash;      // sha256 of the metering key plaintext

  bool operator==(const ICKeyBox&) const = default;
};

struct ICtoken {
  ICMetadata metadata;
  ICKeyBox key;
  Digest ownerID;        // publicID of the current owner
  Signature trnsaxnID;   // owner's signature over signingPayload()

  bool operator==(const ICtoken&) const = default;
};

// Canonical fixed layout. Absent optionals encode as all-zero bytes; the
// flags byte packs stage (bits 7..5), status (bit 4) and isDefective (bit 3),
// with the low three bits required zero.
inline constexpr std::size_t kTokenEncodedSize = 714;
inline constexpr std::size_t kSigningPayloadSize = 458;

struct TokenLayout {
  static constexpr std::size_t icid = 0;
  static constexpr std::size_t pid = 32;
  static constexpr std::size_t edid = 64;
  static constexpr std::size_t markHash = 96;
  static constexpr std::size_t flags = 128;
  static constexpr std::size_t prevVer = 129;
  static constexpr std::size_t version = 137;
  static constexpr std::size_t keyEncr = 138;
  static constexpr std::size_t keyHash = 394;
  static constexpr std::size_t owner = 426;
  static constexpr std::size_t trnsaxnID = 458;
};

/// Throws MalformedToken if any structural invariant is violated
/// (version/prevVer coupling, edid without pid, zero digest in a live field).
void checkWellFormed(const ICtoken& token);

/// 714-byte wire image; injective over well-formed tokens.
Bytes canonicalEncode(const ICtoken& token);
ICtoken canonicalDecode(ByteView bytes);

/// First 458 bytes of the canonical image: everything except trnsaxnID.
/// This is the message the owner signs.
Bytes signingPayload(const ICtoken& token);

Digest makeICID(ByteView deviceUID);

/// Markings are trimmed and internal whitespace runs collapse to one space
/// before hashing, so a reformatted label still maps to the same digest.
std::string normalizeMarkings(std::string_view markings);
Digest makeMarkHash(std::string_view markings);

Digest computePID(const std::vector<Digest>& icids);
Digest computeEDID(const std::vector<Digest>& pids);

/// Single-line key=value form (hex digests, decimal integers) used by the
/// ledger file and the CLI; parse is strict and order-sensitive.
std::string tokenToText(const ICtoken& token);
Result<ICtoken> tokenFromText(std::string_view line);

}  // namespace ictoken
