#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ictoken/bytes.hpp"
#include "ictoken/errors.hpp"

namespace ictoken {

inline constexpr std::size_t kSignatureSize = 256;
inline constexpr std::size_t kCiphertextSize = 256;
inline constexpr std::size_t kModulusSize = 256;
inline constexpr std::size_t kExponentSize = 4;
/// RSA-2048 / OAEP-SHA256: 256 - 2*32 - 2.
inline constexpr std::size_t kPlaintextCapacity = 190;

struct Signature {
  std::array<std::uint8_t, kSignatureSize> bytes{};
  auto operator<=>(const Signature&) const = default;
};

struct Ciphertext {
  std::array<std::uint8_t, kCiphertextSize> bytes{};
  auto operator<=>(const Ciphertext&) const = default;
};

/// Deterministic byte stream (SHA-256 in counter mode). All randomness in
/// the artifact flows through one of these so that a (config, seed) pair
/// reproduces a bytewise-identical run.
class Drbg {
 public:
  explicit Drbg(std::uint64_t seed);
  explicit Drbg(ByteView seed);

  /// Seeded from the OS entropy source.
  static Drbg fromEntropy();

  void fill(std::span<std::uint8_t> out);
  Bytes bytes(std::size_t n);
  std::uint64_t nextU64();
  /// Uniform in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);
  bool coin() { return nextU64() & 1; }

 private:
  std::array<std::uint8_t, 32> key_{};
  std::uint64_t counter_ = 0;
  std::array<std::uint8_t, 32> block_{};
  std::size_t used_ = 32;
};

Digest sha256(ByteView data);

/// Incremental SHA-256 for multi-part messages (block headers, merkle nodes).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(ByteView data);
  Sha256& update(std::uint8_t byte);
  Digest finish();

 private:
  void* ctx_;
};

/// Root of a binary merkle tree over a *set* of digests: leaves are sorted
/// ascending and deduplicated, leaf nodes are sha256(0x00 || d), internal
/// nodes sha256(0x01 || left || right), and an odd node at any level is
/// promoted unchanged. Any permutation of the same set gives the same root.
/// Throws EmptyLeafSet.
Digest merkleRoot(std::vector<Digest> leaves);

/// RSA-2048 public half; canonical byte form is modulus(256) || exponent(4),
/// both big-endian. publicIDs are the SHA-256 of this form.
class PublicKey {
 public:
  PublicKey() = default;
  PublicKey(Bytes modulus, Bytes exponent);

  const Bytes& modulus() const { return n_; }
  const Bytes& exponent() const { return e_; }

  Bytes canonicalBytes() const;
  static PublicKey fromCanonicalBytes(ByteView bytes);

  bool operator==(const PublicKey&) const = default;

 private:
  Bytes n_;  // 256 bytes
  Bytes e_;  // 4 bytes
};

class PrivateKey {
 public:
  PrivateKey() = default;
  PrivateKey(Bytes n, Bytes e, Bytes d, Bytes p, Bytes q);

  const Bytes& modulus() const { return n_; }
  const Bytes& exponent() const { return e_; }
  const Bytes& secretExponent() const { return d_; }
  const Bytes& primeP() const { return p_; }
  const Bytes& primeQ() const { return q_; }

  bool operator==(const PrivateKey&) const = default;

 private:
  friend struct RsaOps;
  Bytes n_, e_, d_, p_, q_;
  // CRT exponents, derived in the constructor.
  Bytes dp_, dq_, qinv_;
};

struct KeyPair {
  PublicKey publicKey;
  PrivateKey privateKey;
};

/// Fresh RSA-2048 pair from the given stream; deterministic per stream state.
KeyPair generateKeyPair(Drbg& rng);

/// generateKeyPair over a stream seeded with `seed`; memoized, since the
/// mapping seed -> key is a pure function and prime search is not free.
KeyPair deriveKeyPair(std::uint64_t seed);

/// PKCS#1 v1.5 signature over the SHA-256 of `message`. Deterministic.
Signature sign(const PrivateKey& key, ByteView message);
bool verify(const PublicKey& key, ByteView message, const Signature& sig);

/// RSA-OAEP-SHA256. The OAEP seed is derived from (key, plaintext) so that
/// re-running a seeded scenario reproduces identical token bytes.
/// Throws PlaintextTooLong beyond kPlaintextCapacity.
Ciphertext encrypt(const PublicKey& key, ByteView plaintext);

/// Throws DecryptionFailure on padding or key mismatch.
Bytes decrypt(const PrivateKey& key, const Ciphertext& ct);

/// decrypt with ownKey, re-encrypt to nextKey. The plaintext (and therefore
/// its hash trail) is unchanged.
Ciphertext changeEncKey(const PrivateKey& ownKey, const PublicKey& nextKey,
                        const Ciphertext& ct);

}  // namespace ictoken
