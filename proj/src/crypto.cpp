#include "ictoken/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>

namespace ictoken {

// ---------------------------------------------------------------------------
// SHA-256

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr ||
      EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
}

Sha256::~Sha256() {
  EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

Sha256& Sha256::update(ByteView data) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size());
  return *this;
}

Sha256& Sha256::update(std::uint8_t byte) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), &byte, 1);
  return *this;
}

Digest Sha256::finish() {
  Digest out;
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.bytes.data(), &len);
  return out;
}

Digest sha256(ByteView data) {
  Sha256 h;
  h.update(data);
  return h.finish();
}

// ---------------------------------------------------------------------------
// Deterministic byte stream

namespace {
Digest keyedDigest(std::string_view domain, ByteView seed) {
  Sha256 h;
  h.update(asView(std::string(domain)));
  h.update(seed);
  return h.finish();
}
}  // namespace

Drbg::Drbg(std::uint64_t seed) {
  Bytes s;
  appendU64be(s, seed);
  key_ = keyedDigest("ictoken/drbg/u64", s).bytes;
}

Drbg::Drbg(ByteView seed) {
  key_ = keyedDigest("ictoken/drbg/bytes", seed).bytes;
}

Drbg Drbg::fromEntropy() {
  std::random_device rd;
  Bytes seed;
  for (int i = 0; i < 8; ++i) appendU64be(seed, (std::uint64_t(rd()) << 32) | rd());
  return Drbg(ByteView{seed});
}

void Drbg::fill(std::span<std::uint8_t> out) {
  std::size_t pos = 0;
  while (pos < out.size()) {
    if (used_ == block_.size()) {
      Sha256 h;
      h.update(key_);
      Bytes ctr;
      appendU64be(ctr, counter_++);
      h.update(ctr);
      block_ = h.finish().bytes;
      used_ = 0;
    }
    std::size_t n = std::min(out.size() - pos, block_.size() - used_);
    std::memcpy(out.data() + pos, block_.data() + used_, n);
    pos += n;
    used_ += n;
  }
}

Bytes Drbg::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

std::uint64_t Drbg::nextU64() {
  std::array<std::uint8_t, 8> b{};
  fill(b);
  return readU64be(b);
}

std::uint64_t Drbg::below(std::uint64_t bound) {
  // rejection sampling to stay unbiased
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    std::uint64_t v = nextU64();
    if (v < limit) return v % bound;
  }
}

// ---------------------------------------------------------------------------
// Merkle root with set semantics

Digest merkleRoot(std::vector<Digest> leaves) {
  if (leaves.empty())
    throw ProtocolError(ErrorClass::EmptyLeafSet, "merkle root over empty leaf set");
  std::sort(leaves.begin(), leaves.end());
  leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());

  std::vector<Digest> level;
  level.reserve(leaves.size());
  for (const auto& d : leaves) {
    Sha256 h;
    h.update(std::uint8_t{0x00}).update(d.bytes);
    level.push_back(h.finish());
  }
  while (level.size() > 1) {
    std::vector<Digest> next;
    next.reserve(level.size() / 2 + 1);
    std::size_t i = 0;
    for (; i + 1 < level.size(); i += 2) {
      Sha256 h;
      h.update(std::uint8_t{0x01}).update(level[i].bytes).update(level[i + 1].bytes);
      next.push_back(h.finish());
    }
    if (i < level.size()) next.push_back(level[i]);  // odd node promoted
    level = std::move(next);
  }
  return level.front();
}

// ---------------------------------------------------------------------------
// RSA-2048 internals

namespace {

struct BnDeleter {
  void operator()(BIGNUM* b) const { BN_clear_free(b); }
};
using Bn = std::unique_ptr<BIGNUM, BnDeleter>;

struct BnCtxDeleter {
  void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};
using Ctx = std::unique_ptr<BN_CTX, BnCtxDeleter>;

Bn bn() {
  return Bn(BN_new());
}

Bn bnFrom(ByteView bytes) {
  return Bn(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
}

Bytes bnTo(const BIGNUM* v, std::size_t width) {
  Bytes out(width);
  if (BN_bn2binpad(v, out.data(), static_cast<int>(width)) < 0)
    throw std::runtime_error("bignum wider than field");
  return out;
}

constexpr std::size_t kPrimeSize = 128;  // 1024-bit primes
constexpr unsigned long kPublicExponent = 65537;

Bn generatePrime(Drbg& rng, BN_CTX* ctx) {
  for (;;) {
    Bytes cand = rng.bytes(kPrimeSize);
    cand[0] |= 0xC0;                  // top two bits: product is a full 2048 bits
    cand[kPrimeSize - 1] |= 0x01;     // odd
    Bn p = bnFrom(cand);
    // e prime, so gcd(e, p-1) == 1 iff p mod e != 1
    if (BN_mod_word(p.get(), kPublicExponent) == 1) continue;
    int r = BN_check_prime(p.get(), ctx, nullptr);
    if (r < 0) throw std::runtime_error("primality test failed");
    if (r == 1) return p;
  }
}

struct RsaPrivateParts {
  Bn n, e, d, p, q, dp, dq, qinv;
};

}  // namespace

// Filled by the PrivateKey constructor; kept out of the header.
struct RsaOps {
  static void deriveCrt(PrivateKey& key) {
    Ctx ctx(BN_CTX_new());
    Bn p = bnFrom(key.p_), q = bnFrom(key.q_), d = bnFrom(key.d_);
    Bn p1 = bn(), q1 = bn(), dp = bn(), dq = bn(), qinv = bn();
    BN_sub(p1.get(), p.get(), BN_value_one());
    BN_sub(q1.get(), q.get(), BN_value_one());
    BN_mod(dp.get(), d.get(), p1.get(), ctx.get());
    BN_mod(dq.get(), d.get(), q1.get(), ctx.get());
    if (BN_mod_inverse(qinv.get(), q.get(), p.get(), ctx.get()) == nullptr)
      throw std::runtime_error("p, q not coprime");
    key.dp_ = bnTo(dp.get(), kPrimeSize);
    key.dq_ = bnTo(dq.get(), kPrimeSize);
    key.qinv_ = bnTo(qinv.get(), kPrimeSize);
  }

  // m = c^d mod n via CRT.
  static Bytes privateOp(const PrivateKey& key, ByteView input) {
    Ctx ctx(BN_CTX_new());
    Bn c = bnFrom(input);
    Bn n = bnFrom(key.n_);
    if (BN_cmp(c.get(), n.get()) >= 0)
      throw ProtocolError(ErrorClass::DecryptionFailure, "ciphertext out of range");
    Bn p = bnFrom(key.p_), q = bnFrom(key.q_);
    Bn dp = bnFrom(key.dp_), dq = bnFrom(key.dq_), qinv = bnFrom(key.qinv_);
    Bn m1 = bn(), m2 = bn(), h = bn(), m = bn(), cr = bn();
    BN_mod(cr.get(), c.get(), p.get(), ctx.get());
    BN_mod_exp(m1.get(), cr.get(), dp.get(), p.get(), ctx.get());
    BN_mod(cr.get(), c.get(), q.get(), ctx.get());
    BN_mod_exp(m2.get(), cr.get(), dq.get(), q.get(), ctx.get());
    BN_mod_sub(h.get(), m1.get(), m2.get(), p.get(), ctx.get());
    BN_mod_mul(h.get(), h.get(), qinv.get(), p.get(), ctx.get());
    BN_mul(m.get(), h.get(), q.get(), ctx.get());
    BN_add(m.get(), m.get(), m2.get());
    return bnTo(m.get(), kModulusSize);
  }

  static Bytes publicOp(const PublicKey& key, ByteView input, bool* inRange) {
    Ctx ctx(BN_CTX_new());
    Bn c = bnFrom(input);
    Bn n = bnFrom(key.modulus());
    if (BN_cmp(c.get(), n.get()) >= 0) {
      *inRange = false;
      return Bytes(kModulusSize, 0);
    }
    *inRange = true;
    Bn e = bnFrom(key.exponent());
    Bn m = bn();
    BN_mod_exp(m.get(), c.get(), e.get(), n.get(), ctx.get());
    return bnTo(m.get(), kModulusSize);
  }
};

PublicKey::PublicKey(Bytes modulus, Bytes exponent)
    : n_(std::move(modulus)), e_(std::move(exponent)) {
  if (n_.size() != kModulusSize || e_.size() != kExponentSize)
    throw std::invalid_argument("bad key field width");
}

Bytes PublicKey::canonicalBytes() const {
  Bytes out = n_;
  append(out, e_);
  return out;
}

PublicKey PublicKey::fromCanonicalBytes(ByteView bytes) {
  if (bytes.size() != kModulusSize + kExponentSize)
    throw std::invalid_argument("bad public key length");
  return PublicKey(Bytes(bytes.begin(), bytes.begin() + kModulusSize),
                   Bytes(bytes.end() - kExponentSize, bytes.end()));
}

PrivateKey::PrivateKey(Bytes n, Bytes e, Bytes d, Bytes p, Bytes q)
    : n_(std::move(n)), e_(std::move(e)), d_(std::move(d)), p_(std::move(p)),
      q_(std::move(q)) {
  if (n_.size() != kModulusSize || e_.size() != kExponentSize ||
      d_.size() != kModulusSize || p_.size() != kPrimeSize || q_.size() != kPrimeSize)
    throw std::invalid_argument("bad key field width");
  RsaOps::deriveCrt(*this);
}

KeyPair generateKeyPair(Drbg& rng) {
  Ctx ctx(BN_CTX_new());
  Bn p = generatePrime(rng, ctx.get());
  Bn q;
  do {
    q = generatePrime(rng, ctx.get());
  } while (BN_cmp(p.get(), q.get()) == 0);

  Bn n = bn(), p1 = bn(), q1 = bn(), g = bn(), lambda = bn(), d = bn(), e = bn();
  BN_mul(n.get(), p.get(), q.get(), ctx.get());
  BN_sub(p1.get(), p.get(), BN_value_one());
  BN_sub(q1.get(), q.get(), BN_value_one());
  BN_gcd(g.get(), p1.get(), q1.get(), ctx.get());
  BN_mul(lambda.get(), p1.get(), q1.get(), ctx.get());
  BN_div(lambda.get(), nullptr, lambda.get(), g.get(), ctx.get());
  BN_set_word(e.get(), kPublicExponent);
  if (BN_mod_inverse(d.get(), e.get(), lambda.get(), ctx.get()) == nullptr)
    throw std::runtime_error("no modular inverse for public exponent");

  Bytes nb = bnTo(n.get(), kModulusSize);
  Bytes eb = bnTo(e.get(), kExponentSize);
  KeyPair kp;
  kp.privateKey = PrivateKey(nb, eb, bnTo(d.get(), kModulusSize),
                             bnTo(p.get(), kPrimeSize), bnTo(q.get(), kPrimeSize));
  kp.publicKey = PublicKey(std::move(nb), std::move(eb));
  return kp;
}

KeyPair deriveKeyPair(std::uint64_t seed) {
  static std::mutex mu;
  static std::map<std::uint64_t, KeyPair> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(seed);
    if (it != cache.end()) return it->second;
  }
  Drbg rng(seed);
  KeyPair kp = generateKeyPair(rng);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(seed, kp);
  return kp;
}

// ---------------------------------------------------------------------------
// PKCS#1 v1.5 signatures over SHA-256

namespace {

// DigestInfo DER prefix for SHA-256.
constexpr std::uint8_t kSha256Prefix[] = {0x30, 0x31, 0x30, 0x0d, 0x06, 0x09, 0x60,
                                          0x86, 0x48, 0x01, 0x65, 0x03, 0x04, 0x02,
                                          0x01, 0x05, 0x00, 0x04, 0x20};

Bytes pkcs1Encode(const Digest& digest) {
  Bytes em(kModulusSize, 0xff);
  em[0] = 0x00;
  em[1] = 0x01;
  std::size_t tLen = sizeof(kSha256Prefix) + 32;
  std::size_t tStart = kModulusSize - tLen;
  em[tStart - 1] = 0x00;
  std::memcpy(em.data() + tStart, kSha256Prefix, sizeof(kSha256Prefix));
  std::memcpy(em.data() + tStart + sizeof(kSha256Prefix), digest.bytes.data(), 32);
  return em;
}

// MGF1-SHA256.
void mgf1Xor(std::span<std::uint8_t> target, ByteView seed) {
  std::uint32_t counter = 0;
  std::size_t pos = 0;
  while (pos < target.size()) {
    Sha256 h;
    h.update(seed);
    std::array<std::uint8_t, 4> c{static_cast<std::uint8_t>(counter >> 24),
                                  static_cast<std::uint8_t>(counter >> 16),
                                  static_cast<std::uint8_t>(counter >> 8),
                                  static_cast<std::uint8_t>(counter)};
    h.update(c);
    Digest block = h.finish();
    std::size_t n = std::min<std::size_t>(32, target.size() - pos);
    for (std::size_t i = 0; i < n; ++i) target[pos + i] ^= block.bytes[i];
    pos += n;
    ++counter;
  }
}

const Digest& emptyLabelHash() {
  static const Digest d = sha256(ByteView{});
  return d;
}

}  // namespace

Signature sign(const PrivateKey& key, ByteView message) {
  Bytes em = pkcs1Encode(sha256(message));
  Bytes raw = RsaOps::privateOp(key, em);
  Signature sig;
  std::copy(raw.begin(), raw.end(), sig.bytes.begin());
  return sig;
}

bool verify(const PublicKey& key, ByteView message, const Signature& sig) {
  if (key.modulus().size() != kModulusSize) return false;
  bool inRange = false;
  Bytes em = RsaOps::publicOp(key, sig.bytes, &inRange);
  if (!inRange) return false;
  return em == pkcs1Encode(sha256(message));
}

// ---------------------------------------------------------------------------
// RSA-OAEP-SHA256

Ciphertext encrypt(const PublicKey& key, ByteView plaintext) {
  if (plaintext.size() > kPlaintextCapacity)
    throw ProtocolError(ErrorClass::PlaintextTooLong,
                        "plaintext exceeds " + std::to_string(kPlaintextCapacity) +
                            " bytes");
  constexpr std::size_t dbLen = kModulusSize - 33;  // k - hLen - 1

  Bytes db(dbLen, 0);
  const Digest& lhash = emptyLabelHash();
  std::memcpy(db.data(), lhash.bytes.data(), 32);
  db[dbLen - plaintext.size() - 1] = 0x01;
  std::memcpy(db.data() + dbLen - plaintext.size(), plaintext.data(), plaintext.size());

  // Seed derived from (key, plaintext): encryption is a pure function, so a
  // seeded scenario reproduces identical ciphertext bytes run over run.
  Sha256 sh;
  sh.update(asView(std::string("ictoken/oaep/seed")));
  sh.update(key.canonicalBytes());
  sh.update(plaintext);
  Digest seed = sh.finish();

  mgf1Xor(db, seed.bytes);                  // maskedDB
  std::array<std::uint8_t, 32> maskedSeed = seed.bytes;
  mgf1Xor(maskedSeed, db);

  Bytes em(kModulusSize, 0);
  std::memcpy(em.data() + 1, maskedSeed.data(), 32);
  std::memcpy(em.data() + 33, db.data(), dbLen);

  bool inRange = false;
  Bytes raw = RsaOps::publicOp(key, em, &inRange);
  Ciphertext ct;
  std::copy(raw.begin(), raw.end(), ct.bytes.begin());
  return ct;
}

Bytes decrypt(const PrivateKey& key, const Ciphertext& ct) {
  Bytes em = RsaOps::privateOp(key, ct.bytes);
  constexpr std::size_t dbLen = kModulusSize - 33;
  if (em[0] != 0x00)
    throw ProtocolError(ErrorClass::DecryptionFailure, "bad leading byte");

  std::array<std::uint8_t, 32> seed{};
  std::memcpy(seed.data(), em.data() + 1, 32);
  std::span<std::uint8_t> db(em.data() + 33, dbLen);
  mgf1Xor(seed, db);
  mgf1Xor(db, seed);

  const Digest& lhash = emptyLabelHash();
  if (std::memcmp(db.data(), lhash.bytes.data(), 32) != 0)
    throw ProtocolError(ErrorClass::DecryptionFailure, "label hash mismatch");
  std::size_t i = 32;
  while (i < dbLen && db[i] == 0x00) ++i;
  if (i == dbLen || db[i] != 0x01)
    throw ProtocolError(ErrorClass::DecryptionFailure, "missing padding separator");
  return Bytes(db.begin() + static_cast<std::ptrdiff_t>(i) + 1, db.end());
}

Ciphertext changeEncKey(const PrivateKey& ownKey, const PublicKey& nextKey,
                        const Ciphertext& ct) {
  return encrypt(nextKey, decrypt(ownKey, ct));
}

}  // namespace ictoken
