#include "ictoken/token.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>

namespace ictoken {

std::string_view stageName(Stage s) {
  switch (s) {
    case Stage::Fabrication: return "Fabrication";
    case Stage::PcbAssembly: return "PCB Assembly";
    case Stage::SystemIntegration: return "System Integration";
    case Stage::EndUser: return "End-User";
  }
  return "?";
}

bool stageFromCode(unsigned code, Stage& out) {
  if (code < 1 || code > 4) return false;
  out = static_cast<Stage>(code);
  return true;
}

void checkWellFormed(const ICtoken& token) {
  const ICMetadata& m = token.metadata;
  auto code = static_cast<unsigned>(m.stage);
  if (code < 1 || code > 4)
    throw ProtocolError(ErrorClass::MalformedToken, "stage out of range");
  auto st = static_cast<unsigned>(m.status);
  if (st > 1) throw ProtocolError(ErrorClass::MalformedToken, "status out of range");
  if ((m.version == 0) != !m.prevVer.has_value())
    throw ProtocolError(ErrorClass::MalformedToken,
                        "version 0 must be the only unlinked version");
  if (m.edid && !m.pid)
    throw ProtocolError(ErrorClass::MalformedToken, "edid set without pid");
  // All-zero encodes "absent", so a live digest field must be nonzero.
  if (m.icid.isZero())
    throw ProtocolError(ErrorClass::MalformedToken, "zero icid");
  if (m.markHash.isZero())
    throw ProtocolError(ErrorClass::MalformedToken, "zero markHash");
  if (m.pid && m.pid->isZero())
    throw ProtocolError(ErrorClass::MalformedToken, "zero pid");
  if (m.edid && m.edid->isZero())
    throw ProtocolError(ErrorClass::MalformedToken, "zero edid");
  if (token.key.keyHash.isZero())
    throw ProtocolError(ErrorClass::MalformedToken, "zero keyHash");
  if (token.ownerID.isZero())
    throw ProtocolError(ErrorClass::MalformedToken, "zero ownerID");
}

namespace {

void putDigest(Bytes& out, const std::optional<Digest>& d) {
  if (d)
    append(out, d->bytes);
  else
    out.resize(out.size() + 32);
}

std::uint8_t packFlags(const ICMetadata& m) {
  return static_cast<std::uint8_t>((static_cast<unsigned>(m.stage) << 5) |
                                   (static_cast<unsigned>(m.status) << 4) |
                                   (m.isDefective ? 0x08 : 0x00));
}

Digest takeDigest(ByteView bytes, std::size_t offset) {
  Digest d;
  std::memcpy(d.bytes.data(), bytes.data() + offset, 32);
  return d;
}

}  // namespace

Bytes canonicalEncode(const ICtoken& token) {
  checkWellFormed(token);
  const ICMetadata& m = token.metadata;
  Bytes out;
  out.reserve(kTokenEncodedSize);
  append(out, m.icid.bytes);
  putDigest(out, m.pid);
  putDigest(out, m.edid);
  append(out, m.markHash.bytes);
  out.push_back(packFlags(m));
  appendU64be(out, m.prevVer.value_or(0));
  out.push_back(m.version);
  append(out, token.key.keyEncr.bytes);
  append(out, token.key.keyHash.bytes);
  append(out, token.ownerID.bytes);
  append(out, token.trnsaxnID.bytes);
  return out;
}

ICtoken canonicalDecode(ByteView bytes) {
  if (bytes.size() != kTokenEncodedSize)
    throw ProtocolError(ErrorClass::MalformedToken, "wrong encoded length");

  ICtoken t;
  ICMetadata& m = t.metadata;
  m.icid = takeDigest(bytes, TokenLayout::icid);
  Digest pid = takeDigest(bytes, TokenLayout::pid);
  if (!pid.isZero()) m.pid = pid;
  Digest edid = takeDigest(bytes, TokenLayout::edid);
  if (!edid.isZero()) m.edid = edid;
  m.markHash = takeDigest(bytes, TokenLayout::markHash);

  std::uint8_t flags = bytes[TokenLayout::flags];
  if ((flags & 0x07) != 0)
    throw ProtocolError(ErrorClass::MalformedToken, "nonzero flag padding");
  if (!stageFromCode(flags >> 5, m.stage))
    throw ProtocolError(ErrorClass::MalformedToken, "stage out of range");
  m.status = static_cast<Status>((flags >> 4) & 1);
  m.isDefective = (flags & 0x08) != 0;

  std::uint64_t prev = readU64be(bytes.subspan(TokenLayout::prevVer, 8));
  m.version = bytes[TokenLayout::version];
  if (m.version == 0) {
    if (prev != 0)
      throw ProtocolError(ErrorClass::MalformedToken, "version 0 with prevVer set");
  } else {
    m.prevVer = prev;
  }

  std::memcpy(t.key.keyEncr.bytes.data(), bytes.data() + TokenLayout::keyEncr,
              kCiphertextSize);
  t.key.keyHash = takeDigest(bytes, TokenLayout::keyHash);
  t.ownerID = takeDigest(bytes, TokenLayout::owner);
  std::memcpy(t.trnsaxnID.bytes.data(), bytes.data() + TokenLayout::trnsaxnID,
              kSignatureSize);

  checkWellFormed(t);
  return t;
}

Bytes signingPayload(const ICtoken& token) {
  Bytes full = canonicalEncode(token);
  full.resize(kSigningPayloadSize);
  return full;
}

Digest makeICID(ByteView deviceUID) {
  if (deviceUID.empty())
    throw ProtocolError(ErrorClass::EmptyIdentifier, "device UID is empty");
  return sha256(deviceUID);
}

std::string normalizeMarkings(std::string_view markings) {
  std::string out;
  out.reserve(markings.size());
  bool pendingSpace = false;
  for (char c : markings) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pendingSpace = !out.empty();
      continue;
    }
    if (pendingSpace) {
      out.push_back(' ');
      pendingSpace = false;
    }
    out.push_back(c);
  }
  return out;
}

Digest makeMarkHash(std::string_view markings) {
  return sha256(asView(normalizeMarkings(markings)));
}

Digest computePID(const std::vector<Digest>& icids) {
  return merkleRoot(icids);
}

Digest computeEDID(const std::vector<Digest>& pids) {
  return merkleRoot(pids);
}

// ---------------------------------------------------------------------------
// Text form

namespace {

void putField(std::string& out, std::string_view key, const std::string& value) {
  if (!out.empty()) out.push_back(' ');
  out.append(key);
  out.push_back('=');
  out.append(value);
}

std::string optHex(const std::optional<Digest>& d) {
  return d ? d->toHex() : "-";
}

// Strict scanner over "key=value" fields separated by single spaces.
class FieldScanner {
 public:
  explicit FieldScanner(std::string_view line) : rest_(line) {}

  bool next(std::string_view key, std::string& value) {
    if (!rest_.empty() && first_) {
      first_ = false;
    } else if (rest_.starts_with(' ')) {
      rest_.remove_prefix(1);
    } else {
      return false;
    }
    if (!rest_.starts_with(key)) return false;
    rest_.remove_prefix(key.size());
    if (!rest_.starts_with('=')) return false;
    rest_.remove_prefix(1);
    std::size_t end = rest_.find(' ');
    std::string_view v = end == std::string_view::npos ? rest_ : rest_.substr(0, end);
    if (v.empty()) return false;
    value.assign(v);
    rest_.remove_prefix(v.size());
    return true;
  }

  bool done() const { return rest_.empty(); }

 private:
  std::string_view rest_;
  bool first_ = true;
};

bool parseDecimal(const std::string& s, std::uint64_t& out) {
  if (s.empty() || (s.size() > 1 && s[0] == '0')) return false;  // one spelling only
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parseOptDigest(const std::string& s, std::optional<Digest>& out) {
  if (s == "-") {
    out.reset();
    return true;
  }
  auto d = Digest::fromHex(s);
  if (!d) return false;
  out = *d;
  return true;
}

}  // namespace

std::string tokenToText(const ICtoken& token) {
  const ICMetadata& m = token.metadata;
  std::string out;
  putField(out, "icid", m.icid.toHex());
  putField(out, "pid", optHex(m.pid));
  putField(out, "edid", optHex(m.edid));
  putField(out, "mark", m.markHash.toHex());
  putField(out, "stage", std::to_string(static_cast<unsigned>(m.stage)));
  putField(out, "status", std::to_string(static_cast<unsigned>(m.status)));
  putField(out, "defect", m.isDefective ? "1" : "0");
  putField(out, "version", std::to_string(m.version));
  putField(out, "prevver", m.prevVer ? std::to_string(*m.prevVer) : "-");
  putField(out, "keyencr", toHex(token.key.keyEncr.bytes));
  putField(out, "keyhash", token.key.keyHash.toHex());
  putField(out, "owner", token.ownerID.toHex());
  putField(out, "sig", toHex(token.trnsaxnID.bytes));
  return out;
}

Result<ICtoken> tokenFromText(std::string_view line) {
  auto fail = [](std::string_view what) {
    return Result<ICtoken>(ErrorClass::ParseError, std::string("token field: ") + std::string(what));
  };

  FieldScanner scan(line);
  std::string v;
  ICtoken t;
  ICMetadata& m = t.metadata;

  if (!scan.next("icid", v)) return fail("icid");
  auto icid = Digest::fromHex(v);
  if (!icid) return fail("icid");
  m.icid = *icid;

  if (!scan.next("pid", v) || !parseOptDigest(v, m.pid)) return fail("pid");
  if (!scan.next("edid", v) || !parseOptDigest(v, m.edid)) return fail("edid");

  if (!scan.next("mark", v)) return fail("mark");
  auto mark = Digest::fromHex(v);
  if (!mark) return fail("mark");
  m.markHash = *mark;

  std::uint64_t num = 0;
  if (!scan.next("stage", v) || !parseDecimal(v, num) ||
      !stageFromCode(static_cast<unsigned>(num), m.stage))
    return fail("stage");
  if (!scan.next("status", v) || !parseDecimal(v, num) || num > 1) return fail("status");
  m.status = static_cast<Status>(num);
  if (!scan.next("defect", v) || !parseDecimal(v, num) || num > 1) return fail("defect");
  m.isDefective = num == 1;
  if (!scan.next("version", v) || !parseDecimal(v, num) || num > 255)
    return fail("version");
  m.version = static_cast<std::uint8_t>(num);

  if (!scan.next("prevver", v)) return fail("prevver");
  if (v == "-") {
    m.prevVer.reset();
  } else {
    if (!parseDecimal(v, num)) return fail("prevver");
    m.prevVer = num;
  }

  if (!scan.next("keyencr", v)) return fail("keyencr");
  auto enc = fromHex(v);
  if (!enc || enc->size() != kCiphertextSize) return fail("keyencr");
  std::copy(enc->begin(), enc->end(), t.key.keyEncr.bytes.begin());

  if (!scan.next("keyhash", v)) return fail("keyhash");
  auto kh = Digest::fromHex(v);
  if (!kh) return fail("keyhash");
  t.key.keyHash = *kh;

  if (!scan.next("owner", v)) return fail("owner");
  auto owner = Digest::fromHex(v);
  if (!owner) return fail("owner");
  t.ownerID = *owner;

  if (!scan.next("sig", v)) return fail("sig");
  auto sig = fromHex(v);
  if (!sig || sig->size() != kSignatureSize) return fail("sig");
  std::copy(sig->begin(), sig->end(), t.trnsaxnID.bytes.begin());

  if (!scan.done()) return fail("trailing data");

  try {
    checkWellFormed(t);
  } catch (const ProtocolError& e) {
    return Result<ICtoken>(ErrorClass::ParseError, e.what());
  }
  return t;
}

}  // namespace ictoken
