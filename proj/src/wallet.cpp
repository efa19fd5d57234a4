#include "ictoken/wallet.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ictoken {

Owner createOwner(std::string role, std::optional<std::uint64_t> seed) {
  KeyPair kp;
  if (seed) {
    kp = deriveKeyPair(*seed);
  } else {
    Drbg rng = Drbg::fromEntropy();
    kp = generateKeyPair(rng);
  }
  Digest id = publicIDof(kp.publicKey);
  return Owner{id, std::move(kp), std::move(role)};
}

ICtoken Wallet::signToken(ICtoken token) const {
  Signature sig = sign(owner_.keyPair.privateKey, signingPayload(token));
  token.trnsaxnID = sig;
  return token;
}

const ICtoken& Wallet::requireHeld(const Digest& icid) const {
  auto it = held_.find(icid);
  if (it == held_.end())
    throw ProtocolError(ErrorClass::NotHeld, "wallet does not hold " + icid.toHex());
  return it->second;
}

ICtoken Wallet::buildEnrollment(ByteView deviceUID, std::string_view markings,
                                ByteView meteringKey) const {
  if (meteringKey.size() != 32)
    throw ProtocolError(ErrorClass::MalformedToken, "metering key must be 32 bytes");
  ICtoken t;
  t.metadata.icid = makeICID(deviceUID);
  t.metadata.markHash = makeMarkHash(markings);
  t.metadata.stage = Stage::Fabrication;
  t.metadata.status = Status::Completed;
  t.metadata.version = 0;
  t.key.keyEncr = encrypt(owner_.keyPair.publicKey, meteringKey);
  t.key.keyHash = sha256(meteringKey);
  t.ownerID = owner_.publicID;
  return signToken(std::move(t));
}

ICtoken Wallet::buildStageUpdate(const Digest& icid, Stage newStage,
                                 Status newStatus) const {
  ICtoken t = requireHeld(icid);
  t.metadata.stage = newStage;
  t.metadata.status = newStatus;
  return signToken(std::move(t));
}

std::vector<ICtoken> Wallet::buildPidBinding(const std::vector<Digest>& icids) const {
  if (icids.empty()) throw ProtocolError(ErrorClass::EmptyList, "no ICIDs to bind");
  std::vector<ICtoken> batch;
  batch.reserve(icids.size());
  for (const auto& icid : icids) {
    const ICtoken& held = requireHeld(icid);
    if (held.metadata.stage != Stage::PcbAssembly ||
        held.metadata.status != Status::Completed || held.metadata.pid)
      throw ProtocolError(ErrorClass::MixedStages,
                          "pid binding needs all tokens at stage 2/1 with no pid");
    batch.push_back(held);
  }
  Digest pid = computePID(icids);
  for (auto& t : batch) {
    t.metadata.pid = pid;
    t = signToken(std::move(t));
  }
  return batch;
}

std::vector<ICtoken> Wallet::buildEdidBinding(const std::vector<Digest>& icids) const {
  if (icids.empty()) throw ProtocolError(ErrorClass::EmptyList, "no ICIDs to bind");
  std::vector<ICtoken> batch;
  std::vector<Digest> pids;
  batch.reserve(icids.size());
  for (const auto& icid : icids) {
    const ICtoken& held = requireHeld(icid);
    if (held.metadata.stage != Stage::SystemIntegration ||
        held.metadata.status != Status::Completed || !held.metadata.pid ||
        held.metadata.edid)
      throw ProtocolError(ErrorClass::MixedStages,
                          "edid binding needs all tokens at stage 3/1 with pid set");
    pids.push_back(*held.metadata.pid);
    batch.push_back(held);
  }
  Digest edid = computeEDID(pids);  // merkle construction dedupes
  for (auto& t : batch) {
    t.metadata.edid = edid;
    t = signToken(std::move(t));
  }
  return batch;
}

ICtoken Wallet::buildTransfer(const Digest& icid, const PublicProfile& newOwner) const {
  ICtoken t = requireHeld(icid);
  t.key.keyEncr =
      changeEncKey(owner_.keyPair.privateKey, newOwner.publicKey, t.key.keyEncr);
  t.ownerID = newOwner.publicID;
  return signToken(std::move(t));
}

ICtoken Wallet::buildDefectReport(const Digest& icid) const {
  ICtoken t = requireHeld(icid);
  t.metadata.isDefective = true;
  return signToken(std::move(t));
}

void Wallet::syncAssets() {
  if (view_ == nullptr)
    throw ProtocolError(ErrorClass::TrackerUnavailable, "wallet has no tracker attached");
  syncAssets(*view_);
}

void Wallet::syncAssets(const LedgerView& view) {
  held_.clear();
  for (auto& t : view.assetsOf(owner_.publicID)) {
    Digest icid = t.metadata.icid;
    held_.emplace(icid, std::move(t));
  }
}

// ---------------------------------------------------------------------------
// Wallet file

void Wallet::saveTo(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ProtocolError(ErrorClass::IoError, "cannot write " + path);
  const PrivateKey& k = owner_.keyPair.privateKey;
  out << "ictoken-wallet v1\n";
  out << "role=" << owner_.role << "\n";
  out << "publicid=" << owner_.publicID.toHex() << "\n";
  out << "n=" << toHex(k.modulus()) << "\n";
  out << "e=" << toHex(k.exponent()) << "\n";
  out << "d=" << toHex(k.secretExponent()) << "\n";
  out << "p=" << toHex(k.primeP()) << "\n";
  out << "q=" << toHex(k.primeQ()) << "\n";
  for (const auto& [icid, tok] : held_) out << "held=" << icid.toHex() << "\n";
  if (!out) throw ProtocolError(ErrorClass::IoError, "failed writing " + path);
}

namespace {
std::string expectKeyLine(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line) || !line.starts_with(key) ||
      line.size() <= key.size() || line[key.size()] != '=')
    throw ProtocolError(ErrorClass::ParseError,
                        "wallet file: expected " + std::string(key) + "=");
  return line.substr(key.size() + 1);
}
}  // namespace

Wallet Wallet::loadFrom(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProtocolError(ErrorClass::IoError, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ictoken-wallet v1")
    throw ProtocolError(ErrorClass::ParseError, "wallet file: bad header");

  std::string role = expectKeyLine(in, "role");
  auto pubID = Digest::fromHex(expectKeyLine(in, "publicid"));
  auto n = fromHex(expectKeyLine(in, "n"));
  auto e = fromHex(expectKeyLine(in, "e"));
  auto d = fromHex(expectKeyLine(in, "d"));
  auto p = fromHex(expectKeyLine(in, "p"));
  auto q = fromHex(expectKeyLine(in, "q"));
  if (!pubID || !n || !e || !d || !p || !q)
    throw ProtocolError(ErrorClass::ParseError, "wallet file: bad hex field");

  KeyPair kp;
  try {
    kp.privateKey = PrivateKey(*n, *e, *d, *p, *q);
    kp.publicKey = PublicKey(*n, *e);
  } catch (const std::exception& ex) {
    throw ProtocolError(ErrorClass::ParseError, std::string("wallet file: ") + ex.what());
  }
  if (publicIDof(kp.publicKey) != *pubID)
    throw ProtocolError(ErrorClass::ParseError, "wallet file: publicid does not match key");

  Owner owner{*pubID, std::move(kp), std::move(role)};
  Wallet w(std::move(owner));
  // Held ICIDs are listed for reference only; tokens are re-fetched from the
  // ledger on the next syncAssets, which is the source of truth.
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!line.starts_with("held=") || !Digest::fromHex(line.substr(5)))
      throw ProtocolError(ErrorClass::ParseError, "wallet file: bad held line");
  }
  return w;
}

}  // namespace ictoken
