#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ictoken/crypto.hpp"
#include "ictoken/token.hpp"

namespace ictoken {

/// What an owner publishes: identity plus the key transactions verify under.
struct PublicProfile {
  Digest publicID;
  PublicKey publicKey;

  bool operator==(const PublicProfile&) const = default;

  bool verifySign(ByteView message, const Signature& sig) const {
    return verify(publicKey, message, sig);
  }
};

struct Owner {
  Digest publicID;
  KeyPair keyPair;
  std::string role;

  PublicProfile profile() const { return {publicID, keyPair.publicKey}; }
};

inline Digest publicIDof(const PublicKey& key) {
  return sha256(key.canonicalBytes());
}

/// Seeded creation is deterministic; unseeded keys come from OS entropy.
Owner createOwner(std::string role, std::optional<std::uint64_t> seed = std::nullopt);

/// Read side of a tracker node or network, as seen by a wallet.
class LedgerView {
 public:
  virtual ~LedgerView() = default;
  /// Latest committed token for every ICID in this owner's asset set.
  virtual std::vector<ICtoken> assetsOf(const Digest& publicID) const = 0;
  virtual std::optional<PublicProfile> profileOf(const Digest& publicID) const = 0;
};

/// Single-owner session object; builds and signs the token versions that get
/// submitted to the tracker. The tracker owns version numbering, so every
/// built token carries the version/prevVer of the held copy it was derived
/// from.
class Wallet {
 public:
  explicit Wallet(Owner owner) : owner_(std::move(owner)) {}

  const Owner& owner() const { return owner_; }
  const std::map<Digest, ICtoken>& heldTokens() const { return held_; }
  bool holds(const Digest& icid) const { return held_.contains(icid); }

  void attach(const LedgerView* view) { view_ = view; }

  /// Fresh fabrication-complete token: version 0, no composition, metering
  /// key encrypted to this owner.
  ICtoken buildEnrollment(ByteView deviceUID, std::string_view markings,
                          ByteView meteringKey) const;

  /// Held copy with stage/status replaced and re-signed.
  ICtoken buildStageUpdate(const Digest& icid, Stage newStage, Status newStatus) const;

  /// One re-signed token per held input, all carrying pid = computePID(icids).
  std::vector<ICtoken> buildPidBinding(const std::vector<Digest>& icids) const;

  /// One re-signed token per held input, all carrying
  /// edid = computeEDID(distinct pids of the inputs).
  std::vector<ICtoken> buildEdidBinding(const std::vector<Digest>& icids) const;

  /// Re-encrypts the metering key to the buyer and signs as the seller.
  ICtoken buildTransfer(const Digest& icid, const PublicProfile& newOwner) const;

  ICtoken buildDefectReport(const Digest& icid) const;

  /// Replaces heldTokens with the committed asset set for this owner.
  void syncAssets();
  void syncAssets(const LedgerView& view);

  /// Signs `token`'s payload with this owner's key and stores the signature.
  /// The attack harness also uses this to sign deliberately bad tokens;
  /// the tracker is the one that must say no.
  ICtoken signToken(ICtoken token) const;

  void saveTo(const std::string& path) const;
  static Wallet loadFrom(const std::string& path);

 private:
  const ICtoken& requireHeld(const Digest& icid) const;

  Owner owner_;
  std::map<Digest, ICtoken> held_;
  const LedgerView* view_ = nullptr;
};

}  // namespace ictoken
