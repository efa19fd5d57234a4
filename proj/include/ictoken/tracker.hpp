#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ictoken/ledger.hpp"
#include "ictoken/token.hpp"
#include "ictoken/wallet.hpp"

namespace ictoken {

struct OwnerEntry {
  bool isEnrolled = false;
  PublicProfile pubProf;
  std::set<Digest> assets;  // ICIDs currently owned

  bool operator==(const OwnerEntry&) const = default;
};

/// The four mappings every node derives from the committed chain.
struct NodeState {
  std::map<Digest, std::uint64_t> icdb;             // ICID -> latest sequence index
  std::map<Digest, std::vector<Digest>> pcbdb;      // PID -> ICIDs on the board
  std::map<Digest, std::vector<Digest>> devdb;      // EDID -> PIDs in the device
  std::map<Digest, OwnerEntry> owndb;               // publicID -> owner entry

  bool operator==(const NodeState&) const = default;

  /// The single state transition: used both at live commit and when
  /// rebuilding from genesis, so the two can be compared.
  void apply(const ICtoken& token, std::uint64_t seq, const ICtoken* prev);
};

enum class ServiceKind : std::uint8_t {
  EnrollIC,
  ReportDefective,
  UpdateStage,
  UpdatePidOrEdid,
  TransferIC,
};

std::string_view serviceName(ServiceKind k);

/// A wallet submission: one token, or a batch for updatePIDorEDID.
struct ServiceRequest {
  ServiceKind kind;
  std::vector<ICtoken> tokens;

  bool operator==(const ServiceRequest&) const = default;
};

struct ChainReport {
  bool ok = true;
  std::vector<std::string> issues;

  void flag(std::string issue) {
    ok = false;
    issues.push_back(std::move(issue));
  }
};

struct NodeConfig {
  std::size_t blockCapacity = 16;
};

/// One ICtracker node: owner registry, append-only chain, derived mappings,
/// and the validation rules for all five services. Copyable by value, which
/// is how consensus leaders build speculative candidate blocks.
class Node : public LedgerView {
 public:
  explicit Node(NodeConfig cfg = {}) : cfg_(cfg) {}

  const NodeConfig& config() const { return cfg_; }
  const NodeState& state() const { return state_; }
  const Ledger& ledger() const { return ledger_; }
  /// All committed tokens in sequence order (sealed blocks plus open buffer).
  const std::vector<ICtoken>& committedTokens() const { return tokens_; }
  std::uint64_t committedCount() const { return tokens_.size(); }

  // --- owner registry -------------------------------------------------
  Result<Unit> enrollOwner(const PublicProfile& profile);
  bool isEnrolled(const Digest& publicID) const;

  /// True iff the token's signature verifies under the registered key of
  /// `ownerID`. Errors with OwnerNotEnrolled for unknown owners.
  Result<bool> verifyTransaxn(const Digest& ownerID, const ICtoken& token) const;

  // --- services (validate + commit on this node) -----------------------
  Result<std::uint64_t> enrollIC(const ICtoken& token);
  Result<std::uint64_t> reportDefective(const ICtoken& token);
  Result<std::uint64_t> updateStage(const ICtoken& token);
  Result<std::vector<std::uint64_t>> updatePIDorEDID(const std::vector<ICtoken>& tokens);
  Result<std::uint64_t> transferIC(const ICtoken& token);
  Result<std::vector<std::uint64_t>> submit(const ServiceRequest& request);

  /// Validation only: returns the stored-form tokens (tracker-assigned
  /// version/prevVer) this request would commit, without committing them.
  Result<std::vector<ICtoken>> validateRequest(const ServiceRequest& request) const;

  // --- consensus commit path -------------------------------------------
  /// Appends an externally sealed block after checking it extends the head.
  Result<Unit> commitSealedBlock(const Block& block);

  // --- queries ----------------------------------------------------------
  /// Full version history, newest first, by following prevVer links.
  Result<std::vector<ICtoken>> traceHistory(const Digest& icid) const;
  std::optional<ICtoken> latestToken(const Digest& icid) const;
  const ICtoken* tokenAt(std::uint64_t seq) const;

  /// The byte image the wallet actually signed for a stored token: version
  /// and prevVer roll back to the values of the predecessor it was built
  /// from, since the tracker assigns the final ones after verification.
  Bytes submittedImage(const ICtoken& stored) const;

  /// publicID whose key signed this stored token. Transfers are signed by
  /// the seller, so for version > 0 this is the previous version's owner.
  Digest signerOf(const ICtoken& stored) const;

  /// Recomputes every block link, token root, block hash, version chain and
  /// historical signature. With stopAtFirst the scan returns on the first
  /// issue (corruption sweeps only need the verdict); default is the full
  /// report.
  ChainReport verifyChain(bool stopAtFirst = false) const;

  /// Independent replay of the registry and token sequence; equal to state()
  /// on an untampered node.
  NodeState rebuiltState() const;

  // --- packaging --------------------------------------------------------
  /// Seals buffered tokens into a block (no-op when the buffer is empty).
  void flush();
  std::size_t openBufferSize() const { return buffer_.size(); }

  // --- persistence --------------------------------------------------------
  /// Serialized ledger file: owner records and block records in event order.
  /// Requires an empty open buffer (callers flush first).
  std::string serialize() const;
  void saveTo(const std::string& path);
  static Result<Node> loadFrom(const std::string& path, NodeConfig cfg = {});
  static Result<Node> parse(std::string_view text, NodeConfig cfg = {});

  // --- LedgerView ---------------------------------------------------------
  std::vector<ICtoken> assetsOf(const Digest& publicID) const override;
  std::optional<PublicProfile> profileOf(const Digest& publicID) const override;

 private:
  struct Event {
    enum Kind : std::uint8_t { OwnerEnrolled, BlockSealed } kind;
    std::size_t index;  // into profiles_ or ledger_.blocks
  };

  Result<std::vector<ICtoken>> validateEnroll(const ICtoken& t) const;
  Result<std::vector<ICtoken>> validateDefectReport(const ICtoken& t) const;
  Result<std::vector<ICtoken>> validateStageUpdate(const ICtoken& t) const;
  Result<std::vector<ICtoken>> validateComposition(const std::vector<ICtoken>& ts) const;
  Result<std::vector<ICtoken>> validateTransfer(const ICtoken& t) const;

  /// Appends to the flat sequence and applies the state transition.
  void appendCommitted(const ICtoken& stored);
  /// Single-node commit: buffer + seal at capacity.
  std::vector<std::uint64_t> commitPlanned(const std::vector<ICtoken>& planned);

  NodeConfig cfg_;
  NodeState state_;
  Ledger ledger_;
  std::vector<ICtoken> tokens_;        // flat commit sequence
  std::vector<ICtoken> buffer_;        // committed but not yet sealed
  std::vector<PublicProfile> profiles_;  // registry, in enrollment order
  std::vector<Event> events_;
};

std::string ownerRecordToText(const PublicProfile& profile);
Result<PublicProfile> ownerRecordFromText(std::string_view line);

}  // namespace ictoken
