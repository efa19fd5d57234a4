#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "ictoken/crypto.hpp"
#include "ictoken/tracker.hpp"

namespace ictoken {

enum class ByzantineBehavior : std::uint8_t {
  ProposeInvalid,  // as leader, corrupts a token in its proposal
  VoteRandom,      // votes by seeded coin flip
  Equivocate,      // as leader, shows different proposals to different nodes
};

std::string_view behaviorName(ByzantineBehavior b);
bool behaviorFromName(std::string_view name, ByzantineBehavior& out);

struct NetworkConfig {
  std::size_t nodeCount = 4;
  /// 0 means the default floor(2n/3)+1.
  std::size_t quorum = 0;
  std::uint64_t rngSeed = 0;
  NodeConfig node;

  std::size_t effectiveQuorum() const {
    return quorum != 0 ? quorum : (2 * nodeCount) / 3 + 1;
  }
};

struct Proposal {
  std::size_t round = 0;
  std::size_t leader = 0;
  std::vector<ServiceRequest> requests;
  Block candidate;

  bool operator==(const Proposal&) const = default;
};

struct Vote {
  std::size_t round = 0;
  std::size_t voter = 0;
  Digest blockHash;
  bool accept = false;
};

struct RoundTrace {
  std::size_t round = 0;
  std::size_t leader = 0;
  std::vector<Proposal> proposals;  // empty pool -> none; equivocation -> two
  std::vector<Vote> votes;          // one per node, in node order
  bool committed = false;
  Digest committedHash;
  /// Requests the leader dropped during packing, with the rejection.
  std::vector<std::pair<ServiceKind, Error>> rejected;

  /// One structured log line per round for the harness to assert on.
  std::string toText() const;
};

struct ChainComparison {
  bool identical = true;
  /// First block height at which two honest chains differ, if any.
  std::optional<std::uint64_t> firstDivergence;
  std::string report;
};

/// Pairwise block-level comparison of the given chains.
ChainComparison compareNodeChains(const std::vector<const Node*>& nodes);

/// Deterministic synchronous consortium network: round-robin leaders propose
/// blocks of validated transactions, every node re-validates independently,
/// and a block commits everywhere iff accepting votes reach the quorum.
class Network : public LedgerView {
 public:
  explicit Network(NetworkConfig cfg);

  const NetworkConfig& config() const { return cfg_; }
  std::size_t nodeCount() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  bool isHonest(std::size_t i) const { return !behavior_[i].has_value(); }

  /// Registers the owner on every node (consortium membership is
  /// administrative, not a chain transaction).
  Result<Unit> enrollOwner(const PublicProfile& profile);

  void injectByzantine(std::size_t nodeIndex, ByzantineBehavior behavior);

  /// Appends to every node's pending pool; validation happens at proposal.
  void submitTransaction(ServiceRequest request);
  bool pendingEmpty() const;

  const RoundTrace& runRound();
  /// Runs rounds until every pool drains, up to maxRounds; returns the
  /// number of rounds executed.
  std::size_t runUntilIdle(std::size_t maxRounds);

  const std::vector<RoundTrace>& traces() const { return traces_; }

  ChainComparison compareChains() const;

  /// First honest node; wallets attach to the network through it.
  const Node& referenceNode() const;

  // LedgerView (delegates to the reference node)
  std::vector<ICtoken> assetsOf(const Digest& publicID) const override;
  std::optional<PublicProfile> profileOf(const Digest& publicID) const override;

 private:
  struct Packing {
    std::vector<ServiceRequest> accepted;
    std::vector<ICtoken> tokens;
    std::vector<std::pair<ServiceKind, Error>> rejected;
  };

  /// Validates pool requests in order against a scratch copy of `base`,
  /// packing accepted ones until the block is full.
  Packing packFromPool(const Node& base, std::deque<ServiceRequest>& pool) const;

  /// True iff replaying the proposal's requests on a scratch copy of `base`
  /// reproduces the candidate block exactly.
  bool validateProposal(const Node& base, const Proposal& proposal) const;

  NetworkConfig cfg_;
  std::vector<Node> nodes_;
  std::vector<std::optional<ByzantineBehavior>> behavior_;
  std::vector<std::deque<ServiceRequest>> pools_;
  std::size_t round_ = 0;
  Drbg rng_;
  std::vector<RoundTrace> traces_;
};

}  // namespace ictoken
