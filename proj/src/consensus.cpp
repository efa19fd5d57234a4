#include "ictoken/consensus.hpp"

#include <algorithm>

namespace ictoken {

std::string_view behaviorName(ByzantineBehavior b) {
  switch (b) {
    case ByzantineBehavior::ProposeInvalid: return "proposeInvalid";
    case ByzantineBehavior::VoteRandom: return "voteRandom";
    case ByzantineBehavior::Equivocate: return "equivocate";
  }
  return "?";
}

bool behaviorFromName(std::string_view name, ByzantineBehavior& out) {
  if (name == "proposeInvalid") out = ByzantineBehavior::ProposeInvalid;
  else if (name == "voteRandom") out = ByzantineBehavior::VoteRandom;
  else if (name == "equivocate") out = ByzantineBehavior::Equivocate;
  else return false;
  return true;
}

std::string RoundTrace::toText() const {
  std::string out = "round=" + std::to_string(round);
  out += " leader=" + std::to_string(leader);
  out += " proposals=";
  if (proposals.empty()) {
    out += "-";
  } else {
    for (std::size_t i = 0; i < proposals.size(); ++i) {
      if (i) out += ",";
      out += proposals[i].candidate.blockHash.toHex().substr(0, 16);
    }
  }
  out += " votes=";
  if (votes.empty()) {
    out += "-";
  } else {
    for (const auto& v : votes) out += v.accept ? 'A' : 'R';
  }
  out += " commit=";
  out += committed ? committedHash.toHex().substr(0, 16) : std::string("none");
  if (!rejected.empty()) {
    out += " dropped=";
    for (std::size_t i = 0; i < rejected.size(); ++i) {
      if (i) out += ",";
      out += serviceName(rejected[i].first);
      out += ":";
      out += errorClassName(rejected[i].second.cls);
    }
  }
  return out;
}

Network::Network(NetworkConfig cfg)
    : cfg_(cfg),
      nodes_(cfg.nodeCount, Node(cfg.node)),
      behavior_(cfg.nodeCount),
      pools_(cfg.nodeCount),
      rng_(cfg.rngSeed) {
  if (cfg.nodeCount == 0) throw std::invalid_argument("network needs at least one node");
  std::size_t q = cfg_.effectiveQuorum();
  if (q < 1 || q > cfg_.nodeCount) throw std::invalid_argument("quorum out of range");
}

Result<Unit> Network::enrollOwner(const PublicProfile& profile) {
  Result<Unit> first = nodes_[0].enrollOwner(profile);
  for (std::size_t i = 1; i < nodes_.size(); ++i) nodes_[i].enrollOwner(profile);
  return first;
}

void Network::injectByzantine(std::size_t nodeIndex, ByzantineBehavior behavior) {
  behavior_.at(nodeIndex) = behavior;
}

void Network::submitTransaction(ServiceRequest request) {
  for (auto& pool : pools_) pool.push_back(request);
}

bool Network::pendingEmpty() const {
  return std::all_of(pools_.begin(), pools_.end(),
                     [](const auto& p) { return p.empty(); });
}

Network::Packing Network::packFromPool(const Node& base,
                                       std::deque<ServiceRequest>& pool) const {
  Packing out;
  Node scratch = base;
  std::deque<ServiceRequest> keep;
  while (!pool.empty()) {
    ServiceRequest req = std::move(pool.front());
    pool.pop_front();
    // Defer what does not fit next to already-packed work; a request that
    // cannot fit even an empty block falls through and gets rejected.
    if (!out.tokens.empty() &&
        out.tokens.size() + req.tokens.size() > cfg_.node.blockCapacity) {
      keep.push_back(std::move(req));
      break;
    }
    std::uint64_t before = scratch.committedCount();
    auto r = scratch.submit(req);
    if (!r) {
      out.rejected.emplace_back(req.kind, r.error());
      continue;  // dropped from this node's pool for good
    }
    for (std::uint64_t s = before; s < scratch.committedCount(); ++s)
      out.tokens.push_back(*scratch.tokenAt(s));
    out.accepted.push_back(std::move(req));
  }
  while (!pool.empty()) {
    keep.push_back(std::move(pool.front()));
    pool.pop_front();
  }
  pool = std::move(keep);
  return out;
}

bool Network::validateProposal(const Node& base, const Proposal& proposal) const {
  Node scratch = base;
  std::uint64_t before = scratch.committedCount();
  std::size_t total = 0;
  for (const auto& req : proposal.requests) {
    total += req.tokens.size();
    if (total > cfg_.node.blockCapacity) return false;
    if (!scratch.submit(req)) return false;
  }
  std::vector<ICtoken> tokens;
  for (std::uint64_t s = before; s < scratch.committedCount(); ++s)
    tokens.push_back(*scratch.tokenAt(s));
  if (tokens.empty()) return false;
  Block expected = sealBlock(base.ledger().blocks.size(), base.ledger().headHash(),
                             std::move(tokens));
  return expected == proposal.candidate;
}

const RoundTrace& Network::runRound() {
  RoundTrace trace;
  trace.round = round_;
  std::size_t leader = round_ % nodes_.size();
  trace.leader = leader;
  ++round_;

  // Proposal phase.
  Packing packing = packFromPool(nodes_[leader], pools_[leader]);
  trace.rejected = std::move(packing.rejected);
  if (!packing.tokens.empty()) {
    Proposal honest;
    honest.round = trace.round;
    honest.leader = leader;
    honest.requests = packing.accepted;
    honest.candidate = sealBlock(nodes_[leader].ledger().blocks.size(),
                                 nodes_[leader].ledger().headHash(), packing.tokens);

    if (behavior_[leader] == ByzantineBehavior::ProposeInvalid) {
      Proposal bad = honest;
      bad.candidate.tokens.front().trnsaxnID.bytes[0] ^= 0x01;
      bad.candidate.tokenRoot = computeTokenRoot(bad.candidate.tokens);
      bad.candidate.blockHash = computeBlockHash(
          bad.candidate.index, bad.candidate.prevBlockHash, bad.candidate.tokenRoot);
      trace.proposals.push_back(std::move(bad));
    } else if (behavior_[leader] == ByzantineBehavior::Equivocate &&
               honest.requests.size() >= 2) {
      // Two conflicting but individually valid proposals, split across nodes.
      Proposal alt;
      alt.round = trace.round;
      alt.leader = leader;
      alt.requests = {honest.requests.front()};
      Node scratch = nodes_[leader];
      std::uint64_t before = scratch.committedCount();
      scratch.submit(alt.requests.front());
      std::vector<ICtoken> tokens;
      for (std::uint64_t s = before; s < scratch.committedCount(); ++s)
        tokens.push_back(*scratch.tokenAt(s));
      alt.candidate = sealBlock(nodes_[leader].ledger().blocks.size(),
                                nodes_[leader].ledger().headHash(), std::move(tokens));
      trace.proposals.push_back(std::move(honest));
      trace.proposals.push_back(std::move(alt));
    } else {
      trace.proposals.push_back(std::move(honest));
    }
  }

  // Voting phase: node i sees proposal i % variants.
  if (!trace.proposals.empty()) {
    for (std::size_t v = 0; v < nodes_.size(); ++v) {
      const Proposal& seen = trace.proposals[v % trace.proposals.size()];
      bool accept;
      if (behavior_[v] == ByzantineBehavior::VoteRandom)
        accept = rng_.coin();
      else
        accept = validateProposal(nodes_[v], seen);
      trace.votes.push_back({trace.round, v, seen.candidate.blockHash, accept});
    }

    // Tally per block hash; quorum > n/2 means at most one can win.
    for (const auto& proposal : trace.proposals) {
      std::size_t accepts = 0;
      for (const auto& vote : trace.votes)
        if (vote.accept && vote.blockHash == proposal.candidate.blockHash) ++accepts;
      if (accepts >= cfg_.effectiveQuorum()) {
        trace.committed = true;
        trace.committedHash = proposal.candidate.blockHash;
        for (auto& node : nodes_) node.commitSealedBlock(proposal.candidate);
        // Committed requests leave every pool.
        for (auto& pool : pools_) {
          for (const auto& req : proposal.requests) {
            auto it = std::find(pool.begin(), pool.end(), req);
            if (it != pool.end()) pool.erase(it);
          }
        }
        break;
      }
    }
  }

  traces_.push_back(std::move(trace));
  return traces_.back();
}

std::size_t Network::runUntilIdle(std::size_t maxRounds) {
  std::size_t rounds = 0;
  while (!pendingEmpty() && rounds < maxRounds) {
    runRound();
    ++rounds;
  }
  return rounds;
}

ChainComparison compareNodeChains(const std::vector<const Node*>& nodes) {
  ChainComparison out;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const auto& a = nodes[0]->ledger().blocks;
    const auto& b = nodes[i]->ledger().blocks;
    std::size_t common = std::min(a.size(), b.size());
    for (std::size_t h = 0; h < common; ++h) {
      if (!(a[h] == b[h])) {
        out.identical = false;
        if (!out.firstDivergence) out.firstDivergence = h;
        out.report += "chains 0 and " + std::to_string(i) + " diverge at block " +
                      std::to_string(h) + "\n";
        break;
      }
    }
    if (a.size() != b.size()) {
      out.identical = false;
      if (!out.firstDivergence) out.firstDivergence = common;
      out.report +=
          "chains 0 and " + std::to_string(i) + " have different heights\n";
    }
  }
  if (out.identical) out.report = "all chains identical";
  return out;
}

ChainComparison Network::compareChains() const {
  std::vector<const Node*> honest;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (isHonest(i)) honest.push_back(&nodes_[i]);
  ChainComparison out = compareNodeChains(honest);
  if (out.identical) out.report = "all honest chains identical";
  return out;
}

const Node& Network::referenceNode() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (isHonest(i)) return nodes_[i];
  return nodes_[0];
}

std::vector<ICtoken> Network::assetsOf(const Digest& publicID) const {
  return referenceNode().assetsOf(publicID);
}

std::optional<PublicProfile> Network::profileOf(const Digest& publicID) const {
  return referenceNode().profileOf(publicID);
}

}  // namespace ictoken
