// Acceptance suite: one function per criterion, each printing a single
// pass/fail line. Exits nonzero if any criterion fails. An optional argv[1]
// selects one criterion by number.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "fuzz.hpp"
#include "support.hpp"

#include "ictoken/consensus.hpp"
#include "ictoken/scenario.hpp"
#include "ictoken/tracker.hpp"

using namespace ictoken;
using namespace testsupport;

namespace {

int failures = 0;
int currentCriterion = 0;

#define REQUIRE(cond, msg)                                                   \
  do {                                                                       \
    if (!(cond)) {                                                           \
      std::cerr << "[FAIL] criterion " << currentCriterion << ": " << msg   \
                << " (" << __FILE__ << ":" << __LINE__ << ")\n";             \
      ++failures;                                                            \
      return;                                                                \
    }                                                                        \
  } while (0)

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

void pass(const std::string& what, const Timer& timer) {
  std::cout << "[PASS] criterion " << currentCriterion << ": " << what << " ("
            << timer.seconds() << "s)\n";
}

// ---------------------------------------------------------------------------
// 1. Size accounting: canonical encoding is exactly 714 bytes with the
//    documented per-field layout. Exact match, zero tolerance.

void criterion1() {
  Timer timer;
  struct Row {
    std::size_t offset, size;
  };
  const Row rows[] = {
      {TokenLayout::icid, 32},     {TokenLayout::pid, 32},
      {TokenLayout::edid, 32},     {TokenLayout::markHash, 32},
      {TokenLayout::flags, 1},     {TokenLayout::prevVer, 8},
      {TokenLayout::version, 1},   {TokenLayout::keyEncr, 256},
      {TokenLayout::keyHash, 32},  {TokenLayout::owner, 32},
      {TokenLayout::trnsaxnID, 256},
  };
  std::size_t expected = 0;
  for (const auto& r : rows) {
    REQUIRE(r.offset == expected, "field offset mismatch at " << r.offset);
    expected += r.size;
  }
  REQUIRE(expected == 714, "field sizes do not sum to 714");
  REQUIRE(kTokenEncodedSize == 714, "canonical size constant");
  REQUIRE(kSigningPayloadSize == 714 - 256, "signing payload constant");

  Drbg rng(101);
  for (int i = 0; i < 500; ++i) {
    ICtoken t = randomToken(rng);
    Bytes enc = canonicalEncode(t);
    REQUIRE(enc.size() == 714, "encoded token not 714 bytes");
    REQUIRE(canonicalDecode(enc) == t, "canonical round trip failed");
    REQUIRE(signingPayload(t).size() == 458, "payload not 458 bytes");
  }

  // a real signed token from a wallet measures the same
  Owner owner = createOwner("fab", 424201);
  Wallet wallet(owner);
  ICtoken live = wallet.buildEnrollment(asView(std::string("size-die")), "ACME SZ",
                                        Bytes(32, 0x11));
  REQUIRE(canonicalEncode(live).size() == 714, "live token not 714 bytes");
  REQUIRE(timer.seconds() < 1.0, "runtime bound 1s exceeded");
  pass("714-byte canonical token layout, field for field", timer);
}

// ---------------------------------------------------------------------------
// 2. Lifecycle replay on a 4-node network: 15 accepted steps, final state
//    stage 4 / status 1 / recycler, 15-version trace, mappings == rebuild.

void criterion2() {
  Timer timer;
  NetworkConfig cfg;
  cfg.nodeCount = 4;
  cfg.rngSeed = 2024;
  Network net(cfg);
  ScenarioReport report = runScenario(table2Script(2024), net);

  REQUIRE(report.outcomes.size() == 15, "expected 15 steps");
  for (std::size_t i = 0; i < report.outcomes.size(); ++i)
    REQUIRE(report.outcomes[i].accepted && report.outcomes[i].asExpected,
            "step " << (i + 1) << " not accepted");
  REQUIRE(report.finals.size() == 1, "expected one tracked IC");
  const FinalTokenState& f = report.finals.front();
  REQUIRE(f.stage == Stage::EndUser && f.status == Status::Completed,
          "final stage/status is not 4/1");
  REQUIRE(f.ownerAlias == "o7", "final owner is not the recycler");
  REQUIRE(f.historyLength == 15, "traceHistory must return 15 versions");

  for (std::size_t i = 0; i < net.nodeCount(); ++i) {
    const Node& node = net.node(i);
    REQUIRE(node.rebuiltState() == node.state(),
            "node " << i << " live mappings differ from a from-genesis rebuild");
    REQUIRE(node.state().icdb.size() == 1, "icdb cardinality");
    REQUIRE(node.state().pcbdb.size() == 1, "pcbdb cardinality");
    REQUIRE(node.state().devdb.size() == 1, "devdb cardinality");
    REQUIRE(node.verifyChain().ok, "node " << i << " chain fails verification");
  }
  REQUIRE(net.compareChains().identical, "nodes diverged");
  REQUIRE(timer.seconds() < 10.0, "runtime bound 10s exceeded");
  pass("lifecycle replay (table2): 15/15 steps on a 4-node network", timer);
}

// ---------------------------------------------------------------------------
// 3. Attack suite: all seven scripts rejected with the documented classes.

void criterion3() {
  Timer timer;
  const std::pair<std::string, std::vector<ErrorClass>> expectations[] = {
      {"clone", {ErrorClass::DuplicateICID}},
      {"remark", {ErrorClass::IllegalFieldChange}},
      {"rollback", {ErrorClass::StageRollback}},
      {"swap", {ErrorClass::MerkleMismatch, ErrorClass::CompositionAlreadySet}},
      {"defectiveResale", {ErrorClass::DefectiveToken}},
      {"foreignTransfer", {ErrorClass::NewOwnerNotEnrolled}},
      {"keyTamper", {ErrorClass::KeyTrailBroken}},
  };
  REQUIRE(attackNames().size() == 7, "attack suite must cover seven threats");
  for (const auto& [name, classes] : expectations) {
    Node node;
    ScenarioReport report = runScenario(attackScript(name, 33), node);
    const StepOutcome& last = report.outcomes.back();
    REQUIRE(!last.accepted, "attack '" << name << "' was ACCEPTED");
    bool matches = false;
    for (ErrorClass c : classes) matches = matches || last.error->cls == c;
    REQUIRE(matches, "attack '" << name << "' rejected as "
                                << errorClassName(last.error->cls)
                                << ", not its documented class");
    for (const auto& o : report.outcomes)
      REQUIRE(o.asExpected, "setup step misbehaved in '" << name << "'");
    REQUIRE(report.invariants.allHold(), "post-attack invariants broken in '"
                                             << name << "'");
  }
  REQUIRE(timer.seconds() < 10.0, "runtime bound 10s exceeded");
  pass("all 7 attack scripts rejected with their documented classes", timer);
}

// ---------------------------------------------------------------------------
// 4. Algorithm preconditions: >= 1000 mutated cases per algorithm, fixed
//    seed; the tracker's verdict must equal the assertion-set oracle's.

void criterion4() {
  Timer timer;
  using namespace testfuzz;
  const std::pair<ServiceKind, const char*> algs[] = {
      {ServiceKind::EnrollIC, "enrollIC"},
      {ServiceKind::UpdateStage, "updateStage"},
      {ServiceKind::UpdatePidOrEdid, "updatePIDorEDID"},
      {ServiceKind::TransferIC, "transferIC"},
  };
  for (const auto& [kind, name] : algs) {
    FuzzStats stats = fuzzAlgorithm(kind, 1000, 0xac5ed);
    for (const auto& f : stats.failures)
      std::cerr << "  counterexample (" << name << "): " << f << "\n";
    REQUIRE(stats.disagreements == 0,
            name << ": " << stats.disagreements << " oracle disagreements in "
                 << stats.cases << " cases");
    REQUIRE(stats.accepted >= 50 && stats.rejected >= 50,
            name << ": generator failed to produce both verdicts (accepted="
                 << stats.accepted << ", rejected=" << stats.rejected << ")");
  }
  pass("4000 mutated transactions: tracker == assertion-set oracle", timer);
}

// ---------------------------------------------------------------------------
// 5. Merkle oracle equivalence, permutation invariance, substitution
//    sensitivity.

void criterion5() {
  Timer timer;
  Drbg rng(505);

  for (std::size_t n = 1; n <= 7; ++n) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Digest> leaves;
      for (std::size_t i = 0; i < n; ++i) leaves.push_back(randomDigest(rng));
      Digest root = computePID(leaves);
      REQUIRE(root == oracleMerkleRoot(leaves),
              "root != hand-built oracle at size " << n);

      // permutation invariance: all orders for small n, sampled for larger
      std::vector<Digest> perm = leaves;
      std::sort(perm.begin(), perm.end());
      do {
        REQUIRE(computePID(perm) == root, "permutation changed the root");
      } while (n <= 4 && std::next_permutation(perm.begin(), perm.end()));
      for (int shuffle = 0; shuffle < 10; ++shuffle) {
        for (std::size_t i = perm.size(); i > 1; --i)
          std::swap(perm[i - 1], perm[rng.below(i)]);
        REQUIRE(computePID(perm) == root, "shuffle changed the root");
      }

      // substitution sensitivity at every position
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<Digest> sub = leaves;
        sub[i] = randomDigest(rng);
        REQUIRE(computePID(sub) != root, "substitution left the root unchanged");
      }
      // duplication is a no-op (set semantics)
      std::vector<Digest> dup = leaves;
      dup.push_back(leaves[rng.below(leaves.size())]);
      REQUIRE(computePID(dup) == root, "duplicate leaf changed the root");
    }
  }

  for (int trial = 0; trial < 500; ++trial) {
    std::size_t n = 8 + rng.below(57);  // 8..64
    std::vector<Digest> leaves;
    for (std::size_t i = 0; i < n; ++i) leaves.push_back(randomDigest(rng));
    REQUIRE(computeEDID(leaves) == oracleMerkleRoot(leaves),
            "root != oracle on a random large set");
  }
  pass("merkle equivalence on sizes 1..7 plus 500 large sets, zero exceptions",
       timer);
}

// ---------------------------------------------------------------------------
// 6. Chain integrity: a >= 50-token ledger plus an exhaustive single-byte
//    corruption sweep on a small fixture. Zero misses.

void criterion6() {
  Timer timer;

  // Big ledger: the multi-device scenario plus padding enrollments.
  Node big(NodeConfig{8});
  runScenario(multiDeviceScript(66), big);
  {
    Owner fab = createOwner("fab", 660001);
    REQUIRE(big.enrollOwner(fab.profile()).ok(), "pad owner enrollment failed");
    Wallet wallet(fab);
    Drbg rng(66);
    while (big.committedCount() < 50) {
      ICtoken t = wallet.buildEnrollment(
          asView("pad-" + std::to_string(big.committedCount())), "PAD",
          rng.bytes(32));
      REQUIRE(big.enrollIC(t).ok(), "pad enrollment rejected");
    }
  }
  big.flush();
  REQUIRE(big.committedCount() >= 50, "fixture must hold at least 50 tokens");
  REQUIRE(big.verifyChain().ok, "untampered big ledger must verify");
  std::string bigText = big.serialize();

  // Exhaustive single-byte sweep over every position of the 50-token ledger,
  // plus random-bit samples for mask variety.
  for (std::size_t pos = 0; pos < bigText.size(); ++pos) {
    std::string corrupted = bigText;
    corrupted[pos] = static_cast<char>(corrupted[pos] ^ 0x01);
    auto loaded = Node::parse(corrupted, NodeConfig{8});
    bool detected = !loaded.ok() || !loaded->verifyChain(true).ok;
    REQUIRE(detected, "corruption at byte " << pos << " went undetected");
  }
  Drbg rng(606);
  for (int trial = 0; trial < 4000; ++trial) {
    std::string corrupted = bigText;
    std::size_t pos = rng.below(corrupted.size());
    std::uint8_t mask = static_cast<std::uint8_t>(1u << rng.below(8));
    corrupted[pos] = static_cast<char>(corrupted[pos] ^ mask);
    auto loaded = Node::parse(corrupted, NodeConfig{8});
    bool detected = !loaded.ok() || !loaded->verifyChain(true).ok;
    REQUIRE(detected, "sampled corruption at byte " << pos << " went undetected");
  }

  // Small fixture: exhaustive sweep over every byte position and three masks.
  Node small(NodeConfig{2});
  {
    Owner fab = createOwner("fab", 660002);
    Owner buyer = createOwner("buyer", 660003);
    REQUIRE(small.enrollOwner(fab.profile()).ok(), "small fixture owner");
    REQUIRE(small.enrollOwner(buyer.profile()).ok(), "small fixture owner");
    Wallet wallet(fab);
    wallet.attach(&small);
    ICtoken t = wallet.buildEnrollment(asView(std::string("small-die")), "SM",
                                       Bytes(32, 5));
    REQUIRE(small.enrollIC(t).ok(), "small fixture enrollment");
    wallet.syncAssets();
    ICtoken tr = wallet.buildTransfer(t.metadata.icid, buyer.profile());
    REQUIRE(small.transferIC(tr).ok(), "small fixture transfer");
  }
  small.flush();
  REQUIRE(small.verifyChain().ok, "untampered small ledger must verify");
  std::string smallText = small.serialize();

  std::size_t undetected = 0;
  const std::uint8_t masks[] = {0x01, 0x20, 0x80};
  for (std::size_t pos = 0; pos < smallText.size(); ++pos) {
    for (std::uint8_t mask : masks) {
      std::string corrupted = smallText;
      corrupted[pos] = static_cast<char>(corrupted[pos] ^ mask);
      auto loaded = Node::parse(corrupted, NodeConfig{2});
      if (loaded.ok() && loaded->verifyChain(true).ok) {
        ++undetected;
        std::cerr << "  missed corruption at byte " << pos << " mask "
                  << unsigned(mask) << "\n";
      }
    }
  }
  REQUIRE(undetected == 0, undetected << " corruptions went undetected");
  pass("chain integrity: exhaustive byte sweeps on both fixtures, zero misses",
       timer);
}

// ---------------------------------------------------------------------------
// 7. Consensus: n=4, quorum=3, 100 seeded rounds per byzantine behavior.

void criterion7() {
  Timer timer;
  const ByzantineBehavior behaviors[] = {ByzantineBehavior::ProposeInvalid,
                                         ByzantineBehavior::VoteRandom,
                                         ByzantineBehavior::Equivocate};
  for (ByzantineBehavior behavior : behaviors) {
    NetworkConfig cfg;
    cfg.nodeCount = 4;
    cfg.quorum = 3;
    cfg.rngSeed = 7000 + static_cast<std::uint64_t>(behavior);
    Network net(cfg);
    Owner fab = createOwner("fab", 700001);
    REQUIRE(net.enrollOwner(fab.profile()).ok(), "owner enrollment failed");
    net.injectByzantine(1, behavior);

    Drbg rng(7100 + static_cast<std::uint64_t>(behavior));
    std::uint64_t validCount = 0;
    std::size_t round = 0;
    while (round < 100) {
      // one or two fresh enrollments; every fifth burst adds a duplicate,
      // which no honest node may ever commit
      std::size_t burst = 1 + rng.below(2);
      for (std::size_t b = 0; b < burst; ++b) {
        std::string uid = "c7-" + std::to_string(validCount);
        ICtoken t;
        t.metadata.icid = makeICID(asView(uid));
        t.metadata.markHash = makeMarkHash("C7");
        t.metadata.stage = Stage::Fabrication;
        t.metadata.status = Status::Completed;
        Bytes key = rng.bytes(32);
        t.key.keyEncr = encrypt(fab.keyPair.publicKey, key);
        t.key.keyHash = sha256(key);
        t.ownerID = fab.publicID;
        t.trnsaxnID = sign(fab.keyPair.privateKey, signingPayload(t));
        net.submitTransaction({ServiceKind::EnrollIC, {t}});
        ++validCount;
        if (validCount % 5 == 0)
          net.submitTransaction({ServiceKind::EnrollIC, {t}});  // duplicate
      }
      std::size_t waited = 0;
      while (!net.pendingEmpty() && waited < 4) {
        net.runRound();
        ++round;
        ++waited;
        // safety after every round: no two honest nodes disagree at any height
        for (std::size_t i = 2; i < 4; ++i) {
          REQUIRE(net.node(i).ledger().blocks.size() ==
                          net.node(0).ledger().blocks.size() &&
                      net.node(i).ledger().headHash() ==
                          net.node(0).ledger().headHash(),
                  behaviorName(behavior) << ": honest heads diverged mid-run");
        }
      }
      REQUIRE(net.pendingEmpty(),
              behaviorName(behavior) << ": valid transactions did not commit within 4 rounds");
    }

    // safety: honest chains bytewise identical
    std::string ref;
    for (std::size_t i = 0; i < 4; ++i) {
      if (i == 1) continue;
      std::string text = net.node(i).serialize();
      if (ref.empty()) ref = text;
      REQUIRE(text == ref, behaviorName(behavior) << ": honest chains diverged");
    }
    // validity: exactly the valid transactions committed, duplicates never
    REQUIRE(net.node(0).committedCount() == validCount,
            behaviorName(behavior)
                << ": committed " << net.node(0).committedCount() << " of "
                << validCount << " valid transactions");
    REQUIRE(net.node(0).verifyChain().ok,
            behaviorName(behavior) << ": honest chain fails verification");
    REQUIRE(net.node(0).rebuiltState() == net.node(0).state(),
            behaviorName(behavior) << ": state != rebuild");
  }
  REQUIRE(timer.seconds() < 30.0, "runtime bound 30s exceeded");
  pass("consensus safety/validity/liveness over 100 rounds x 3 behaviors", timer);
}

// ---------------------------------------------------------------------------
// 8. Access control and confidentiality.

void criterion8() {
  Timer timer;

  // Scenario-level scan (engine collects every secret it generated).
  {
    Node node;
    ScenarioReport r1 = runScenario(table2Script(88), node);
    REQUIRE(r1.invariants.confidentiality, "table2 leaked a secret");
    Node node2;
    ScenarioReport r2 = runScenario(multiDeviceScript(88), node2);
    REQUIRE(r2.invariants.confidentiality, "multi-device leaked a secret");
    NetworkConfig cfg;
    cfg.nodeCount = 4;
    cfg.rngSeed = 88;
    Network net(cfg);
    ScenarioReport r3 = runScenario(table2Script(89), net);
    REQUIRE(r3.invariants.confidentiality, "networked table2 leaked a secret");
  }

  // Independent end-to-end check with known secrets.
  Node node;
  Owner fab = createOwner("fab", 880001);
  Owner buyer = createOwner("buyer", 880002);
  REQUIRE(node.enrollOwner(fab.profile()).ok(), "owner enrollment");
  REQUIRE(node.enrollOwner(buyer.profile()).ok(), "owner enrollment");

  const std::string uid = "SECRET-WAFER-LOT9-DIE4";
  const std::string markings = "SECRET ACME QX-9 GRADE-A";
  Bytes meteringKey = Drbg(888).bytes(32);

  Wallet wallet(fab);
  wallet.attach(&node);
  ICtoken t = wallet.buildEnrollment(asView(uid), markings, meteringKey);
  REQUIRE(node.enrollIC(t).ok(), "enrollment rejected");
  wallet.syncAssets();
  ICtoken tr = wallet.buildTransfer(t.metadata.icid, buyer.profile());
  REQUIRE(node.transferIC(tr).ok(), "transfer rejected");
  node.flush();

  // the transferred key decrypts for the new owner and matches the trail
  const ICtoken& held = *node.latestToken(t.metadata.icid);
  Bytes recovered = decrypt(buyer.keyPair.privateKey, held.key.keyEncr);
  REQUIRE(recovered == meteringKey, "buyer cannot recover the metering key");
  REQUIRE(sha256(recovered) == held.key.keyHash, "recovered key fails the hash trail");

  // and no emitted byte stream contains any secret, raw or hex
  std::string hay = node.serialize();
  auto audit = auditIC(node, t.metadata.icid);
  REQUIRE(audit.ok(), "audit failed");
  hay += *audit;
  const std::string needles[] = {
      uid, markings, normalizeMarkings(markings),
      std::string(meteringKey.begin(), meteringKey.end()), toHex(meteringKey)};
  for (const auto& n : needles)
    REQUIRE(hay.find(n) == std::string::npos,
            "a secret appears in the ledger or audit output");
  pass("metering keys, UIDs and markings never leave the digests", timer);
}

}  // namespace

int main(int argc, char** argv) {
  int only = argc > 1 ? std::atoi(argv[1]) : 0;
  struct Entry {
    int number;
    void (*fn)();
  };
  const Entry entries[] = {{1, criterion1}, {2, criterion2}, {3, criterion3},
                           {4, criterion4}, {5, criterion5}, {6, criterion6},
                           {7, criterion7}, {8, criterion8}};
  for (const auto& e : entries) {
    if (only != 0 && e.number != only) continue;
    currentCriterion = e.number;
    try {
      e.fn();
    } catch (const std::exception& ex) {
      std::cerr << "[FAIL] criterion " << e.number << ": unhandled exception: "
                << ex.what() << "\n";
      ++failures;
    }
  }
  if (failures != 0) {
    std::cerr << failures << " criterion(s) failed\n";
    return 1;
  }
  return 0;
}
