#pragma once

// Independent accept/reject oracle for the four transaction algorithms plus
// a mutation fuzzer that checks the tracker agrees with it case by case.
// The oracle restates the assertion sets directly over a state snapshot and
// shares no validation code with the tracker.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ictoken/tracker.hpp"
#include "support.hpp"

namespace testfuzz {

using namespace ictoken;

struct Snapshot {
  std::map<Digest, ICtoken> latest;      // icid -> latest stored token
  std::set<Digest> enrolledOwners;
  std::map<Digest, PublicKey> keys;
  std::set<Digest> boundPids, boundEdids;
  std::size_t capacity = 16;

  static Snapshot of(const Node& node) {
    Snapshot s;
    s.capacity = node.config().blockCapacity;
    for (const auto& [icid, seq] : node.state().icdb) s.latest[icid] = *node.tokenAt(seq);
    for (const auto& [id, entry] : node.state().owndb) {
      if (!entry.isEnrolled) continue;
      s.enrolledOwners.insert(id);
      s.keys[id] = entry.pubProf.publicKey;
    }
    for (const auto& [pid, ics] : node.state().pcbdb) s.boundPids.insert(pid);
    for (const auto& [edid, pids] : node.state().devdb) s.boundEdids.insert(edid);
    return s;
  }

  bool sigOk(const Digest& ownerID, const ICtoken& t) const {
    auto it = keys.find(ownerID);
    if (it == keys.end()) return false;
    try {
      return verify(it->second, signingPayload(t), t.trnsaxnID);
    } catch (const ProtocolError&) {
      return false;
    }
  }
};

inline bool oracleWellFormed(const ICtoken& t) {
  unsigned stage = static_cast<unsigned>(t.metadata.stage);
  if (stage < 1 || stage > 4) return false;
  if (static_cast<unsigned>(t.metadata.status) > 1) return false;
  if ((t.metadata.version == 0) != !t.metadata.prevVer.has_value()) return false;
  if (t.metadata.edid && !t.metadata.pid) return false;
  if (t.metadata.icid.isZero() || t.metadata.markHash.isZero()) return false;
  if (t.metadata.pid && t.metadata.pid->isZero()) return false;
  if (t.metadata.edid && t.metadata.edid->isZero()) return false;
  if (t.key.keyHash.isZero() || t.ownerID.isZero()) return false;
  return true;
}

struct Exempt {
  bool stage = false, status = false, pid = false, edid = false;
  bool keyEncr = false, owner = false, defect = false;
};

/// Field-by-field equality with an exemption list; the signature is never
/// part of the comparison.
inline bool oracleEqualExcept(const ICtoken& t, const ICtoken& prev, Exempt ex) {
  const ICMetadata& a = t.metadata;
  const ICMetadata& b = prev.metadata;
  if (a.icid != b.icid) return false;
  if (!ex.pid && a.pid != b.pid) return false;
  if (!ex.edid && a.edid != b.edid) return false;
  if (a.markHash != b.markHash) return false;
  if (!ex.stage && a.stage != b.stage) return false;
  if (!ex.status && a.status != b.status) return false;
  if (a.prevVer != b.prevVer) return false;
  if (a.version != b.version) return false;
  if (!ex.defect && a.isDefective != b.isDefective) return false;
  if (!ex.keyEncr && t.key.keyEncr != prev.key.keyEncr) return false;
  if (t.key.keyHash != prev.key.keyHash) return false;  // never exempt: the hash trail
  if (!ex.owner && t.ownerID != prev.ownerID) return false;
  return true;
}

inline bool oracleEnroll(const Snapshot& s, const ICtoken& t) {
  if (!oracleWellFormed(t)) return false;
  if (s.latest.contains(t.metadata.icid)) return false;       // can't re-enroll
  if (!s.enrolledOwners.contains(t.ownerID)) return false;
  if (!s.sigOk(t.ownerID, t)) return false;
  if (t.metadata.stage != Stage::Fabrication) return false;
  if (t.metadata.status != Status::Completed) return false;
  if (t.metadata.pid || t.metadata.edid) return false;
  if (t.metadata.version != 0 || t.metadata.prevVer) return false;
  return true;
}

inline bool oracleUpdateStage(const Snapshot& s, const ICtoken& t) {
  if (!oracleWellFormed(t)) return false;
  auto it = s.latest.find(t.metadata.icid);
  if (it == s.latest.end()) return false;
  const ICtoken& prev = it->second;
  if (prev.metadata.isDefective) return false;
  if (!s.sigOk(prev.ownerID, t)) return false;
  if (!oracleEqualExcept(t, prev, {.stage = true, .status = true})) return false;
  unsigned ns = static_cast<unsigned>(t.metadata.stage);
  unsigned ps = static_cast<unsigned>(prev.metadata.stage);
  if (ns < ps) return false;
  if (static_cast<unsigned>(t.metadata.status) < static_cast<unsigned>(prev.metadata.status) &&
      !(ns > ps))
    return false;
  if (prev.metadata.version == 255) return false;
  return true;
}

inline bool oracleTransfer(const Snapshot& s, const ICtoken& t) {
  if (!oracleWellFormed(t)) return false;
  auto it = s.latest.find(t.metadata.icid);
  if (it == s.latest.end()) return false;
  const ICtoken& prev = it->second;
  if (prev.metadata.isDefective) return false;
  if (!s.enrolledOwners.contains(t.ownerID)) return false;    // new owner
  if (prev.metadata.status != Status::Completed) return false;
  if (!s.sigOk(prev.ownerID, t)) return false;
  if (t.key.keyHash != prev.key.keyHash) return false;
  if (!oracleEqualExcept(t, prev, {.keyEncr = true, .owner = true})) return false;
  if (prev.metadata.version == 255) return false;
  return true;
}

inline bool oracleComposition(const Snapshot& s, const std::vector<ICtoken>& ts) {
  if (ts.empty() || ts.size() > s.capacity) return false;
  std::vector<Digest> icids;
  std::vector<const ICtoken*> prevs;
  for (const auto& t : ts) {
    if (!oracleWellFormed(t)) return false;
    for (const auto& seen : icids)
      if (seen == t.metadata.icid) return false;
    icids.push_back(t.metadata.icid);
    auto it = s.latest.find(t.metadata.icid);
    if (it == s.latest.end()) return false;
    prevs.push_back(&it->second);
  }
  for (const auto* p : prevs)
    if (p->metadata.isDefective) return false;
  for (const auto* p : prevs)
    if (p->ownerID != prevs.front()->ownerID) return false;
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (!s.sigOk(prevs[i]->ownerID, ts[i])) return false;
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (!oracleEqualExcept(ts[i], *prevs[i], {.pid = true, .edid = true})) return false;
  for (const auto* p : prevs)
    if (p->metadata.status != Status::Completed) return false;
  for (const auto* p : prevs)
    if (p->metadata.version == 255) return false;

  bool nonePid = true, allPid = true;
  for (const auto* p : prevs) {
    if (p->metadata.pid) nonePid = false;
    else allPid = false;
  }

  if (nonePid) {
    for (const auto& t : ts) {
      if (!t.metadata.pid || t.metadata.pid != ts.front().metadata.pid) return false;
      if (t.metadata.edid) return false;
      if (t.metadata.stage != Stage::PcbAssembly) return false;
    }
    if (*ts.front().metadata.pid != testsupport::oracleMerkleRoot(icids)) return false;
    if (s.boundPids.contains(*ts.front().metadata.pid)) return false;
    return true;
  }
  if (allPid) {
    for (std::size_t i = 0; i < ts.size(); ++i)
      if (ts[i].metadata.pid != prevs[i]->metadata.pid) return false;
    for (const auto* p : prevs)
      if (p->metadata.edid) return false;
    std::vector<Digest> pids;
    for (const auto* p : prevs) pids.push_back(*p->metadata.pid);
    for (const auto& t : ts) {
      if (!t.metadata.edid || t.metadata.edid != ts.front().metadata.edid) return false;
      if (t.metadata.stage != Stage::SystemIntegration) return false;
    }
    if (*ts.front().metadata.edid != testsupport::oracleMerkleRoot(pids)) return false;
    if (s.boundEdids.contains(*ts.front().metadata.edid)) return false;
    return true;
  }
  return false;
}

inline bool oracleAccepts(const Snapshot& s, const ServiceRequest& r) {
  switch (r.kind) {
    case ServiceKind::EnrollIC:
      return r.tokens.size() == 1 && oracleEnroll(s, r.tokens.front());
    case ServiceKind::UpdateStage:
      return r.tokens.size() == 1 && oracleUpdateStage(s, r.tokens.front());
    case ServiceKind::UpdatePidOrEdid: return oracleComposition(s, r.tokens);
    case ServiceKind::TransferIC:
      return r.tokens.size() == 1 && oracleTransfer(s, r.tokens.front());
    default: return false;
  }
}

// ---------------------------------------------------------------------------
// Fixture and mutation machinery

struct Fixture {
  Node node;
  Owner holder;    // owns every fixture token
  Owner buyer;     // enrolled counterparty
  Owner outsider;  // never enrolled
  std::vector<Digest> freshIcs;     // stage 1/1, unbound
  std::vector<Digest> boardReady;   // stage 2/1, unbound
  std::vector<Digest> boundIcs;     // stage 3/1, two boards worth, pid set
  Digest defectiveIc;
  Digest inProgressIc;              // stage 2/0
};

inline void fixtureRequire(bool ok, const char* what) {
  if (!ok) throw std::runtime_error(std::string("fuzz fixture setup failed: ") + what);
}

inline ICtoken freshEnrollment(const Owner& owner, const std::string& uid,
                               Drbg& rng) {
  ICtoken t;
  t.metadata.icid = makeICID(asView(uid));
  t.metadata.markHash = makeMarkHash("FUZZ-MARK");
  t.metadata.stage = Stage::Fabrication;
  t.metadata.status = Status::Completed;
  Bytes key = rng.bytes(32);
  t.key.keyEncr = encrypt(owner.keyPair.publicKey, key);
  t.key.keyHash = sha256(key);
  t.ownerID = owner.publicID;
  t.trnsaxnID = sign(owner.keyPair.privateKey, signingPayload(t));
  return t;
}

inline Fixture makeFixture(std::uint64_t seed) {
  Fixture f;
  f.holder = testsupport::testOwner("holder", 100 + seed % 3);
  f.buyer = testsupport::testOwner("buyer", 110 + seed % 3);
  f.outsider = testsupport::testOwner("outsider", 120 + seed % 3);
  fixtureRequire(f.node.enrollOwner(f.holder.profile()).ok(), "enroll holder");
  fixtureRequire(f.node.enrollOwner(f.buyer.profile()).ok(), "enroll buyer");

  Drbg rng(seed);
  auto holderSign = [&](ICtoken t) {
    t.trnsaxnID = sign(f.holder.keyPair.privateKey, signingPayload(t));
    return t;
  };
  auto enroll = [&](const std::string& uid) {
    ICtoken t = freshEnrollment(f.holder, uid + std::to_string(seed), rng);
    fixtureRequire(f.node.enrollIC(t).ok(), "enroll ic");
    return t.metadata.icid;
  };
  auto toStage = [&](const Digest& icid, Stage st, Status su) {
    ICtoken t = *f.node.latestToken(icid);
    t.metadata.stage = st;
    t.metadata.status = su;
    fixtureRequire(f.node.updateStage(holderSign(t)).ok(), "stage");
  };

  for (int i = 0; i < 2; ++i) f.freshIcs.push_back(enroll("fresh-" + std::to_string(i)));
  for (int i = 0; i < 4; ++i) {
    Digest icid = enroll("board-" + std::to_string(i));
    toStage(icid, Stage::PcbAssembly, Status::Completed);
    f.boardReady.push_back(icid);
  }
  // two bound boards of two ICs each, advanced to 3/1
  for (int b = 0; b < 2; ++b) {
    std::vector<Digest> members;
    for (int i = 0; i < 2; ++i) {
      Digest icid = enroll("bound-" + std::to_string(b) + "-" + std::to_string(i));
      toStage(icid, Stage::PcbAssembly, Status::Completed);
      members.push_back(icid);
    }
    Digest pid = computePID(members);
    std::vector<ICtoken> batch;
    for (const auto& icid : members) {
      ICtoken t = *f.node.latestToken(icid);
      t.metadata.pid = pid;
      batch.push_back(holderSign(t));
    }
    fixtureRequire(f.node.updatePIDorEDID(batch).ok(), "bind pid");
    for (const auto& icid : members) {
      toStage(icid, Stage::SystemIntegration, Status::Completed);
      f.boundIcs.push_back(icid);
    }
  }
  f.defectiveIc = enroll("defective");
  {
    ICtoken t = *f.node.latestToken(f.defectiveIc);
    t.metadata.isDefective = true;
    fixtureRequire(f.node.reportDefective(holderSign(t)).ok(), "defect");
  }
  f.inProgressIc = enroll("wip");
  toStage(f.inProgressIc, Stage::PcbAssembly, Status::InProgress);
  return f;
}

/// Applies 0..2 random field mutations and one of three signature outcomes,
/// then asks both the oracle and a scratch tracker for a verdict.
struct FuzzStats {
  std::size_t cases = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t disagreements = 0;
  std::vector<std::string> failures;
};

inline void mutateToken(ICtoken& t, Drbg& rng, const Fixture& f) {
  switch (rng.below(13)) {
    case 0: t.metadata.stage = static_cast<Stage>(1 + rng.below(4)); break;
    case 1:
      t.metadata.status =
          t.metadata.status == Status::Completed ? Status::InProgress : Status::Completed;
      break;
    case 2: {
      std::uint8_t v = static_cast<std::uint8_t>(rng.below(4));
      t.metadata.version = v;
      if (v == 0)
        t.metadata.prevVer.reset();
      else if (!t.metadata.prevVer)
        t.metadata.prevVer = rng.below(16);
      break;
    }
    case 3:
      if (t.metadata.version != 0) t.metadata.prevVer = rng.below(16);
      break;
    case 4: t.metadata.markHash = testsupport::randomDigest(rng); break;
    case 5: t.key.keyHash = testsupport::randomDigest(rng); break;
    case 6: rng.fill(t.key.keyEncr.bytes); break;
    case 7: {
      std::uint64_t pick = rng.below(3);
      t.ownerID = pick == 0   ? f.buyer.publicID
                  : pick == 1 ? f.outsider.publicID
                              : testsupport::randomDigest(rng);
      break;
    }
    case 8:
      if (rng.coin())
        t.metadata.pid = testsupport::randomDigest(rng);
      else if (!t.metadata.edid)
        t.metadata.pid.reset();
      break;
    case 9:
      if (rng.coin() && t.metadata.pid)
        t.metadata.edid = testsupport::randomDigest(rng);
      else
        t.metadata.edid.reset();
      break;
    case 10: t.metadata.icid = testsupport::randomDigest(rng); break;
    case 11: t.metadata.isDefective = !t.metadata.isDefective; break;
    case 12:
      if (!f.boardReady.empty())
        t.metadata.icid = f.boardReady[rng.below(f.boardReady.size())];
      break;
  }
}

inline void applySignatureOutcome(std::vector<ICtoken>& tokens, Drbg& rng,
                                  const Fixture& f) {
  std::uint64_t pick = rng.below(10);
  for (auto& t : tokens) {
    const Owner& signer = pick == 0 ? f.buyer : f.holder;  // 10%: wrong signer
    try {
      t.trnsaxnID = sign(signer.keyPair.privateKey, signingPayload(t));
    } catch (const ProtocolError&) {
      // structurally unencodable token keeps its stale signature
    }
    if (pick == 1) t.trnsaxnID.bytes[rng.below(kSignatureSize)] ^= 0x40;  // 10%: corrupt
  }
}

inline ServiceRequest buildHonestCase(ServiceKind kind, const Fixture& f, Drbg& rng,
                                      std::size_t caseIndex) {
  auto latest = [&](const Digest& icid) { return *f.node.latestToken(icid); };
  switch (kind) {
    case ServiceKind::EnrollIC: {
      ICtoken t = freshEnrollment(
          f.holder, "case-" + std::to_string(caseIndex) + "-" + std::to_string(rng.nextU64()),
          rng);
      return {kind, {t}};
    }
    case ServiceKind::UpdateStage: {
      // Pick across lifecycle states so both accepts and natural rejects
      // (defective, rollback) appear before mutation.
      std::vector<Digest> pool = f.boardReady;
      pool.push_back(f.freshIcs[rng.below(f.freshIcs.size())]);
      pool.push_back(f.boundIcs[rng.below(f.boundIcs.size())]);
      pool.push_back(f.defectiveIc);
      pool.push_back(f.inProgressIc);
      ICtoken t = latest(pool[rng.below(pool.size())]);
      t.metadata.stage = static_cast<Stage>(1 + rng.below(4));
      t.metadata.status = static_cast<Status>(rng.below(2));
      return {kind, {t}};
    }
    case ServiceKind::TransferIC: {
      std::vector<Digest> pool = {f.freshIcs[0], f.boardReady[0], f.boundIcs[0],
                                  f.defectiveIc, f.inProgressIc};
      ICtoken t = latest(pool[rng.below(pool.size())]);
      t.ownerID = f.buyer.publicID;
      rng.fill(t.key.keyEncr.bytes);  // opaque on the wire; only the hash trail matters
      return {kind, {t}};
    }
    case ServiceKind::UpdatePidOrEdid: {
      if (rng.coin()) {
        std::size_t n = 1 + rng.below(f.boardReady.size());
        std::vector<Digest> members(f.boardReady.begin(), f.boardReady.begin() + n);
        Digest pid = computePID(members);
        std::vector<ICtoken> batch;
        for (const auto& icid : members) {
          ICtoken t = latest(icid);
          t.metadata.pid = pid;
          batch.push_back(t);
        }
        return {kind, batch};
      }
      std::vector<Digest> pids;
      std::vector<ICtoken> batch;
      for (const auto& icid : f.boundIcs) pids.push_back(*latest(icid).metadata.pid);
      Digest edid = computeEDID(pids);
      for (const auto& icid : f.boundIcs) {
        ICtoken t = latest(icid);
        t.metadata.edid = edid;
        batch.push_back(t);
      }
      return {kind, batch};
    }
    default: return {kind, {}};
  }
}

inline FuzzStats fuzzAlgorithm(ServiceKind kind, std::size_t cases, std::uint64_t seed) {
  FuzzStats stats;
  Fixture f = makeFixture(seed);
  Snapshot snapshot = Snapshot::of(f.node);
  Drbg rng(seed ^ 0x5eedf00dULL);

  for (std::size_t i = 0; i < cases; ++i) {
    ServiceRequest req = buildHonestCase(kind, f, rng, i);
    std::uint64_t mutations = rng.below(3);
    for (std::uint64_t m = 0; m < mutations; ++m) {
      ICtoken& target = req.tokens[rng.below(req.tokens.size())];
      mutateToken(target, rng, f);
    }
    if (kind == ServiceKind::UpdatePidOrEdid && req.tokens.size() > 1 &&
        rng.below(8) == 0) {
      if (rng.coin())
        req.tokens.push_back(req.tokens.front());  // duplicate member
      else
        req.tokens.pop_back();                     // drop a member
    }
    applySignatureOutcome(req.tokens, rng, f);

    bool expected = oracleAccepts(snapshot, req);
    Node scratch = f.node;
    bool actual = scratch.submit(req).ok();

    ++stats.cases;
    (actual ? stats.accepted : stats.rejected)++;
    if (expected != actual) {
      ++stats.disagreements;
      if (stats.failures.size() < 5) {
        stats.failures.push_back("case " + std::to_string(i) + ": oracle says " +
                                 (expected ? "accept" : "reject") + ", tracker says " +
                                 (actual ? "accept" : "reject"));
      }
    }
  }
  return stats;
}

}  // namespace testfuzz
