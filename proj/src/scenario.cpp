#include "ictoken/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace ictoken {

// ---------------------------------------------------------------------------
// Script text form

namespace {

std::string stepToText(const ScenarioStep& s) {
  std::string out = "step actor=" + s.actor + " action=" + s.action + " expect=";
  if (s.expectAccept)
    out += "accept";
  else
    out += "reject:" + std::string(errorClassName(s.expectError));
  for (const auto& [k, v] : s.args) out += " " + k + "=" + v;
  return out;
}

bool splitKv(std::string_view piece, std::string& key, std::string& value) {
  std::size_t eq = piece.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 >= piece.size()) return false;
  key.assign(piece.substr(0, eq));
  value.assign(piece.substr(eq + 1));
  return true;
}

std::vector<std::string_view> splitWords(std::string_view line) {
  std::vector<std::string_view> out;
  while (!line.empty()) {
    std::size_t sp = line.find(' ');
    if (sp == std::string_view::npos) {
      out.push_back(line);
      break;
    }
    if (sp > 0) out.push_back(line.substr(0, sp));
    line.remove_prefix(sp + 1);
  }
  return out;
}

}  // namespace

std::string ScenarioScript::toText() const {
  std::string out = "ictoken-scenario v1\n";
  out += "name=" + name + "\n";
  out += "seed=" + std::to_string(seed) + "\n";
  for (const auto& o : owners) {
    out += "owner alias=" + o.alias + " role=" + o.role +
           " seed=" + std::to_string(o.seed) + " enroll=" + (o.enroll ? "1" : "0") +
           "\n";
  }
  for (const auto& s : steps) out += stepToText(s) + "\n";
  return out;
}

Result<ScenarioScript> ScenarioScript::fromText(std::string_view text) {
  auto fail = [](std::string detail) {
    return Result<ScenarioScript>(ErrorClass::ParseError, "scenario: " + std::move(detail));
  };
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    std::size_t nl = text.find('\n');
    std::string_view line = nl == std::string_view::npos ? text : text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty() || lines[0] != "ictoken-scenario v1") return fail("bad header");

  ScenarioScript script;
  std::string k, v;
  auto parseU64 = [](const std::string& s, std::uint64_t& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
  };
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (line.starts_with("name=")) {
      script.name = std::string(line.substr(5));
    } else if (line.starts_with("seed=")) {
      if (!parseU64(std::string(line.substr(5)), script.seed)) return fail("seed");
    } else if (line.starts_with("owner ")) {
      OwnerSpec o;
      for (auto piece : splitWords(line.substr(6))) {
        if (!splitKv(piece, k, v)) return fail("owner field");
        if (k == "alias") o.alias = v;
        else if (k == "role") o.role = v;
        else if (k == "seed") {
          if (!parseU64(v, o.seed)) return fail("owner seed");
        } else if (k == "enroll") o.enroll = v == "1";
        else return fail("unknown owner field " + k);
      }
      if (o.alias.empty()) return fail("owner without alias");
      script.owners.push_back(std::move(o));
    } else if (line.starts_with("step ")) {
      ScenarioStep s;
      for (auto piece : splitWords(line.substr(5))) {
        if (!splitKv(piece, k, v)) return fail("step field");
        if (k == "actor") {
          s.actor = v;
        } else if (k == "action") {
          s.action = v;
        } else if (k == "expect") {
          if (v == "accept") {
            s.expectAccept = true;
          } else if (v.starts_with("reject:")) {
            s.expectAccept = false;
            if (!errorClassFromName(v.substr(7), s.expectError))
              return fail("unknown error class " + v.substr(7));
          } else {
            return fail("bad expect value");
          }
        } else {
          s.args[k] = v;
        }
      }
      if (s.actor.empty() || s.action.empty()) return fail("incomplete step");
      script.steps.push_back(std::move(s));
    } else {
      return fail("unknown line");
    }
  }
  return script;
}

// ---------------------------------------------------------------------------
// Engine

namespace {

Bytes meteringKeyFor(std::uint64_t scriptSeed, const std::string& icAlias) {
  Drbg d(asView("mkey/" + std::to_string(scriptSeed) + "/" + icAlias));
  return d.bytes(32);
}

struct SubmitOutcome {
  bool accepted = false;
  Error error{ErrorClass::ParseError, ""};
  std::vector<std::uint64_t> seqs;
};

class Engine {
 public:
  Engine(const ScenarioScript& script, Node* node, Network* net)
      : script_(script), node_(node), net_(net) {}

  ScenarioReport run();

 private:
  const Node& refNode() const { return net_ ? net_->referenceNode() : *node_; }
  const LedgerView& view() const {
    return net_ ? static_cast<const LedgerView&>(*net_) : *node_;
  }

  Wallet& walletOf(const std::string& alias) {
    auto it = wallets_.find(alias);
    if (it == wallets_.end())
      throw std::invalid_argument("scenario references unknown owner " + alias);
    return it->second;
  }

  Digest icidOf(const std::string& alias) const {
    auto it = icAliases_.find(alias);
    if (it == icAliases_.end())
      throw std::invalid_argument("scenario references unknown IC " + alias);
    return it->second;
  }

  std::vector<Digest> icidList(const std::string& csv) const {
    std::vector<Digest> out;
    std::string rest = csv;
    while (!rest.empty()) {
      std::size_t comma = rest.find(',');
      std::string alias = rest.substr(0, comma);
      out.push_back(icidOf(alias));
      rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    }
    return out;
  }

  static std::string argOr(const ScenarioStep& s, const std::string& key,
                           const std::string& fallback) {
    auto it = s.args.find(key);
    return it == s.args.end() ? fallback : it->second;
  }

  void noteSecret(ByteView raw) {
    secrets_.emplace_back(raw.begin(), raw.end());
  }

  ServiceRequest buildRequest(const ScenarioStep& step);
  void applyOverrides(const ScenarioStep& step, Wallet& wallet, ServiceRequest& req);
  SubmitOutcome submit(const ServiceRequest& req);
  void syncWallets();
  void sweepInvariants(ScenarioReport& report);

  const ScenarioScript& script_;
  Node* node_;
  Network* net_;
  std::map<std::string, Wallet> wallets_;
  std::map<std::string, Digest> icAliases_;
  std::map<Digest, std::string> ownerAliases_;
  std::vector<Bytes> secrets_;
};

ServiceRequest Engine::buildRequest(const ScenarioStep& step) {
  Wallet& wallet = walletOf(step.actor);
  const std::string& a = step.action;

  if (a == "enroll") {
    std::string icAlias = argOr(step, "ic", "");
    std::string uid = argOr(step, "uid", "");
    std::string markings = argOr(step, "markings", "");
    if (icAlias.empty() || uid.empty())
      throw std::invalid_argument("enroll step needs ic= and uid=");
    Bytes key = meteringKeyFor(script_.seed, icAlias);
    noteSecret(asView(uid));
    noteSecret(asView(markings));
    noteSecret(key);
    ICtoken t = wallet.buildEnrollment(asView(uid), markings, key);
    icAliases_[icAlias] = t.metadata.icid;
    return {ServiceKind::EnrollIC, {std::move(t)}};
  }
  if (a == "transfer") {
    Digest icid = icidOf(argOr(step, "ic", ""));
    Wallet& to = walletOf(argOr(step, "to", ""));
    return {ServiceKind::TransferIC, {wallet.buildTransfer(icid, to.owner().profile())}};
  }
  if (a == "stage") {
    Digest icid = icidOf(argOr(step, "ic", ""));
    Stage stage{};
    if (!stageFromCode(std::stoul(argOr(step, "stage", "0")), stage))
      throw std::invalid_argument("bad stage in step");
    Status status = argOr(step, "status", "0") == "1" ? Status::Completed
                                                      : Status::InProgress;
    return {ServiceKind::UpdateStage, {wallet.buildStageUpdate(icid, stage, status)}};
  }
  if (a == "assemble" || a == "integrate") {
    std::vector<Digest> ics = icidList(argOr(step, "ics", ""));
    std::vector<ICtoken> batch =
        a == "assemble" ? wallet.buildPidBinding(ics) : wallet.buildEdidBinding(ics);
    auto claim = step.args.find("claim");
    if (claim != step.args.end()) {
      // The attacker claims a composition over a different IC set without
      // recomputing the root for what was actually submitted.
      Digest claimed = a == "assemble" ? computePID(icidList(claim->second))
                                       : computeEDID(icidList(claim->second));
      for (auto& t : batch) {
        if (a == "assemble")
          t.metadata.pid = claimed;
        else
          t.metadata.edid = claimed;
        t = wallet.signToken(std::move(t));
      }
    }
    return {ServiceKind::UpdatePidOrEdid, std::move(batch)};
  }
  if (a == "defect") {
    Digest icid = icidOf(argOr(step, "ic", ""));
    return {ServiceKind::ReportDefective, {wallet.buildDefectReport(icid)}};
  }
  throw std::invalid_argument("unknown scenario action " + a);
}

void Engine::applyOverrides(const ScenarioStep& step, Wallet& wallet,
                            ServiceRequest& req) {
  bool touched = false;
  for (auto& token : req.tokens) {
    for (const auto& [key, value] : step.args) {
      if (!key.starts_with("set.")) continue;
      std::string field = key.substr(4);
      if (field == "mark") {
        auto d = Digest::fromHex(value);
        if (!d) throw std::invalid_argument("set.mark needs a hex digest");
        token.metadata.markHash = *d;
      } else if (field == "keyhash") {
        auto d = Digest::fromHex(value);
        if (!d) throw std::invalid_argument("set.keyhash needs a hex digest");
        token.key.keyHash = *d;
      } else if (field == "stage") {
        Stage s{};
        if (!stageFromCode(std::stoul(value), s))
          throw std::invalid_argument("set.stage out of range");
        token.metadata.stage = s;
      } else if (field == "status") {
        token.metadata.status = value == "1" ? Status::Completed : Status::InProgress;
      } else if (field == "defect") {
        token.metadata.isDefective = value == "1";
      } else {
        throw std::invalid_argument("unknown override " + key);
      }
      touched = true;
    }
    if (touched) token = wallet.signToken(std::move(token));
  }
}

SubmitOutcome Engine::submit(const ServiceRequest& req) {
  SubmitOutcome out;
  if (net_ == nullptr) {
    auto r = node_->submit(req);
    if (r) {
      out.accepted = true;
      out.seqs = *r;
    } else {
      out.error = r.error();
    }
    return out;
  }

  // Network path: the reference validation gives the expected class; the
  // rounds show the network agrees with it.
  auto planned = net_->referenceNode().validateRequest(req);
  std::uint64_t before = net_->referenceNode().committedCount();
  net_->submitTransaction(req);
  net_->runUntilIdle(net_->nodeCount() + 1);
  std::uint64_t after = net_->referenceNode().committedCount();

  if (planned) {
    if (after != before + req.tokens.size()) {
      out.error = Error{ErrorClass::TrackerUnavailable,
                        "valid transaction failed to commit within the round budget"};
      return out;
    }
    out.accepted = true;
    for (std::uint64_t s = before; s < after; ++s) out.seqs.push_back(s);
  } else {
    if (after != before) {
      out.error = Error{ErrorClass::BatchInvalid,
                        "invalid transaction was committed by the network"};
      return out;
    }
    out.error = planned.error();
  }
  return out;
}

void Engine::syncWallets() {
  for (auto& [alias, wallet] : wallets_) wallet.syncAssets(view());
}

void Engine::sweepInvariants(ScenarioReport& report) {
  InvariantSweep& inv = report.invariants;
  const Node& ref = refNode();

  inv.rebuildMatches = true;
  inv.chainVerifies = true;
  if (net_ != nullptr) {
    for (std::size_t i = 0; i < net_->nodeCount(); ++i) {
      if (!net_->isHonest(i)) continue;
      const Node& n = net_->node(i);
      inv.rebuildMatches = inv.rebuildMatches && n.rebuiltState() == n.state();
      inv.chainVerifies = inv.chainVerifies && n.verifyChain().ok;
    }
  } else {
    inv.rebuildMatches = node_->rebuiltState() == node_->state();
    inv.chainVerifies = node_->verifyChain().ok;
  }

  // Asset partition: every enrolled ICID in exactly one owner's asset set.
  std::map<Digest, std::size_t> holders;
  for (const auto& [ownerID, entry] : ref.state().owndb)
    for (const auto& icid : entry.assets) holders[icid]++;
  inv.assetPartition = holders.size() == ref.state().icdb.size() &&
                       std::all_of(holders.begin(), holders.end(),
                                   [](const auto& kv) { return kv.second == 1; });

  // Token conservation: the union of all synced wallets equals the set of
  // latest tokens on chain, with no ICID held twice.
  {
    std::map<Digest, std::size_t> held;
    for (const auto& [alias, wallet] : wallets_)
      for (const auto& [icid, tok] : wallet.heldTokens()) held[icid]++;
    bool conserved = held.size() == ref.state().icdb.size();
    for (const auto& [icid, count] : held) {
      auto latest = ref.latestToken(icid);
      conserved = conserved && count == 1 && latest.has_value();
    }
    inv.assetPartition = inv.assetPartition && conserved;
  }

  // Per-history version and stage discipline.
  inv.stageMonotone = true;
  inv.versionChain = true;
  for (const auto& [alias, icid] : icAliases_) {
    auto history = ref.traceHistory(icid);
    if (!history) continue;  // rejected enrollment attempts have no history
    const auto& h = *history;
    if (h.front().metadata.version + std::size_t{1} != h.size())
      inv.versionChain = false;
    for (std::size_t i = 0; i + 1 < h.size(); ++i) {
      const ICMetadata& newer = h[i].metadata;
      const ICMetadata& older = h[i + 1].metadata;
      if (newer.version != older.version + 1) inv.versionChain = false;
      auto lex = [](const ICMetadata& m) {
        return std::pair<unsigned, unsigned>(static_cast<unsigned>(m.stage),
                                             static_cast<unsigned>(m.status));
      };
      if (lex(newer) < lex(older)) inv.stageMonotone = false;
    }
  }

  // Confidentiality: neither the persisted chain nor the report may contain
  // any device UID, raw marking, or metering key, in raw or hex form.
  std::string haystack;
  if (net_ != nullptr) {
    haystack += net_->referenceNode().serialize();
  } else {
    haystack += node_->serialize();
  }
  haystack += report.toText();
  haystack += report.toMachine();
  inv.confidentiality = true;
  for (const auto& secret : secrets_) {
    if (secret.empty()) continue;
    std::string_view needleRaw(reinterpret_cast<const char*>(secret.data()),
                               secret.size());
    if (haystack.find(needleRaw) != std::string::npos ||
        haystack.find(toHex(secret)) != std::string::npos) {
      inv.confidentiality = false;
      break;
    }
  }
}

ScenarioReport Engine::run() {
  ScenarioReport report;
  report.scenario = script_.name;
  report.seed = script_.seed;

  for (const auto& spec : script_.owners) {
    Owner owner = createOwner(spec.role, spec.seed);
    ownerAliases_[owner.publicID] = spec.alias;
    auto [it, inserted] = wallets_.emplace(spec.alias, Wallet(std::move(owner)));
    if (!inserted) throw std::invalid_argument("duplicate owner alias " + spec.alias);
    it->second.attach(&view());
    if (spec.enroll) {
      auto r = net_ ? net_->enrollOwner(it->second.owner().profile())
                    : node_->enrollOwner(it->second.owner().profile());
      if (!r)
        throw std::invalid_argument("owner enrollment failed: " + r.error().message());
    }
  }

  report.allStepsAsExpected = true;
  for (const auto& step : script_.steps) {
    StepOutcome outcome;
    try {
      ServiceRequest req = buildRequest(step);
      applyOverrides(step, walletOf(step.actor), req);
      SubmitOutcome sub = submit(req);
      outcome.accepted = sub.accepted;
      outcome.seqs = std::move(sub.seqs);
      if (!sub.accepted) outcome.error = sub.error;
    } catch (const ProtocolError& e) {
      outcome.accepted = false;
      outcome.error = Error{e.cls(), e.what()};
    }
    outcome.asExpected =
        outcome.accepted == step.expectAccept &&
        (step.expectAccept || outcome.error->cls == step.expectError);
    report.allStepsAsExpected = report.allStepsAsExpected && outcome.asExpected;
    report.outcomes.push_back(std::move(outcome));
    syncWallets();
  }

  if (node_ != nullptr) node_->flush();
  const Node& ref = refNode();
  report.chainHeight = ref.ledger().blocks.size();
  report.tokenCount = ref.committedCount();

  for (const auto& [alias, icid] : icAliases_) {
    auto latest = ref.latestToken(icid);
    if (!latest) continue;
    FinalTokenState f;
    f.alias = alias;
    f.icid = icid;
    f.version = latest->metadata.version;
    f.stage = latest->metadata.stage;
    f.status = latest->metadata.status;
    f.ownerID = latest->ownerID;
    auto oa = ownerAliases_.find(latest->ownerID);
    f.ownerAlias = oa == ownerAliases_.end() ? "?" : oa->second;
    f.isDefective = latest->metadata.isDefective;
    auto history = ref.traceHistory(icid);
    f.historyLength = history ? history->size() : 0;
    report.finals.push_back(std::move(f));
  }

  if (net_ != nullptr)
    for (const auto& t : net_->traces()) report.roundLog.push_back(t.toText());

  sweepInvariants(report);
  return report;
}

}  // namespace

// ---------------------------------------------------------------------------
// Report rendering

std::string ScenarioReport::toText() const {
  std::string out = "scenario " + scenario + " seed=" + std::to_string(seed) + "\n";
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const StepOutcome& o = outcomes[i];
    out += "step " + std::to_string(i + 1) + ": ";
    out += o.accepted ? "accepted" : "rejected " + o.error->message();
    out += o.asExpected ? " (as expected)" : " (UNEXPECTED)";
    out += "\n";
  }
  for (const auto& f : finals) {
    out += "final " + f.alias + " icid=" + f.icid.toHex().substr(0, 16);
    out += " version=" + std::to_string(f.version);
    out += " stage=" + std::to_string(static_cast<unsigned>(f.stage));
    out += " status=" + std::to_string(static_cast<unsigned>(f.status));
    out += " owner=" + f.ownerAlias;
    out += " defective=" + std::string(f.isDefective ? "1" : "0");
    out += " history=" + std::to_string(f.historyLength);
    out += "\n";
  }
  out += "chain blocks=" + std::to_string(chainHeight) +
         " tokens=" + std::to_string(tokenCount) + "\n";
  auto mark = [](bool b) { return b ? "ok" : "FAIL"; };
  out += std::string("invariants rebuild=") + mark(invariants.rebuildMatches) +
         " chain=" + mark(invariants.chainVerifies) +
         " assets=" + mark(invariants.assetPartition) +
         " stages=" + mark(invariants.stageMonotone) +
         " versions=" + mark(invariants.versionChain) +
         " confidentiality=" + mark(invariants.confidentiality) + "\n";
  out += std::string("result ") + (passed() ? "PASS" : "FAIL") + "\n";
  return out;
}

std::string ScenarioReport::toMachine() const {
  std::string out;
  out += "scenario=" + scenario + "\n";
  out += "seed=" + std::to_string(seed) + "\n";
  out += "steps=" + std::to_string(outcomes.size()) + "\n";
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const StepOutcome& o = outcomes[i];
    out += "step." + std::to_string(i + 1) + "=";
    out += o.accepted ? "accept" : std::string(errorClassName(o.error->cls));
    out += o.asExpected ? "" : ":unexpected";
    out += "\n";
  }
  for (const auto& f : finals) {
    std::string p = "final." + f.alias + ".";
    out += p + "version=" + std::to_string(f.version) + "\n";
    out += p + "stage=" + std::to_string(static_cast<unsigned>(f.stage)) + "\n";
    out += p + "status=" + std::to_string(static_cast<unsigned>(f.status)) + "\n";
    out += p + "owner=" + f.ownerAlias + "\n";
    out += p + "defective=" + (f.isDefective ? "1" : "0") + "\n";
    out += p + "history=" + std::to_string(f.historyLength) + "\n";
  }
  out += "blocks=" + std::to_string(chainHeight) + "\n";
  out += "tokens=" + std::to_string(tokenCount) + "\n";
  auto flag = [&](const char* k, bool v) {
    out += std::string("invariant.") + k + "=" + (v ? "1" : "0") + "\n";
  };
  flag("rebuild", invariants.rebuildMatches);
  flag("chain", invariants.chainVerifies);
  flag("assets", invariants.assetPartition);
  flag("stages", invariants.stageMonotone);
  flag("versions", invariants.versionChain);
  flag("confidentiality", invariants.confidentiality);
  out += std::string("pass=") + (passed() ? "1" : "0") + "\n";
  return out;
}

ScenarioReport runScenario(const ScenarioScript& script, Node& node) {
  return Engine(script, &node, nullptr).run();
}

ScenarioReport runScenario(const ScenarioScript& script, Network& net) {
  return Engine(script, nullptr, &net).run();
}

// ---------------------------------------------------------------------------
// Builtin scripts

namespace {

ScenarioStep mkStep(std::string actor, std::string action,
                    std::map<std::string, std::string> args, bool accept = true,
                    ErrorClass err = ErrorClass::ParseError) {
  ScenarioStep s;
  s.actor = std::move(actor);
  s.action = std::move(action);
  s.args = std::move(args);
  s.expectAccept = accept;
  s.expectError = err;
  return s;
}

}  // namespace

ScenarioScript table2Script(std::uint64_t seed) {
  ScenarioScript s;
  s.name = "table2";
  s.seed = seed;
  const char* roles[] = {"fab",      "assembler", "distributor", "integrator",
                         "retailer", "end-user",  "recycler"};
  for (int i = 0; i < 7; ++i)
    s.owners.push_back(
        {"o" + std::to_string(i + 1), roles[i], seed * 100 + i + 1, true});

  s.steps.push_back(mkStep("o1", "enroll",
                           {{"ic", "ic1"},
                            {"uid", "DIE-" + std::to_string(seed) + "-0001"},
                            {"markings", "ACME-X1-REV2"}}));
  s.steps.push_back(mkStep("o1", "transfer", {{"ic", "ic1"}, {"to", "o2"}}));
  s.steps.push_back(mkStep("o2", "stage", {{"ic", "ic1"}, {"stage", "2"}, {"status", "0"}}));
  s.steps.push_back(mkStep("o2", "stage", {{"ic", "ic1"}, {"stage", "2"}, {"status", "1"}}));
  s.steps.push_back(mkStep("o2", "assemble", {{"ics", "ic1"}}));
  s.steps.push_back(mkStep("o2", "transfer", {{"ic", "ic1"}, {"to", "o3"}}));
  s.steps.push_back(mkStep("o3", "transfer", {{"ic", "ic1"}, {"to", "o4"}}));
  s.steps.push_back(mkStep("o4", "stage", {{"ic", "ic1"}, {"stage", "3"}, {"status", "0"}}));
  s.steps.push_back(mkStep("o4", "stage", {{"ic", "ic1"}, {"stage", "3"}, {"status", "1"}}));
  s.steps.push_back(mkStep("o4", "integrate", {{"ics", "ic1"}}));
  s.steps.push_back(mkStep("o4", "transfer", {{"ic", "ic1"}, {"to", "o5"}}));
  s.steps.push_back(mkStep("o5", "transfer", {{"ic", "ic1"}, {"to", "o6"}}));
  s.steps.push_back(mkStep("o6", "stage", {{"ic", "ic1"}, {"stage", "4"}, {"status", "0"}}));
  s.steps.push_back(mkStep("o6", "stage", {{"ic", "ic1"}, {"stage", "4"}, {"status", "1"}}));
  s.steps.push_back(mkStep("o6", "transfer", {{"ic", "ic1"}, {"to", "o7"}}));
  return s;
}

ScenarioScript multiDeviceScript(std::uint64_t seed) {
  ScenarioScript s;
  s.name = "multi-device";
  s.seed = seed;
  s.owners.push_back({"o1", "fab", seed * 100 + 11, true});
  s.owners.push_back({"o2", "integrator", seed * 100 + 12, true});
  s.owners.push_back({"o3", "end-user", seed * 100 + 13, true});

  const char* ics[] = {"a", "b", "c", "d", "e"};
  for (const char* ic : ics)
    s.steps.push_back(mkStep("o1", "enroll",
                             {{"ic", ic},
                              {"uid", std::string("DIE-") + ic + "-" + std::to_string(seed)},
                              {"markings", std::string("ACME-M-") + ic}}));
  for (const char* ic : ics)
    s.steps.push_back(mkStep("o1", "transfer", {{"ic", ic}, {"to", "o2"}}));
  for (const char* ic : ics)
    s.steps.push_back(mkStep("o2", "stage", {{"ic", ic}, {"stage", "2"}, {"status", "1"}}));
  s.steps.push_back(mkStep("o2", "assemble", {{"ics", "a,b,c"}}));
  s.steps.push_back(mkStep("o2", "assemble", {{"ics", "d,e"}}));
  for (const char* ic : ics)
    s.steps.push_back(mkStep("o2", "stage", {{"ic", ic}, {"stage", "3"}, {"status", "1"}}));
  s.steps.push_back(mkStep("o2", "integrate", {{"ics", "a,b,c,d,e"}}));
  for (const char* ic : ics)
    s.steps.push_back(mkStep("o2", "transfer", {{"ic", ic}, {"to", "o3"}}));
  return s;
}

const std::vector<std::string>& attackNames() {
  static const std::vector<std::string> names = {
      "clone",           "remark",          "rollback", "swap",
      "defectiveResale", "foreignTransfer", "keyTamper"};
  return names;
}

ScenarioScript attackScript(std::string_view name, std::uint64_t seed) {
  ScenarioScript s;
  s.name = std::string(name);
  s.seed = seed;
  auto owner = [&](const std::string& alias, const std::string& role, int i,
                   bool enroll = true) {
    s.owners.push_back({alias, role, seed * 100 + 50 + i, enroll});
  };
  std::string uid = "DIE-" + std::to_string(seed) + "-A";

  if (name == "clone") {
    // Re-enrolling the same physical identifier under another brand.
    owner("o1", "fab", 1);
    owner("o2", "bootlegger", 2);
    s.steps.push_back(mkStep("o1", "enroll",
                             {{"ic", "ic1"}, {"uid", uid}, {"markings", "ACME-X1"}}));
    s.steps.push_back(mkStep("o2", "enroll",
                             {{"ic", "ic1clone"}, {"uid", uid}, {"markings", "ACME-X1"}},
                             false, ErrorClass::DuplicateICID));
  } else if (name == "remark") {
    // Upgrading the package markings on a registered IC.
    owner("o1", "fab", 1);
    s.steps.push_back(mkStep("o1", "enroll",
                             {{"ic", "ic1"}, {"uid", uid}, {"markings", "ACME-X1"}}));
    s.steps.push_back(mkStep("o1", "stage",
                             {{"ic", "ic1"},
                              {"stage", "1"},
                              {"status", "1"},
                              {"set.mark", makeMarkHash("ACME-X9-PREMIUM").toHex()}},
                             false, ErrorClass::IllegalFieldChange));
  } else if (name == "rollback") {
    // A consumed IC re-entering the supply chain at an earlier stage.
    owner("o1", "fab", 1);
    s.steps.push_back(mkStep("o1", "enroll",
                             {{"ic", "ic1"}, {"uid", uid}, {"markings", "ACME-X1"}}));
    s.steps.push_back(mkStep("o1", "stage", {{"ic", "ic1"}, {"stage", "2"}, {"status", "1"}}));
    s.steps.push_back(mkStep("o1", "stage", {{"ic", "ic1"}, {"stage", "3"}, {"status", "1"}}));
    s.steps.push_back(mkStep("o1", "stage", {{"ic", "ic1"}, {"stage", "4"}, {"status", "1"}}));
    s.steps.push_back(mkStep("o1", "stage", {{"ic", "ic1"}, {"stage", "1"}, {"status", "1"}},
                             false, ErrorClass::StageRollback));
  } else if (name == "swap") {
    // One IC in the assembled set replaced without recomputing the PID.
    owner("o1", "assembler", 1);
    for (const char* ic : {"ic1", "ic2", "ic3", "ic4"}) {
      s.steps.push_back(mkStep("o1", "enroll",
                               {{"ic", ic},
                                {"uid", uid + "-" + ic},
                                {"markings", "ACME-X1"}}));
      s.steps.push_back(mkStep("o1", "stage", {{"ic", ic}, {"stage", "2"}, {"status", "1"}}));
    }
    s.steps.push_back(mkStep("o1", "assemble",
                             {{"ics", "ic1,ic2,ic4"}, {"claim", "ic1,ic2,ic3"}}, false,
                             ErrorClass::MerkleMismatch));
  } else if (name == "defectiveResale") {
    owner("o1", "fab", 1);
    owner("o2", "buyer", 2);
    s.steps.push_back(mkStep("o1", "enroll",
                             {{"ic", "ic1"}, {"uid", uid}, {"markings", "ACME-X1"}}));
    s.steps.push_back(mkStep("o1", "defect", {{"ic", "ic1"}}));
    s.steps.push_back(mkStep("o1", "transfer", {{"ic", "ic1"}, {"to", "o2"}}, false,
                             ErrorClass::DefectiveToken));
  } else if (name == "foreignTransfer") {
    owner("o1", "fab", 1);
    owner("o2", "outsider", 2, /*enroll=*/false);
    s.steps.push_back(mkStep("o1", "enroll",
                             {{"ic", "ic1"}, {"uid", uid}, {"markings", "ACME-X1"}}));
    s.steps.push_back(mkStep("o1", "transfer", {{"ic", "ic1"}, {"to", "o2"}}, false,
                             ErrorClass::NewOwnerNotEnrolled));
  } else if (name == "keyTamper") {
    owner("o1", "fab", 1);
    owner("o2", "buyer", 2);
    s.steps.push_back(mkStep("o1", "enroll",
                             {{"ic", "ic1"}, {"uid", uid}, {"markings", "ACME-X1"}}));
    s.steps.push_back(mkStep("o1", "transfer",
                             {{"ic", "ic1"},
                              {"to", "o2"},
                              {"set.keyhash", sha256(asView(std::string("bogus"))).toHex()}},
                             false, ErrorClass::KeyTrailBroken));
  } else {
    throw std::invalid_argument("unknown attack " + std::string(name));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Audit

Result<std::string> auditIC(const Node& node, const Digest& icid) {
  auto history = node.traceHistory(icid);
  if (!history) return Result<std::string>(history.error());
  const auto& h = *history;

  std::string out = "provenance for icid " + icid.toHex() + "\n";
  const ICtoken& latest = h.front();
  out += "latest: version=" + std::to_string(latest.metadata.version);
  out += " stage=" + std::string(stageName(latest.metadata.stage));
  out += " status=" +
         std::string(latest.metadata.status == Status::Completed ? "Completed"
                                                                 : "In progress");
  out += " owner=" + latest.ownerID.toHex().substr(0, 16);
  out += latest.metadata.isDefective ? " DEFECTIVE" : "";
  out += "\n";

  for (std::size_t i = 0; i < h.size(); ++i) {
    const ICtoken& t = h[i];
    out += "v" + std::to_string(t.metadata.version) + ":";
    out += " stage=" + std::to_string(static_cast<unsigned>(t.metadata.stage)) + "/" +
           std::to_string(static_cast<unsigned>(t.metadata.status));
    out += " owner=" + t.ownerID.toHex().substr(0, 16);
    if (t.metadata.pid) out += " pid=" + t.metadata.pid->toHex().substr(0, 16);
    if (t.metadata.edid) out += " edid=" + t.metadata.edid->toHex().substr(0, 16);
    if (t.metadata.isDefective) out += " defective";

    if (i + 1 < h.size()) {
      const ICtoken& prev = h[i + 1];
      std::string changed;
      auto note = [&](bool cond, const char* label) {
        if (cond) changed += std::string(changed.empty() ? "" : ",") + label;
      };
      note(t.metadata.stage != prev.metadata.stage, "stage");
      note(t.metadata.status != prev.metadata.status, "status");
      note(t.metadata.pid != prev.metadata.pid, "pid");
      note(t.metadata.edid != prev.metadata.edid, "edid");
      note(t.metadata.markHash != prev.metadata.markHash, "markHash");
      note(t.metadata.isDefective != prev.metadata.isDefective, "defect");
      note(t.ownerID != prev.ownerID, "owner");
      note(t.key.keyEncr != prev.key.keyEncr, "keyEncr");
      note(t.key.keyHash != prev.key.keyHash, "keyHash");
      out += " changed=" + (changed.empty() ? "none" : changed);
    } else {
      out += " (enrollment)";
    }

    bool sigOk = false;
    try {
      auto profile = node.profileOf(node.signerOf(t));
      if (profile) sigOk = verify(profile->publicKey, node.submittedImage(t), t.trnsaxnID);
    } catch (const ProtocolError&) {
    }
    out += sigOk ? " sig=ok" : " sig=INVALID";
    out += "\n";
  }
  return out;
}

}  // namespace ictoken
