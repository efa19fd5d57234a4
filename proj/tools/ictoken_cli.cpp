#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ictoken/config.hpp"
#include "ictoken/consensus.hpp"
#include "ictoken/scenario.hpp"
#include "ictoken/tracker.hpp"
#include "ictoken/wallet.hpp"

namespace fs = std::filesystem;
using namespace ictoken;

namespace {

constexpr int kExitRejected = 1;
constexpr int kExitUsage = 2;

struct GlobalOpts {
  std::string ledgerPath;  // --ledger
  std::string configPath;  // --config
  HarnessConfig config;
};

std::string resolveLedgerPath(const GlobalOpts& g) {
  if (!g.ledgerPath.empty()) return g.ledgerPath;
  if (!g.config.ledgerPath.empty()) return g.config.ledgerPath;
  if (const char* dir = std::getenv("ICTRACKER_DIR"); dir != nullptr && *dir != '\0')
    return (fs::path(dir) / "ledger.txt").string();
  return "ledger.txt";
}

Node loadOrCreateNode(const GlobalOpts& g) {
  std::string path = resolveLedgerPath(g);
  NodeConfig cfg{g.config.blockCapacity};
  if (!fs::exists(path)) return Node(cfg);
  auto node = Node::loadFrom(path, cfg);
  if (!node) {
    std::cerr << "error: " << node.error().message() << "\n";
    std::exit(kExitRejected);
  }
  return std::move(node.value());
}

void saveNode(Node& node, const GlobalOpts& g) {
  node.saveTo(resolveLedgerPath(g));
}

Wallet loadWalletOrDie(const std::string& path) {
  try {
    return Wallet::loadFrom(path);
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::exit(kExitRejected);
  }
}

Digest digestArgOrDie(const std::string& hex, const char* what) {
  auto d = Digest::fromHex(hex);
  if (!d) {
    std::cerr << "error: " << what << " must be 64 hex characters\n";
    std::exit(kExitUsage);
  }
  return *d;
}

template <typename T>
int reportSubmit(const Result<T>& r, const char* verb) {
  if (!r) {
    std::cout << "rejected: " << r.error().message() << "\n";
    return kExitRejected;
  }
  std::cout << verb << " committed\n";
  return 0;
}

int runSelftestSizes() {
  struct Row {
    const char* field;
    std::size_t offset;
    std::size_t size;
  };
  const Row rows[] = {
      {"ICID", TokenLayout::icid, 32},
      {"PID", TokenLayout::pid, 32},
      {"EDID", TokenLayout::edid, 32},
      {"markHash", TokenLayout::markHash, 32},
      {"stage/status/isDefective", TokenLayout::flags, 1},
      {"prevVer", TokenLayout::prevVer, 8},
      {"version", TokenLayout::version, 1},
      {"keyEncr", TokenLayout::keyEncr, 256},
      {"keyHash", TokenLayout::keyHash, 32},
      {"publicID", TokenLayout::owner, 32},
      {"trnsaxnID", TokenLayout::trnsaxnID, 256},
  };
  std::size_t expected = 0;
  bool ok = true;
  for (const auto& r : rows) {
    std::cout << r.field << ": offset " << r.offset << ", " << r.size << "B\n";
    ok = ok && r.offset == expected;
    expected += r.size;
  }
  Owner owner = createOwner("selftest", 1);
  Wallet wallet(owner);
  Bytes key(32, 0x42);
  ICtoken token = wallet.buildEnrollment(asView(std::string("selftest-die")),
                                         "SELFTEST", key);
  Bytes encoded = canonicalEncode(token);
  ok = ok && expected == kTokenEncodedSize && encoded.size() == kTokenEncodedSize &&
       signingPayload(token).size() == kSigningPayloadSize;
  std::cout << encoded.size() << "\n";
  return ok ? 0 : kExitRejected;
}

int runNet(const GlobalOpts& g, std::size_t nodes, std::uint64_t seed,
           const std::string& byzantine, std::size_t extraRounds) {
  NetworkConfig cfg;
  cfg.nodeCount = nodes;
  cfg.quorum = g.config.quorum;
  cfg.rngSeed = seed;
  cfg.node.blockCapacity = g.config.blockCapacity;
  Network net(cfg);
  if (!byzantine.empty()) {
    std::size_t colon = byzantine.find(':');
    ByzantineBehavior b{};
    if (colon == std::string::npos ||
        !behaviorFromName(byzantine.substr(colon + 1), b)) {
      std::cerr << "error: --byzantine takes INDEX:proposeInvalid|voteRandom|equivocate\n";
      return kExitUsage;
    }
    std::size_t idx = std::stoul(byzantine.substr(0, colon));
    if (idx >= nodes) {
      std::cerr << "error: byzantine index out of range\n";
      return kExitUsage;
    }
    net.injectByzantine(idx, b);
  }

  ScenarioReport report = runScenario(table2Script(seed), net);
  for (std::size_t i = 0; i < extraRounds; ++i) net.runRound();
  for (const auto& t : net.traces()) std::cout << t.toText() << "\n";
  ChainComparison cmp = net.compareChains();
  std::cout << cmp.report << "\n";
  std::cout << report.toText();
  return report.passed() && cmp.identical ? 0 : kExitRejected;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ICtoken/ICtracker: per-IC token ledger with consortium consensus"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--ledger", g.ledgerPath, "Ledger file (overrides config and env)");
  app.add_option("--config", g.configPath, "Config file (key=value)");

  // owner
  auto* owner = app.add_subcommand("owner", "Owner and wallet management");
  owner->require_subcommand(1);
  auto* ownerCreate = owner->add_subcommand("create", "Create a key pair and wallet file");
  std::string role = "owner", walletPath;
  std::optional<std::uint64_t> seedOpt;
  ownerCreate->add_option("--role", role, "Owner role label");
  ownerCreate->add_option("--wallet", walletPath, "Wallet file to write")->required();
  ownerCreate->add_option("--seed", seedOpt, "Deterministic key seed");
  auto* ownerEnroll = owner->add_subcommand("enroll", "Enroll a wallet's owner on the tracker");
  ownerEnroll->add_option("--wallet", walletPath, "Wallet file")->required();

  // ic
  auto* ic = app.add_subcommand("ic", "Token transactions");
  ic->require_subcommand(1);
  std::string uid, markings, keyHex, icidHex, toHexId;
  unsigned stageNum = 1, statusNum = 0;
  std::vector<std::string> icidList;

  auto* icEnroll = ic->add_subcommand("enroll", "Enroll a fabricated IC");
  icEnroll->add_option("--wallet", walletPath)->required();
  icEnroll->add_option("--uid", uid, "Device unique identifier (never stored raw)")->required();
  icEnroll->add_option("--markings", markings, "Package markings (never stored raw)")->required();
  icEnroll->add_option("--key", keyHex, "32-byte metering key, hex (default: random)");

  auto* icTransfer = ic->add_subcommand("transfer", "Transfer a token to an enrolled owner");
  icTransfer->add_option("--wallet", walletPath)->required();
  icTransfer->add_option("--icid", icidHex)->required();
  icTransfer->add_option("--to", toHexId, "Buyer publicID (64 hex)")->required();

  auto* icStage = ic->add_subcommand("update-stage", "Update stage/status");
  icStage->add_option("--wallet", walletPath)->required();
  icStage->add_option("--icid", icidHex)->required();
  icStage->add_option("--stage", stageNum, "1..4")->required();
  icStage->add_option("--status", statusNum, "0|1")->required();

  auto* icAssemble = ic->add_subcommand("assemble", "Bind a PID over the listed ICs");
  icAssemble->add_option("--wallet", walletPath)->required();
  icAssemble->add_option("--icid", icidList, "ICIDs on the board")->required();

  auto* icIntegrate = ic->add_subcommand("integrate", "Bind an EDID over the listed ICs");
  icIntegrate->add_option("--wallet", walletPath)->required();
  icIntegrate->add_option("--icid", icidList, "ICIDs in the device")->required();

  auto* icDefect = ic->add_subcommand("report-defect", "Mark a held IC defective");
  icDefect->add_option("--wallet", walletPath)->required();
  icDefect->add_option("--icid", icidHex)->required();

  // audit
  auto* audit = app.add_subcommand("audit", "Print full provenance for an ICID");
  audit->add_option("icid", icidHex, "ICID (64 hex)")->required();

  // ledger
  auto* ledger = app.add_subcommand("ledger", "Ledger maintenance");
  ledger->require_subcommand(1);
  auto* ledgerVerify = ledger->add_subcommand("verify", "Recompute and check the whole chain");
  auto* ledgerShow = ledger->add_subcommand("show", "Print a chain summary");

  // net
  auto* net = app.add_subcommand("net", "Consensus network simulation");
  net->require_subcommand(1);
  auto* netRun = net->add_subcommand("run", "Run the lifecycle workload over N nodes");
  std::size_t nodes = 4;
  std::uint64_t seed = 0;
  std::size_t extraRounds = 0;
  std::string byzantine;
  netRun->add_option("--nodes", nodes, "Node count")->capture_default_str();
  netRun->add_option("--seed", seed, "Run seed")->capture_default_str();
  netRun->add_option("--byzantine", byzantine, "INDEX:BEHAVIOR fault injection");
  netRun->add_option("--rounds", extraRounds, "Extra empty rounds after the workload");

  // scenario
  auto* scenario = app.add_subcommand("scenario", "Replay a scripted lifecycle");
  std::string scenarioName;
  bool single = false, machine = false;
  scenario->add_option("name", scenarioName, "table2 | multi")->required();
  scenario->add_option("--nodes", nodes, "Node count (network mode)");
  scenario->add_option("--seed", seed, "Scenario seed");
  scenario->add_flag("--single", single, "Run on a single node instead of a network");
  scenario->add_flag("--machine", machine, "Emit the machine-readable report form");

  // attack
  auto* attack = app.add_subcommand("attack", "Run a named must-fail attack script");
  std::string attackName;
  attack->add_option("name", attackName, "clone|remark|rollback|swap|defectiveResale|foreignTransfer|keyTamper|all")
      ->required();
  attack->add_option("--seed", seed, "Scenario seed");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Built-in checks");
  selftest->require_subcommand(1);
  auto* selftestSizes = selftest->add_subcommand("sizes", "Token layout size accounting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  if (!g.configPath.empty()) {
    auto cfg = loadConfig(g.configPath);
    if (!cfg) {
      std::cerr << "error: " << cfg.error().message() << "\n";
      return kExitUsage;
    }
    g.config = *cfg;
  }

  try {
    if (ownerCreate->parsed()) {
      Owner o = createOwner(role, seedOpt);
      Wallet w(o);
      w.saveTo(walletPath);
      std::cout << "publicID " << o.publicID.toHex() << "\n";
      return 0;
    }
    if (ownerEnroll->parsed()) {
      Wallet w = loadWalletOrDie(walletPath);
      Node node = loadOrCreateNode(g);
      auto r = node.enrollOwner(w.owner().profile());
      if (!r) {
        std::cout << "rejected: " << r.error().message() << "\n";
        return kExitRejected;
      }
      saveNode(node, g);
      std::cout << "enrolled " << w.owner().publicID.toHex() << "\n";
      return 0;
    }

    if (icEnroll->parsed() || icTransfer->parsed() || icStage->parsed() ||
        icAssemble->parsed() || icIntegrate->parsed() || icDefect->parsed()) {
      Wallet w = loadWalletOrDie(walletPath);
      Node node = loadOrCreateNode(g);
      w.attach(&node);
      w.syncAssets();

      int code = 0;
      if (icEnroll->parsed()) {
        Bytes key;
        if (keyHex.empty()) {
          key = Drbg::fromEntropy().bytes(32);
        } else {
          auto k = fromHex(keyHex);
          if (!k || k->size() != 32) {
            std::cerr << "error: --key must be 64 hex characters\n";
            return kExitUsage;
          }
          key = *k;
        }
        ICtoken t = w.buildEnrollment(asView(uid), markings, key);
        auto r = node.enrollIC(t);
        code = reportSubmit(r, "enrollment");
        if (code == 0) std::cout << "icid " << t.metadata.icid.toHex() << "\n";
      } else if (icTransfer->parsed()) {
        Digest icid = digestArgOrDie(icidHex, "--icid");
        Digest to = digestArgOrDie(toHexId, "--to");
        auto profile = node.profileOf(to);
        if (!profile) {
          std::cout << "rejected: " << errorClassName(ErrorClass::NewOwnerNotEnrolled)
                    << ": " << toHexId << "\n";
          return kExitRejected;
        }
        code = reportSubmit(node.transferIC(w.buildTransfer(icid, *profile)), "transfer");
      } else if (icStage->parsed()) {
        Digest icid = digestArgOrDie(icidHex, "--icid");
        Stage stage{};
        if (!stageFromCode(stageNum, stage) || statusNum > 1) {
          std::cerr << "error: stage must be 1..4 and status 0|1\n";
          return kExitUsage;
        }
        code = reportSubmit(
            node.updateStage(w.buildStageUpdate(icid, stage, static_cast<Status>(statusNum))),
            "stage update");
      } else if (icAssemble->parsed() || icIntegrate->parsed()) {
        std::vector<Digest> ics;
        for (const auto& h : icidList) ics.push_back(digestArgOrDie(h, "--icid"));
        auto batch = icAssemble->parsed() ? w.buildPidBinding(ics) : w.buildEdidBinding(ics);
        code = reportSubmit(node.updatePIDorEDID(batch), "composition update");
      } else {
        Digest icid = digestArgOrDie(icidHex, "--icid");
        code = reportSubmit(node.reportDefective(w.buildDefectReport(icid)), "defect report");
      }
      if (code == 0) {
        saveNode(node, g);
        w.syncAssets();
        w.saveTo(walletPath);
      }
      return code;
    }

    if (audit->parsed()) {
      Node node = loadOrCreateNode(g);
      auto r = auditIC(node, digestArgOrDie(icidHex, "icid"));
      if (!r) {
        std::cout << "rejected: " << r.error().message() << "\n";
        return kExitRejected;
      }
      std::cout << *r;
      return 0;
    }

    if (ledgerVerify->parsed()) {
      Node node = loadOrCreateNode(g);
      ChainReport report = node.verifyChain();
      if (report.ok) {
        std::cout << "chain ok: " << node.ledger().blocks.size() << " blocks, "
                  << node.committedCount() << " tokens\n";
        return 0;
      }
      for (const auto& issue : report.issues) std::cout << "issue: " << issue << "\n";
      return kExitRejected;
    }
    if (ledgerShow->parsed()) {
      Node node = loadOrCreateNode(g);
      std::cout << "blocks " << node.ledger().blocks.size() << ", tokens "
                << node.committedCount() << ", owners "
                << node.state().owndb.size() << "\n";
      for (const auto& b : node.ledger().blocks) {
        std::cout << "block " << b.index << " hash=" << b.blockHash.toHex().substr(0, 16)
                  << " tokens=" << b.tokens.size() << "\n";
        for (const auto& t : b.tokens)
          std::cout << "  icid=" << t.metadata.icid.toHex().substr(0, 16) << " v"
                    << unsigned(t.metadata.version) << " stage="
                    << unsigned(t.metadata.stage) << "/"
                    << unsigned(t.metadata.status) << " owner="
                    << t.ownerID.toHex().substr(0, 16) << "\n";
      }
      return 0;
    }

    if (netRun->parsed()) return runNet(g, nodes, seed, byzantine, extraRounds);

    if (scenario->parsed()) {
      ScenarioScript script;
      if (scenarioName == "table2") script = table2Script(seed);
      else if (scenarioName == "multi") script = multiDeviceScript(seed);
      else {
        std::cerr << "error: unknown scenario " << scenarioName << "\n";
        return kExitUsage;
      }
      ScenarioReport report;
      if (single) {
        Node node(NodeConfig{g.config.blockCapacity});
        report = runScenario(script, node);
      } else {
        NetworkConfig cfg;
        cfg.nodeCount = nodes;
        cfg.quorum = g.config.quorum;
        cfg.rngSeed = seed;
        cfg.node.blockCapacity = g.config.blockCapacity;
        Network network(cfg);
        report = runScenario(script, network);
      }
      std::cout << (machine ? report.toMachine() : report.toText());
      return report.passed() ? 0 : kExitRejected;
    }

    if (attack->parsed()) {
      std::vector<std::string> names;
      if (attackName == "all")
        names = attackNames();
      else
        names.push_back(attackName);
      bool allPassed = true;
      for (const auto& name : names) {
        ScenarioScript script;
        try {
          script = attackScript(name, seed);
        } catch (const std::invalid_argument& e) {
          std::cerr << "error: " << e.what() << "\n";
          return kExitUsage;
        }
        Node node(NodeConfig{g.config.blockCapacity});
        ScenarioReport report = runScenario(script, node);
        const StepOutcome& last = report.outcomes.back();
        std::cout << "attack " << name << ": ";
        if (!last.accepted)
          std::cout << "rejected: " << errorClassName(last.error->cls);
        else
          std::cout << "ACCEPTED (defense failed)";
        std::cout << (report.passed() ? "" : " [scenario FAIL]") << "\n";
        allPassed = allPassed && report.passed();
      }
      return allPassed ? 0 : kExitRejected;
    }

    if (selftestSizes->parsed()) return runSelftestSizes();
  } catch (const ProtocolError& e) {
    std::cout << "rejected: " << e.what() << "\n";
    return kExitRejected;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRejected;
  }

  std::cerr << "error: no subcommand handled\n";
  return kExitUsage;
}
