#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ictoken/consensus.hpp"
#include "ictoken/tracker.hpp"
#include "ictoken/wallet.hpp"

namespace ictoken {

struct OwnerSpec {
  std::string alias;
  std::string role;
  std::uint64_t seed = 0;
  bool enroll = true;  // foreign-transfer attacks use an unenrolled owner
};

/// One wallet action. `args` are free key=value pairs; keys prefixed "set."
/// tamper with the built token before re-signing, which is how attack
/// scripts produce transactions an honest wallet would never emit.
struct ScenarioStep {
  std::string actor;
  std::string action;  // enroll | transfer | stage | assemble | integrate | defect
  std::map<std::string, std::string> args;
  bool expectAccept = true;
  ErrorClass expectError = ErrorClass::ParseError;

  bool operator==(const ScenarioStep&) const = default;
};

struct ScenarioScript {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<OwnerSpec> owners;
  std::vector<ScenarioStep> steps;

  /// Line-delimited text form with a versioned header. Values must not
  /// contain spaces.
  std::string toText() const;
  static Result<ScenarioScript> fromText(std::string_view text);
};

struct StepOutcome {
  bool accepted = false;
  std::optional<Error> error;
  std::vector<std::uint64_t> seqs;
  bool asExpected = false;
};

struct FinalTokenState {
  std::string alias;
  Digest icid;
  unsigned version = 0;
  Stage stage = Stage::Fabrication;
  Status status = Status::InProgress;
  Digest ownerID;
  std::string ownerAlias;
  bool isDefective = false;
  std::size_t historyLength = 0;
};

struct InvariantSweep {
  bool rebuildMatches = false;       // live mappings == from-genesis rebuild
  bool chainVerifies = false;        // verifyChain on every honest node
  bool assetPartition = false;       // each ICID in exactly one asset set
  bool stageMonotone = false;        // per-history (stage,status) lex order
  bool versionChain = false;         // histories count down by exactly 1
  bool confidentiality = false;      // no secret bytes in ledger or report

  bool allHold() const {
    return rebuildMatches && chainVerifies && assetPartition && stageMonotone &&
           versionChain && confidentiality;
  }
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<StepOutcome> outcomes;
  bool allStepsAsExpected = false;
  std::uint64_t chainHeight = 0;  // sealed blocks
  std::uint64_t tokenCount = 0;
  std::vector<FinalTokenState> finals;
  InvariantSweep invariants;
  std::vector<std::string> roundLog;  // network runs only

  bool passed() const { return allStepsAsExpected && invariants.allHold(); }

  std::string toText() const;
  std::string toMachine() const;
};

/// The 15-row lifecycle: seven owners walk one IC from fabrication through
/// board assembly, system integration and end use to the recycler.
ScenarioScript table2Script(std::uint64_t seed);

/// Batch composition: five ICs onto two boards, both boards into one device.
ScenarioScript multiDeviceScript(std::uint64_t seed);

const std::vector<std::string>& attackNames();

/// Named must-fail script; the final step expects the documented rejection.
/// Throws std::invalid_argument for unknown names.
ScenarioScript attackScript(std::string_view name, std::uint64_t seed);

ScenarioReport runScenario(const ScenarioScript& script, Node& node);
ScenarioReport runScenario(const ScenarioScript& script, Network& net);

/// Provenance report: latest state, then every version newest-first with the
/// fields that changed and a signature re-verification per hop.
Result<std::string> auditIC(const Node& node, const Digest& icid);

}  // namespace ictoken
