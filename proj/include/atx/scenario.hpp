#pragma once
// Scenario descriptions: cluster size, accounts, scheduled transfers, the
// delivery schedule and the fault plan.  Scenarios load from a small JSON
// format (see docs/protocol.md) or are built directly in test code.
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atx/result.hpp"
#include "atx/types.hpp"

namespace atx {

enum class ScheduleMode { Synchronous, RandomDelay, Script };
const char* scheduleModeName(ScheduleMode m);
std::optional<ScheduleMode> scheduleModeFromName(const std::string& s);

enum class ReplicaPreset { Crash, EquivocatePrepare, SignConflictingClose, Withhold };
enum class ClientPreset { Replay, StorageGarbage, DivergentNotarize };
const char* replicaPresetName(ReplicaPreset p);
const char* clientPresetName(ClientPreset p);
std::optional<ReplicaPreset> replicaPresetFromName(const std::string& s);
std::optional<ClientPreset> clientPresetFromName(const std::string& s);

struct TransferSpec {
  std::string label;       // unique; used in reports and dependencies
  ProcessId client;        // owner issuing the transfer
  AccountId to;
  Amount amount = 0;
  int64_t at = 0;          // earliest start tick
  std::vector<std::string> after;  // labels that must complete first
  std::optional<TxId> fixedId;     // otherwise drawn from the run's RNG
};

struct ScenarioSpec {
  uint32_t n = 4;
  uint32_t f = 1;
  uint64_t seed = 1;
  SigScheme crypto = SigScheme::KeyedHashMock;
  ScheduleMode mode = ScheduleMode::Synchronous;
  int minDelay = 1;
  int maxDelay = 3;  // random-delay mode only
  uint64_t maxEvents = 5'000'000;
  std::vector<AccountInfo> accounts;
  std::vector<TransferSpec> transfers;
  std::map<ReplicaId, ReplicaPreset> byzReplicas;
  std::map<ProcessId, ClientPreset> byzClients;

  std::vector<ReplicaId> replicaIds() const;  // r0 .. r{n-1}
  std::vector<ProcessId> clientIds() const;   // owners plus byzantine clients
  bool failureFree() const { return byzReplicas.empty() && byzClients.empty(); }
  Status validate() const;
};

Result<ScenarioSpec> scenarioFromJson(const std::string& text);
std::string scenarioToJson(const ScenarioSpec& spec);
Result<ScenarioSpec> loadScenarioFile(const std::string& path);

}  // namespace atx
