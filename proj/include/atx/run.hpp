#pragma once
// Scenario execution: build the cluster a ScenarioSpec describes, boot it,
// schedule the transfers (start ticks and label dependencies), run the
// engine to quiescence and collect per-operation results plus the trace.
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atx/scenario.hpp"
#include "atx/sim.hpp"
#include "atx/trace.hpp"

namespace atx {

struct OpReport {
  std::string label;
  std::string result;  // ok | fail | unresolved | incomplete
  std::string txId;    // hex id of the transfer's transaction
  uint64_t rootOpId = 0;
  uint64_t rtts = 0;
};

struct RunReport {
  Trace trace;
  std::vector<OpReport> transfers;             // in scenario order
  std::map<AccountId, uint64_t> consensusInvocations;
  uint64_t commits = 0;
  bool hitBound = false;
  // Post-run account-transactions queries (option), account -> sorted tx ids.
  std::map<AccountId, std::vector<std::string>> queried;
};

struct RunOptions {
  bool queryAccountsAfter = false;
  ChoiceOracle* oracle = nullptr;               // script mode replay/sweep
  std::optional<ScheduleMode> modeOverride;
  std::optional<uint64_t> maxEventsOverride;
};

Result<RunReport> runScenario(const ScenarioSpec& spec, const RunOptions& opt = {});

}  // namespace atx
