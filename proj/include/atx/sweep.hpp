#pragma once
// Exhaustive enumeration of delivery-order interleavings for a scenario.
// Each run executes under the script scheduler with a choice script; the
// sweep walks the choice tree depth-first by bumping the deepest digit that
// still has untried alternatives.

#include <cstdint>
#include <functional>

#include "atx/run.hpp"
#include "atx/scenario.hpp"

namespace atx {

struct SweepOptions {
  uint64_t maxRuns = 4096;
  uint64_t maxEventsPerRun = 500'000;
  bool queryAccountsAfter = false;
};

struct SweepReport {
  uint64_t runs = 0;
  uint64_t distinctTraces = 0;
  bool exhausted = true;  // false when maxRuns cut the enumeration short
};

// Calls visit once per completed run.  Returns BoundExceeded if a single run
// blows its event budget, or the error from the underlying scenario runner.
Result<SweepReport> interleavingSweep(
    const ScenarioSpec& spec, const SweepOptions& opt,
    const std::function<void(const RunReport&)>& visit);

}  // namespace atx
