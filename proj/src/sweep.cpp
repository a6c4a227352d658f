#include "atx/sweep.hpp"

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "atx/crypto.hpp"

namespace atx {

Result<SweepReport> interleavingSweep(
    const ScenarioSpec& spec, const SweepOptions& opt,
    const std::function<void(const RunReport&)>& visit) {
  SweepReport rep;
  std::set<Digest> seen;
  std::vector<int> script;

  while (true) {
    if (rep.runs >= opt.maxRuns) {
      rep.exhausted = false;
      break;
    }

    ChoiceOracle oracle;
    oracle.script = script;
    RunOptions ro;
    ro.oracle = &oracle;
    ro.modeOverride = ScheduleMode::Script;
    ro.maxEventsOverride = opt.maxEventsPerRun;
    ro.queryAccountsAfter = opt.queryAccountsAfter;

    auto r = runScenario(spec, ro);
    if (!r.ok()) return {r.error(), r.note()};
    RunReport run = r.take();
    if (run.hitBound)
      return {Err::BoundExceeded, "per-run event budget exhausted during sweep"};

    ++rep.runs;
    std::string text = run.trace.serialize();
    Digest d = sha256(Bytes(text.begin(), text.end()));
    if (seen.insert(d).second) ++rep.distinctTraces;
    if (visit) visit(run);

    // Advance to the next script: keep the prefix up to the deepest choice
    // point with an untried alternative and bump it.  Deeper points fall back
    // to the default pick, so every leaf of the tree is visited exactly once.
    bool advanced = false;
    for (size_t i = oracle.chosen.size(); i-- > 0;) {
      if (oracle.chosen[i] + 1 < oracle.arity[i]) {
        script.assign(oracle.chosen.begin(),
                      oracle.chosen.begin() + static_cast<long>(i));
        script.push_back(oracle.chosen[i] + 1);
        advanced = true;
        break;
      }
    }
    if (!advanced) break;
  }
  return rep;
}

}  // namespace atx
