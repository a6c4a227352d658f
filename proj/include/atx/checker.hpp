#pragma once
// Trace checker: replays a recorded run and verifies the protocol's
// externally observable guarantees.  Every property is judged only from the
// trace itself, so the checker doubles as an independent audit of simulator
// output and of hand-edited traces.

#include <string>
#include <vector>

#include "atx/trace.hpp"

namespace atx {

struct PropertyResult {
  std::string name;
  bool pass = true;
  std::string detail;  // first counterexample when failing
};

struct CheckReport {
  std::vector<PropertyResult> results;
  bool allPass = true;
};

// Checks a parsed trace.  A structurally broken trace yields a report whose
// first (and only) entry is a failed trace-well-formed property.
CheckReport checkTrace(const Trace& t);

}  // namespace atx
