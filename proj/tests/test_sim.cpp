#include "atx/sim.hpp"

#include <vector>

#include "atx/run.hpp"
#include "harness.hpp"

using namespace atx;

namespace {

ScenarioSpec conflictSpec() {
  ScenarioSpec s;
  s.seed = 7;
  s.accounts = {{"accA", {"alice", "bob"}, 10}, {"accB", {"carol"}, 0}};
  s.transfers = {{"d1", "alice", "accB", 8, 0, {}, TxId(kTxIdLen, 0xD1)},
                 {"d2", "bob", "accB", 7, 0, {}, TxId(kTxIdLen, 0xD2)}};
  return s;
}

std::string traceTextOf(const ScenarioSpec& spec, RunOptions opt = {}) {
  auto r = runScenario(spec, opt);
  REQUIRE(r.ok());
  return r->trace.serialize();
}

}  // namespace

TEST_CASE("callbacks run in tick order and soon slots into the current tick") {
  TraceLog log;
  Engine eng({}, log);
  std::vector<int> order;
  eng.invokeAt(5, [&] { order.push_back(3); });
  eng.invokeAt(1, [&] {
    order.push_back(1);
    CHECK(eng.now() == 1);
    eng.soon([&] {
      order.push_back(2);
      CHECK(eng.now() == 1);  // same tick, later slot
    });
  });
  eng.run();
  CHECK(order == std::vector<int>{1, 2, 3});
  CHECK(eng.now() == 5);
}

TEST_CASE("a fixed seed reproduces the drawn transaction ids") {
  TraceLog l1, l2, l3;
  Engine::Options o;
  o.seed = 99;
  Engine a({o}, l1), b({o}, l2);
  std::vector<TxId> fromA{a.drawTxId(), a.drawTxId(), a.drawTxId()};
  std::vector<TxId> fromB{b.drawTxId(), b.drawTxId(), b.drawTxId()};
  CHECK(fromA == fromB);
  CHECK(fromA[0] != fromA[1]);

  o.seed = 100;
  Engine c({o}, l3);
  CHECK(c.drawTxId() != fromA[0]);
}

TEST_CASE("the consensus register decides the first delivered proposal") {
  World w;
  CloseState stA;
  stA.credits.emplace(w.accounts.genesisTx("accA"), Bytes{});
  CloseState stB;  // empty; differs from stA

  std::vector<CloseState> seen;
  w.eng.propose("alice", "accA", 2, {stA, {}},
                [&](Engine::ConsensusValue v) { seen.push_back(v.first); });
  w.eng.propose("bob", "accA", 2, {stB, {}},
                [&](Engine::ConsensusValue v) { seen.push_back(v.first); });
  // A different instance is decided independently.
  w.eng.propose("bob", "accA", 3, {stB, {}},
                [&](Engine::ConsensusValue v) { seen.push_back(v.first); });
  w.eng.run();

  REQUIRE(seen.size() == 3);
  CHECK(seen[0] == stA);
  CHECK(seen[1] == stA);  // second proposer learns the first value
  CHECK(seen[2] == stB);
  REQUIRE(w.eng.decidedFor("accA", 2));
  CHECK(w.eng.decidedFor("accA", 2)->first == stA);
  CHECK_FALSE(w.eng.decidedFor("accA", 4));

  size_t invokes = 0, decides = 0;
  for (const auto& ev : w.log.trace().events) {
    if (ev.kind == EvKind::ConsensusInvoke) ++invokes;
    if (ev.kind == EvKind::ConsensusDecide) ++decides;
  }
  CHECK(invokes == 3);
  CHECK(decides == 2);  // one per instance
}

TEST_CASE("identical scenarios and seeds serialize byte-identical traces") {
  ScenarioSpec spec = conflictSpec();
  CHECK(traceTextOf(spec) == traceTextOf(spec));

  spec.mode = ScheduleMode::RandomDelay;
  CHECK(traceTextOf(spec) == traceTextOf(spec));
}

TEST_CASE("different seeds shuffle the random-delay schedule") {
  ScenarioSpec spec = conflictSpec();
  spec.mode = ScheduleMode::RandomDelay;
  std::string a = traceTextOf(spec);
  spec.seed = 8;
  CHECK(a != traceTextOf(spec));
}

TEST_CASE("the event bound halts a runaway run") {
  ScenarioSpec spec = conflictSpec();
  RunOptions opt;
  opt.maxEventsOverride = 40;
  auto r = runScenario(spec, opt);
  REQUIRE(r.ok());
  CHECK(r->hitBound);
  for (const auto& t : r->transfers) CHECK(t.result == "incomplete");
}

TEST_CASE("a scripted delivery choice reorders the run") {
  ScenarioSpec spec = conflictSpec();

  ChoiceOracle canonical;
  RunOptions opt;
  opt.modeOverride = ScheduleMode::Script;
  opt.oracle = &canonical;
  std::string base = traceTextOf(spec, opt);

  // The conflicting prepares create at least one real choice point.
  size_t point = canonical.arity.size();
  for (size_t i = 0; i < canonical.arity.size(); ++i)
    if (canonical.arity[i] >= 2) {
      point = i;
      break;
    }
  REQUIRE(point < canonical.arity.size());
  CHECK(canonical.chosen == std::vector<int>(canonical.chosen.size(), 0));

  ChoiceOracle flipped;
  flipped.script.assign(point + 1, 0);
  flipped.script[point] = 1;
  RunOptions opt2;
  opt2.modeOverride = ScheduleMode::Script;
  opt2.oracle = &flipped;
  std::string alt = traceTextOf(spec, opt2);

  CHECK(alt != base);
  REQUIRE(flipped.chosen.size() > point);
  CHECK(flipped.chosen[point] == 1);
}

TEST_CASE("round-trip accounting merges overlapping phases") {
  Trace t;
  auto phase = [&](uint64_t root, int64_t a, int64_t b) {
    TraceEvent e;
    e.idx = t.events.size();
    e.tick = b;
    e.kind = EvKind::RttPhase;
    e.fields = {{"op", "9"},
                {"root", std::to_string(root)},
                {"a", std::to_string(a)},
                {"b", std::to_string(b)}};
    t.events.push_back(std::move(e));
  };

  SUBCASE("no phases at all count zero") {
    auto r = measureRttFromTrace(t, 1);
    REQUIRE(r.ok());
    CHECK(*r == 0);
  }

  SUBCASE("parallel phases count once, sequential ones add up") {
    phase(1, 0, 2);
    phase(1, 0, 2);
    phase(1, 2, 6);
    phase(2, 10, 14);  // different operation; ignored
    auto r = measureRttFromTrace(t, 1);
    REQUIRE(r.ok());
    CHECK(*r == 3);
    auto other = measureRttFromTrace(t, 2);
    REQUIRE(other.ok());
    CHECK(*other == 2);
  }

  SUBCASE("idle gaps between phases are free") {
    phase(1, 0, 2);
    phase(1, 4, 6);
    auto r = measureRttFromTrace(t, 1);
    REQUIRE(r.ok());
    CHECK(*r == 2);
  }

  SUBCASE("partial overlap merges into one span") {
    phase(1, 0, 4);
    phase(1, 2, 6);
    auto r = measureRttFromTrace(t, 1);
    REQUIRE(r.ok());
    CHECK(*r == 3);
  }

  SUBCASE("odd coverage is not a failure-free run") {
    phase(1, 0, 3);
    CHECK(measureRttFromTrace(t, 1).error() == Err::NotFailureFree);
  }

  SUBCASE("degenerate intervals are rejected") {
    phase(1, 2, 2);
    CHECK(measureRttFromTrace(t, 1).error() == Err::NotFailureFree);
  }
}
