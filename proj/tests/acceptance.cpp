// Acceptance gate for the asset-transfer stack.  Runs ten end-to-end
// criteria against the scenario corpus (argv[1] names the directory) plus a
// few in-process worlds, printing one [PASS]/[FAIL] line per criterion.
// Exit code is the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "atx/checker.hpp"
#include "atx/crypto.hpp"
#include "atx/protocol.hpp"
#include "atx/run.hpp"
#include "atx/storage.hpp"
#include "atx/sweep.hpp"
#include "atx/trace.hpp"
#include "atx/types.hpp"

using namespace atx;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmtSecs(double s) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << s << "s";
  return os.str();
}

struct Gate {
  int failures = 0;

  void report(int num, const std::string& what, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << num << ": " << what;
    if (!detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << std::endl;
    if (!pass) ++failures;
  }
};

Result<ScenarioSpec> loadSpec(const std::string& dir, const std::string& name) {
  return loadScenarioFile(dir + "/" + name + ".json");
}

const OpReport* findOp(const RunReport& r, const std::string& label) {
  for (const auto& t : r.transfers)
    if (t.label == label) return &t;
  return nullptr;
}

bool allOk(const RunReport& r, std::string* bad = nullptr) {
  for (const auto& t : r.transfers)
    if (t.result != "ok") {
      if (bad) *bad = t.label + "=" + t.result;
      return false;
    }
  return true;
}

uint64_t maxRtts(const RunReport& r) {
  uint64_t m = 0;
  for (const auto& t : r.transfers) m = std::max(m, t.rtts);
  return m;
}

// Criterion 8 collector: prepared-debit-set certificates from the criterion
// 2, 4 and 7 traces, grouped by (account, epoch), must pairwise nest.
struct ChainAudit {
  size_t traces = 0;
  size_t groups = 0;
  bool ok = true;
  std::string why;

  void feed(const Trace& t) {
    ++traces;
    std::map<std::pair<std::string, uint64_t>, std::vector<std::set<std::string>>> by;
    for (const auto& e : t.events) {
      if (e.kind != EvKind::CertCap || e.getOr("cat", "") != "prepared") continue;
      auto ids = splitIds(e.getOr("txs", "-"));
      by[{e.getOr("acc", ""), e.getU64("ep")}].emplace_back(ids.begin(), ids.end());
    }
    for (const auto& [key, sets] : by) {
      ++groups;
      for (size_t i = 0; i < sets.size(); ++i)
        for (size_t j = i + 1; j < sets.size(); ++j) {
          bool ij = std::includes(sets[j].begin(), sets[j].end(), sets[i].begin(),
                                  sets[i].end());
          bool ji = std::includes(sets[i].begin(), sets[i].end(), sets[j].begin(),
                                  sets[j].end());
          if (!ij && !ji && ok) {
            ok = false;
            why = "incomparable prepared sets on " + key.first + " epoch " +
                  std::to_string(key.second);
          }
        }
    }
  }
};

// ---------------------------------------------------------------------------
// criterion 6 verdicts
// ---------------------------------------------------------------------------

// Constructive verdict: the checker's serializability-relevant properties.
bool constructiveVerdict(const Trace& t) {
  CheckReport r = checkTrace(t);
  if (r.results.empty() || !r.results.front().pass) return false;
  bool pass = true;
  for (const auto& p : r.results)
    if (p.name == "commit-unique" || p.name == "no-negative-balances" ||
        p.name == "ok-means-committed" || p.name == "real-time-order")
      pass = pass && p.pass;
  return pass;
}

// Independent oracle: after checking reported outcomes against the committed
// set, search every ordering of the committed transactions for one that
// respects real-time precedence and never overdraws an account.  nullopt
// means the search blew its node budget.
std::optional<bool> bruteVerdict(const Trace& t) {
  struct BOp {
    std::string tx, result;
    uint64_t start = 0, end = 0;
    bool ended = false;
  };
  struct BCommit {
    std::string tx, from, to;
    uint64_t amount = 0;
  };
  std::map<uint64_t, BOp> ops;
  std::vector<BCommit> commits;
  for (const auto& e : t.events) {
    if (e.kind == EvKind::OpStart && e.getOr("kind", "") == "transfer") {
      ops[e.getU64("op")] = BOp{e.getOr("tx", ""), "", e.idx, 0, false};
    } else if (e.kind == EvKind::OpEnd) {
      auto it = ops.find(e.getU64("op"));
      if (it != ops.end()) {
        it->second.ended = true;
        it->second.end = e.idx;
        it->second.result = e.getOr("result", "");
      }
    } else if (e.kind == EvKind::Commit) {
      commits.push_back(
          {e.getOr("tx", ""), e.getOr("from", "-"), e.getOr("to", ""), e.getU64("amount")});
    }
  }

  std::map<std::string, int> committedTimes;
  for (const auto& c : commits) ++committedTimes[c.tx];
  for (const auto& kv : committedTimes)
    if (kv.second != 1) return false;  // a doubly committed tx serializes nowhere
  for (const auto& kv : ops) {
    if (kv.second.result == "ok" && committedTimes[kv.second.tx] != 1) return false;
    if (kv.second.result == "fail" && committedTimes[kv.second.tx] != 0) return false;
  }

  size_t m = commits.size();
  std::map<std::string, const BOp*> opByTx;
  for (const auto& kv : ops) opByTx[kv.second.tx] = &kv.second;
  std::vector<std::vector<size_t>> pred(m);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      auto a = opByTx.find(commits[i].tx);
      auto b = opByTx.find(commits[j].tx);
      if (a != opByTx.end() && b != opByTx.end() && a->second->ended &&
          a->second->end < b->second->start)
        pred[j].push_back(i);
    }

  uint64_t nodes = 0;
  const uint64_t kNodeBudget = 20'000'000;
  std::vector<char> used(m, 0);
  std::map<std::string, Int128> bal;
  std::function<int(size_t)> go = [&](size_t depth) -> int {
    if (depth == m) return 1;
    for (size_t i = 0; i < m; ++i) {
      if (used[i]) continue;
      bool ready = true;
      for (size_t p : pred[i])
        if (!used[p]) {
          ready = false;
          break;
        }
      if (!ready) continue;
      if (++nodes > kNodeBudget) return -1;
      const BCommit& c = commits[i];
      bool debit = c.from != "-";
      if (debit && bal[c.from] < static_cast<Int128>(c.amount)) continue;
      if (debit) bal[c.from] -= c.amount;
      bal[c.to] += c.amount;
      used[i] = 1;
      int r = go(depth + 1);
      used[i] = 0;
      bal[c.to] -= c.amount;
      if (debit) bal[c.from] += c.amount;
      if (r != 0) return r;
    }
    return 0;
  };
  int r = go(0);
  if (r < 0) return std::nullopt;
  return r == 1;
}

bool verdictsAgree(const Trace& t) {
  auto brute = bruteVerdict(t);
  if (!brute) return false;  // a blown oracle budget counts as disagreement
  return constructiveVerdict(t) == *brute;
}

// Proves the oracle alive before trusting its agreement: seeded violations
// of each kind it judges must flip the verdict on a known-good trace.
bool oracleSelfCheck(const std::string& dir, std::string* why) {
  auto spec = loadSpec(dir, "solo_transfer");
  if (!spec.ok()) {
    *why = "oracle self-check: scenario load failed";
    return false;
  }
  auto rep = runScenario(*spec);
  if (!rep.ok()) {
    *why = "oracle self-check: run failed";
    return false;
  }
  const Trace& clean = rep->trace;
  auto cleanV = bruteVerdict(clean);
  if (!cleanV || !*cleanV) {
    *why = "oracle self-check: clean trace rejected";
    return false;
  }

  size_t debitAt = clean.events.size();
  for (size_t i = 0; i < clean.events.size(); ++i)
    if (clean.events[i].kind == EvKind::Commit &&
        clean.events[i].getOr("from", "-") != "-") {
      debitAt = i;
      break;
    }
  if (debitAt == clean.events.size()) {
    *why = "oracle self-check: no debit commit to mutate";
    return false;
  }

  Trace doubled = clean;
  doubled.events.push_back(clean.events[debitAt]);
  auto doubledV = bruteVerdict(doubled);
  if (!doubledV || *doubledV) {
    *why = "oracle self-check: doubled commit accepted";
    return false;
  }

  Trace dropped = clean;
  dropped.events.erase(dropped.events.begin() + static_cast<ptrdiff_t>(debitAt));
  auto droppedV = bruteVerdict(dropped);
  if (!droppedV || *droppedV) {
    *why = "oracle self-check: vanished commit accepted";
    return false;
  }

  Trace inflated = clean;
  for (auto& f : inflated.events[debitAt].fields)
    if (f.first == "amount") f.second = "99999";
  auto inflatedV = bruteVerdict(inflated);
  if (!inflatedV || *inflatedV) {
    *why = "oracle self-check: unfunded commit accepted";
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

void crit1(Gate& g, const std::string& dir) {
  const std::string what = "a solo transfer commits on the fast path in exactly 5 round trips";
  auto spec = loadSpec(dir, "solo_transfer");
  if (!spec.ok()) return g.report(1, what, false, "scenario load failed");
  auto t0 = Clock::now();
  auto rep = runScenario(*spec);
  double secs = elapsed(t0);
  if (!rep.ok())
    return g.report(1, what, false, std::string("run failed: ") + errName(rep.error()));
  const OpReport* t1 = findOp(*rep, "t1");
  if (!t1) return g.report(1, what, false, "transfer t1 missing from report");
  bool pass = t1->result == "ok" && t1->rtts == 5 && secs < 1.0;
  g.report(1, what, pass,
           "result=" + t1->result + " rtts=" + std::to_string(t1->rtts) + " " + fmtSecs(secs));
}

void crit2(Gate& g, const std::string& dir, ChainAudit& chains, bool& chainInputs) {
  const std::string what = "k concurrent owners all commit within k+4 round trips";
  struct Src {
    std::string file;
    uint64_t k;
  };
  const std::vector<Src> srcs{{"solo_transfer", 1},
                              {"k_concurrent_2", 2},
                              {"k_concurrent_3", 3},
                              {"k_concurrent_4", 4}};
  auto t0 = Clock::now();
  bool pass = true;
  std::string detail;
  for (const auto& s : srcs) {
    auto spec = loadSpec(dir, s.file);
    if (!spec.ok()) {
      pass = false;
      chainInputs = false;
      detail = s.file + ": load failed";
      break;
    }
    auto rep = runScenario(*spec);
    if (!rep.ok()) {
      pass = false;
      chainInputs = false;
      detail = s.file + ": run failed";
      break;
    }
    chains.feed(rep->trace);
    std::string bad;
    uint64_t worst = maxRtts(*rep);
    if (!allOk(*rep, &bad)) {
      pass = false;
      detail = s.file + ": " + bad;
      break;
    }
    if (worst > s.k + 4 || (s.k == 1 && worst != 5)) {
      pass = false;
      detail = s.file + ": worst rtts=" + std::to_string(worst);
      break;
    }
    if (!detail.empty()) detail += " ";
    detail += "k" + std::to_string(s.k) + "=" + std::to_string(worst) + "rtt";
  }
  double secs = elapsed(t0);
  if (secs >= 5.0) pass = false;
  g.report(2, what, pass, detail + " " + fmtSecs(secs));
}

class StorageProbe : public StorageClient {
 public:
  using StorageClient::StorageClient;
  using Map = std::map<Bytes, Bytes>;

  uint64_t startAppend(StorageId inst, std::string key,
                       std::vector<std::pair<Bytes, Bytes>> pairs,
                       std::function<void(Map)> done) {
    uint64_t op = ctx_->eng->nextOpId();
    spawnOp<Map>(op, appendKeyOp(op, std::move(inst), std::move(key), std::move(pairs)),
                 std::move(done));
    return op;
  }
  uint64_t startRead(StorageId inst, std::string key, std::function<void(Map)> done) {
    uint64_t op = ctx_->eng->nextOpId();
    spawnOp<Map>(op, readKeyOp(op, std::move(inst), std::move(key)), std::move(done));
    return op;
  }
};

void crit3(Gate& g) {
  const std::string what = "storage appends cost 1 round trip and reads cost 2";
  auto keysR = KeyRegistry::make({"r1", "r2", "r3", "r4"}, {"alice", "bob", "carol"}, 1,
                                 SigScheme::KeyedHashMock, 42);
  auto acctsR = AccountRegistry::make({{"accA", {"alice", "bob"}, 10}, {"accB", {"carol"}, 0}});
  if (!keysR.ok() || !acctsR.ok()) return g.report(3, what, false, "world setup failed");
  KeyRegistry keys = keysR.take();
  AccountRegistry accounts = acctsR.take();
  TraceLog log;
  Engine eng({}, log);
  Ctx ctx;
  ctx.keys = &keys;
  ctx.accounts = &accounts;
  ctx.eng = &eng;
  eng.observatory().init(&keys, &accounts, &log, {});
  std::vector<std::unique_ptr<Replica>> reps;
  for (const auto& rid : keys.replicas()) {
    reps.push_back(std::make_unique<Replica>(&ctx, rid));
    eng.registerProcess(reps.back().get());
  }
  for (auto& r : reps) r->boot();
  StorageProbe probe(&ctx, "alice");
  eng.registerProcess(&probe);

  Transaction d1 =
      Transaction::makeSigned(keys, "alice", "accA", "accB", 3, TxId(kTxIdLen, 0x31));
  bool appended = false, readDone = false;
  size_t readSize = 0;
  uint64_t appendOp =
      probe.startAppend(sidAccount("accA"), "debits", {{d1.encoded(), {}}},
                        [&](StorageProbe::Map m) { appended = m.count(d1.encoded()) > 0; });
  eng.run();
  uint64_t readOp = probe.startRead(sidGlobal(), "txs", [&](StorageProbe::Map m) {
    readDone = true;
    readSize = m.size();
  });
  eng.run();

  auto appendRtt = measureRttFromTrace(log.trace(), appendOp);
  auto readRtt = measureRttFromTrace(log.trace(), readOp);
  bool pass = appended && readDone && readSize == accounts.allGenesis().size() &&
              appendRtt.ok() && *appendRtt == 1 && readRtt.ok() && *readRtt == 2;
  g.report(3, what, pass,
           "append=" + (appendRtt.ok() ? std::to_string(*appendRtt) : "?") + "rtt read=" +
               (readRtt.ok() ? std::to_string(*readRtt) : "?") + "rtt");
}

void crit4(Gate& g, const std::string& dir, ChainAudit& chains, bool& chainInputs) {
  const std::string what =
      "an equivocating replica cannot drive a shared account past its balance";
  auto spec = loadSpec(dir, "fig3_conflict");
  if (!spec.ok()) {
    chainInputs = false;
    return g.report(4, what, false, "scenario load failed");
  }
  auto t0 = Clock::now();
  auto rep = runScenario(*spec);
  double secs = elapsed(t0);
  if (!rep.ok()) {
    chainInputs = false;
    return g.report(4, what, false, "run failed");
  }
  chains.feed(rep->trace);
  CheckReport chk = checkTrace(rep->trace);
  uint64_t debited = 0;
  for (const auto& e : rep->trace.events)
    if (e.kind == EvKind::Commit && e.getOr("from", "-") == "accA") debited += e.getU64("amount");
  size_t okN = 0, failN = 0, otherN = 0;
  for (const auto& t : rep->transfers)
    ++(t.result == "ok" ? okN : t.result == "fail" ? failN : otherN);
  bool pass = chk.allPass && debited <= 2 && otherN == 0 && okN + failN == 3 && secs < 2.0;
  g.report(4, what, pass,
           std::string("checker=") + (chk.allPass ? "pass" : "FAIL") + " debited=" +
               std::to_string(debited) + " ok=" + std::to_string(okN) + " fail=" +
               std::to_string(failN) + " " + fmtSecs(secs));
}

void crit5(Gate& g, const std::string& dir) {
  const std::string what = "after recovery, clean transfers run without invoking consensus";
  auto spec = loadSpec(dir, "fig3_then_clean");
  if (!spec.ok()) return g.report(5, what, false, "scenario load failed");
  auto rep = runScenario(*spec);
  if (!rep.ok()) return g.report(5, what, false, "run failed");
  bool tailOk = true;
  for (const std::string lbl : {"s1", "s2", "s3", "s4", "s5"}) {
    const OpReport* t = findOp(*rep, lbl);
    if (!t || t->result != "ok") tailOk = false;
  }
  const OpReport* refund = findOp(*rep, "refund");
  bool refundOk = refund && refund->result == "ok";
  uint64_t s1Start = 0;
  bool found = false;
  for (const auto& e : rep->trace.events)
    if (e.kind == EvKind::OpStart && e.getOr("label", "") == "s1") {
      s1Start = e.idx;
      found = true;
      break;
    }
  uint64_t storm = 0, tail = 0;
  for (const auto& e : rep->trace.events)
    if (e.kind == EvKind::ConsensusInvoke) ++(e.idx < s1Start ? storm : tail);
  CheckReport chk = checkTrace(rep->trace);
  bool pass = found && tailOk && refundOk && chk.allPass && storm >= 1 && tail == 0;
  g.report(5, what, pass,
           "storm invocations=" + std::to_string(storm) + " tail invocations=" +
               std::to_string(tail) + " checker=" + (chk.allPass ? "pass" : "FAIL"));
}

void crit67(Gate& g, const std::string& dir, ChainAudit& chains, bool& chainInputs) {
  const std::string what6 = "checker verdicts agree with a brute-force serialization oracle";
  const std::string what7 = "no interleaving of two funded owners ever fails a transfer";

  auto spec = loadSpec(dir, "sweep_2owner");
  if (!spec.ok()) {
    chainInputs = false;
    g.report(6, what6, false, "scenario load failed");
    g.report(7, what7, false, "scenario load failed");
    return;
  }

  auto t0 = Clock::now();
  std::string oracleWhy;
  bool oracleLive = oracleSelfCheck(dir, &oracleWhy);
  uint64_t compared = 0, mismatches = 0, swFails = 0, swConsensus = 0;
  std::string firstBad;
  auto audit = [&](const RunReport& r) {
    chains.feed(r.trace);
    std::string bad;
    if (!allOk(r, &bad)) {
      ++swFails;
      if (firstBad.empty()) firstBad = bad;
    }
    for (const auto& e : r.trace.events)
      if (e.kind == EvKind::ConsensusInvoke) ++swConsensus;
    ++compared;
    if (!verdictsAgree(r.trace)) ++mismatches;
  };
  auto sw = interleavingSweep(*spec, {}, audit);

  // Fifty random-delay runs under fresh seeds widen the oracle comparison to
  // contended, partially failing schedules.
  auto rnd = loadSpec(dir, "random_delay_mix");
  bool rndOk = rnd.ok();
  if (rndOk) {
    for (int i = 0; i < 50 && rndOk; ++i) {
      ScenarioSpec s = *rnd;
      s.seed = 1000 + i;
      auto rep = runScenario(s);
      if (!rep.ok() || rep->hitBound) {
        rndOk = false;
        break;
      }
      ++compared;
      if (!verdictsAgree(rep->trace)) ++mismatches;
    }
  }
  double secs = elapsed(t0);

  bool pass6 = oracleLive && sw.ok() && rndOk && compared > 0 && mismatches == 0 && secs < 60.0;
  std::string d6 = std::to_string(compared) + " traces, " + std::to_string(mismatches) +
                   " mismatches, " + fmtSecs(secs);
  if (!oracleLive) d6 = oracleWhy;
  else if (!sw.ok()) d6 = std::string("sweep failed: ") + errName(sw.error());
  else if (!rndOk) d6 += ", random-delay leg failed";
  g.report(6, what6, pass6, d6);

  if (!sw.ok()) {
    chainInputs = false;
    g.report(7, what7, false, std::string("sweep failed: ") + errName(sw.error()));
    return;
  }
  bool pass7 = sw->exhausted && sw->runs > 0 && swFails == 0;
  std::string d7 = std::to_string(sw->runs) + " interleavings, exhausted=" +
                   (sw->exhausted ? "yes" : "no") + ", fails=" + std::to_string(swFails) +
                   ", consensus invocations=" + std::to_string(swConsensus);
  if (!firstBad.empty()) d7 += ", first " + firstBad;
  g.report(7, what7, pass7, d7);
}

void crit8(Gate& g, const ChainAudit& chains, bool chainInputs) {
  const std::string what = "prepared debit sets for one epoch always nest into a chain";
  bool pass = chainInputs && chains.ok && chains.traces > 0 && chains.groups > 0;
  std::string d = std::to_string(chains.traces) + " traces, " + std::to_string(chains.groups) +
                  " account-epoch groups";
  if (!chains.ok) d += ", " + chains.why;
  if (!chainInputs) d += ", missing inputs";
  g.report(8, what, pass, d);
}

void crit9(Gate& g, const std::string& dir) {
  const std::string what = "one epoch never notarizes two different close states";
  bool pass = true;
  std::string detail;
  for (const std::string name : {"byz_divergent", "byz_divergent_assist"}) {
    auto spec = loadSpec(dir, name);
    if (!spec.ok()) {
      pass = false;
      detail = name + ": load failed";
      break;
    }
    auto rep = runScenario(*spec);
    if (!rep.ok()) {
      pass = false;
      detail = name + ": run failed";
      break;
    }
    CheckReport chk = checkTrace(rep->trace);
    std::map<std::pair<std::string, uint64_t>, std::set<std::string>> digs;
    size_t notarized = 0;
    for (const auto& e : rep->trace.events) {
      if (e.kind != EvKind::CertCap || e.getOr("cat", "") != "notarized") continue;
      ++notarized;
      digs[{e.getOr("acc", ""), e.getU64("ep")}].insert(e.getOr("dig", ""));
    }
    bool unique = true;
    for (const auto& kv : digs) unique = unique && kv.second.size() <= 1;
    if (!chk.allPass || !unique || notarized == 0) {
      pass = false;
      detail = name + ": checker=" + (chk.allPass ? "pass" : "FAIL") + " notarizations=" +
               std::to_string(notarized) + " divergent=" + (unique ? "no" : "YES");
      break;
    }
    if (!detail.empty()) detail += "; ";
    detail += name + "=" + std::to_string(notarized) + " notarizations";
  }
  g.report(9, what, pass, detail);
}

void crit10(Gate& g) {
  const std::string what = "signature quorums and Merkle proofs hold exactly at their boundaries";
  std::string fail;

  for (SigScheme scheme : {SigScheme::KeyedHashMock, SigScheme::Ed25519}) {
    const char* sn = scheme == SigScheme::Ed25519 ? "ed25519" : "mock";
    auto keysR = KeyRegistry::make({"r1", "r2", "r3", "r4"}, {"c1"}, 1, scheme, 5);
    if (!keysR.ok()) {
      fail = std::string(sn) + ": registry setup";
      break;
    }
    KeyRegistry keys = keysR.take();
    Bytes msg{'b', 'o', 'u', 'n', 'd', 'a', 'r', 'y'};
    std::vector<std::pair<ReplicaId, Bytes>> shares;
    for (const auto& r : keys.replicas()) shares.emplace_back(r, keys.sign(r, msg));

    auto exact = keys.createThresholdSignature(msg, {shares[0], shares[1], shares[2]});
    if (!exact.ok() || exact->shares.size() != 3 ||
        !keys.verifyThresholdSignature(msg, *exact)) {
      fail = std::string(sn) + ": quorum of n-f rejected";
      break;
    }
    auto two = keys.createThresholdSignature(msg, {shares[0], shares[1]});
    if (two.ok() || two.error() != Err::InsufficientShares) {
      fail = std::string(sn) + ": n-f-1 shares accepted";
      break;
    }
    auto four = keys.createThresholdSignature(msg, shares);
    if (!four.ok() || four->shares.size() != 3) {
      fail = std::string(sn) + ": no canonical trim to n-f";
      break;
    }
    ThresholdSig trimmed = *exact;
    trimmed.shares.pop_back();
    if (keys.verifyThresholdSignature(msg, trimmed)) {
      fail = std::string(sn) + ": n-f-1 shares verified";
      break;
    }
    ThresholdSig dup = *exact;
    dup.shares.push_back(dup.shares.front());
    if (keys.verifyThresholdSignature(msg, dup)) {
      fail = std::string(sn) + ": duplicate share counted";
      break;
    }
    ThresholdSig forged = *exact;
    forged.shares[1].second[0] ^= 1;
    if (keys.verifyThresholdSignature(msg, forged)) {
      fail = std::string(sn) + ": forged share verified";
      break;
    }
    ThresholdSig outsider = *exact;
    outsider.shares[2] = {"c1", keys.sign("c1", msg)};
    if (keys.verifyThresholdSignature(msg, outsider)) {
      fail = std::string(sn) + ": client share counted";
      break;
    }
  }

  size_t proofsChecked = 0;
  for (size_t count = 1; count <= 64 && fail.empty(); ++count) {
    std::vector<Bytes> values;
    for (size_t i = 0; i < count; ++i) {
      std::string s = "value-" + std::to_string(count) + "-" + std::to_string(i);
      values.emplace_back(s.begin(), s.end());
    }
    MerkleTree tree = MerkleTree::build(values);
    for (const auto& v : values) {
      auto proof = tree.proofFor(v);
      if (!proof.ok() || !MerkleTree::verifyProof(tree.root(), *proof, v)) {
        fail = "membership proof failed at " + std::to_string(count) + " leaves";
        break;
      }
      ++proofsChecked;
    }
    if (!fail.empty()) break;
    Bytes absent{'a', 'b', 's', 'e', 'n', 't'};
    auto missing = tree.proofFor(absent);
    if (missing.ok() || missing.error() != Err::NotAMember) {
      fail = "absent value got a proof at " + std::to_string(count) + " leaves";
      break;
    }
    auto p0 = tree.proofFor(values[0]);
    if (!p0.ok()) {
      fail = "member lost its proof at " + std::to_string(count) + " leaves";
      break;
    }
    if (MerkleTree::verifyProof(tree.root(), *p0, absent)) {
      fail = "proof transplanted at " + std::to_string(count) + " leaves";
      break;
    }
    if (count >= 2) {
      MerkleProof bent = *p0;
      bent.path[0].second[0] ^= 1;
      if (MerkleTree::verifyProof(tree.root(), bent, values[0])) {
        fail = "tampered sibling verified at " + std::to_string(count) + " leaves";
        break;
      }
    }
    Digest off = tree.root();
    off[0] ^= 1;
    if (MerkleTree::verifyProof(off, *p0, values[0])) {
      fail = "wrong root verified at " + std::to_string(count) + " leaves";
      break;
    }
  }

  if (fail.empty()) {
    Bytes a{'a'}, b{'b'}, c{'c'};
    const std::string golden3 =
        "36642e73c2540ab121e3a6bf9545b0a24982cd830eb13d3cd19de3ce6c021ec1";
    const std::string goldenEmpty =
        "dbc1b4c900ffe48d575b5da5c638040125f65db0fe3e24494b76ea986457d986";
    if (toHex(MerkleTree::build({a, b, c}).root()) != golden3)
      fail = "three-leaf root drifted from its frozen value";
    else if (toHex(MerkleTree::emptyRoot()) != goldenEmpty)
      fail = "empty root drifted from its frozen value";
  }

  g.report(10, what, fail.empty(),
           fail.empty() ? std::to_string(proofsChecked) + " proofs, frozen roots match" : fail);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <scenario-dir>\n";
    return 2;
  }
  const std::string dir = argv[1];
  Gate gate;
  ChainAudit chains;
  bool chainInputs = true;

  crit1(gate, dir);
  crit2(gate, dir, chains, chainInputs);
  crit3(gate);
  crit4(gate, dir, chains, chainInputs);
  crit5(gate, dir);
  crit67(gate, dir, chains, chainInputs);
  crit8(gate, chains, chainInputs);
  crit9(gate, dir);
  crit10(gate);

  std::cout << (gate.failures == 0
                    ? "all criteria passed"
                    : std::to_string(gate.failures) + " criteria failed")
            << std::endl;
  return gate.failures;
}
