#include "atx/checker.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include "atx/types.hpp"

namespace atx {
namespace {

using SSet = std::set<std::string>;
using AE = std::pair<std::string, uint64_t>;  // (account, epoch/instance)

SSet idSet(const std::string& joined) {
  auto v = splitIds(joined);
  return SSet(v.begin(), v.end());
}

std::string shortId(const std::string& id) {
  return id.size() > 12 ? id.substr(0, 12) + ".." : id;
}

struct TxInfo {
  std::string from, to;
  uint64_t amount = 0;
};

struct OpInfo {
  uint64_t op = 0;
  std::string kind, label, client, acc, to, tx, result;
  uint64_t amount = 0;
  size_t startIdx = 0, endIdx = 0;
  bool ended = false;
  SSet queryTxs;
};

struct CommitInfo {
  size_t idx = 0;
  std::string tx, from, to;
  uint64_t amount = 0;
};

struct StateRec {  // a decided or notarized close state
  size_t idx = 0;
  SSet sel, canc, credits;
};

struct Table {
  uint64_t n = 0, f = 0;
  std::map<std::string, uint64_t> genesis;  // account -> endowment
  std::map<std::string, SSet> owners;       // account -> owner client ids
  SSet byzReplicas, byzClients;
  std::map<std::string, TxInfo> txs;  // tx id -> definition
  std::map<uint64_t, OpInfo> ops;
  std::vector<CommitInfo> commits;                // in trace order
  std::map<std::string, size_t> firstCommit;      // tx id -> commits[] index
  std::map<AE, StateRec> decides;                 // (acc, closed epoch)
  std::map<AE, std::vector<StateRec>> notarized;  // (acc, new epoch)
  std::map<AE, std::vector<std::pair<size_t, SSet>>> prepared;
  std::map<AE, std::vector<std::pair<size_t, std::string>>> accepted;
  std::map<std::string, std::vector<size_t>> invokes;  // acc -> invoke idx

  bool hasByz() const { return !byzReplicas.empty() || !byzClients.empty(); }
  bool isTransfer(const OpInfo& o) const { return o.kind == "transfer"; }
};

// Builds the lookup table; returns an error description on the first
// structural inconsistency.
std::optional<std::string> build(const Trace& t, Table& tb) {
  for (const TraceEvent& e : t.events) {
    switch (e.kind) {
      case EvKind::Meta: {
        const std::string k = e.getOr("k", "");
        if (k == "n") tb.n = e.getU64("v");
        if (k == "f") tb.f = e.getU64("v");
        if (k == "account") {
          tb.genesis[e.getOr("id", "")] = e.getU64("genesis");
          tb.owners[e.getOr("id", "")] = idSet(e.getOr("owners", "-"));
        }
        if (k == "byz-replica") tb.byzReplicas.insert(e.getOr("id", ""));
        if (k == "byz-client") tb.byzClients.insert(e.getOr("id", ""));
        break;
      }
      case EvKind::TxDef: {
        TxInfo ti{e.getOr("from", "-"), e.getOr("to", ""), e.getU64("amount")};
        auto [it, fresh] = tb.txs.emplace(e.getOr("tx", ""), ti);
        if (!fresh && (it->second.from != ti.from || it->second.to != ti.to ||
                       it->second.amount != ti.amount))
          return "conflicting definitions for tx " + shortId(it->first);
        break;
      }
      case EvKind::OpStart: {
        uint64_t op = e.getU64("op");
        auto [it, fresh] = tb.ops.emplace(op, OpInfo{});
        if (!fresh) return "duplicate op start for op " + std::to_string(op);
        OpInfo& o = it->second;
        o.op = op;
        o.kind = e.getOr("kind", "");
        o.label = e.getOr("label", "");
        o.client = e.getOr("client", "");
        o.acc = e.getOr(o.kind == "transfer" ? "from" : "acc", "");
        o.to = e.getOr("to", "");
        o.tx = e.getOr("tx", "");
        o.amount = e.getU64("amount");
        o.startIdx = e.idx;
        break;
      }
      case EvKind::OpEnd: {
        auto it = tb.ops.find(e.getU64("op"));
        if (it == tb.ops.end())
          return "op end without start, op " + e.getOr("op", "?");
        OpInfo& o = it->second;
        if (o.ended) return "duplicate op end for op " + std::to_string(o.op);
        o.ended = true;
        o.endIdx = e.idx;
        o.result = e.getOr("result", "");
        if (o.kind == "query") o.queryTxs = idSet(e.getOr("txs", "-"));
        break;
      }
      case EvKind::Commit: {
        CommitInfo c{e.idx, e.getOr("tx", ""), e.getOr("from", "-"),
                     e.getOr("to", ""), e.getU64("amount")};
        auto ti = tb.txs.find(c.tx);
        if (ti == tb.txs.end())
          return "commit of undefined tx " + shortId(c.tx);
        if (ti->second.from != c.from || ti->second.to != c.to ||
            ti->second.amount != c.amount)
          return "commit disagrees with definition of tx " + shortId(c.tx);
        tb.firstCommit.emplace(c.tx, tb.commits.size());
        tb.commits.push_back(std::move(c));
        break;
      }
      case EvKind::ConsensusInvoke:
        tb.invokes[e.getOr("acc", "")].push_back(e.idx);
        break;
      case EvKind::ConsensusDecide: {
        AE key{e.getOr("acc", ""), e.getU64("inst")};
        StateRec st{e.idx, idSet(e.getOr("sel", "-")), idSet(e.getOr("canc", "-")),
                    idSet(e.getOr("credits", "-"))};
        if (!tb.decides.emplace(key, std::move(st)).second)
          return "two decisions for account " + key.first + " instance " +
                 std::to_string(key.second);
        break;
      }
      case EvKind::CertCap: {
        const std::string cat = e.getOr("cat", "");
        AE key{e.getOr("acc", ""), e.getU64("ep")};
        if (cat == "prepared")
          tb.prepared[key].emplace_back(e.idx, idSet(e.getOr("txs", "-")));
        else if (cat == "accepted")
          tb.accepted[key].emplace_back(e.idx, e.getOr("tx", ""));
        else if (cat == "closestate") {
          // informational; the decided state is the authority
        } else if (cat == "notarized")
          tb.notarized[key].push_back(StateRec{e.idx, idSet(e.getOr("sel", "-")),
                                               idSet(e.getOr("canc", "-")),
                                               idSet(e.getOr("credits", "-"))});
        break;
      }
      default:
        break;
    }
  }
  for (const auto& [op, o] : tb.ops)
    if (o.ended && o.endIdx <= o.startIdx)
      return "op " + std::to_string(op) + " ends before it starts";
  return std::nullopt;
}

void add(CheckReport& rep, std::string name, bool pass, std::string detail = "") {
  rep.results.push_back({std::move(name), pass, std::move(detail)});
  rep.allPass = rep.allPass && pass;
}

// Each transaction is committed at most once; genesis endowments appear at
// most once per account and match the configured amount.
void commitUnique(const Table& tb, CheckReport& rep) {
  std::set<std::string> seen;
  std::set<std::string> genesisDone;
  for (const auto& c : tb.commits) {
    if (!seen.insert(c.tx).second) {
      add(rep, "commit-unique", false,
          "tx " + shortId(c.tx) + " committed twice (second at event " +
              std::to_string(c.idx) + ")");
      return;
    }
    if (c.from == "-") {
      auto g = tb.genesis.find(c.to);
      if (g == tb.genesis.end() || g->second != c.amount) {
        add(rep, "commit-unique", false,
            "genesis commit for " + c.to + " does not match the configuration");
        return;
      }
      if (!genesisDone.insert(c.to).second) {
        add(rep, "commit-unique", false,
            "two genesis endowments committed for " + c.to);
        return;
      }
    }
  }
  add(rep, "commit-unique", true);
}

// Replaying commits in trace order never drives any balance negative.
void noNegativeBalances(const Table& tb, CheckReport& rep) {
  std::map<std::string, Int128> bal;
  for (const auto& c : tb.commits) {
    if (c.from != "-") {
      bal[c.from] -= static_cast<Int128>(c.amount);
      if (bal[c.from] < 0) {
        add(rep, "no-negative-balances", false,
            "account " + c.from + " overdrawn by tx " + shortId(c.tx) +
                " at event " + std::to_string(c.idx) + " (balance " +
                formatInt128(bal[c.from]) + ")");
        return;
      }
    }
    bal[c.to] += static_cast<Int128>(c.amount);
  }
  add(rep, "no-negative-balances", true);
}

// A committed transfer was issued by a client operation in this run, unless a
// byzantine client owns the debited account (it can sign anything).
void committedAuthorized(const Table& tb, CheckReport& rep) {
  std::set<std::string> issued;
  for (const auto& [op, o] : tb.ops)
    if (tb.isTransfer(o) && !o.tx.empty()) issued.insert(o.tx);
  for (const auto& c : tb.commits) {
    if (c.from == "-") continue;
    if (issued.count(c.tx)) continue;
    bool byzOwner = false;
    auto ow = tb.owners.find(c.from);
    if (ow != tb.owners.end())
      for (const auto& cid : ow->second)
        if (tb.byzClients.count(cid)) byzOwner = true;
    if (!byzOwner) {
      add(rep, "committed-authorized", false,
          "tx " + shortId(c.tx) + " debits " + c.from +
              " but was never issued by an owner operation");
      return;
    }
  }
  add(rep, "committed-authorized", true);
}

// Transfers reported ok committed during the operation; transfers reported
// failed never commit, anywhere in the trace.
void reportedOutcomesBinding(const Table& tb, CheckReport& rep) {
  for (const auto& [op, o] : tb.ops) {
    if (!tb.isTransfer(o) || !o.ended) continue;
    auto fc = tb.firstCommit.find(o.tx);
    if (o.result == "ok") {
      if (fc == tb.firstCommit.end()) {
        add(rep, "ok-means-committed", false,
            "transfer " + o.label + " reported ok but tx " + shortId(o.tx) +
                " never committed");
        return;
      }
      size_t ci = tb.commits[fc->second].idx;
      if (ci <= o.startIdx || ci >= o.endIdx) {
        add(rep, "ok-means-committed", false,
            "transfer " + o.label + " reported ok but tx committed outside the "
            "operation window (event " + std::to_string(ci) + ")");
        return;
      }
    } else if (o.result == "fail" && fc != tb.firstCommit.end()) {
      add(rep, "ok-means-committed", false,
          "transfer " + o.label + " reported failed but tx " + shortId(o.tx) +
              " committed at event " + std::to_string(tb.commits[fc->second].idx));
      return;
    }
  }
  add(rep, "ok-means-committed", true);
}

// The commit order is a single sequential history every client's view embeds
// into: operations that do not overlap in the trace commit in their real-time
// order.
void realTimeOrder(const Table& tb, CheckReport& rep) {
  std::vector<const OpInfo*> done;
  for (const auto& [op, o] : tb.ops)
    if (tb.isTransfer(o) && o.ended && tb.firstCommit.count(o.tx))
      done.push_back(&o);
  for (const OpInfo* a : done)
    for (const OpInfo* b : done) {
      if (a == b || a->endIdx >= b->startIdx) continue;
      size_t ca = tb.firstCommit.at(a->tx), cb = tb.firstCommit.at(b->tx);
      if (ca >= cb) {
        add(rep, "real-time-order", false,
            "transfer " + a->label + " finished before " + b->label +
                " started yet commits after it");
        return;
      }
    }
  add(rep, "real-time-order", true);
}

// A transaction cancelled by any close decision stays uncommitted forever.
void cancelledFinal(const Table& tb, CheckReport& rep) {
  auto checkSet = [&](const SSet& canc, const std::string& where) -> bool {
    for (const auto& id : canc)
      if (tb.firstCommit.count(id)) {
        add(rep, "cancelled-never-commits", false,
            "tx " + shortId(id) + " cancelled by " + where +
                " but committed at event " +
                std::to_string(tb.commits[tb.firstCommit.at(id)].idx));
        return false;
      }
    return true;
  };
  for (const auto& [key, st] : tb.decides)
    if (!checkSet(st.canc, "the decision for " + key.first + " epoch " +
                               std::to_string(key.second)))
      return;
  for (const auto& [key, sts] : tb.notarized)
    for (const auto& st : sts)
      if (!checkSet(st.canc, "the notarized state of " + key.first + " epoch " +
                                 std::to_string(key.second)))
        return;
  add(rep, "cancelled-never-commits", true);
}

// Every debit that gathered an accept certificate in an epoch survives that
// epoch's close decision.
void acceptedSurviveClose(const Table& tb, CheckReport& rep) {
  for (const auto& [key, accs] : tb.accepted) {
    auto d = tb.decides.find(key);
    if (d == tb.decides.end()) continue;  // epoch never closed
    for (const auto& [idx, tx] : accs)
      if (!d->second.sel.count(tx)) {
        add(rep, "accepted-survive-close", false,
            "tx " + shortId(tx) + " accepted in " + key.first + " epoch " +
                std::to_string(key.second) + " but not selected by its close");
        return;
      }
  }
  add(rep, "accepted-survive-close", true);
}

// At most one state is notarized per (account, epoch), and it equals the
// decided close state of the epoch it supersedes.
void notarizeUnique(const Table& tb, CheckReport& rep) {
  for (const auto& [key, sts] : tb.notarized) {
    if (sts.size() > 1) {
      add(rep, "notarization-unique", false,
          std::to_string(sts.size()) + " states notarized for " + key.first +
              " epoch " + std::to_string(key.second));
      return;
    }
    if (key.second < 2) {
      add(rep, "notarization-unique", false,
          "state notarized for bootstrap epoch of " + key.first);
      return;
    }
    auto d = tb.decides.find({key.first, key.second - 1});
    if (d == tb.decides.end()) {
      add(rep, "notarization-unique", false,
          "state notarized for " + key.first + " epoch " +
              std::to_string(key.second) + " without a close decision");
      return;
    }
    const StateRec& st = sts.front();
    if (st.sel != d->second.sel || st.canc != d->second.canc ||
        st.credits != d->second.credits) {
      add(rep, "notarization-unique", false,
          "notarized state for " + key.first + " epoch " +
              std::to_string(key.second) + " differs from the close decision");
      return;
    }
  }
  add(rep, "notarization-unique", true);
}

// Close decisions for one account grow monotonically: later epochs keep
// earlier selections and cancellations, and never resurrect a cancelled tx.
void decisionsMonotone(const Table& tb, CheckReport& rep) {
  std::map<std::string, std::vector<std::pair<uint64_t, const StateRec*>>> byAcc;
  for (const auto& [key, st] : tb.decides)
    byAcc[key.first].emplace_back(key.second, &st);
  for (auto& [acc, v] : byAcc) {
    std::sort(v.begin(), v.end());
    for (size_t i = 0; i + 1 < v.size(); ++i) {
      const auto& [e1, s1] = v[i];
      const auto& [e2, s2] = v[i + 1];
      if (!std::includes(s2->sel.begin(), s2->sel.end(), s1->sel.begin(),
                         s1->sel.end()) ||
          !std::includes(s2->canc.begin(), s2->canc.end(), s1->canc.begin(),
                         s1->canc.end())) {
        add(rep, "decisions-monotone", false,
            "decision for " + acc + " epoch " + std::to_string(e2) +
                " drops outcomes from epoch " + std::to_string(e1));
        return;
      }
      for (const auto& id : s2->sel)
        if (s1->canc.count(id)) {
          add(rep, "decisions-monotone", false,
              "tx " + shortId(id) + " cancelled in " + acc + " epoch " +
                  std::to_string(e1) + " but selected in epoch " +
                  std::to_string(e2));
          return;
        }
    }
  }
  add(rep, "decisions-monotone", true);
}

// All prepare certificates of one epoch lie on a single inclusion chain.
void preparedChain(const Table& tb, CheckReport& rep) {
  for (const auto& [key, sets] : tb.prepared)
    for (size_t i = 0; i < sets.size(); ++i)
      for (size_t j = i + 1; j < sets.size(); ++j) {
        const SSet& a = sets[i].second;
        const SSet& b = sets[j].second;
        bool ab = std::includes(b.begin(), b.end(), a.begin(), a.end());
        bool ba = std::includes(a.begin(), a.end(), b.begin(), b.end());
        if (!ab && !ba) {
          add(rep, "prepared-sets-chain", false,
              "incomparable prepared sets for " + key.first + " epoch " +
                  std::to_string(key.second) + " (events " +
                  std::to_string(sets[i].first) + ", " +
                  std::to_string(sets[j].first) + ")");
          return;
        }
      }
  add(rep, "prepared-sets-chain", true);
}

// The sum of distinct accepted debits of an account never exceeds the credits
// already committed to it at that moment.
void acceptsFunded(const Table& tb, CheckReport& rep) {
  // credit arrival events per account, in trace order
  std::map<std::string, std::vector<std::pair<size_t, uint64_t>>> creditAt;
  for (const auto& c : tb.commits)
    creditAt[c.to].emplace_back(c.idx, c.amount);
  // first acceptance per (account, tx)
  std::map<std::string, std::vector<std::pair<size_t, std::string>>> accBy;
  for (const auto& [key, accs] : tb.accepted)
    for (const auto& [idx, tx] : accs) accBy[key.first].emplace_back(idx, tx);
  for (auto& [acc, v] : accBy) {
    std::sort(v.begin(), v.end());
    Int128 spent = 0;
    SSet seen;
    size_t ci = 0;
    Int128 funded = 0;
    const auto& credits = creditAt[acc];
    for (const auto& [idx, tx] : v) {
      if (!seen.insert(tx).second) continue;
      auto ti = tb.txs.find(tx);
      if (ti == tb.txs.end()) {
        add(rep, "accepts-funded", false, "accepted tx " + shortId(tx) + " undefined");
        return;
      }
      while (ci < credits.size() && credits[ci].first < idx)
        funded += static_cast<Int128>(credits[ci++].second);
      spent += static_cast<Int128>(ti->second.amount);
      if (spent > funded) {
        add(rep, "accepts-funded", false,
            "account " + acc + " accepted " + formatInt128(spent) +
                " against only " + formatInt128(funded) +
                " committed credits by event " + std::to_string(idx));
        return;
      }
    }
  }
  add(rep, "accepts-funded", true);
}

// Failure-free runs whose same-account transfers never overlap finish on the
// fast path alone; the close/consensus machinery stays untouched.
void consensusOnlyUnderContention(const Table& tb, CheckReport& rep) {
  if (tb.hasByz()) {
    add(rep, "consensus-only-under-contention", true, "byzantine run, waived");
    return;
  }
  for (const auto& [acc, idxs] : tb.invokes) {
    if (idxs.empty()) continue;
    bool excused = false;
    std::vector<const OpInfo*> from;
    for (const auto& [op, o] : tb.ops) {
      if (!tb.isTransfer(o) || o.acc != acc) continue;
      if (!o.ended || o.result != "ok") excused = true;  // some outcome failed
      from.push_back(&o);
    }
    for (size_t i = 0; i < from.size() && !excused; ++i)
      for (size_t j = i + 1; j < from.size() && !excused; ++j) {
        size_t endI = from[i]->ended ? from[i]->endIdx : SIZE_MAX;
        size_t endJ = from[j]->ended ? from[j]->endIdx : SIZE_MAX;
        if (from[i]->startIdx < endJ && from[j]->startIdx < endI) excused = true;
      }
    if (!excused) {
      add(rep, "consensus-only-under-contention", false,
          "consensus invoked for " + acc +
              " although its transfers were sequential and all succeeded");
      return;
    }
  }
  add(rep, "consensus-only-under-contention", true);
}

// Account queries return every transaction committed for the account before
// the query started, and nothing that was not committed by the time it ended.
void queryComplete(const Table& tb, CheckReport& rep) {
  for (const auto& [op, o] : tb.ops) {
    if (o.kind != "query" || !o.ended) continue;
    for (const auto& c : tb.commits) {
      if (c.idx >= o.startIdx) break;
      if (c.from != o.acc && c.to != o.acc) continue;
      if (!o.queryTxs.count(c.tx)) {
        add(rep, "query-complete", false,
            "query on " + o.acc + " missed tx " + shortId(c.tx) +
                " committed before it started");
        return;
      }
    }
    for (const auto& id : o.queryTxs) {
      auto fc = tb.firstCommit.find(id);
      bool okTx = fc != tb.firstCommit.end() &&
                  tb.commits[fc->second].idx <= o.endIdx;
      if (okTx) {
        const auto& c = tb.commits[fc->second];
        okTx = c.from == o.acc || c.to == o.acc;
      }
      if (!okTx) {
        add(rep, "query-complete", false,
            "query on " + o.acc + " returned tx " + shortId(id) +
                " that was not committed for the account by its end");
        return;
      }
    }
  }
  add(rep, "query-complete", true);
}

}  // namespace

CheckReport checkTrace(const Trace& t) {
  CheckReport rep;
  Table tb;
  if (auto err = build(t, tb)) {
    add(rep, "trace-well-formed", false, *err);
    return rep;
  }
  add(rep, "trace-well-formed", true);
  commitUnique(tb, rep);
  noNegativeBalances(tb, rep);
  committedAuthorized(tb, rep);
  reportedOutcomesBinding(tb, rep);
  realTimeOrder(tb, rep);
  cancelledFinal(tb, rep);
  acceptedSurviveClose(tb, rep);
  notarizeUnique(tb, rep);
  decisionsMonotone(tb, rep);
  preparedChain(tb, rep);
  acceptsFunded(tb, rep);
  consensusOnlyUnderContention(tb, rep);
  queryComplete(tb, rep);
  return rep;
}

}  // namespace atx
