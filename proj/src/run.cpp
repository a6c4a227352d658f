#include "atx/run.hpp"

#include <algorithm>
#include <memory>
#include <set>

#include "atx/protocol.hpp"

namespace atx {
namespace {

void emitMeta(TraceLog& log, const ScenarioSpec& spec, ScheduleMode mode) {
  auto kv = [&](std::vector<std::pair<std::string, std::string>> fields) {
    log.add(0, EvKind::Meta, std::move(fields));
  };
  kv({{"k", "n"}, {"v", std::to_string(spec.n)}});
  kv({{"k", "f"}, {"v", std::to_string(spec.f)}});
  kv({{"k", "seed"}, {"v", std::to_string(spec.seed)}});
  kv({{"k", "crypto"},
      {"v", spec.crypto == SigScheme::Ed25519 ? "ed25519" : "keyed-hash-mock"}});
  kv({{"k", "schedule"}, {"v", scheduleModeName(mode)}});
  for (const auto& ai : spec.accounts)
    kv({{"k", "account"},
        {"id", ai.id},
        {"owners", joinIds(ai.owners)},
        {"genesis", std::to_string(ai.genesisAmount)}});
  for (const auto& t : spec.transfers)
    kv({{"k", "transfer"},
        {"label", t.label},
        {"client", t.client},
        {"to", t.to},
        {"amount", std::to_string(t.amount)},
        {"at", std::to_string(t.at)}});
  for (const auto& [rid, preset] : spec.byzReplicas)
    kv({{"k", "byz-replica"}, {"id", rid}, {"preset", replicaPresetName(preset)}});
  for (const auto& [cid, preset] : spec.byzClients)
    kv({{"k", "byz-client"}, {"id", cid}, {"preset", clientPresetName(preset)}});
}

// Transfer scheduling state shared by engine callbacks.
struct Sched {
  std::map<std::string, const TransferSpec*> byLabel;
  std::map<std::string, std::set<std::string>> waitingOn;
  std::map<std::string, std::vector<std::string>> dependents;
  std::map<std::string, OpReport> reports;
};

}  // namespace

Result<RunReport> runScenario(const ScenarioSpec& spec, const RunOptions& opt) {
  if (auto st = spec.validate(); !st.ok())
    return Result<RunReport>(Err::ConfigError, st.note());
  auto keysR =
      KeyRegistry::make(spec.replicaIds(), spec.clientIds(), spec.f, spec.crypto, spec.seed);
  if (!keysR.ok()) return Result<RunReport>(Err::ConfigError, keysR.note());
  KeyRegistry keys = keysR.take();
  auto accR = AccountRegistry::make(spec.accounts);
  if (!accR.ok()) return Result<RunReport>(Err::ConfigError, accR.note());
  AccountRegistry accounts = accR.take();

  ScheduleMode mode = opt.modeOverride.value_or(spec.mode);
  TraceLog log;
  emitMeta(log, spec, mode);

  Engine::Options eo;
  eo.mode = mode;
  eo.seed = spec.seed;
  eo.minDelay = spec.minDelay;
  eo.maxDelay = spec.maxDelay;
  eo.maxEvents = opt.maxEventsOverride.value_or(spec.maxEvents);
  eo.oracle = opt.oracle;
  Engine eng(eo, log);
  Ctx ctx{&keys, &accounts, &eng, {}};

  std::set<ReplicaId> byzSet;
  for (const auto& [rid, preset] : spec.byzReplicas) byzSet.insert(rid);
  eng.observatory().init(&keys, &accounts, &log, byzSet);

  std::vector<std::unique_ptr<Process>> procs;
  std::vector<Replica*> replicas;
  for (const auto& rid : spec.replicaIds()) {
    std::unique_ptr<Replica> r;
    auto it = spec.byzReplicas.find(rid);
    if (it == spec.byzReplicas.end()) {
      r = std::make_unique<Replica>(&ctx, rid);
    } else {
      switch (it->second) {
        case ReplicaPreset::Crash:
          r = std::make_unique<CrashReplica>(&ctx, rid);
          break;
        case ReplicaPreset::EquivocatePrepare:
          r = std::make_unique<EquivocatePrepareReplica>(&ctx, rid);
          break;
        case ReplicaPreset::SignConflictingClose:
          r = std::make_unique<SignConflictingCloseReplica>(&ctx, rid);
          break;
        case ReplicaPreset::Withhold:
          r = std::make_unique<WithholdReplica>(&ctx, rid);
          break;
      }
    }
    replicas.push_back(r.get());
    eng.registerProcess(r.get());
    procs.push_back(std::move(r));
  }

  const AccountId victim = spec.accounts.front().id;
  std::map<ProcessId, ProtocolClient*> clients;  // honest only
  std::vector<ReplayClient*> replayers;
  std::vector<StorageGarbageClient*> garblers;
  std::vector<DivergentNotarizeClient*> divergers;
  for (const auto& cid : spec.clientIds()) {
    auto bit = spec.byzClients.find(cid);
    if (bit == spec.byzClients.end()) {
      auto c = std::make_unique<ProtocolClient>(&ctx, cid);
      clients[cid] = c.get();
      eng.registerProcess(c.get());
      procs.push_back(std::move(c));
      continue;
    }
    switch (bit->second) {
      case ClientPreset::Replay: {
        auto c = std::make_unique<ReplayClient>(&ctx, cid);
        replayers.push_back(c.get());
        eng.registerProcess(c.get());
        procs.push_back(std::move(c));
        break;
      }
      case ClientPreset::StorageGarbage: {
        auto c = std::make_unique<StorageGarbageClient>(&ctx, cid);
        garblers.push_back(c.get());
        eng.registerProcess(c.get());
        procs.push_back(std::move(c));
        break;
      }
      case ClientPreset::DivergentNotarize: {
        auto c = std::make_unique<DivergentNotarizeClient>(&ctx, cid);
        divergers.push_back(c.get());
        eng.registerProcess(c.get());
        procs.push_back(std::move(c));
        break;
      }
    }
  }

  for (Replica* r : replicas) r->boot();
  for (auto* c : replayers) c->boot(victim);
  for (auto* c : garblers) c->boot(victim);
  for (auto* c : divergers) c->boot();

  auto sched = std::make_shared<Sched>();
  for (const auto& t : spec.transfers) {
    sched->byLabel[t.label] = &t;
    for (const auto& d : t.after) {
      sched->waitingOn[t.label].insert(d);
      sched->dependents[d].push_back(t.label);
    }
  }
  auto launch = std::make_shared<std::function<void(const std::string&)>>();
  *launch = [&eng, &clients, sched, launch](const std::string& label) {
    const TransferSpec* t = sched->byLabel.at(label);
    ProtocolClient* c = clients.at(t->client);
    TransferRequest req{t->label, t->to, t->amount, t->fixedId};
    c->startTransfer(req, [sched, launch, &eng, label](TransferResult res) {
      sched->reports[label] = OpReport{label, res.result, txIdHex(res.tx), res.rootOpId, 0};
      for (const auto& dep : sched->dependents[label]) {
        auto& waiting = sched->waitingOn[dep];
        waiting.erase(label);
        if (waiting.empty()) {
          int64_t startAt = std::max<int64_t>(sched->byLabel.at(dep)->at, eng.now() + 1);
          eng.invokeAt(startAt, [launch, dep] { (*launch)(dep); });
        }
      }
    });
  };
  for (const auto& t : spec.transfers)
    if (t.after.empty())
      eng.invokeAt(std::max<int64_t>(t.at, 0), [launch, l = t.label] { (*launch)(l); });

  eng.run();
  *launch = {};  // break the launch closure's self-capture cycle

  RunReport rep;
  rep.hitBound = eng.hitBound();
  if (opt.queryAccountsAfter && !rep.hitBound) {
    for (const auto& ai : accounts.accounts()) {
      ProtocolClient* reader = nullptr;
      for (const auto& o : ai.owners) {
        auto f = clients.find(o);
        if (f != clients.end()) {
          reader = f->second;
          break;
        }
      }
      if (!reader && !clients.empty()) reader = clients.begin()->second;
      if (!reader) continue;
      auto out = std::make_shared<TxSet>();
      reader->startGetAccountTransactions(ai.id, [out](TxSet s) { *out = std::move(s); });
      eng.run();
      std::vector<std::string> ids;
      ids.reserve(out->size());
      for (const auto& tx : *out) ids.push_back(txIdHex(tx));
      std::sort(ids.begin(), ids.end());
      rep.queried[ai.id] = std::move(ids);
    }
  }

  for (const auto& t : spec.transfers) {
    auto it = sched->reports.find(t.label);
    if (it == sched->reports.end()) {
      rep.transfers.push_back(OpReport{t.label, "incomplete", "", 0, 0});
      continue;
    }
    OpReport r = it->second;
    auto rtt = measureRttFromTrace(log.trace(), r.rootOpId);
    r.rtts = rtt.ok() ? *rtt : 0;
    rep.transfers.push_back(std::move(r));
  }
  for (const auto& ev : log.trace().events) {
    if (ev.kind == EvKind::ConsensusInvoke)
      rep.consensusInvocations[ev.getOr("acc", "?")]++;
    else if (ev.kind == EvKind::Commit)
      rep.commits++;
  }
  rep.trace = log.take();
  return rep;
}

}  // namespace atx
