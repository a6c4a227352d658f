#include "atx/sim.hpp"

#include <algorithm>
#include <cassert>

namespace atx {

bool Ctx::wellFormed(const Transaction& tx) const {
  auto it = wfMemo.find(tx.digest());
  if (it != wfMemo.end()) return it->second;
  bool ok = validateWellFormed(tx, *accounts, *keys);
  wfMemo.emplace(tx.digest(), ok);
  return ok;
}

// ---------------------------------------------------------------------------
// Observatory
// ---------------------------------------------------------------------------

void Observatory::init(const KeyRegistry* keys, const AccountRegistry* accounts,
                       TraceLog* log, std::set<ReplicaId> byzReplicas) {
  keys_ = keys;
  accounts_ = accounts;
  log_ = log;
  byz_ = std::move(byzReplicas);
  quorum_ = keys->quorum();
  byzN_ = byz_.size();
}

void Observatory::noteAppendTree(const StorageId& inst, const std::string& key,
                                 const std::vector<std::pair<Bytes, Bytes>>& pairs) {
  std::vector<Bytes> values;
  values.reserve(pairs.size());
  for (const auto& [v, c] : pairs) values.push_back(v);
  MerkleTree t = MerkleTree::build(values);
  appendTrees_.emplace(SKey{inst + "|" + key, toHex(t.root())}, std::move(values));
}

void Observatory::onSend(int64_t tick, const ProcessId& from, const Message& m) {
  bool correctReplica = keys_->isReplica(from) && !byz_.count(from);

  if (const auto* req = std::get_if<AppendKeyReq>(&m)) {
    noteAppendTree(req->inst, req->key, req->pairs);
    return;
  }
  if (const auto* resp = std::get_if<AppendKeyResp>(&m)) {
    if (!correctReplica) return;
    SKey k{resp->inst + "|" + resp->key, toHex(resp->root)};
    auto treeIt = appendTrees_.find(k);
    if (treeIt == appendTrees_.end()) return;  // root never seen in a request
    auto& signers = appendSigners_[k];
    signers.insert(from);
    if (!reached(signers.size())) return;
    if (resp->inst != sidGlobal() || resp->key != "txs") return;
    for (const Bytes& v : treeIt->second) {
      if (committed_.count(v)) continue;
      Dec d(v);
      Transaction tx;
      if (!Transaction::decode(d, tx) || !d.done()) continue;
      committed_.insert(v);
      log_->noteTx(tx);
      log_->add(tick, EvKind::Commit,
                {{"tx", txIdHex(tx)},
                 {"from", tx.sender() ? *tx.sender() : "-"},
                 {"to", tx.recipient()},
                 {"amount", std::to_string(tx.amount())}});
    }
    return;
  }
  if (const auto* resp = std::get_if<PrepareRespMsg>(&m)) {
    if (!correctReplica || resp->sig.empty()) return;
    TxSet set;
    for (const auto& dd : resp->debits) set.insert(dd.tx);
    AEKey ae{resp->acc, resp->ep};
    std::string dig = toHex(sha256(payload::encodeTxSet(set)));
    preparedSets_.emplace(std::pair{ae, dig}, set);
    auto& signers = prepareSigners_[{ae, dig}];
    signers.insert(from);
    if (reached(signers.size()) && !preparedEmitted_.count({ae, dig})) {
      preparedEmitted_.insert({ae, dig});
      for (const auto& tx : set) log_->noteTx(tx);
      log_->add(tick, EvKind::CertCap,
                {{"cat", "prepared"},
                 {"acc", resp->acc},
                 {"ep", std::to_string(resp->ep)},
                 {"txs", txIdListOf(set)}});
    }
    return;
  }
  if (const auto* req = std::get_if<AcceptReq>(&m)) {
    TxSet set(req->debits.begin(), req->debits.end());
    std::vector<Bytes> values;
    for (const auto& tx : set) values.push_back(tx.encoded());
    MerkleTree t = MerkleTree::build(values);
    acceptTrees_.emplace(std::pair{AEKey{req->acc, req->ep}, toHex(t.root())}, set);
    return;
  }
  if (const auto* ack = std::get_if<AcceptAckMsg>(&m)) {
    if (!correctReplica) return;
    AEKey ae{ack->acc, ack->ep};
    auto treeIt = acceptTrees_.find({ae, toHex(ack->root)});
    if (treeIt == acceptTrees_.end()) return;
    auto& signers = acceptSigners_[{ae, toHex(ack->root)}];
    signers.insert(from);
    if (!reached(signers.size())) return;
    for (const auto& tx : treeIt->second) {
      if (acceptedEmitted_.count({ae, tx.encoded()})) continue;
      acceptedEmitted_.insert({ae, tx.encoded()});
      log_->noteTx(tx);
      log_->add(tick, EvKind::CertCap,
                {{"cat", "accepted"},
                 {"acc", ack->acc},
                 {"ep", std::to_string(ack->ep)},
                 {"tx", txIdHex(tx)}});
    }
    return;
  }
  if (const auto* resp = std::get_if<ConfirmStateRespMsg>(&m)) {
    if (!correctReplica || resp->sig.empty()) return;
    AEKey ae{resp->acc, resp->ep};
    TxSet sel(resp->selected.begin(), resp->selected.end());
    TxSet canc(resp->cancelled.begin(), resp->cancelled.end());
    std::string dig =
        toHex(sha256(payload::confirmStateResp(resp->acc, resp->ep, sel, canc)));
    confirmContent_.emplace(std::pair{ae, dig}, std::pair{sel, canc});
    auto& signers = confirmSigners_[{ae, dig}];
    signers.insert(from);
    if (reached(signers.size()) && !confirmEmitted_.count({ae, dig})) {
      confirmEmitted_.insert({ae, dig});
      for (const auto& tx : sel) log_->noteTx(tx);
      for (const auto& tx : canc) log_->noteTx(tx);
      log_->add(tick, EvKind::CertCap,
                {{"cat", "closestate"},
                 {"acc", resp->acc},
                 {"ep", std::to_string(resp->ep)},
                 {"sel", txIdListOf(sel)},
                 {"canc", txIdListOf(canc)}});
    }
    return;
  }
  if (const auto* req = std::get_if<CommitStateReq>(&m)) {
    AEKey ae{req->acc, req->ep};
    Bytes pl = payloadCommitStateResp(req->acc, req->ep, req->state);
    std::string dig = toHex(sha256(pl));
    notarizePayloads_.emplace(std::pair{ae, dig}, std::move(pl));
    notarizeStates_.emplace(std::pair{ae, dig}, req->state);
    return;
  }
  if (const auto* resp = std::get_if<CommitStateRespMsg>(&m)) {
    if (!correctReplica || resp->sigState.empty()) return;
    // The share is a signature over one of the candidate state payloads seen
    // in requests; verify to find which state this share notarizes.
    AEKey ae{resp->acc, resp->ep};
    for (auto it = notarizePayloads_.lower_bound({ae, ""});
         it != notarizePayloads_.end() && it->first.first == ae; ++it) {
      if (!keys_->verify(from, it->second, resp->sigState)) continue;
      const std::string& dig = it->first.second;
      auto& signers = notarizeSigners_[{ae, dig}];
      signers.insert(from);
      if (reached(signers.size()) && !notarizeEmitted_.count({ae, dig})) {
        notarizeEmitted_.insert({ae, dig});
        const CloseState& st = notarizeStates_.at({ae, dig});
        for (const auto& tx : st.selected) log_->noteTx(tx);
        for (const auto& tx : st.cancelled) log_->noteTx(tx);
        for (const auto& [tx, c] : st.credits) log_->noteTx(tx);
        log_->add(tick, EvKind::CertCap,
                  {{"cat", "notarized"},
                   {"acc", resp->acc},
                   {"ep", std::to_string(resp->ep)},
                   {"dig", dig.substr(0, 16)},
                   {"sel", txIdListOf(st.selected)},
                   {"canc", txIdListOf(st.cancelled)},
                   {"credits", txIdListOf(keysOf(st.credits))}});
      }
      break;
    }
    return;
  }
  (void)tick;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

Engine::Engine(const Options& opt, TraceLog& log) : opt_(opt), log_(&log), rng_(opt.seed) {}

void Engine::registerProcess(Process* p) { procs_[p->pid()] = p; }

void Engine::invokeAt(int64_t tick, std::function<void()> fn) {
  assert(tick >= now_);
  fns_.emplace(QKey{tick, ++seq_}, std::move(fn));
}

void Engine::soon(std::function<void()> fn) {
  fns_.emplace(QKey{now_, ++seq_}, std::move(fn));
}

int64_t Engine::delayFor() {
  if (opt_.mode == ScheduleMode::RandomDelay) {
    std::uniform_int_distribution<int> d(opt_.minDelay, opt_.maxDelay);
    return d(rng_);
  }
  return 1;
}

TxId Engine::drawTxId() {
  TxId id(kTxIdLen);
  for (size_t i = 0; i < kTxIdLen; i += 8) {
    uint64_t w = rng_();
    for (size_t b = 0; b < 8 && i + b < kTxIdLen; ++b)
      id[i + b] = static_cast<uint8_t>(w >> (8 * b));
  }
  return id;
}

void Engine::send(const ProcessId& from, const ProcessId& to, Message m) {
  log_->add(now_, EvKind::MsgSend,
            {{"src", from},
             {"dst", to},
             {"mt", msgTypeName(msgTypeOf(m))},
             {"req", std::to_string(msgReqOf(m))}});
  obs_.onSend(now_, from, m);
  dlvs_.emplace(QKey{now_ + delayFor(), ++seq_}, Delivery{from, to, std::move(m)});
}

void Engine::propose(const ProcessId& proposer, const AccountId& acc, Epoch instance,
                     ConsensusValue v, std::function<void(ConsensusValue)> done) {
  std::string dig = toHex(v.first.digest()).substr(0, 16);
  log_->add(now_, EvKind::ConsensusInvoke,
            {{"acc", acc},
             {"inst", std::to_string(instance)},
             {"proc", proposer},
             {"dig", dig}});
  invokeAt(now_ + 1, [this, acc, instance, dig, v = std::move(v)]() mutable {
    auto key = std::pair{acc, instance};
    if (!decided_.count(key)) {
      log_->add(now_, EvKind::ConsensusDecide,
                {{"acc", acc},
                 {"inst", std::to_string(instance)},
                 {"dig", dig},
                 {"sel", txIdListOf(v.first.selected)},
                 {"canc", txIdListOf(v.first.cancelled)},
                 {"credits", txIdListOf(keysOf(v.first.credits))}});
      for (const auto& tx : v.first.selected) log_->noteTx(tx);
      for (const auto& tx : v.first.cancelled) log_->noteTx(tx);
      for (const auto& [tx, c] : v.first.credits) log_->noteTx(tx);
      decided_.emplace(key, std::move(v));
    }
  });
  invokeAt(now_ + 2, [this, acc, instance, done = std::move(done)] {
    done(decided_.at({acc, instance}));
  });
}

bool Engine::step() {
  if (++steps_ > opt_.maxEvents) {
    hitBound_ = true;
    fns_.clear();
    dlvs_.clear();
    return false;
  }
  return true;
}

void Engine::deliverNow(Delivery& d) {
  log_->add(now_, EvKind::MsgDeliver,
            {{"src", d.from},
             {"dst", d.to},
             {"mt", msgTypeName(msgTypeOf(d.msg))},
             {"req", std::to_string(msgReqOf(d.msg))}});
  auto it = procs_.find(d.to);
  if (it != procs_.end()) it->second->onMessage(d.from, d.msg);
}

void Engine::runStrict() {
  while (!fns_.empty() || !dlvs_.empty()) {
    QKey fk = fns_.empty() ? QKey{INT64_MAX, UINT64_MAX} : fns_.begin()->first;
    QKey dk = dlvs_.empty() ? QKey{INT64_MAX, UINT64_MAX} : dlvs_.begin()->first;
    if (!step()) return;
    if (fk < dk) {
      now_ = fk.first;
      auto fn = std::move(fns_.begin()->second);
      fns_.erase(fns_.begin());
      fn();
    } else {
      now_ = dk.first;
      Delivery d = std::move(dlvs_.begin()->second);
      dlvs_.erase(dlvs_.begin());
      deliverNow(d);
    }
  }
}

namespace {

// Semantic fingerprint for sweep pruning: two messages with equal
// fingerprints differ at most in signer identity and signature bytes, so
// delaying one or the other leads to equivalent executions.
Bytes normalizeForSweep(const Message& m) {
  Enc e;
  e.u8(static_cast<uint8_t>(msgTypeOf(m)));
  auto txList = [&e](const std::vector<Transaction>& txs) {
    std::vector<Bytes> elems;
    for (const auto& t : txs) elems.push_back(t.encoded());
    e.set(std::move(elems));
  };
  auto certTxList = [&e](const std::vector<CertTx>& cts) {
    std::vector<Bytes> elems;
    for (const auto& ct : cts) elems.push_back(ct.tx.encoded());  // cert bytes elided
    e.set(std::move(elems));
  };
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ReadKeyReq>) {
          e.u64(v.req).str(v.inst).str(v.key);
        } else if constexpr (std::is_same_v<T, ReadKeyResp>) {
          e.u64(v.req).str(v.inst).str(v.key);
          std::vector<Bytes> elems;
          for (const auto& [val, cert] : v.pairs) elems.push_back(val);
          e.set(std::move(elems));
        } else if constexpr (std::is_same_v<T, AppendKeyReq>) {
          e.u64(v.req).str(v.inst).str(v.key);
          std::vector<Bytes> elems;
          for (const auto& [val, cert] : v.pairs) elems.push_back(val);
          e.set(std::move(elems));
        } else if constexpr (std::is_same_v<T, AppendKeyResp>) {
          e.u64(v.req).str(v.inst).str(v.key).digest(v.root);
        } else if constexpr (std::is_same_v<T, PrepareReq>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
          std::vector<Bytes> elems;
          for (const auto& dd : v.debits) elems.push_back(dd.tx.encoded());
          e.set(std::move(elems));
          certTxList(v.credits);
        } else if constexpr (std::is_same_v<T, PrepareRespMsg>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
          std::vector<Bytes> elems;
          for (const auto& dd : v.debits) elems.push_back(dd.tx.encoded());
          e.set(std::move(elems));
          certTxList(v.credits);
          e.u8(v.sig.empty() ? 0 : 1);
        } else if constexpr (std::is_same_v<T, AlreadyPreparedMsg>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
          txList(v.preparedDebits);
        } else if constexpr (std::is_same_v<T, ClosedMsg>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
        } else if constexpr (std::is_same_v<T, AcceptReq>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
          txList(v.debits);
          certTxList(v.credits);
        } else if constexpr (std::is_same_v<T, AcceptAckMsg>) {
          e.u64(v.req).str(v.acc).u64(v.ep).digest(v.root);
        } else if constexpr (std::is_same_v<T, CloseReq>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
        } else if constexpr (std::is_same_v<T, CloseRespMsg>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
          certTxList(v.credits);
          txList(v.preparedDebits);
          txList(v.certDebits);
          e.u8(v.preparedCert ? 1 : 0);
        } else if constexpr (std::is_same_v<T, ConfirmStateReq>) {
          e.u64(v.req).str(v.acc).u64(v.ep).str(v.closer);
          txList(v.pendingDebits);
        } else if constexpr (std::is_same_v<T, ConfirmStateRespMsg>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
          txList(v.selected);
          txList(v.cancelled);
          e.u8(v.sig.empty() ? 0 : 1);
        } else if constexpr (std::is_same_v<T, InitCodMsg>) {
          e.str(v.acc).u64(v.ep).raw(v.state.encode());
        } else if constexpr (std::is_same_v<T, CommitStateReq>) {
          e.u64(v.req).str(v.acc).u64(v.ep).raw(v.state.encode());
        } else if constexpr (std::is_same_v<T, CommitStateRespMsg>) {
          e.u64(v.req).str(v.acc).u64(v.ep);
          e.u8(v.sigState.empty() ? 0 : 1).u8(v.sigTxs.empty() ? 0 : 1);
        }
      },
      m);
  return e.take();
}

}  // namespace

void Engine::runScriptTick(int64_t tick) {
  auto drainFns = [&] {
    while (!fns_.empty() && fns_.begin()->first.first <= tick) {
      if (!step()) return;
      now_ = tick;
      auto fn = std::move(fns_.begin()->second);
      fns_.erase(fns_.begin());
      fn();
    }
  };

  now_ = tick;
  drainFns();
  if (hitBound_) return;

  // Collect this tick's deliveries and bundle them by (target, source).
  struct Bundle {
    ProcessId from, to;
    uint64_t firstSeq = 0;
    std::vector<Delivery> msgs;
  };
  std::map<ProcessId, std::vector<Bundle>> byTarget;
  while (!dlvs_.empty() && dlvs_.begin()->first.first == tick) {
    Delivery d = std::move(dlvs_.begin()->second);
    uint64_t seq = dlvs_.begin()->first.second;
    dlvs_.erase(dlvs_.begin());
    auto& bundles = byTarget[d.to];
    Bundle* b = nullptr;
    for (auto& cand : bundles)
      if (cand.from == d.from) b = &cand;
    if (!b) {
      bundles.push_back(Bundle{d.from, d.to, seq, {}});
      b = &bundles.back();
    }
    b->msgs.push_back(std::move(d));
  }

  for (auto& [target, bundles] : byTarget) {
    if (hitBound_) return;
    std::sort(bundles.begin(), bundles.end(),
              [](const Bundle& a, const Bundle& b) { return a.firstSeq < b.firstSeq; });
    Process* tp = nullptr;
    if (auto it = procs_.find(target); it != procs_.end()) tp = it->second;

    // Split live bundles from provably ignored ones.
    std::vector<size_t> live, dead;
    for (size_t i = 0; i < bundles.size(); ++i) {
      bool isLive = false;
      for (const auto& d : bundles[i].msgs)
        if (!tp || !tp->wouldIgnore(d.msg)) isLive = true;
      (isLive ? live : dead).push_back(i);
    }
    auto deliverBundle = [&](size_t i) {
      for (auto& d : bundles[i].msgs) {
        if (!step()) return;
        deliverNow(d);
      }
    };
    for (size_t i : dead) deliverBundle(i);

    if (live.size() >= 2) {
      // One choice point: which sender's bundle arrives last.  Bundles with
      // identical fingerprints are interchangeable, so only distinct
      // fingerprints are offered as alternatives.  A choice is offered only
      // when reordering can change the target's behaviour.  Key appends
      // union into a set and accept requests store an already certified set,
      // so they commute with each other and with everything that touches
      // other replica substate; pure reads and client-bound responses leave
      // replica state alone entirely.  What does not commute: two prepares
      // (each extends the signed chain, so arrival order picks the chain
      // order) and a close-family message next to any other mutation (a
      // closing epoch refuses late work).
      int nChain = 0, nBarrier = 0, nCommut = 0;
      for (size_t i : live) {
        int cls = 0;
        for (const auto& d : bundles[i].msgs) {
          switch (msgTypeOf(d.msg)) {
            case MsgType::AppendKey:
            case MsgType::AcceptRequest:
              cls = std::max(cls, 1);
              break;
            case MsgType::Prepare:
              cls = std::max(cls, 2);
              break;
            case MsgType::Close:
            case MsgType::ConfirmState:
            case MsgType::InitCod:
            case MsgType::CommitCodInitialState:
              cls = 3;
              break;
            default:
              break;
          }
        }
        if (cls == 1) ++nCommut;
        if (cls == 2) ++nChain;
        if (cls == 3) ++nBarrier;
      }
      bool conflict =
          nChain >= 2 || (nBarrier >= 1 && nChain + nBarrier + nCommut >= 2);
      std::vector<Bytes> prints;
      std::vector<size_t> reps;  // representative bundle per distinct print
      for (size_t i : live) {
        Enc sig;
        for (const auto& d : bundles[i].msgs) sig.bytes(normalizeForSweep(d.msg));
        Bytes p = sig.take();
        if (std::find(prints.begin(), prints.end(), p) == prints.end()) {
          prints.push_back(p);
          reps.push_back(i);
        }
      }
      size_t delayed = conflict && reps.size() >= 2 && opt_.oracle
                           ? reps[static_cast<size_t>(
                                 opt_.oracle->choose(static_cast<int>(reps.size())))]
                           : live.back();
      for (size_t i : live)
        if (i != delayed) deliverBundle(i);
      deliverBundle(delayed);
    } else if (live.size() == 1) {
      deliverBundle(live[0]);
    }
    drainFns();
    if (hitBound_) return;
  }
  drainFns();
}

void Engine::run() {
  if (opt_.mode != ScheduleMode::Script) {
    runStrict();
    return;
  }
  while (!fns_.empty() || !dlvs_.empty()) {
    if (hitBound_) return;
    int64_t nextTick = INT64_MAX;
    if (!fns_.empty()) nextTick = std::min(nextTick, fns_.begin()->first.first);
    if (!dlvs_.empty()) nextTick = std::min(nextTick, dlvs_.begin()->first.first);
    runScriptTick(nextTick);
  }
}

// ---------------------------------------------------------------------------
// ClientBase
// ---------------------------------------------------------------------------

ClientBase::~ClientBase() {
  // Destroy leftover suspended operation frames (ops that never finished).
  for (auto& [opId, h] : liveOps_)
    if (h) h.destroy();
}

void ClientBase::onMessage(const ProcessId& from, const Message& m) {
  uint64_t req = msgReqOf(m);
  auto it = phases_.find(req);
  if (it == phases_.end() || it->second.done) return;  // stale or unknown: drop
  PhaseRec& rec = it->second;
  if (!rec.sink(from, m)) return;
  rec.done = true;
  ctx_->eng->trace().add(ctx_->eng->now(), EvKind::RttPhase,
                         {{"root", std::to_string(rec.rootOpId)},
                          {"op", std::to_string(rec.opId)},
                          {"a", std::to_string(rec.start)},
                          {"b", std::to_string(ctx_->eng->now())}});
  assert(rec.waiter && "phase completed before being awaited");
  ctx_->eng->soon([w = rec.waiter] { w.resume(); });
}

bool ClientBase::wouldIgnore(const Message& m) const {
  uint64_t req = msgReqOf(m);
  auto it = phases_.find(req);
  return it == phases_.end() || it->second.done;
}

void ClientBase::openPhase(uint64_t req, uint64_t opId, uint64_t rootOpId,
                           std::function<bool(const ProcessId&, const Message&)> sink) {
  PhaseRec rec;
  rec.opId = opId;
  rec.rootOpId = rootOpId;
  rec.start = ctx_->eng->now();
  rec.sink = std::move(sink);
  phases_.emplace(req, std::move(rec));
}

void ClientBase::PhaseAwaiter::await_suspend(std::coroutine_handle<> h) noexcept {
  c->phases_.at(req).waiter = h;
}

void ClientBase::sendToAllReplicas(const std::function<Message(const ReplicaId&)>& make) {
  for (const auto& rid : ctx_->keys->replicas()) ctx_->eng->send(id_, rid, make(rid));
}

}  // namespace atx
