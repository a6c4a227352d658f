#include "atx/protocol.hpp"

#include <algorithm>
#include <cassert>
#include <utility>

namespace atx {
namespace {

bool validClosedFor(const Ctx& ctx, const AccountId& acc, Epoch ep, const ClosedMsg& m) {
  return m.acc == acc && m.ep == ep && ctx.accounts->isOwner(m.closer, m.acc) &&
         ctx.keys->verify(m.closer, payload::closeReq(m.acc, m.ep), m.closeSig);
}

Digest selectedRoot(const CloseState& st) {
  std::vector<Bytes> vals;
  vals.reserve(st.selected.size());
  for (const auto& tx : st.selected) vals.push_back(tx.encoded());
  return MerkleTree::build(vals).root();
}

std::string u64s(uint64_t v) { return std::to_string(v); }

}  // namespace

// ---------------------------------------------------------------------------
// replica
// ---------------------------------------------------------------------------
void Replica::boot() {
  store_.seedGenesis();
  for (const auto& ai : ctx_->accounts->accounts())
    codAt(ai.id, 1).init(bootstrapEpochState(*ctx_->accounts, ai.id).state);
}

void Replica::onMessage(const ProcessId& from, const Message& m) { dispatch(from, m); }

bool Replica::wouldIgnore(const Message& m) const {
  switch (msgTypeOf(m)) {
    case MsgType::ReadKeyResp:
    case MsgType::AppendKeyResp:
    case MsgType::PrepareResp:
    case MsgType::AlreadyPrepared:
    case MsgType::Closed:
    case MsgType::AcceptAck:
    case MsgType::CloseResp:
    case MsgType::ConfirmStateResp:
    case MsgType::CommitCodInitialStateResp:
      return true;
    default:
      return false;
  }
}

void Replica::dispatch(const ProcessId& from, const Message& m) {
  if (const auto* r = std::get_if<ReadKeyReq>(&m)) {
    reply(from, store_.onReadKey(*r));
  } else if (const auto* a = std::get_if<AppendKeyReq>(&m)) {
    if (auto resp = store_.onAppendKey(*a)) reply(from, std::move(*resp));
  } else if (const auto* p = std::get_if<PrepareReq>(&m)) {
    routeCod(from, p->acc, p->ep, m);
  } else if (const auto* p = std::get_if<AcceptReq>(&m)) {
    routeCod(from, p->acc, p->ep, m);
  } else if (const auto* p = std::get_if<CloseReq>(&m)) {
    routeCod(from, p->acc, p->ep, m);
  } else if (const auto* p = std::get_if<ConfirmStateReq>(&m)) {
    routeCod(from, p->acc, p->ep, m);
  } else if (const auto* i = std::get_if<InitCodMsg>(&m)) {
    onInitCod(*i);
  } else if (const auto* c = std::get_if<CommitStateReq>(&m)) {
    onCommitState(from, *c);
  }
}

CodReplica& Replica::codAt(const AccountId& acc, Epoch ep) {
  auto key = std::make_pair(acc, ep);
  auto it = cods_.find(key);
  if (it == cods_.end()) it = cods_.try_emplace(key, ctx_, id_, acc, ep).first;
  return it->second;
}

void Replica::routeCod(const ProcessId& from, const AccountId& acc, Epoch ep,
                       const Message& m) {
  if (!ctx_->accounts->exists(acc) || ep == 0) return;
  auto key = std::make_pair(acc, ep);
  auto it = cods_.find(key);
  if (it == cods_.end() || !it->second.initialized()) {
    // Epoch not seeded here yet; park the message until INIT-COD arrives.
    auto& buf = buffer_[key];
    if (buf.size() >= kCodBufferCap) buf.erase(buf.begin());
    buf.emplace_back(from, m);
    return;
  }
  CodReplica& cod = it->second;
  std::optional<Message> resp;
  if (const auto* p = std::get_if<PrepareReq>(&m)) {
    resp = cod.onPrepare(from, *p);
  } else if (const auto* p = std::get_if<AcceptReq>(&m)) {
    resp = cod.onAcceptRequest(from, *p);
  } else if (const auto* p = std::get_if<CloseReq>(&m)) {
    resp = cod.onClose(from, *p);
  } else if (const auto* p = std::get_if<ConfirmStateReq>(&m)) {
    resp = cod.onConfirmState(from, *p);
  }
  if (resp) reply(from, std::move(*resp));
}

void Replica::onInitCod(const InitCodMsg& m) {
  if (!ctx_->accounts->exists(m.acc) || m.ep == 0) return;
  if (m.ep == 1) {
    if (!(m.state == bootstrapEpochState(*ctx_->accounts, m.acc).state)) return;
  } else {
    if (!m.stateCert) return;
    if (!ctx_->keys->verifyThresholdSignature(payloadCommitStateResp(m.acc, m.ep, m.state),
                                              *m.stateCert))
      return;
  }
  CodReplica& cod = codAt(m.acc, m.ep);
  if (cod.initialized()) return;
  cod.init(m.state);
  auto buf = buffer_.find({m.acc, m.ep});
  if (buf == buffer_.end()) return;
  auto parked = std::move(buf->second);
  buffer_.erase(buf);
  for (auto& [src, msg] : parked) dispatch(src, msg);
}

bool Replica::commitStateGuard(const AccountId& acc, Epoch ep, const CloseState& st) {
  const auto* decided = ctx_->eng->decidedFor(acc, ep - 1);
  if (!decided || !(decided->first == st)) return false;
  Digest d = st.digest();
  auto [it, fresh] = signedStates_.try_emplace(std::make_pair(acc, ep), d);
  return fresh || it->second == d;
}

void Replica::onCommitState(const ProcessId& from, const CommitStateReq& m) {
  if (!ctx_->accounts->exists(m.acc) || m.ep < 2 || !m.closeCert) return;
  if (!verifyCloseStateCert(*ctx_->keys, *ctx_->accounts, m.acc, m.ep - 1, m.state,
                            *m.closeCert))
    return;
  if (!commitStateGuard(m.acc, m.ep, m.state)) return;
  Bytes sigState = ctx_->keys->sign(id_, payloadCommitStateResp(m.acc, m.ep, m.state));
  Bytes sigTxs =
      ctx_->keys->sign(id_, payload::confirmInRecovery(m.acc, m.ep - 1, selectedRoot(m.state)));
  reply(from, CommitStateRespMsg{m.req, m.acc, m.ep, std::move(sigState), std::move(sigTxs)});
}

void WithholdReplica::onMessage(const ProcessId& from, const Message& m) {
  MsgType t = msgTypeOf(m);
  if (t == MsgType::ReadKey || t == MsgType::AppendKey) Replica::onMessage(from, m);
}

void EquivocatePrepareReplica::onMessage(const ProcessId& from, const Message& m) {
  if (const auto* p = std::get_if<PrepareReq>(&m)) {
    TxSet set;
    for (const auto& dd : p->debits) set.insert(dd.tx);
    Bytes sig = ctx_->keys->sign(id_, payload::prepareResp(p->acc, p->ep, set));
    reply(from, PrepareRespMsg{p->req, p->acc, p->ep, p->debits, p->credits, std::move(sig)});
    return;
  }
  Replica::onMessage(from, m);
}

// ---------------------------------------------------------------------------
// client: epoch view
// ---------------------------------------------------------------------------
Task<ProtocolClient::EpochView> ProtocolClient::openEpochViewOp(uint64_t root,
                                                               AccountId acc,
                                                               const Transaction& myTx,
                                                               bool appendDebit) {
  auto j = std::make_shared<Join>();
  j->eng = ctx_->eng;
  auto stateVals = std::make_shared<std::map<Bytes, Bytes>>();
  auto txsVals = std::make_shared<std::map<Bytes, Bytes>>();
  auto debitVals = std::make_shared<std::map<Bytes, Bytes>>();
  using Vals = std::map<Bytes, Bytes>;
  startJoined<Vals>(j, ctx_->eng->nextOpId(), readKeyOp(root, sidAccount(acc), "state"),
                    [stateVals](Vals v) { *stateVals = std::move(v); });
  startJoined<Vals>(j, ctx_->eng->nextOpId(), readKeyOp(root, sidGlobal(), "txs"),
                    [txsVals](Vals v) { *txsVals = std::move(v); });
  startJoined<Vals>(j, ctx_->eng->nextOpId(), readKeyOp(root, sidAccount(acc), "debits"),
                    [debitVals](Vals v) { *debitVals = std::move(v); });
  if (appendDebit)
    startJoined<Vals>(j, ctx_->eng->nextOpId(),
                      appendKeyOp(root, sidAccount(acc), "debits", {{myTx.encoded(), {}}}),
                      [](Vals) {});
  co_await JoinAwaiter{j.get()};

  EpochState best;
  bool found = false;
  for (const auto& [val, cert] : *stateVals) {
    Dec d(val);
    EpochState es;
    if (!EpochState::decode(d, es) || !d.done()) continue;
    if (!found || es.epoch > best.epoch) {
      best = std::move(es);
      found = true;
    }
  }
  if (!found) best = bootstrapEpochState(*ctx_->accounts, acc);

  EpochView v;
  v.epoch = best.epoch;
  v.initCredits = best.state.credits;
  v.credits = best.state.credits;
  v.initDebits = best.state.selected;
  v.restricted = best.state.cancelled;
  for (const auto& [val, cert] : *txsVals) {
    Dec d(val);
    Transaction tx;
    if (!Transaction::decode(d, tx) || !d.done()) continue;
    if (tx.recipient() == acc) v.credits.emplace(tx, cert);
  }
  for (const auto& [val, cert] : *debitVals) {
    Dec d(val);
    Transaction tx;
    if (!Transaction::decode(d, tx) || !d.done()) continue;
    if (!(tx == myTx)) v.observedPending.insert(tx);
  }
  co_return v;
}

DepsCert ProtocolClient::makeDeps(const AccountId& acc, Epoch ep, const Transaction& tx,
                                  const CertTxMap& credits) const {
  std::vector<TxId> ids;
  ids.reserve(credits.size());
  for (const auto& [c, cert] : credits) ids.push_back(c.id());
  std::sort(ids.begin(), ids.end());
  Bytes sig = ctx_->keys->sign(id_, payload::deps(acc, ep, tx, ids));
  return DepsCert{std::move(ids), id_, std::move(sig)};
}

// ---------------------------------------------------------------------------
// client: submit
// ---------------------------------------------------------------------------
Task<std::optional<CertTxMap>> ProtocolClient::acceptPhase(uint64_t root, AccountId acc,
                                                           Epoch ep, TxSet set,
                                                           ThresholdSig cert,
                                                           CertTxMap credits) {
  const KeyRegistry& keys = *ctx_->keys;
  size_t q = keys.quorum();
  std::vector<Bytes> vals;
  vals.reserve(set.size());
  for (const auto& tx : set) vals.push_back(tx.encoded());
  MerkleTree tree = MerkleTree::build(vals);
  Digest treeRoot = tree.root();
  Bytes pl = payload::acceptAck(acc, ep, treeRoot);

  uint64_t req = newReq();
  uint64_t opId = ctx_->eng->nextOpId();
  auto shares = std::make_shared<std::vector<std::pair<ReplicaId, Bytes>>>();
  auto responded = std::make_shared<std::set<ProcessId>>();
  auto closedSeen = std::make_shared<bool>(false);
  openPhase(req, opId, root,
            [this, acc, ep, q, treeRoot, pl, shares, responded, closedSeen](
                const ProcessId& from, const Message& m) {
              if (!ctx_->keys->isReplica(from) || responded->count(from)) return false;
              bool counted = false;
              if (const auto* a = std::get_if<AcceptAckMsg>(&m)) {
                if (a->acc == acc && a->ep == ep && a->root == treeRoot &&
                    ctx_->keys->verify(from, pl, a->share)) {
                  shares->emplace_back(from, a->share);
                  counted = true;
                }
              } else if (const auto* c = std::get_if<ClosedMsg>(&m)) {
                if (validClosedFor(*ctx_, acc, ep, *c)) {
                  *closedSeen = true;
                  counted = true;
                }
              }
              if (!counted) return false;
              responded->insert(from);
              return shares->size() >= q || (*closedSeen && responded->size() >= q);
            });
  {
    std::vector<Transaction> debitList(set.begin(), set.end());
    auto creditList = toCertTxList(credits);
    sendToAllReplicas([&](const ReplicaId&) {
      return AcceptReq{req, acc, ep, debitList, cert, creditList};
    });
  }
  co_await awaitPhase(req);

  if (shares->size() < q) co_return std::nullopt;
  auto ts = keys.createThresholdSignature(pl, *shares);
  assert(ts.ok());
  ThresholdSig tsig = ts.take();
  CertTxMap out;
  for (const auto& tx : set) {
    auto pf = tree.proofFor(tx.encoded());
    assert(pf.ok());
    out[tx] = CodAcceptCert{acc, ep, treeRoot, pf.take(), tsig}.encode();
  }
  co_return out;
}

Task<SubmitOutcome> ProtocolClient::submitOp(uint64_t root, AccountId acc, Epoch ep,
                                             DepsDebitMap debits, CertTxMap credits,
                                             TxSet initDebits, TxSet restricted) {
  const KeyRegistry& keys = *ctx_->keys;
  size_t q = keys.quorum();
  TxSet own = keysOf(debits);

  for (int round = 0; round < kMaxPrepareRounds; ++round) {
    uint64_t req = newReq();
    uint64_t opId = ctx_->eng->nextOpId();
    struct Got {
      std::map<ProcessId, PrepareRespMsg> resps;
      std::vector<AlreadyPreparedMsg> already;
      bool closed = false;
      std::set<ProcessId> responded;
    };
    auto got = std::make_shared<Got>();
    openPhase(req, opId, root,
              [this, acc, ep, q, got](const ProcessId& from, const Message& m) {
                if (!ctx_->keys->isReplica(from) || got->responded.count(from)) return false;
                bool counted = false;
                if (const auto* p = std::get_if<PrepareRespMsg>(&m)) {
                  if (p->acc == acc && p->ep == ep) {
                    got->resps[from] = *p;
                    counted = true;
                  }
                } else if (const auto* a = std::get_if<AlreadyPreparedMsg>(&m)) {
                  if (a->acc == acc && a->ep == ep) {
                    got->already.push_back(*a);
                    counted = true;
                  }
                } else if (const auto* c = std::get_if<ClosedMsg>(&m)) {
                  if (validClosedFor(*ctx_, acc, ep, *c)) {
                    got->closed = true;
                    counted = true;
                  }
                }
                if (!counted) return false;
                got->responded.insert(from);
                return got->responded.size() >= q;
              });
    {
      auto debitList = toDepsList(debits);
      auto creditList = toCertTxList(credits);
      sendToAllReplicas([&](const ReplicaId&) {
        return PrepareReq{req, acc, ep, debitList, creditList};
      });
    }
    co_await awaitPhase(req);

    if (got->closed) co_return SubmitOutcome{SubmitOutcome::Kind::Closed, {}};

    // A prepared certificate covering our debits lets us jump to accept.
    for (const auto& a : got->already) {
      TxSet aset(a.preparedDebits.begin(), a.preparedDebits.end());
      if (!std::includes(aset.begin(), aset.end(), own.begin(), own.end())) continue;
      if (!keys.verifyThresholdSignature(payload::prepareResp(acc, ep, aset),
                                         a.preparedCert))
        continue;
      auto certs = co_await acceptPhase(root, acc, ep, aset, a.preparedCert, credits);
      if (certs)
        co_return SubmitOutcome{SubmitOutcome::Kind::Ok, std::move(*certs)};
      co_return SubmitOutcome{SubmitOutcome::Kind::Declined, {}};
    }

    // A quorum that signed the identical debit set forms the certificate.
    struct Grp {
      TxSet set;
      std::vector<std::pair<ReplicaId, Bytes>> shares;
    };
    std::map<Bytes, Grp> groups;
    for (const auto& [rid, r] : got->resps) {
      if (r.sig.empty()) continue;
      TxSet rset;
      for (const auto& dd : r.debits) rset.insert(dd.tx);
      Bytes pl = payload::prepareResp(acc, ep, rset);
      if (!keys.verify(rid, pl, r.sig)) continue;
      Grp& g = groups[pl];
      g.set = std::move(rset);
      g.shares.emplace_back(rid, r.sig);
    }
    for (auto& [pl, g] : groups) {
      if (g.shares.size() < q) continue;
      auto ts = keys.createThresholdSignature(pl, g.shares);
      if (!ts.ok()) continue;
      auto certs = co_await acceptPhase(root, acc, ep, g.set, ts.take(), credits);
      if (certs)
        co_return SubmitOutcome{SubmitOutcome::Kind::Ok, std::move(*certs)};
      co_return SubmitOutcome{SubmitOutcome::Kind::Declined, {}};
    }

    // No quorum agreed yet: adopt everything valid we saw and retry.
    for (const auto& [rid, r] : got->resps) {
      for (const auto& ct : r.credits)
        if (validCreditPair(*ctx_, acc, ct.tx, ct.cert)) credits.emplace(ct.tx, ct.cert);
      TxSet known = keysOf(credits);
      for (const auto& dd : r.debits) {
        if (!validDepsDebit(*ctx_, acc, ep, dd, known, initDebits, restricted)) continue;
        auto [it, fresh] = debits.try_emplace(dd.tx, dd.cert);
        if (!fresh && !it->second && dd.cert) it->second = dd.cert;
      }
    }
  }
  co_return SubmitOutcome{SubmitOutcome::Kind::Declined, {}};
}

// ---------------------------------------------------------------------------
// client: close, confirm, notarize, recovery
// ---------------------------------------------------------------------------
Task<std::vector<CloseRespMsg>> ProtocolClient::closeRecordsOp(uint64_t root, AccountId acc,
                                                               Epoch ep, Bytes closeSig) {
  uint64_t req = newReq();
  uint64_t opId = ctx_->eng->nextOpId();
  size_t q = ctx_->keys->quorum();
  auto recs = std::make_shared<std::map<ReplicaId, CloseRespMsg>>();
  openPhase(req, opId, root,
            [this, acc, ep, q, recs](const ProcessId& from, const Message& m) {
              const auto* r = std::get_if<CloseRespMsg>(&m);
              if (!r || r->acc != acc || r->ep != ep || r->rid != from) return false;
              if (recs->count(from)) return false;
              if (!validCloseRecord(*ctx_, acc, ep, *r)) return false;
              (*recs)[from] = *r;
              return recs->size() >= q;
            });
  {
    Bytes sig = closeSig;
    sendToAllReplicas([&](const ReplicaId&) { return CloseReq{req, acc, ep, sig}; });
  }
  co_await awaitPhase(req);
  std::vector<CloseRespMsg> out;
  out.reserve(recs->size());
  for (auto& [rid, r] : *recs) out.push_back(std::move(r));
  co_return out;
}

Task<std::pair<CloseState, ThresholdSig>> ProtocolClient::confirmStateOp(
    uint64_t root, AccountId acc, Epoch ep, Bytes closeSig, TxSet pending,
    std::vector<CloseRespMsg> records, CertTxMap initCredits) {
  uint64_t req = newReq();
  uint64_t opId = ctx_->eng->nextOpId();
  size_t q = ctx_->keys->quorum();

  CloseState st;
  st.credits = std::move(initCredits);
  for (const auto& rec : records)
    for (const auto& ct : rec.credits) st.credits.emplace(ct.tx, ct.cert);

  struct Grp {
    TxSet sel, canc;
    std::vector<std::pair<ReplicaId, Bytes>> shares;
  };
  auto groups = std::make_shared<std::map<Bytes, Grp>>();
  auto seen = std::make_shared<std::set<ProcessId>>();
  auto winner = std::make_shared<Bytes>();
  openPhase(req, opId, root,
            [this, acc, ep, q, groups, seen, winner](const ProcessId& from, const Message& m) {
              const auto* r = std::get_if<ConfirmStateRespMsg>(&m);
              if (!r || r->acc != acc || r->ep != ep) return false;
              if (!ctx_->keys->isReplica(from) || seen->count(from)) return false;
              TxSet sel(r->selected.begin(), r->selected.end());
              TxSet canc(r->cancelled.begin(), r->cancelled.end());
              Bytes pl = payload::confirmStateResp(acc, ep, sel, canc);
              if (!ctx_->keys->verify(from, pl, r->sig)) return false;
              seen->insert(from);
              Grp& g = (*groups)[pl];
              g.sel = std::move(sel);
              g.canc = std::move(canc);
              g.shares.emplace_back(from, r->sig);
              if (g.shares.size() < q) return false;
              *winner = pl;
              return true;
            });
  {
    ConfirmStateReq creq{req,      acc,
                         ep,       pid(),
                         closeSig, std::vector<Transaction>(pending.begin(), pending.end()),
                         std::move(records)};
    sendToAllReplicas([&](const ReplicaId&) { return creq; });
  }
  co_await awaitPhase(req);

  Grp& g = groups->at(*winner);
  st.selected = std::move(g.sel);
  st.cancelled = std::move(g.canc);
  auto ts = ctx_->keys->createThresholdSignature(*winner, g.shares);
  assert(ts.ok());
  co_return std::make_pair(std::move(st), ts.take());
}

Task<std::pair<ThresholdSig, ThresholdSig>> ProtocolClient::notarizeOp(
    uint64_t root, AccountId acc, Epoch newEp, CloseState st, ThresholdSig closeCert) {
  uint64_t req = newReq();
  uint64_t opId = ctx_->eng->nextOpId();
  size_t q = ctx_->keys->quorum();
  Bytes plState = payloadCommitStateResp(acc, newEp, st);
  Bytes plTxs = payload::confirmInRecovery(acc, newEp - 1, selectedRoot(st));

  auto stateShares = std::make_shared<std::vector<std::pair<ReplicaId, Bytes>>>();
  auto txShares = std::make_shared<std::vector<std::pair<ReplicaId, Bytes>>>();
  auto seen = std::make_shared<std::set<ProcessId>>();
  openPhase(req, opId, root,
            [this, acc, newEp, q, plState, plTxs, stateShares, txShares, seen](
                const ProcessId& from, const Message& m) {
              const auto* r = std::get_if<CommitStateRespMsg>(&m);
              if (!r || r->acc != acc || r->ep != newEp) return false;
              if (!ctx_->keys->isReplica(from) || seen->count(from)) return false;
              if (!ctx_->keys->verify(from, plState, r->sigState)) return false;
              if (!ctx_->keys->verify(from, plTxs, r->sigTxs)) return false;
              seen->insert(from);
              stateShares->emplace_back(from, r->sigState);
              txShares->emplace_back(from, r->sigTxs);
              return stateShares->size() >= q;
            });
  sendToAllReplicas(
      [&](const ReplicaId&) { return CommitStateReq{req, acc, newEp, st, closeCert}; });
  co_await awaitPhase(req);

  auto ts1 = ctx_->keys->createThresholdSignature(plState, *stateShares);
  auto ts2 = ctx_->keys->createThresholdSignature(plTxs, *txShares);
  assert(ts1.ok() && ts2.ok());
  co_return std::make_pair(ts1.take(), ts2.take());
}

Task<CloseState> ProtocolClient::recoveryOp(uint64_t root, AccountId acc, Epoch ep,
                                            TxSet pending, CertTxMap epochInitCredits) {
  Bytes closeSig = ctx_->keys->sign(id_, payload::closeReq(acc, ep));
  auto records = co_await closeRecordsOp(root, acc, ep, closeSig);
  auto [st, closeCert] = co_await confirmStateOp(root, acc, ep, closeSig, std::move(pending),
                                                 std::move(records),
                                                 std::move(epochInitCredits));
  // Named awaiter: gcc 11 double-destroys braced awaiter temporaries inside
  // co_await expressions, and this one owns heap state.
  ProposeAwaiter propose{this, acc, ep, {std::move(st), std::move(closeCert)}, {}};
  auto decided = co_await std::move(propose);
  CloseState dst = std::move(decided.first);
  auto [stateCert, txsCert] = co_await notarizeOp(root, acc, ep + 1, dst, decided.second);

  // Persist the outcome: the next epoch's state entry, the selected debits
  // as commits, and the detectors for the new epoch.
  EpochState es{ep + 1, dst, stateCert};
  std::vector<Bytes> selVals;
  selVals.reserve(dst.selected.size());
  for (const auto& tx : dst.selected) selVals.push_back(tx.encoded());
  MerkleTree tree = MerkleTree::build(selVals);
  std::vector<std::pair<Bytes, Bytes>> txPairs;
  for (const auto& tx : dst.selected) {
    auto pf = tree.proofFor(tx.encoded());
    assert(pf.ok());
    txPairs.emplace_back(tx.encoded(),
                         RecoveryCert{acc, ep, tree.root(), pf.take(), txsCert}.encode());
  }
  auto j = std::make_shared<Join>();
  j->eng = ctx_->eng;
  using Vals = std::map<Bytes, Bytes>;
  startJoined<Vals>(j, ctx_->eng->nextOpId(),
                    appendKeyOp(root, sidAccount(acc), "state", {{es.encode(), {}}}),
                    [](Vals) {});
  if (!txPairs.empty())
    startJoined<Vals>(j, ctx_->eng->nextOpId(),
                      appendKeyOp(root, sidGlobal(), "txs", std::move(txPairs)), [](Vals) {});
  for (const auto& rid : ctx_->keys->replicas())
    ctx_->eng->send(id_, rid, InitCodMsg{acc, ep + 1, dst, stateCert});
  co_await JoinAwaiter{j.get()};
  co_return dst;
}

// ---------------------------------------------------------------------------
// client: transfer and account query
// ---------------------------------------------------------------------------
Task<TransferResult> ProtocolClient::transferOp(uint64_t root, TransferRequest r) {
  auto accOpt = ctx_->accounts->accountOf(id_);
  assert(accOpt);
  AccountId acc = *accOpt;
  TxId txid = r.fixedId ? *r.fixedId : ctx_->eng->drawTxId();
  Transaction tx = Transaction::makeSigned(*ctx_->keys, id_, acc, r.to, r.amount, txid);
  ctx_->eng->trace().noteTx(tx);
  ctx_->eng->trace().add(ctx_->eng->now(), EvKind::OpStart,
                         {{"op", u64s(root)},
                          {"kind", "transfer"},
                          {"label", r.label},
                          {"client", id_},
                          {"from", acc},
                          {"to", r.to},
                          {"amount", u64s(r.amount)},
                          {"tx", txIdHex(tx)}});

  EpochView v = co_await openEpochViewOp(root, acc, tx, true);
  std::string result = "unresolved";
  Epoch ep = v.epoch;
  for (int attempt = 0; attempt < kMaxEpochAttempts; ++attempt) {
    if (v.restricted.count(tx)) {
      result = "fail";
      break;
    }
    DepsDebitMap debits;
    debits.emplace(tx, makeDeps(acc, ep, tx, v.credits));
    SubmitOutcome so =
        co_await submitOp(root, acc, ep, std::move(debits), v.credits, v.initDebits,
                          v.restricted);
    if (so.kind == SubmitOutcome::Kind::Ok) {
      std::vector<std::pair<Bytes, Bytes>> pairs;
      pairs.emplace_back(tx.encoded(), so.acceptCerts.at(tx));
      co_await appendKeyOp(root, sidGlobal(), "txs", std::move(pairs));
      result = "ok";
      break;
    }
    // Declined or closed: recover the epoch and read the debit's fate off
    // the decided close state; an absent verdict means resubmit next epoch.
    TxSet pending = v.observedPending;
    pending.insert(tx);
    CloseState dst = co_await recoveryOp(root, acc, ep, std::move(pending), v.initCredits);
    if (dst.selected.count(tx)) {
      result = "ok";
      break;
    }
    if (dst.cancelled.count(tx)) {
      result = "fail";
      break;
    }
    ep += 1;
    v.initCredits = dst.credits;
    v.credits = dst.credits;
    v.initDebits = dst.selected;
    v.restricted = dst.cancelled;
    TxSet keep;
    for (const auto& p : v.observedPending)
      if (!dst.selected.count(p) && !dst.cancelled.count(p)) keep.insert(p);
    v.observedPending = std::move(keep);
  }

  ctx_->eng->trace().add(ctx_->eng->now(), EvKind::OpEnd,
                         {{"op", u64s(root)},
                          {"kind", "transfer"},
                          {"label", r.label},
                          {"result", result},
                          {"tx", txIdHex(tx)}});
  co_return TransferResult{r.label, result, tx, root};
}

Task<TxSet> ProtocolClient::getTxsOp(uint64_t root, AccountId acc) {
  ctx_->eng->trace().add(
      ctx_->eng->now(), EvKind::OpStart,
      {{"op", u64s(root)}, {"kind", "query"}, {"client", id_}, {"acc", acc}});
  auto vals = co_await readKeyOp(root, sidGlobal(), "txs");
  TxSet out;
  for (const auto& [val, cert] : vals) {
    Dec d(val);
    Transaction tx;
    if (!Transaction::decode(d, tx) || !d.done()) continue;
    if ((tx.sender() && *tx.sender() == acc) || tx.recipient() == acc) out.insert(tx);
  }
  ctx_->eng->trace().add(ctx_->eng->now(), EvKind::OpEnd,
                         {{"op", u64s(root)},
                          {"kind", "query"},
                          {"acc", acc},
                          {"result", "ok"},
                          {"txs", txIdListOf(out)}});
  co_return out;
}

void ProtocolClient::startTransfer(const TransferRequest& r,
                                   std::function<void(TransferResult)> done) {
  uint64_t root = ctx_->eng->nextOpId();
  spawnOp(root, transferOp(root, r), std::move(done));
}

void ProtocolClient::startGetAccountTransactions(const AccountId& acc,
                                                 std::function<void(TxSet)> done) {
  uint64_t root = ctx_->eng->nextOpId();
  spawnOp(root, getTxsOp(root, acc), std::move(done));
}

// ---------------------------------------------------------------------------
// byzantine clients
// ---------------------------------------------------------------------------
void ReplayClient::boot(const AccountId& victim) {
  auto burst = [this, victim] {
    uint64_t op = ctx_->eng->nextOpId();
    ctx_->eng->trace().add(
        ctx_->eng->now(), EvKind::OpStart,
        {{"op", u64s(op)}, {"kind", "byz-replay"}, {"client", id_}, {"acc", victim}});
    std::vector<std::pair<Bytes, Bytes>> pairs;
    for (const auto& g : ctx_->accounts->allGenesis()) pairs.emplace_back(g.encoded(), Bytes{});
    AppendKeyReq areq{99'000'001, sidGlobal(), "txs", std::move(pairs)};
    PrepareReq preq{99'000'002, victim, 1, {}, {}};
    for (int k = 0; k < 2; ++k) {
      for (const auto& rid : ctx_->keys->replicas()) {
        ctx_->eng->send(id_, rid, areq);
        ctx_->eng->send(id_, rid, preq);
      }
    }
    ctx_->eng->trace().add(
        ctx_->eng->now(), EvKind::OpEnd,
        {{"op", u64s(op)}, {"kind", "byz-replay"}, {"result", "done"}});
  };
  ctx_->eng->invokeAt(2, burst);
  ctx_->eng->invokeAt(8, burst);
}

void StorageGarbageClient::boot(const AccountId& victim) {
  auto burst = [this, victim] {
    uint64_t op = ctx_->eng->nextOpId();
    ctx_->eng->trace().add(
        ctx_->eng->now(), EvKind::OpStart,
        {{"op", u64s(op)}, {"kind", "byz-garbage"}, {"client", id_}, {"acc", victim}});
    Bytes junk{0xde, 0xad, 0xbe, 0xef, 0x00, 0x42};
    Bytes longJunk(64, 0xa5);
    for (const auto& rid : ctx_->keys->replicas()) {
      ctx_->eng->send(id_, rid, AppendKeyReq{99'100'001, sidGlobal(), "txs", {{junk, {}}}});
      ctx_->eng->send(id_, rid,
                      AppendKeyReq{99'100'002, sidAccount(victim), "debits", {{longJunk, {}}}});
      ctx_->eng->send(id_, rid,
                      AppendKeyReq{99'100'003, sidAccount(victim), "state", {{junk, junk}}});
    }
    ctx_->eng->trace().add(
        ctx_->eng->now(), EvKind::OpEnd,
        {{"op", u64s(op)}, {"kind", "byz-garbage"}, {"result", "done"}});
  };
  ctx_->eng->invokeAt(2, burst);
  ctx_->eng->invokeAt(8, burst);
}

void DivergentNotarizeClient::boot() {
  auto acc = ctx_->accounts->accountOf(id_);
  if (!acc) return;
  ctx_->eng->invokeAt(2, [this, a = *acc] {
    uint64_t root = ctx_->eng->nextOpId();
    spawnOp(root, divergentOp(root, a), std::function<void(Unit)>([](Unit) {}));
  });
}

Task<Unit> DivergentNotarizeClient::divergentOp(uint64_t root, AccountId acc) {
  ctx_->eng->trace().add(
      ctx_->eng->now(), EvKind::OpStart,
      {{"op", u64s(root)}, {"kind", "byz-divergent"}, {"client", id_}, {"acc", acc}});
  CertTxMap initCredits = bootstrapEpochState(*ctx_->accounts, acc).state.credits;
  Bytes closeSig = ctx_->keys->sign(id_, payload::closeReq(acc, 1));
  auto records = co_await closeRecordsOp(root, acc, 1, closeSig);

  // Two confirm rounds over the same records but different pending sets
  // produce two genuinely certified, conflicting close states.
  AccountId altTo = acc;
  for (const auto& ai : ctx_->accounts->accounts())
    if (ai.id != acc) {
      altTo = ai.id;
      break;
    }
  Transaction alt =
      Transaction::makeSigned(*ctx_->keys, id_, acc, altTo, 1, ctx_->eng->drawTxId());
  ctx_->eng->trace().noteTx(alt);
  TxSet pendA;
  TxSet pendB;
  pendB.insert(alt);
  auto confA = co_await confirmStateOp(root, acc, 1, closeSig, pendA, records, initCredits);
  auto confB = co_await confirmStateOp(root, acc, 1, closeSig, pendB, records, initCredits);

  ProposeAwaiter propose{this, acc, 1, confA, {}};
  auto decided = co_await std::move(propose);
  (void)decided;

  // Split the two states across replica halves; only the register's decided
  // state can gather a notarization quorum.
  const auto& reps = ctx_->keys->replicas();
  for (size_t i = 0; i < reps.size(); ++i) {
    const auto& conf = i < reps.size() / 2 ? confA : confB;
    ctx_->eng->send(id_, reps[i],
                    CommitStateReq{newReq(), acc, 2, conf.first, conf.second});
  }
  ctx_->eng->trace().add(
      ctx_->eng->now(), EvKind::OpEnd,
      {{"op", u64s(root)}, {"kind", "byz-divergent"}, {"result", "done"}});
  co_return Unit{};
}

}  // namespace atx
