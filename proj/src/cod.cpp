#include "atx/cod.hpp"

#include <algorithm>

namespace atx {

Result<SafeExtraction> extractSafeTransactions(const CertTxMap& credits,
                                               const TxSet& initDebits,
                                               const TxSet& mustSelect,
                                               const TxSet& pending,
                                               const TxSet& restricted) {
  auto creditTotalR = totalValue(keysOf(credits));
  if (!creditTotalR.ok()) return {creditTotalR.error(), creditTotalR.note()};
  Amount creditTotal = *creditTotalR;

  SafeExtraction out;
  out.selected = initDebits;
  out.selected.insert(mustSelect.begin(), mustSelect.end());
  for (const auto& tx : out.selected)
    if (restricted.count(tx))
      return {Err::InvalidMessages, "restricted debit in mandatory set"};

  auto selTotalR = totalValue(out.selected);
  if (!selTotalR.ok()) return {selTotalR.error(), selTotalR.note()};
  Amount selTotal = *selTotalR;
  if (selTotal > creditTotal)
    return {Err::CoverageAssertFailed, "credits do not cover certified debits"};

  // Candidates enter smallest-amount first (ties by id) so the selection is
  // deterministic across replicas and maximizes the number of survivors.
  std::vector<Transaction> cands;
  for (const auto& tx : pending)
    if (!out.selected.count(tx) && !restricted.count(tx)) cands.push_back(tx);
  std::sort(cands.begin(), cands.end(), [](const Transaction& a, const Transaction& b) {
    if (a.amount() != b.amount()) return a.amount() < b.amount();
    return a.id() < b.id();
  });
  for (const auto& tx : cands) {
    auto nextR = checkedAdd(selTotal, tx.amount());
    if (!nextR.ok() || *nextR > creditTotal) continue;
    selTotal = *nextR;
    out.selected.insert(tx);
  }

  out.cancelled = restricted;
  for (const auto& tx : pending)
    if (!out.selected.count(tx)) out.cancelled.insert(tx);
  return out;
}

bool validCreditPair(const Ctx& ctx, const AccountId& acc, const Transaction& tx,
                     const Bytes& cert) {
  return tx.recipient() == acc && ctx.wellFormed(tx) &&
         verifyCreditCert(*ctx.keys, *ctx.accounts, tx, cert);
}

bool validDepsDebit(const Ctx& ctx, const AccountId& acc, Epoch ep, const DepsDebit& dd,
                    const TxSet& knownCredits, const TxSet& initDebits,
                    const TxSet& restricted) {
  const Transaction& tx = dd.tx;
  if (!tx.sender() || *tx.sender() != acc || !ctx.wellFormed(tx)) return false;
  if (restricted.count(tx)) return false;
  if (initDebits.count(tx)) return true;  // already charged; no deps needed
  if (!dd.cert) return false;
  if (!ctx.accounts->isOwner(dd.cert->signer, acc)) return false;
  if (!ctx.keys->verify(dd.cert->signer, payload::deps(acc, ep, tx, dd.cert->depIds),
                        dd.cert->sig))
    return false;
  std::set<TxId> known;
  for (const auto& c : knownCredits) known.insert(c.id());
  for (const auto& id : dd.cert->depIds)
    if (!known.count(id)) return false;
  return true;
}

bool validCloseRecord(const Ctx& ctx, const AccountId& acc, Epoch ep,
                      const CloseRespMsg& rec) {
  if (rec.acc != acc || rec.ep != ep) return false;
  if (!ctx.keys->isReplica(rec.rid)) return false;
  TxSet prepared(rec.preparedDebits.begin(), rec.preparedDebits.end());
  for (const auto& tx : prepared)
    if (!tx.sender() || *tx.sender() != acc || !ctx.wellFormed(tx)) return false;
  for (const auto& ct : rec.credits)
    if (!validCreditPair(ctx, acc, ct.tx, ct.cert)) return false;
  TxSet certSet(rec.certDebits.begin(), rec.certDebits.end());
  if (!std::includes(prepared.begin(), prepared.end(), certSet.begin(),
                     certSet.end()))
    return false;
  if (rec.preparedCert) {
    if (!ctx.keys->verifyThresholdSignature(payload::prepareResp(acc, ep, certSet),
                                            *rec.preparedCert))
      return false;
  } else if (!certSet.empty()) {
    return false;
  }
  return ctx.keys->verify(rec.rid, payload::closeResp(acc, ep, prepared), rec.sig);
}

void CodReplica::init(const CloseState& st) {
  if (init_) return;
  init_ = true;
  initCredits_ = st.credits;
  credits_ = st.credits;
  initDebits_ = st.selected;
  restricted_ = st.cancelled;
}

bool CodReplica::balanceCovered(const TxSet& debits) const {
  TxSet charged = initDebits_;
  charged.insert(debits.begin(), debits.end());
  auto debitTotal = totalValue(charged);
  auto creditTotal = totalValue(keysOf(credits_));
  if (!debitTotal.ok() || !creditTotal.ok()) return false;
  return *debitTotal <= *creditTotal;
}

Message CodReplica::closedReply(uint64_t req) const {
  return ClosedMsg{req, acc_, ep_, closer_, closeSig_};
}

std::optional<Message> CodReplica::onPrepare(const ProcessId&, const PrepareReq& m) {
  if (closed_) return closedReply(m.req);

  for (const auto& ct : m.credits)
    if (!validCreditPair(*ctx_, acc_, ct.tx, ct.cert)) return std::nullopt;
  TxSet knownCredits = keysOf(credits_);
  for (const auto& ct : m.credits) knownCredits.insert(ct.tx);
  for (const auto& dd : m.debits)
    if (!validDepsDebit(*ctx_, acc_, ep_, dd, knownCredits, initDebits_, restricted_))
      return std::nullopt;

  for (const auto& ct : m.credits) credits_.emplace(ct.tx, ct.cert);
  for (const auto& dd : m.debits) {
    if (initDebits_.count(dd.tx)) continue;
    auto [it, fresh] = debits_.emplace(dd.tx, dd.cert);
    if (!fresh && !it->second && dd.cert) it->second = dd.cert;
  }

  // Fast path: the submitted debits are already covered by a certified set.
  TxSet submitted;
  for (const auto& dd : m.debits) submitted.insert(dd.tx);
  if (certPreparedSig_ &&
      std::includes(certPrepared_.begin(), certPrepared_.end(), submitted.begin(),
                    submitted.end())) {
    return AlreadyPreparedMsg{
        m.req, acc_, ep_,
        std::vector<Transaction>(certPrepared_.begin(), certPrepared_.end()),
        *certPreparedSig_};
  }

  TxSet merged = keysOf(debits_);
  Bytes sig;
  if (balanceCovered(merged)) {
    sig = ctx_->keys->sign(id_, payload::prepareResp(acc_, ep_, merged));
    lastSigned_ = merged;
  }
  return PrepareRespMsg{m.req,    acc_, ep_, toDepsList(debits_), toCertTxList(credits_),
                        std::move(sig)};
}

std::optional<Message> CodReplica::onAcceptRequest(const ProcessId&, const AcceptReq& m) {
  if (closed_) return closedReply(m.req);

  TxSet set(m.debits.begin(), m.debits.end());
  for (const auto& tx : set)
    if (!tx.sender() || *tx.sender() != acc_ || !ctx_->wellFormed(tx) ||
        restricted_.count(tx))
      return std::nullopt;
  if (!ctx_->keys->verifyThresholdSignature(payload::prepareResp(acc_, ep_, set),
                                            m.preparedCert))
    return std::nullopt;
  for (const auto& ct : m.credits)
    if (!validCreditPair(*ctx_, acc_, ct.tx, ct.cert)) return std::nullopt;

  for (const auto& ct : m.credits) credits_.emplace(ct.tx, ct.cert);
  if (std::includes(set.begin(), set.end(), certPrepared_.begin(), certPrepared_.end())) {
    certPrepared_ = set;
    certPreparedSig_ = m.preparedCert;
  }

  std::vector<Bytes> values;
  for (const auto& tx : set) values.push_back(tx.encoded());
  Digest root = MerkleTree::build(values).root();
  Bytes share = ctx_->keys->sign(id_, payload::acceptAck(acc_, ep_, root));
  return AcceptAckMsg{m.req, acc_, ep_, root, std::move(share)};
}

std::optional<Message> CodReplica::onClose(const ProcessId& from, const CloseReq& m) {
  if (!ctx_->accounts->isOwner(from, acc_)) return std::nullopt;
  if (!ctx_->keys->verify(from, payload::closeReq(acc_, ep_), m.closeSig))
    return std::nullopt;
  if (!closed_) {
    closed_ = true;
    closer_ = from;
    closeSig_ = m.closeSig;
  }
  // Report everything this replica vouches for: the union of its signed-set
  // chain and the certified set it adopted, with the certified set called out
  // separately so confirm-state must select those debits (they may already
  // hold accept certificates).
  TxSet reported = lastSigned_;
  reported.insert(certPrepared_.begin(), certPrepared_.end());
  std::vector<Transaction> certDebits;
  std::optional<ThresholdSig> cert;
  if (certPreparedSig_) {
    certDebits.assign(certPrepared_.begin(), certPrepared_.end());
    cert = certPreparedSig_;
  }
  Bytes sig = ctx_->keys->sign(id_, payload::closeResp(acc_, ep_, reported));
  return CloseRespMsg{m.req,
                      acc_,
                      ep_,
                      id_,
                      toCertTxList(credits_),
                      std::vector<Transaction>(reported.begin(), reported.end()),
                      std::move(certDebits),
                      std::move(cert),
                      std::move(sig)};
}

std::optional<Message> CodReplica::onConfirmState(const ProcessId&,
                                                  const ConfirmStateReq& m) {
  if (!ctx_->accounts->isOwner(m.closer, acc_)) return std::nullopt;
  if (!ctx_->keys->verify(m.closer, payload::closeReq(acc_, ep_), m.closeSig))
    return std::nullopt;
  if (!closed_) {
    closed_ = true;
    closer_ = m.closer;
    closeSig_ = m.closeSig;
  }

  std::set<ReplicaId> rids;
  for (const auto& rec : m.records) {
    if (!validCloseRecord(*ctx_, acc_, ep_, rec)) return std::nullopt;
    rids.insert(rec.rid);
  }
  if (rids.size() < ctx_->keys->quorum() || rids.size() != m.records.size())
    return std::nullopt;
  for (const auto& tx : m.pendingDebits)
    if (!tx.sender() || *tx.sender() != acc_ || !ctx_->wellFormed(tx))
      return std::nullopt;

  // The outcome is a pure function of the request plus the epoch's initial
  // parameters, so every correct replica signs the identical answer.
  CertTxMap credits = initCredits_;
  TxSet mustSelect, pending;
  for (const auto& rec : m.records) {
    for (const auto& ct : rec.credits) credits.emplace(ct.tx, ct.cert);
    for (const auto& tx : rec.preparedDebits) pending.insert(tx);
    for (const auto& tx : rec.certDebits) mustSelect.insert(tx);
  }
  for (const auto& tx : m.pendingDebits)
    if (!restricted_.count(tx)) pending.insert(tx);

  auto ext = extractSafeTransactions(credits, initDebits_, mustSelect, pending, restricted_);
  if (!ext.ok()) return std::nullopt;

  Bytes sig = ctx_->keys->sign(
      id_, payload::confirmStateResp(acc_, ep_, ext->selected, ext->cancelled));
  return ConfirmStateRespMsg{
      m.req, acc_, ep_,
      std::vector<Transaction>(ext->selected.begin(), ext->selected.end()),
      std::vector<Transaction>(ext->cancelled.begin(), ext->cancelled.end()),
      std::move(sig)};
}

}  // namespace atx
