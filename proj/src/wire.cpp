#include "atx/wire.hpp"

#include <algorithm>

namespace atx {

const char* msgTypeName(MsgType t) {
  switch (t) {
    case MsgType::ReadKey: return "READ-KEY";
    case MsgType::ReadKeyResp: return "READ-KEY-RESP";
    case MsgType::AppendKey: return "APPEND-KEY";
    case MsgType::AppendKeyResp: return "APPEND-KEY-RESP";
    case MsgType::Prepare: return "PREPARE";
    case MsgType::PrepareResp: return "PREPARE-RESP";
    case MsgType::AlreadyPrepared: return "ALREADY-PREPARED";
    case MsgType::Closed: return "CLOSED";
    case MsgType::AcceptRequest: return "ACCEPT-REQUEST";
    case MsgType::AcceptAck: return "ACCEPT-ACK";
    case MsgType::Close: return "CLOSE";
    case MsgType::CloseResp: return "CLOSE-RESP";
    case MsgType::ConfirmState: return "CONFIRM-STATE";
    case MsgType::ConfirmStateResp: return "CONFIRM-STATE-RESP";
    case MsgType::InitCod: return "INIT-COD";
    case MsgType::CommitCodInitialState: return "COMMIT-COD-INITIAL-STATE";
    case MsgType::CommitCodInitialStateResp: return "COMMIT-COD-INITIAL-STATE-RESP";
  }
  return "?";
}

namespace payload {

Bytes encodeTxSet(const TxSet& txs) {
  std::vector<Bytes> elems;
  elems.reserve(txs.size());
  for (const auto& tx : txs) elems.push_back(tx.encoded());
  Enc e;
  e.set(std::move(elems));
  return e.take();
}

Bytes deps(const AccountId& acc, Epoch ep, const Transaction& tx, std::vector<TxId> depIds) {
  std::sort(depIds.begin(), depIds.end());
  Enc e;
  e.u8(kDeps).str(acc).u64(ep).digest(tx.digest());
  e.u64(depIds.size());
  for (const auto& id : depIds) e.bytes(id);
  return e.take();
}

Bytes prepareResp(const AccountId& acc, Epoch ep, const TxSet& debits) {
  Enc e;
  e.u8(kPrepareResp).str(acc).u64(ep).raw(encodeTxSet(debits));
  return e.take();
}

Bytes acceptAck(const AccountId& acc, Epoch ep, const Digest& root) {
  Enc e;
  e.u8(kAcceptAck).str(acc).u64(ep).digest(root);
  return e.take();
}

Bytes closeReq(const AccountId& acc, Epoch ep) {
  Enc e;
  e.u8(kClose).str(acc).u64(ep);
  return e.take();
}

Bytes closeResp(const AccountId& acc, Epoch ep, const TxSet& preparedDebits) {
  Enc e;
  e.u8(kCloseResp).str(acc).u64(ep).raw(encodeTxSet(preparedDebits));
  return e.take();
}

Bytes confirmStateResp(const AccountId& acc, Epoch ep, const TxSet& selected,
                       const TxSet& cancelled) {
  Enc e;
  e.u8(kConfirmStateResp).str(acc).u64(ep).raw(encodeTxSet(selected)).raw(
      encodeTxSet(cancelled));
  return e.take();
}

Bytes appendKeyResp(const StorageId& inst, const std::string& key, const Digest& root) {
  Enc e;
  e.u8(kAppendKeyResp).str(inst).str(key).digest(root);
  return e.take();
}

Bytes confirmInRecovery(const AccountId& acc, Epoch ep, const Digest& root) {
  Enc e;
  e.u8(kConfirmInRecovery).str(acc).u64(ep).digest(root);
  return e.take();
}

}  // namespace payload

// ---------------------------------------------------------------------------

Bytes CertTx::encode() const {
  Enc e;
  e.bytes(tx.encoded()).bytes(cert);
  return e.take();
}

bool CertTx::decode(Dec& d, CertTx& out) {
  Bytes txBytes;
  if (!d.bytes(txBytes) || !d.bytes(out.cert)) return false;
  Dec td(txBytes);
  return Transaction::decode(td, out.tx) && td.done();
}

std::vector<CertTx> toCertTxList(const CertTxMap& m) {
  std::vector<CertTx> out;
  out.reserve(m.size());
  for (const auto& [tx, cert] : m) out.push_back(CertTx{tx, cert});
  return out;
}

CertTxMap toCertTxMap(const std::vector<CertTx>& v) {
  CertTxMap out;
  for (const auto& ct : v) out.emplace(ct.tx, ct.cert);
  return out;
}

std::vector<DepsDebit> toDepsList(const DepsDebitMap& m) {
  std::vector<DepsDebit> out;
  out.reserve(m.size());
  for (const auto& [tx, cert] : m) out.push_back(DepsDebit{tx, cert});
  return out;
}

// ---------------------------------------------------------------------------

Bytes StoredCert::encode() const {
  Enc e;
  e.u8(kCertStored).digest(root).raw(proof.encode()).raw(tsig.encode());
  return e.take();
}

std::optional<StoredCert> StoredCert::parse(const Bytes& b) {
  Dec d(b);
  uint8_t tag;
  StoredCert c;
  if (!d.u8(tag) || tag != kCertStored || !d.digest(c.root) ||
      !MerkleProof::decode(d, c.proof) || !ThresholdSig::decode(d, c.tsig) || !d.done())
    return std::nullopt;
  return c;
}

Bytes CodAcceptCert::encode() const {
  Enc e;
  e.u8(kCertAccept).str(acc).u64(ep).digest(root).raw(proof.encode()).raw(tsig.encode());
  return e.take();
}

std::optional<CodAcceptCert> CodAcceptCert::parse(const Bytes& b) {
  Dec d(b);
  uint8_t tag;
  CodAcceptCert c;
  if (!d.u8(tag) || tag != kCertAccept || !d.str(c.acc) || !d.u64(c.ep) ||
      !d.digest(c.root) || !MerkleProof::decode(d, c.proof) ||
      !ThresholdSig::decode(d, c.tsig) || !d.done())
    return std::nullopt;
  return c;
}

Bytes RecoveryCert::encode() const {
  Enc e;
  e.u8(kCertRecovery).str(acc).u64(ep).digest(root).raw(proof.encode()).raw(tsig.encode());
  return e.take();
}

std::optional<RecoveryCert> RecoveryCert::parse(const Bytes& b) {
  Dec d(b);
  uint8_t tag;
  RecoveryCert c;
  if (!d.u8(tag) || tag != kCertRecovery || !d.str(c.acc) || !d.u64(c.ep) ||
      !d.digest(c.root) || !MerkleProof::decode(d, c.proof) ||
      !ThresholdSig::decode(d, c.tsig) || !d.done())
    return std::nullopt;
  return c;
}

bool verifyStoredCert(const KeyRegistry& keys, const StorageId& inst, const std::string& key,
                      const Bytes& value, const StoredCert& cert) {
  if (!MerkleTree::verifyProof(cert.root, cert.proof, value)) return false;
  return keys.verifyThresholdSignature(payload::appendKeyResp(inst, key, cert.root),
                                       cert.tsig);
}

bool verifyCodAcceptCert(const KeyRegistry& keys, const Transaction& tx,
                         const CodAcceptCert& cert) {
  if (!MerkleTree::verifyProof(cert.root, cert.proof, tx.encoded())) return false;
  return keys.verifyThresholdSignature(payload::acceptAck(cert.acc, cert.ep, cert.root),
                                       cert.tsig);
}

bool verifyRecoveryCert(const KeyRegistry& keys, const Transaction& tx,
                        const RecoveryCert& cert) {
  if (!MerkleTree::verifyProof(cert.root, cert.proof, tx.encoded())) return false;
  return keys.verifyThresholdSignature(payload::confirmInRecovery(cert.acc, cert.ep, cert.root),
                                       cert.tsig);
}

bool verifyCommitCertificate(const KeyRegistry& keys, const Transaction& tx,
                             const Bytes& certBytes) {
  auto cert = StoredCert::parse(certBytes);
  if (!cert) return false;
  return verifyStoredCert(keys, "global", "txs", tx.encoded(), *cert);
}

bool verifyCreditCert(const KeyRegistry& keys, const AccountRegistry& accounts,
                      const Transaction& tx, const Bytes& certBytes) {
  if (accounts.isGenesis(tx)) return true;
  return verifyCommitCertificate(keys, tx, certBytes);
}

bool verifyTxCertForGlobalStorage(const KeyRegistry& keys, const AccountRegistry& accounts,
                                  const Bytes& value, const Bytes& certBytes) {
  Dec d(value);
  Transaction tx;
  if (!Transaction::decode(d, tx) || !d.done()) return false;
  if (!validateWellFormed(tx, accounts, keys)) return false;
  if (accounts.isGenesis(tx)) return true;  // initial values of the store
  if (certBytes.empty()) return false;
  switch (certBytes[0]) {
    case kCertAccept: {
      auto c = CodAcceptCert::parse(certBytes);
      return c && *tx.sender() == c->acc && verifyCodAcceptCert(keys, tx, *c);
    }
    case kCertRecovery: {
      auto c = RecoveryCert::parse(certBytes);
      return c && *tx.sender() == c->acc && verifyRecoveryCert(keys, tx, *c);
    }
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------

Bytes CloseState::encode() const {
  std::vector<Bytes> creditElems;
  creditElems.reserve(credits.size());
  for (const auto& [tx, cert] : credits) creditElems.push_back(CertTx{tx, cert}.encode());
  Enc e;
  e.set(std::move(creditElems));
  e.raw(payload::encodeTxSet(selected)).raw(payload::encodeTxSet(cancelled));
  return e.take();
}

bool CloseState::decode(Dec& d, CloseState& out) {
  std::vector<Bytes> creditElems;
  if (!d.setOf(creditElems)) return false;
  out.credits.clear();
  for (const auto& ce : creditElems) {
    Dec cd(ce);
    CertTx ct;
    if (!CertTx::decode(cd, ct) || !cd.done()) return false;
    out.credits.emplace(ct.tx, ct.cert);
  }
  auto readTxSet = [&](TxSet& set) -> bool {
    std::vector<Bytes> elems;
    if (!d.setOf(elems)) return false;
    set.clear();
    for (const auto& te : elems) {
      Dec td(te);
      Transaction tx;
      if (!Transaction::decode(td, tx) || !td.done()) return false;
      set.insert(tx);
    }
    return true;
  };
  return readTxSet(out.selected) && readTxSet(out.cancelled);
}

Bytes payloadCommitStateResp(const AccountId& acc, Epoch ep, const CloseState& st) {
  Enc e;
  e.u8(payload::kCommitStateResp).str(acc).u64(ep).raw(st.encode());
  return e.take();
}

Bytes EpochState::encode() const {
  Enc e;
  e.u64(epoch).raw(state.encode());
  if (cert)
    e.u8(1).raw(cert->encode());
  else
    e.u8(0);
  return e.take();
}

bool EpochState::decode(Dec& d, EpochState& out) {
  if (!d.u64(out.epoch) || !CloseState::decode(d, out.state)) return false;
  uint8_t hasCert;
  if (!d.u8(hasCert) || hasCert > 1) return false;
  if (hasCert) {
    ThresholdSig ts;
    if (!ThresholdSig::decode(d, ts)) return false;
    out.cert = std::move(ts);
  } else {
    out.cert.reset();
  }
  return true;
}

EpochState bootstrapEpochState(const AccountRegistry& accounts, const AccountId& acc) {
  EpochState st;
  st.epoch = 1;
  st.state.credits.emplace(accounts.genesisTx(acc), Bytes{});
  return st;
}

bool verifyAccountStateValue(const KeyRegistry& keys, const AccountRegistry& accounts,
                             const AccountId& acc, const Bytes& value) {
  Dec d(value);
  EpochState es;
  if (!EpochState::decode(d, es) || !d.done()) return false;
  if (value == bootstrapEpochState(accounts, acc).encode()) return true;
  if (!es.cert) return false;
  return keys.verifyThresholdSignature(payloadCommitStateResp(acc, es.epoch, es.state),
                                       *es.cert);
}

bool verifyCloseStateCert(const KeyRegistry& keys, const AccountRegistry& accounts,
                          const AccountId& acc, Epoch ep, const CloseState& st,
                          const ThresholdSig& cert) {
  if (!keys.verifyThresholdSignature(
          payload::confirmStateResp(acc, ep, st.selected, st.cancelled), cert))
    return false;
  for (const auto& [tx, c] : st.credits)
    if (tx.recipient() != acc || !verifyCreditCert(keys, accounts, tx, c)) return false;
  auto creditTotal = totalValue(keysOf(st.credits));
  auto selectedTotal = totalValue(st.selected);
  if (!creditTotal || !selectedTotal) return false;
  return *creditTotal >= *selectedTotal;
}

bool verifyDebitValue(const KeyRegistry& keys, const AccountRegistry& accounts,
                      const AccountId& acc, const Bytes& value) {
  Dec d(value);
  Transaction tx;
  if (!Transaction::decode(d, tx) || !d.done()) return false;
  return tx.sender() && *tx.sender() == acc && validateWellFormed(tx, accounts, keys);
}

// ---------------------------------------------------------------------------

MsgType msgTypeOf(const Message& m) {
  struct V {
    MsgType operator()(const ReadKeyReq&) { return MsgType::ReadKey; }
    MsgType operator()(const ReadKeyResp&) { return MsgType::ReadKeyResp; }
    MsgType operator()(const AppendKeyReq&) { return MsgType::AppendKey; }
    MsgType operator()(const AppendKeyResp&) { return MsgType::AppendKeyResp; }
    MsgType operator()(const PrepareReq&) { return MsgType::Prepare; }
    MsgType operator()(const PrepareRespMsg&) { return MsgType::PrepareResp; }
    MsgType operator()(const AlreadyPreparedMsg&) { return MsgType::AlreadyPrepared; }
    MsgType operator()(const ClosedMsg&) { return MsgType::Closed; }
    MsgType operator()(const AcceptReq&) { return MsgType::AcceptRequest; }
    MsgType operator()(const AcceptAckMsg&) { return MsgType::AcceptAck; }
    MsgType operator()(const CloseReq&) { return MsgType::Close; }
    MsgType operator()(const CloseRespMsg&) { return MsgType::CloseResp; }
    MsgType operator()(const ConfirmStateReq&) { return MsgType::ConfirmState; }
    MsgType operator()(const ConfirmStateRespMsg&) { return MsgType::ConfirmStateResp; }
    MsgType operator()(const InitCodMsg&) { return MsgType::InitCod; }
    MsgType operator()(const CommitStateReq&) { return MsgType::CommitCodInitialState; }
    MsgType operator()(const CommitStateRespMsg&) { return MsgType::CommitCodInitialStateResp; }
  };
  return std::visit(V{}, m);
}

uint64_t msgReqOf(const Message& m) {
  return std::visit(
      [](const auto& v) -> uint64_t {
        if constexpr (requires { v.req; })
          return v.req;
        else
          return 0;
      },
      m);
}

}  // namespace atx
