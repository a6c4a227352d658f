#pragma once
// Protocol data: signed-payload construction, certificates, epoch state and
// the message set exchanged between clients and replicas.
//
// Every signed payload starts with a 1-byte domain tag and, for per-account
// protocol messages, embeds the (account, epoch) pair so signatures can
// never be replayed across instances.  docs/protocol.md lists the tag
// assignments and field layouts.
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "atx/bytes.hpp"
#include "atx/crypto.hpp"
#include "atx/result.hpp"
#include "atx/types.hpp"

namespace atx {

using StorageId = std::string;  // "global" or "acct:<account>"

// ---------------------------------------------------------------------------
// message type tags (wire identifiers, also used in trace rendering)
// ---------------------------------------------------------------------------
enum class MsgType : uint8_t {
  ReadKey = 0x01,
  ReadKeyResp = 0x02,
  AppendKey = 0x03,
  AppendKeyResp = 0x04,
  Prepare = 0x10,
  PrepareResp = 0x11,
  AlreadyPrepared = 0x12,
  Closed = 0x13,
  AcceptRequest = 0x14,
  AcceptAck = 0x15,
  Close = 0x16,
  CloseResp = 0x17,
  ConfirmState = 0x18,
  ConfirmStateResp = 0x19,
  InitCod = 0x20,
  CommitCodInitialState = 0x21,
  CommitCodInitialStateResp = 0x22,
};
const char* msgTypeName(MsgType t);

// ---------------------------------------------------------------------------
// signed payloads
// ---------------------------------------------------------------------------
namespace payload {
// domain tags for signatures (distinct from message tags)
inline constexpr uint8_t kDeps = 0x40;
inline constexpr uint8_t kPrepareResp = 0x41;
inline constexpr uint8_t kAcceptAck = 0x42;
inline constexpr uint8_t kClose = 0x43;
inline constexpr uint8_t kCloseResp = 0x44;
inline constexpr uint8_t kConfirmStateResp = 0x45;
inline constexpr uint8_t kAppendKeyResp = 0x46;
inline constexpr uint8_t kCommitStateResp = 0x47;
inline constexpr uint8_t kConfirmInRecovery = 0x48;

Bytes encodeTxSet(const TxSet& txs);

Bytes deps(const AccountId& acc, Epoch ep, const Transaction& tx, std::vector<TxId> depIds);
Bytes prepareResp(const AccountId& acc, Epoch ep, const TxSet& debits);
Bytes acceptAck(const AccountId& acc, Epoch ep, const Digest& root);
Bytes closeReq(const AccountId& acc, Epoch ep);
Bytes closeResp(const AccountId& acc, Epoch ep, const TxSet& preparedDebits);
Bytes confirmStateResp(const AccountId& acc, Epoch ep, const TxSet& selected,
                       const TxSet& cancelled);
Bytes appendKeyResp(const StorageId& inst, const std::string& key, const Digest& root);
Bytes confirmInRecovery(const AccountId& acc, Epoch ep, const Digest& root);
}  // namespace payload

// ---------------------------------------------------------------------------
// certified transactions and debit dependency records
// ---------------------------------------------------------------------------
struct CertTx {
  Transaction tx;
  Bytes cert;  // encoded certificate; empty = none (genesis in configs)

  Bytes encode() const;
  static bool decode(Dec& d, CertTx& out);
  bool operator<(const CertTx& o) const {
    return tx < o.tx || (tx == o.tx && cert < o.cert);
  }
  bool operator==(const CertTx& o) const { return tx == o.tx && cert == o.cert; }
};

std::vector<CertTx> toCertTxList(const CertTxMap& m);
CertTxMap toCertTxMap(const std::vector<CertTx>& v);

// Debit together with the credit ids its submitter had observed.  Initial
// debits of an epoch carry no dependency record.
struct DepsCert {
  std::vector<TxId> depIds;  // sorted
  ProcessId signer;          // submitting owner
  Bytes sig;                 // over payload::deps

  bool operator==(const DepsCert& o) const {
    return depIds == o.depIds && signer == o.signer && sig == o.sig;
  }
};
struct DepsDebit {
  Transaction tx;
  std::optional<DepsCert> cert;
};
using DepsDebitMap = std::map<Transaction, std::optional<DepsCert>>;
std::vector<DepsDebit> toDepsList(const DepsDebitMap& m);

// ---------------------------------------------------------------------------
// certificates
// ---------------------------------------------------------------------------
inline constexpr uint8_t kCertStored = 0xC1;
inline constexpr uint8_t kCertAccept = 0xC2;
inline constexpr uint8_t kCertRecovery = 0xC3;

// Proof that a value is stored under a key: membership proof against a root
// plus a quorum signature over ⟨APPEND-KEY-RESP, instance, key, root⟩.
struct StoredCert {
  Digest root{};
  MerkleProof proof;
  ThresholdSig tsig;

  Bytes encode() const;
  static std::optional<StoredCert> parse(const Bytes& b);
};

// Proof that a debit was accepted by the overspending detector of
// (account, epoch): membership in the accepted-set root plus a quorum
// signature over ⟨ACCEPT-ACK, account, epoch, root⟩.
struct CodAcceptCert {
  AccountId acc;
  Epoch ep = 0;
  Digest root{};
  MerkleProof proof;
  ThresholdSig tsig;

  Bytes encode() const;
  static std::optional<CodAcceptCert> parse(const Bytes& b);
};

// Proof that a debit was selected by the recovery of (account, epoch).
struct RecoveryCert {
  AccountId acc;
  Epoch ep = 0;
  Digest root{};
  MerkleProof proof;
  ThresholdSig tsig;

  Bytes encode() const;
  static std::optional<RecoveryCert> parse(const Bytes& b);
};

bool verifyStoredCert(const KeyRegistry& keys, const StorageId& inst, const std::string& key,
                      const Bytes& value, const StoredCert& cert);
bool verifyCodAcceptCert(const KeyRegistry& keys, const Transaction& tx,
                         const CodAcceptCert& cert);
bool verifyRecoveryCert(const KeyRegistry& keys, const Transaction& tx,
                        const RecoveryCert& cert);
// Commit check: a stored certificate of the global transaction store.
bool verifyCommitCertificate(const KeyRegistry& keys, const Transaction& tx,
                             const Bytes& certBytes);
// Credit validation as used inside the protocol: registry genesis
// transactions are funded by construction and need no certificate.
bool verifyCreditCert(const KeyRegistry& keys, const AccountRegistry& accounts,
                      const Transaction& tx, const Bytes& certBytes);
// Validity predicate of the global "txs" key: genesis initial values, or a
// transaction backed by an accept certificate or a recovery certificate.
bool verifyTxCertForGlobalStorage(const KeyRegistry& keys, const AccountRegistry& accounts,
                                  const Bytes& value, const Bytes& certBytes);

// ---------------------------------------------------------------------------
// close state and epoch state
// ---------------------------------------------------------------------------
// Result of closing an overspending-detector instance: the credits gathered
// from a quorum, the debits selected to survive and the debits cancelled.
struct CloseState {
  CertTxMap credits;
  TxSet selected;
  TxSet cancelled;

  Bytes encode() const;
  static bool decode(Dec& d, CloseState& out);
  Digest digest() const { return sha256(encode()); }
  bool operator==(const CloseState& o) const { return encode() == o.encode(); }
};

Bytes payloadCommitStateResp(const AccountId& acc, Epoch ep, const CloseState& st);

// Entry of the per-account "state" key: the epoch, the close state that
// seeds it and the quorum notarization (absent only for the epoch-1
// bootstrap entry).
struct EpochState {
  Epoch epoch = 0;
  CloseState state;
  std::optional<ThresholdSig> cert;

  Bytes encode() const;
  static bool decode(Dec& d, EpochState& out);
};

EpochState bootstrapEpochState(const AccountRegistry& accounts, const AccountId& acc);
bool verifyAccountStateValue(const KeyRegistry& keys, const AccountRegistry& accounts,
                             const AccountId& acc, const Bytes& value);
bool verifyCloseStateCert(const KeyRegistry& keys, const AccountRegistry& accounts,
                          const AccountId& acc, Epoch ep, const CloseState& st,
                          const ThresholdSig& cert);
// Validity predicate of a per-account "debits" key.
bool verifyDebitValue(const KeyRegistry& keys, const AccountRegistry& accounts,
                      const AccountId& acc, const Bytes& value);

// ---------------------------------------------------------------------------
// messages
// ---------------------------------------------------------------------------
struct ReadKeyReq {
  uint64_t req = 0;
  StorageId inst;
  std::string key;
};
struct ReadKeyResp {
  uint64_t req = 0;
  StorageId inst;
  std::string key;
  std::vector<std::pair<Bytes, Bytes>> pairs;  // (value, valueCert)
};
struct AppendKeyReq {
  uint64_t req = 0;
  StorageId inst;
  std::string key;
  std::vector<std::pair<Bytes, Bytes>> pairs;
};
struct AppendKeyResp {
  uint64_t req = 0;
  StorageId inst;
  std::string key;
  Digest root{};
  Bytes share;  // signature over payload::appendKeyResp
};

struct PrepareReq {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  std::vector<DepsDebit> debits;
  std::vector<CertTx> credits;
};
struct PrepareRespMsg {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  std::vector<DepsDebit> debits;
  std::vector<CertTx> credits;
  Bytes sig;  // over payload::prepareResp(debit transactions); empty = declined
};
struct AlreadyPreparedMsg {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  std::vector<Transaction> preparedDebits;
  ThresholdSig preparedCert;
};
struct ClosedMsg {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  ProcessId closer;  // owner whose close signature follows
  Bytes closeSig;    // over payload::closeReq
};
struct AcceptReq {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  std::vector<Transaction> debits;  // the prepared set
  ThresholdSig preparedCert;
  std::vector<CertTx> credits;
};
struct AcceptAckMsg {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  Digest root{};
  Bytes share;  // over payload::acceptAck
};
struct CloseReq {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  Bytes closeSig;  // owner signature over payload::closeReq
};
// Also embedded in CONFIRM-STATE requests as evidence.
struct CloseRespMsg {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  ReplicaId rid;
  std::vector<CertTx> credits;
  std::vector<Transaction> preparedDebits;
  // Subset of preparedDebits that holds a prepare certificate.  Kept separate
  // because the replica's signed-set chain can grow past the certified set,
  // and confirm-state must still learn which debits may carry accept
  // certificates.
  std::vector<Transaction> certDebits;
  std::optional<ThresholdSig> preparedCert;  // over payload::prepareResp(certDebits)
  Bytes sig;                                 // over payload::closeResp(preparedDebits)
};
struct ConfirmStateReq {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  ProcessId closer;  // owner whose close signature authorizes this epoch's close
  Bytes closeSig;    // over payload::closeReq
  std::vector<Transaction> pendingDebits;
  std::vector<CloseRespMsg> records;  // quorum of close responses
};
struct ConfirmStateRespMsg {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  std::vector<Transaction> selected;
  std::vector<Transaction> cancelled;
  Bytes sig;  // over payload::confirmStateResp
};

struct InitCodMsg {
  AccountId acc;
  Epoch ep = 0;
  CloseState state;
  std::optional<ThresholdSig> stateCert;  // absent only for epoch 1
};
struct CommitStateReq {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;  // epoch being initialized
  CloseState state;
  std::optional<ThresholdSig> closeCert;  // over the previous epoch's confirm-state
};
struct CommitStateRespMsg {
  uint64_t req = 0;
  AccountId acc;
  Epoch ep = 0;
  Bytes sigState;  // over payloadCommitStateResp
  Bytes sigTxs;    // over payload::confirmInRecovery(ep-1, root(selected))
};

using Message =
    std::variant<ReadKeyReq, ReadKeyResp, AppendKeyReq, AppendKeyResp, PrepareReq,
                 PrepareRespMsg, AlreadyPreparedMsg, ClosedMsg, AcceptReq, AcceptAckMsg,
                 CloseReq, CloseRespMsg, ConfirmStateReq, ConfirmStateRespMsg, InitCodMsg,
                 CommitStateReq, CommitStateRespMsg>;

MsgType msgTypeOf(const Message& m);
uint64_t msgReqOf(const Message& m);

}  // namespace atx
