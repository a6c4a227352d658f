#pragma once
// The asset-transfer protocol proper: replica dispatch over storage and the
// per-epoch overspending detectors, and the client operations (transfer,
// account query) with their recovery path.
//
// Fast path of a transfer: read the account state, the committed
// transactions and the pending-debits key while appending the new debit (all
// in parallel), then one prepare round, one accept round, and one append of
// the accepted debit to the global store.  Conflicts or a closed epoch send
// the client through recovery: close the epoch, agree on the close state
// through the per-account consensus register, notarize it, persist it, and
// either learn the debit's fate from the close state or resubmit it in the
// next epoch.
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "atx/cod.hpp"
#include "atx/scenario.hpp"
#include "atx/sim.hpp"
#include "atx/storage.hpp"
#include "atx/wire.hpp"

namespace atx {

inline constexpr int kMaxPrepareRounds = 8;
inline constexpr int kMaxEpochAttempts = 4;
inline constexpr size_t kCodBufferCap = 64;

// ---------------------------------------------------------------------------
// replica
// ---------------------------------------------------------------------------
class Replica : public Process {
 public:
  Replica(Ctx* ctx, ReplicaId id) : Process(ctx, std::move(id)), store_(ctx, pid()) {}

  // Seeds genesis storage and initializes every account's epoch-1 detector.
  void boot();
  void onMessage(const ProcessId& from, const Message& m) override;
  // Replicas never consume responses; stray ones cannot change state.
  bool wouldIgnore(const Message& m) const override;

  const StorageReplica& storage() const { return store_; }

 protected:
  // Honest rule: sign a commit-state only for the consensus register's
  // decided state, and never two different states for one epoch.
  virtual bool commitStateGuard(const AccountId& acc, Epoch ep, const CloseState& st);

  void reply(const ProcessId& to, Message m) { ctx_->eng->send(id_, to, std::move(m)); }
  void dispatch(const ProcessId& from, const Message& m);

 private:
  CodReplica& codAt(const AccountId& acc, Epoch ep);
  void routeCod(const ProcessId& from, const AccountId& acc, Epoch ep, const Message& m);
  void onInitCod(const InitCodMsg& m);
  void onCommitState(const ProcessId& from, const CommitStateReq& m);

  StorageReplica store_;
  std::map<std::pair<AccountId, Epoch>, CodReplica> cods_;
  // Messages for instances whose INIT-COD has not arrived yet.
  std::map<std::pair<AccountId, Epoch>, std::vector<std::pair<ProcessId, Message>>> buffer_;
  std::map<std::pair<AccountId, Epoch>, Digest> signedStates_;
};

// Fault presets.
class CrashReplica : public Replica {
 public:
  using Replica::Replica;
  void onMessage(const ProcessId&, const Message&) override {}
};

// Serves storage, withholds every detector and commit-state response.
class WithholdReplica : public Replica {
 public:
  using Replica::Replica;
  void onMessage(const ProcessId& from, const Message& m) override;
};

// Answers each prepare with a signature over exactly the request's debit
// set, without merging concurrent debits or checking the balance.
class EquivocatePrepareReplica : public Replica {
 public:
  using Replica::Replica;
  void onMessage(const ProcessId& from, const Message& m) override;
};

// Signs any valid commit-state, including conflicting ones for one epoch.
class SignConflictingCloseReplica : public Replica {
 public:
  using Replica::Replica;

 protected:
  bool commitStateGuard(const AccountId&, Epoch, const CloseState&) override {
    return true;
  }
};

// ---------------------------------------------------------------------------
// client
// ---------------------------------------------------------------------------
struct TransferRequest {
  std::string label;
  AccountId to;
  Amount amount = 0;
  std::optional<TxId> fixedId;
};

struct TransferResult {
  std::string label;
  std::string result;  // ok | fail | unresolved
  Transaction tx;
  uint64_t rootOpId = 0;
};

struct SubmitOutcome {
  enum class Kind { Ok, Declined, Closed } kind = Kind::Declined;
  CertTxMap acceptCerts;  // tx -> encoded accept certificate (Ok only)
};

class ProtocolClient : public StorageClient {
 public:
  ProtocolClient(Ctx* ctx, ProcessId id) : StorageClient(ctx, std::move(id)) {}

  void startTransfer(const TransferRequest& r, std::function<void(TransferResult)> done);
  void startGetAccountTransactions(const AccountId& acc, std::function<void(TxSet)> done);

 protected:
  struct EpochView {
    Epoch epoch = 1;
    CertTxMap initCredits;  // credits the epoch's detector started from
    CertTxMap credits;      // initCredits plus committed credits observed
    TxSet initDebits;       // debits carried over from the previous close
    TxSet restricted;       // cancelled in earlier epochs; never selectable
    TxSet observedPending;  // other owners' debits from the debits key
  };

  Task<TransferResult> transferOp(uint64_t root, TransferRequest r);
  Task<TxSet> getTxsOp(uint64_t root, AccountId acc);

  Task<EpochView> openEpochViewOp(uint64_t root, AccountId acc, const Transaction& myTx,
                                  bool appendDebit);
  Task<SubmitOutcome> submitOp(uint64_t root, AccountId acc, Epoch ep,
                               DepsDebitMap debits, CertTxMap credits, TxSet initDebits,
                               TxSet restricted);
  Task<std::optional<CertTxMap>> acceptPhase(uint64_t root, AccountId acc, Epoch ep,
                                             TxSet set, ThresholdSig cert,
                                             CertTxMap credits);
  Task<std::vector<CloseRespMsg>> closeRecordsOp(uint64_t root, AccountId acc, Epoch ep,
                                                 Bytes closeSig);
  Task<std::pair<CloseState, ThresholdSig>> confirmStateOp(
      uint64_t root, AccountId acc, Epoch ep, Bytes closeSig, TxSet pending,
      std::vector<CloseRespMsg> records, CertTxMap initCredits);
  Task<std::pair<ThresholdSig, ThresholdSig>> notarizeOp(uint64_t root, AccountId acc,
                                                         Epoch newEp, CloseState st,
                                                         ThresholdSig closeCert);
  Task<CloseState> recoveryOp(uint64_t root, AccountId acc, Epoch ep, TxSet pending,
                              CertTxMap epochInitCredits);

  // Awaits the consensus register's decision for (acc, instance).
  struct ProposeAwaiter {
    ProtocolClient* c;
    AccountId acc;
    Epoch inst;
    Engine::ConsensusValue v;
    std::optional<Engine::ConsensusValue> out;

    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) {
      c->ctx_->eng->propose(c->pid(), acc, inst, std::move(v),
                            [this, h](Engine::ConsensusValue d) {
                              out = std::move(d);
                              h.resume();
                            });
    }
    Engine::ConsensusValue await_resume() { return std::move(*out); }
  };

  DepsCert makeDeps(const AccountId& acc, Epoch ep, const Transaction& tx,
                    const CertTxMap& credits) const;
};

// ---------------------------------------------------------------------------
// byzantine clients
// ---------------------------------------------------------------------------
// Re-sends crafted protocol messages, including byte-identical duplicates.
class ReplayClient : public ClientBase {
 public:
  using ClientBase::ClientBase;
  void boot(const AccountId& victim);
};

// Appends garbage values to storage keys.
class StorageGarbageClient : public ClientBase {
 public:
  using ClientBase::ClientBase;
  void boot(const AccountId& victim);
};

// Owner that closes its account's first epoch and then tries to notarize
// two different close states at disjoint replica subsets.
class DivergentNotarizeClient : public ProtocolClient {
 public:
  using ProtocolClient::ProtocolClient;
  void boot();

 private:
  Task<Unit> divergentOp(uint64_t root, AccountId acc);
};

}  // namespace atx
