#pragma once
// Closable overspending detector, replica side.  One instance guards one
// (account, epoch).  Submitting owners drive a prepare round (repeated until
// a quorum reports the identical debit set, signatures included) and an
// accept round (one trip, quorum signs the prepared set's Merkle root).
// Closing stops the instance and fixes, through confirm-state, which debits
// survive into the next epoch and which are cancelled for good.
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atx/sim.hpp"
#include "atx/wire.hpp"

namespace atx {

// Deterministic close computation.  selected = initDebits and mustSelect
// (debits that may already hold accept certificates) plus as many pending
// debits as the credits cover, taken ascending by (amount, id); everything
// else pending is cancelled together with the inherited restricted set.
// Fails with CoverageAssertFailed when credits cannot even cover the
// mandatory part, which a correct history never produces.
struct SafeExtraction {
  TxSet selected;
  TxSet cancelled;
};
Result<SafeExtraction> extractSafeTransactions(const CertTxMap& credits,
                                               const TxSet& initDebits,
                                               const TxSet& mustSelect,
                                               const TxSet& pending,
                                               const TxSet& restricted);

// Validation helpers shared by the replica handlers and the client side.
bool validCreditPair(const Ctx& ctx, const AccountId& acc, const Transaction& tx,
                     const Bytes& cert);
bool validDepsDebit(const Ctx& ctx, const AccountId& acc, Epoch ep, const DepsDebit& dd,
                    const TxSet& knownCredits, const TxSet& initDebits,
                    const TxSet& restricted);
bool validCloseRecord(const Ctx& ctx, const AccountId& acc, Epoch ep,
                      const CloseRespMsg& rec);

class CodReplica {
 public:
  CodReplica(Ctx* ctx, ReplicaId id, AccountId acc, Epoch ep)
      : ctx_(ctx), id_(std::move(id)), acc_(std::move(acc)), ep_(ep) {}

  // Fixes the instance's initial credits, carried-over debits and the
  // restricted set from the close state that seeded this epoch.  Idempotent.
  void init(const CloseState& st);
  bool initialized() const { return init_; }
  bool isClosed() const { return closed_; }
  const TxSet& lastSigned() const { return lastSigned_; }

  // Handlers return the response to send, or nothing when the request is
  // invalid and must be dropped.
  std::optional<Message> onPrepare(const ProcessId& from, const PrepareReq& m);
  std::optional<Message> onAcceptRequest(const ProcessId& from, const AcceptReq& m);
  std::optional<Message> onClose(const ProcessId& from, const CloseReq& m);
  std::optional<Message> onConfirmState(const ProcessId& from, const ConfirmStateReq& m);

 private:
  bool balanceCovered(const TxSet& debits) const;
  Message closedReply(uint64_t req) const;

  Ctx* ctx_;
  ReplicaId id_;
  AccountId acc_;
  Epoch ep_;
  bool init_ = false;
  CertTxMap initCredits_;  // credits fixed at epoch start
  TxSet initDebits_;       // debits already charged when the epoch began
  TxSet restricted_;       // cancelled earlier; never again selectable
  CertTxMap credits_;      // initCredits_ plus everything merged since
  DepsDebitMap debits_;    // received debits with their dependency records
  TxSet lastSigned_;       // largest set this replica signed a prepare for
  TxSet certPrepared_;     // largest set seen with a prepared certificate
  std::optional<ThresholdSig> certPreparedSig_;
  bool closed_ = false;
  ProcessId closer_;
  Bytes closeSig_;
};

}  // namespace atx
