#pragma once
// Append-only quorum storage.  Each replica keeps a grow-only log per
// (instance, key); clients append value sets in one round trip and read in
// two (collect from a quorum, then write the union back so any later reader
// sees it).  Appends return a storage certificate per value: a Merkle
// membership proof against the appended set's root plus a quorum signature
// over ⟨APPEND-KEY-RESP, instance, key, root⟩.
//
// Instances: "global" with key "txs" (committed transactions), and
// "acct:<a>" with keys "debits" and "state".  A replica validates every
// (value, certificate) pair against the key's validity predicate and drops
// the whole request on any failure.
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atx/sim.hpp"
#include "atx/wire.hpp"

namespace atx {

// Validity predicate for a (value, cert) pair under (instance, key).
bool storageValidPair(const Ctx& ctx, const StorageId& inst, const std::string& key,
                      const Bytes& value, const Bytes& cert);

class StorageReplica {
 public:
  StorageReplica(Ctx* ctx, ReplicaId id) : ctx_(ctx), id_(std::move(id)) {}

  // Seeds genesis values: every genesis transaction in global/txs, the
  // epoch-1 bootstrap entry in each account's state key.
  void seedGenesis();

  ReadKeyResp onReadKey(const ReadKeyReq& req) const;
  // Empty result means the request was dropped (some pair failed validation).
  std::optional<AppendKeyResp> onAppendKey(const AppendKeyReq& req);

  const std::map<Bytes, Bytes>& logOf(const StorageId& inst, const std::string& key) const;

 private:
  Ctx* ctx_;
  ReplicaId id_;
  std::map<std::pair<StorageId, std::string>, std::map<Bytes, Bytes>> logs_;
};

// Client-side storage operations, layered on the phase machinery.  Both ops
// tag their trace phases with the caller's root operation id so nested
// round trips aggregate correctly.
class StorageClient : public ClientBase {
 protected:
  using ClientBase::ClientBase;

  // Two round trips: quorum read, then write-back of the validated union.
  // Returns value -> storage certificate (from the write-back).  An empty
  // union skips the write-back.
  Task<std::map<Bytes, Bytes>> readKeyOp(uint64_t rootOpId, StorageId inst,
                                         std::string key);

  // One round trip.  Returns value -> storage certificate.  Empty appends
  // complete immediately without network traffic.
  Task<std::map<Bytes, Bytes>> appendKeyOp(uint64_t rootOpId, StorageId inst,
                                           std::string key,
                                           std::vector<std::pair<Bytes, Bytes>> pairs);
};

}  // namespace atx
