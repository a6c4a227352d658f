#include "atx/storage.hpp"

namespace atx {

bool storageValidPair(const Ctx& ctx, const StorageId& inst, const std::string& key,
                      const Bytes& value, const Bytes& cert) {
  if (inst == sidGlobal())
    return key == "txs" &&
           verifyTxCertForGlobalStorage(*ctx.keys, *ctx.accounts, value, cert);
  if (inst.rfind("acct:", 0) == 0) {
    AccountId a = inst.substr(5);
    if (!ctx.accounts->exists(a)) return false;
    if (key == "state") return verifyAccountStateValue(*ctx.keys, *ctx.accounts, a, value);
    if (key == "debits") return verifyDebitValue(*ctx.keys, *ctx.accounts, a, value);
  }
  return false;
}

void StorageReplica::seedGenesis() {
  auto& txs = logs_[{sidGlobal(), "txs"}];
  for (const auto& g : ctx_->accounts->allGenesis()) txs.emplace(g.encoded(), Bytes{});
  for (const auto& a : ctx_->accounts->accounts()) {
    EpochState boot = bootstrapEpochState(*ctx_->accounts, a.id);
    logs_[{sidAccount(a.id), "state"}].emplace(boot.encode(), Bytes{});
    logs_[{sidAccount(a.id), "debits"}];
  }
}

ReadKeyResp StorageReplica::onReadKey(const ReadKeyReq& req) const {
  ReadKeyResp resp{req.req, req.inst, req.key, {}};
  auto it = logs_.find({req.inst, req.key});
  if (it != logs_.end())
    resp.pairs.assign(it->second.begin(), it->second.end());
  return resp;
}

std::optional<AppendKeyResp> StorageReplica::onAppendKey(const AppendKeyReq& req) {
  for (const auto& [v, c] : req.pairs)
    if (!storageValidPair(*ctx_, req.inst, req.key, v, c)) return std::nullopt;
  auto& log = logs_[{req.inst, req.key}];
  std::vector<Bytes> values;
  values.reserve(req.pairs.size());
  for (const auto& [v, c] : req.pairs) {
    log.emplace(v, c);  // first certificate for a value wins
    values.push_back(v);
  }
  MerkleTree tree = MerkleTree::build(values);
  Bytes share = ctx_->keys->sign(id_, payload::appendKeyResp(req.inst, req.key, tree.root()));
  return AppendKeyResp{req.req, req.inst, req.key, tree.root(), std::move(share)};
}

const std::map<Bytes, Bytes>& StorageReplica::logOf(const StorageId& inst,
                                                    const std::string& key) const {
  static const std::map<Bytes, Bytes> kEmpty;
  auto it = logs_.find({inst, key});
  return it == logs_.end() ? kEmpty : it->second;
}

Task<std::map<Bytes, Bytes>> StorageClient::readKeyOp(uint64_t rootOpId, StorageId inst,
                                                      std::string key) {
  uint64_t req = newReq();
  uint64_t opId = ctx_->eng->nextOpId();
  auto got = std::make_shared<std::map<ReplicaId, ReadKeyResp>>();
  size_t quorum = ctx_->keys->quorum();
  openPhase(req, opId, rootOpId,
            [this, got, quorum, inst, key](const ProcessId& from, const Message& m) {
              const auto* r = std::get_if<ReadKeyResp>(&m);
              if (!r || r->inst != inst || r->key != key) return false;
              if (!ctx_->keys->isReplica(from)) return false;
              (*got)[from] = *r;
              return got->size() >= quorum;
            });
  sendToAllReplicas([&](const ReplicaId&) { return Message{ReadKeyReq{req, inst, key}}; });
  co_await awaitPhase(req);

  std::map<Bytes, Bytes> merged;
  for (const auto& [rid, resp] : *got)
    for (const auto& [v, c] : resp.pairs)
      if (storageValidPair(*ctx_, inst, key, v, c)) merged.emplace(v, c);
  if (merged.empty()) co_return merged;

  std::vector<std::pair<Bytes, Bytes>> wb(merged.begin(), merged.end());
  co_return co_await appendKeyOp(rootOpId, std::move(inst), std::move(key), std::move(wb));
}

Task<std::map<Bytes, Bytes>> StorageClient::appendKeyOp(
    uint64_t rootOpId, StorageId inst, std::string key,
    std::vector<std::pair<Bytes, Bytes>> pairs) {
  std::map<Bytes, Bytes> out;
  if (pairs.empty()) co_return out;
  std::map<Bytes, Bytes> uniq(pairs.begin(), pairs.end());
  pairs.assign(uniq.begin(), uniq.end());

  std::vector<Bytes> values;
  values.reserve(pairs.size());
  for (const auto& [v, c] : pairs) values.push_back(v);
  MerkleTree tree = MerkleTree::build(values);
  Digest root = tree.root();
  Bytes pl = payload::appendKeyResp(inst, key, root);

  uint64_t req = newReq();
  uint64_t opId = ctx_->eng->nextOpId();
  auto shares = std::make_shared<std::vector<std::pair<ReplicaId, Bytes>>>();
  auto seen = std::make_shared<std::set<ReplicaId>>();
  size_t quorum = ctx_->keys->quorum();
  openPhase(req, opId, rootOpId,
            [this, shares, seen, quorum, inst, key, root,
             pl](const ProcessId& from, const Message& m) {
              const auto* r = std::get_if<AppendKeyResp>(&m);
              if (!r || r->inst != inst || r->key != key || r->root != root) return false;
              if (!ctx_->keys->isReplica(from) || seen->count(from)) return false;
              if (!ctx_->keys->verify(from, pl, r->share)) return false;
              seen->insert(from);
              shares->emplace_back(from, r->share);
              return shares->size() >= quorum;
            });
  sendToAllReplicas(
      [&](const ReplicaId&) { return Message{AppendKeyReq{req, inst, key, pairs}}; });
  co_await awaitPhase(req);

  auto ts = ctx_->keys->createThresholdSignature(pl, *shares);
  assert(ts.ok());  // each share was verified before being collected
  for (const auto& [v, c] : pairs) {
    auto proof = tree.proofFor(v);
    StoredCert cert{root, proof.take(), *ts};
    out.emplace(v, cert.encode());
  }
  co_return out;
}

}  // namespace atx
