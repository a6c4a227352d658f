#include "atx/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <stdexcept>

namespace atx {

namespace {

void ensureSodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("sodium_init failed");
}

Bytes deriveSeed(const char* domain, uint64_t masterSeed, const ProcessId& id) {
  Enc e;
  e.str(domain).u64(masterSeed).str(id);
  Digest d = sha256(e.bytes());
  return Bytes(d.begin(), d.end());
}

}  // namespace

Digest sha256(const uint8_t* data, size_t len) {
  ensureSodium();
  Digest out;
  crypto_hash_sha256(out.data(), data, len);
  return out;
}

Bytes ThresholdSig::encode() const {
  Enc e;
  e.u64(shares.size());
  for (const auto& [id, sig] : shares) e.str(id).bytes(sig);
  return e.take();
}

bool ThresholdSig::decode(Dec& d, ThresholdSig& out) {
  uint64_t n;
  if (!d.u64(n) || n > 4096) return false;
  out.shares.clear();
  for (uint64_t i = 0; i < n; ++i) {
    ReplicaId id;
    Bytes sig;
    if (!d.str(id) || !d.bytes(sig)) return false;
    out.shares.emplace_back(std::move(id), std::move(sig));
  }
  return true;
}

Result<KeyRegistry> KeyRegistry::make(std::vector<ReplicaId> replicas,
                                      std::vector<ProcessId> clients, uint32_t f,
                                      SigScheme scheme, uint64_t masterSeed) {
  ensureSodium();
  if (replicas.empty() || 3 * f >= replicas.size())
    return Result<KeyRegistry>(Err::ConfigError, "need f < n/3");
  KeyRegistry r;
  r.f_ = f;
  r.scheme_ = scheme;
  r.replicas_ = std::move(replicas);
  auto addKey = [&](const ProcessId& id) -> bool {
    if (r.keys_.count(id)) return false;
    Key k;
    if (scheme == SigScheme::Ed25519) {
      Bytes seed = deriveSeed("atx/ed25519-seed", masterSeed, id);
      k.pub.resize(crypto_sign_PUBLICKEYBYTES);
      k.secret.resize(crypto_sign_SECRETKEYBYTES);
      crypto_sign_seed_keypair(k.pub.data(), k.secret.data(), seed.data());
    } else {
      k.secret = deriveSeed("atx/mock-key", masterSeed, id);
    }
    r.keys_[id] = std::move(k);
    return true;
  };
  for (const auto& id : r.replicas_) {
    if (!addKey(id)) return Result<KeyRegistry>(Err::ConfigError, "duplicate id " + id);
    r.replicaSet_[id] = 1;
  }
  for (const auto& id : clients) {
    if (!addKey(id)) return Result<KeyRegistry>(Err::ConfigError, "duplicate id " + id);
  }
  return r;
}

Bytes KeyRegistry::sign(const ProcessId& signer, const Bytes& msg) const {
  auto it = keys_.find(signer);
  if (it == keys_.end()) throw std::logic_error("sign: unknown process " + signer);
  if (scheme_ == SigScheme::Ed25519) {
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), it->second.secret.data());
    return sig;
  }
  // keyed-hash mock: H(secret || H(msg))
  Enc e;
  e.bytes(it->second.secret).digest(sha256(msg));
  Digest d = sha256(e.bytes());
  return Bytes(d.begin(), d.end());
}

bool KeyRegistry::verify(const ProcessId& signer, const Bytes& msg, const Bytes& sig) const {
  auto it = keys_.find(signer);
  if (it == keys_.end()) return false;
  if (scheme_ == SigScheme::Ed25519) {
    if (sig.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(),
                                       it->second.pub.data()) == 0;
  }
  return sign(signer, msg) == sig;
}

Result<ThresholdSig> KeyRegistry::createThresholdSignature(
    const Bytes& msg, const std::vector<std::pair<ReplicaId, Bytes>>& shares) const {
  std::map<ReplicaId, Bytes> distinct;
  for (const auto& [id, sig] : shares) {
    if (!isReplica(id) || !verify(id, msg, sig))
      return Result<ThresholdSig>(Err::InvalidShare, "bad share from " + id);
    distinct.emplace(id, sig);
  }
  if (distinct.size() < quorum())
    return Result<ThresholdSig>(Err::InsufficientShares,
                                "have " + std::to_string(distinct.size()) + " need " +
                                    std::to_string(quorum()));
  ThresholdSig ts;
  for (const auto& [id, sig] : distinct) {
    ts.shares.emplace_back(id, sig);
    if (ts.shares.size() == quorum()) break;  // canonical: first n-f by id
  }
  return ts;
}

bool KeyRegistry::verifyThresholdSignature(const Bytes& msg, const ThresholdSig& ts) const {
  std::map<ReplicaId, char> seen;
  for (const auto& [id, sig] : ts.shares) {
    if (!isReplica(id) || seen.count(id) || !verify(id, msg, sig)) return false;
    seen[id] = 1;
  }
  return seen.size() >= quorum();
}

Digest MerkleTree::leafHash(const Bytes& value) {
  Bytes b;
  b.reserve(value.size() + 1);
  b.push_back(0x00);
  b.insert(b.end(), value.begin(), value.end());
  return sha256(b);
}

Digest MerkleTree::emptyRoot() {
  uint8_t b = 0x02;
  return sha256(&b, 1);
}

static Digest internalHash(const Digest& l, const Digest& r) {
  Bytes b;
  b.reserve(1 + 2 * sizeof(Digest));
  b.push_back(0x01);
  b.insert(b.end(), l.begin(), l.end());
  b.insert(b.end(), r.begin(), r.end());
  return sha256(b);
}

MerkleTree MerkleTree::build(const std::vector<Bytes>& values) {
  MerkleTree t;
  std::vector<Digest> leaves;
  leaves.reserve(values.size());
  for (const auto& v : values) leaves.push_back(leafHash(v));
  std::sort(leaves.begin(), leaves.end());
  leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());
  if (leaves.empty()) {
    t.root_ = emptyRoot();
    return t;
  }
  t.levels_.push_back(std::move(leaves));
  while (t.levels_.back().size() > 1) {
    const auto& cur = t.levels_.back();
    std::vector<Digest> next;
    next.reserve((cur.size() + 1) / 2);
    for (size_t i = 0; i < cur.size(); i += 2) {
      if (i + 1 < cur.size())
        next.push_back(internalHash(cur[i], cur[i + 1]));
      else
        next.push_back(cur[i]);  // odd node promoted unchanged
    }
    t.levels_.push_back(std::move(next));
  }
  t.root_ = t.levels_.back()[0];
  return t;
}

Result<MerkleProof> MerkleTree::proofFor(const Bytes& value) const {
  if (levels_.empty()) return Result<MerkleProof>(Err::NotAMember, "empty tree");
  Digest target = leafHash(value);
  const auto& leaves = levels_[0];
  auto it = std::lower_bound(leaves.begin(), leaves.end(), target);
  if (it == leaves.end() || *it != target)
    return Result<MerkleProof>(Err::NotAMember, "value not in tree");
  size_t idx = static_cast<size_t>(it - leaves.begin());
  MerkleProof proof;
  for (size_t lvl = 0; lvl + 1 < levels_.size(); ++lvl) {
    const auto& cur = levels_[lvl];
    size_t sib = idx ^ 1;
    if (sib < cur.size())
      proof.path.emplace_back(idx % 2 == 1 ? 1 : 0, cur[sib]);
    // else: odd node promoted, nothing to record at this level
    idx /= 2;
  }
  return proof;
}

bool MerkleTree::verifyProof(const Digest& root, const MerkleProof& proof, const Bytes& value) {
  Digest cur = leafHash(value);
  for (const auto& [siblingOnLeft, sib] : proof.path)
    cur = siblingOnLeft ? internalHash(sib, cur) : internalHash(cur, sib);
  return cur == root;
}

Bytes MerkleProof::encode() const {
  Enc e;
  e.u64(path.size());
  for (const auto& [side, d] : path) e.u8(side).digest(d);
  return e.take();
}

bool MerkleProof::decode(Dec& d, MerkleProof& out) {
  uint64_t n;
  if (!d.u64(n) || n > 64) return false;
  out.path.clear();
  for (uint64_t i = 0; i < n; ++i) {
    uint8_t side;
    Digest dg;
    if (!d.u8(side) || side > 1 || !d.digest(dg)) return false;
    out.path.emplace_back(side, dg);
  }
  return true;
}

}  // namespace atx
