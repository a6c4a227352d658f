#pragma once
// Cryptographic building blocks: SHA-256 hashing, per-process signatures,
// quorum multi-signatures (n-f distinct replica shares over one message) and
// Merkle trees with domain-separated hashing.
//
// Signatures come in two interchangeable backends:
//   - ed25519: real signatures via libsodium (deterministic per RFC 8032)
//   - keyed-hash mock: HMAC-style construction, much faster, used by default
//     in simulation runs
// Both are exposed through KeyRegistry so protocol code never touches key
// material directly.
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "atx/bytes.hpp"
#include "atx/result.hpp"

namespace atx {

using ProcessId = std::string;
using ReplicaId = ProcessId;

Digest sha256(const uint8_t* data, size_t len);
inline Digest sha256(const Bytes& b) { return sha256(b.data(), b.size()); }

enum class SigScheme { Ed25519, KeyedHashMock };

// Multi-signature: at least n-f shares by distinct replicas over the same
// message.  Shares are kept sorted by replica id; creation trims to the
// first n-f so certificates are canonical.
struct ThresholdSig {
  std::vector<std::pair<ReplicaId, Bytes>> shares;

  Bytes encode() const;
  static bool decode(Dec& d, ThresholdSig& out);
  bool operator==(const ThresholdSig& o) const { return shares == o.shares; }
};

class KeyRegistry {
 public:
  // Derives every process key from masterSeed; requires f < n/3.
  static Result<KeyRegistry> make(std::vector<ReplicaId> replicas,
                                  std::vector<ProcessId> clients, uint32_t f,
                                  SigScheme scheme, uint64_t masterSeed);

  uint32_t n() const { return static_cast<uint32_t>(replicas_.size()); }
  uint32_t f() const { return f_; }
  uint32_t quorum() const { return n() - f_; }
  const std::vector<ReplicaId>& replicas() const { return replicas_; }
  bool isReplica(const ProcessId& id) const { return keys_.count(id) && replicaSet_.count(id); }
  bool isKnown(const ProcessId& id) const { return keys_.count(id) != 0; }

  Bytes sign(const ProcessId& signer, const Bytes& msg) const;
  bool verify(const ProcessId& signer, const Bytes& msg, const Bytes& sig) const;

  Result<ThresholdSig> createThresholdSignature(
      const Bytes& msg, const std::vector<std::pair<ReplicaId, Bytes>>& shares) const;
  bool verifyThresholdSignature(const Bytes& msg, const ThresholdSig& ts) const;

 private:
  struct Key {
    Bytes secret;  // ed25519 secret key or mock hmac key
    Bytes pub;     // ed25519 public key (empty for mock)
  };
  std::vector<ReplicaId> replicas_;
  std::map<ProcessId, char> replicaSet_;
  std::map<ProcessId, Key> keys_;
  uint32_t f_ = 0;
  SigScheme scheme_ = SigScheme::KeyedHashMock;
};

// Merkle tree over a set of byte-string values.  Leaves are hashed with a
// 0x00 domain byte, internal nodes with 0x01, and the empty tree has the
// fixed root H(0x02).  Leaves are sorted ascending by leaf digest; an odd
// node at the end of a level is promoted unchanged.
struct MerkleProof {
  // (siblingOnLeft flag, sibling digest) from leaf level upwards
  std::vector<std::pair<uint8_t, Digest>> path;

  Bytes encode() const;
  static bool decode(Dec& d, MerkleProof& out);
  bool operator==(const MerkleProof& o) const { return path == o.path; }
};

class MerkleTree {
 public:
  static MerkleTree build(const std::vector<Bytes>& values);  // values form a set
  const Digest& root() const { return root_; }
  size_t leafCount() const { return levels_.empty() ? 0 : levels_[0].size(); }
  Result<MerkleProof> proofFor(const Bytes& value) const;  // NotAMember if absent
  static bool verifyProof(const Digest& root, const MerkleProof& proof, const Bytes& value);
  static Digest leafHash(const Bytes& value);
  static Digest emptyRoot();

 private:
  std::vector<std::vector<Digest>> levels_;
  Digest root_{};
};

}  // namespace atx
