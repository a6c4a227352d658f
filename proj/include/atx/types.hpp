#pragma once
// Core asset-transfer types: transactions, the account registry and balance
// arithmetic.  Amounts are 64-bit unsigned; every sum is overflow-checked
// and reported as an error rather than wrapping.
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "atx/bytes.hpp"
#include "atx/crypto.hpp"
#include "atx/result.hpp"

namespace atx {

using AccountId = std::string;
using Amount = uint64_t;
using Epoch = uint64_t;
using TxId = Bytes;  // 16 bytes; genesis ids are derived from the recipient
using Int128 = __int128;

inline constexpr size_t kTxIdLen = 16;

// A transfer of `amount` coins from `sender` to `recipient`.  Genesis
// transactions have no sender, an id derived from the recipient and no
// signature; every other transaction is signed by one of the sender
// account's owners.
class Transaction {
 public:
  Transaction() = default;
  Transaction(std::optional<AccountId> sender, AccountId recipient, Amount amount, TxId id,
              std::optional<Bytes> sig);

  static Transaction genesis(const AccountId& recipient, Amount amount);
  // Signs ⟨sender, recipient, amount, id⟩ with the owner's key.
  static Transaction makeSigned(const KeyRegistry& keys, const ProcessId& owner,
                                const AccountId& sender, const AccountId& recipient,
                                Amount amount, const TxId& id);

  const std::optional<AccountId>& sender() const { return sender_; }
  const AccountId& recipient() const { return recipient_; }
  Amount amount() const { return amount_; }
  const TxId& id() const { return id_; }
  const std::optional<Bytes>& sig() const { return sig_; }
  bool isGenesisShaped() const { return !sender_.has_value(); }

  const Bytes& encoded() const { return enc_; }
  const Bytes& signedPayload() const { return payload_; }  // encoding without sig
  const Digest& digest() const { return digest_; }
  // Compact rendering for traces/reports: sender->recipient:amount#idprefix
  std::string label() const;

  static bool decode(Dec& d, Transaction& out);
  bool operator<(const Transaction& o) const { return enc_ < o.enc_; }
  bool operator==(const Transaction& o) const { return enc_ == o.enc_; }

 private:
  std::optional<AccountId> sender_;
  AccountId recipient_;
  Amount amount_ = 0;
  TxId id_;
  std::optional<Bytes> sig_;
  Bytes payload_;  // canonical encoding of ⟨sender, recipient, amount, id⟩
  Bytes enc_;      // payload plus signature field
  Digest digest_{};
};

using TxSet = std::set<Transaction>;
// Credits travel with their commit certificates.  Keyed by transaction so a
// transaction is never double-counted when certificate bytes differ.
using CertTxMap = std::map<Transaction, Bytes>;

struct AccountInfo {
  AccountId id;
  std::vector<ProcessId> owners;  // may be empty for receive-only accounts
  Amount genesisAmount = 0;
};

// Static account configuration: the ownership map and genesis funding.  A
// process owns at most one account.
class AccountRegistry {
 public:
  static Result<AccountRegistry> make(std::vector<AccountInfo> accounts);

  const AccountInfo* find(const AccountId& a) const;
  bool exists(const AccountId& a) const { return find(a) != nullptr; }
  const std::vector<AccountInfo>& accounts() const { return accounts_; }
  std::optional<AccountId> accountOf(const ProcessId& owner) const;
  bool isOwner(const ProcessId& p, const AccountId& a) const;
  const Transaction& genesisTx(const AccountId& a) const;
  const std::vector<Transaction>& allGenesis() const { return genesis_; }
  bool isGenesis(const Transaction& tx) const;

 private:
  std::vector<AccountInfo> accounts_;
  std::map<AccountId, size_t> index_;
  std::map<ProcessId, AccountId> ownerOf_;
  std::vector<Transaction> genesis_;
  TxSet genesisSet_;
};

// Genesis transactions are well-formed by definition; everything else needs
// existing accounts, a non-genesis id and a valid signature by one of the
// sender's owners.
bool validateWellFormed(const Transaction& tx, const AccountRegistry& accounts,
                        const KeyRegistry& keys);

Result<Amount> checkedAdd(Amount a, Amount b);
Result<Amount> totalValue(const TxSet& txs);
TxSet creditsOf(const TxSet& txs, const AccountId& a);
TxSet debitsOf(const TxSet& txs, const AccountId& a);
TxSet transactionsOf(const TxSet& txs, const AccountId& a);
// credits minus debits; may be negative.  Sums cannot overflow Int128 at any
// realistic set size.
Int128 balanceOf(const TxSet& txs, const AccountId& a);

// Key set of any Transaction-keyed map (credit maps, dependency maps).
template <typename MapT>
TxSet keysOf(const MapT& m) {
  TxSet out;
  for (const auto& [tx, v] : m) out.insert(tx);
  return out;
}

std::string formatInt128(Int128 v);

}  // namespace atx
