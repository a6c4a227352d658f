#include "atx/types.hpp"

#include <algorithm>

namespace atx {

namespace {
constexpr uint8_t kTagTx = 0x54;  // domain byte for transaction signing payloads

Bytes txPayload(const std::optional<AccountId>& sender, const AccountId& recipient,
                Amount amount, const TxId& id) {
  Enc e;
  e.u8(kTagTx);
  if (sender)
    e.u8(1).str(*sender);
  else
    e.u8(0);
  e.str(recipient).u64(amount).bytes(id);
  return e.take();
}
}  // namespace

Transaction::Transaction(std::optional<AccountId> sender, AccountId recipient, Amount amount,
                         TxId id, std::optional<Bytes> sig)
    : sender_(std::move(sender)),
      recipient_(std::move(recipient)),
      amount_(amount),
      id_(std::move(id)),
      sig_(std::move(sig)) {
  payload_ = txPayload(sender_, recipient_, amount_, id_);
  Enc e;
  e.raw(payload_).opt(sig_);
  enc_ = e.take();
  digest_ = sha256(enc_);
}

Transaction Transaction::genesis(const AccountId& recipient, Amount amount) {
  // Deterministic per-account id so endowments of different accounts never
  // share a transaction id.
  Bytes seed{'g', 'e', 'n', 'e', 's', 'i', 's', ':'};
  seed.insert(seed.end(), recipient.begin(), recipient.end());
  Digest d = sha256(seed);
  return Transaction(std::nullopt, recipient, amount,
                     TxId(d.begin(), d.begin() + kTxIdLen), std::nullopt);
}

Transaction Transaction::makeSigned(const KeyRegistry& keys, const ProcessId& owner,
                                    const AccountId& sender, const AccountId& recipient,
                                    Amount amount, const TxId& id) {
  Bytes payload = txPayload(sender, recipient, amount, id);
  return Transaction(sender, recipient, amount, id, keys.sign(owner, payload));
}

std::string Transaction::label() const {
  std::string from = sender_ ? *sender_ : "genesis";
  std::string idPrefix = toHex(id_).substr(0, 4);
  return from + "->" + recipient_ + ":" + std::to_string(amount_) + "#" + idPrefix;
}

bool Transaction::decode(Dec& d, Transaction& out) {
  uint8_t tag, hasSender;
  if (!d.u8(tag) || tag != kTagTx || !d.u8(hasSender) || hasSender > 1) return false;
  std::optional<AccountId> sender;
  if (hasSender) {
    AccountId s;
    if (!d.str(s)) return false;
    sender = std::move(s);
  }
  AccountId recipient;
  uint64_t amount;
  TxId id;
  std::optional<Bytes> sig;
  if (!d.str(recipient) || !d.u64(amount) || !d.bytes(id) || !d.opt(sig)) return false;
  if (id.size() != kTxIdLen) return false;
  out = Transaction(std::move(sender), std::move(recipient), amount, std::move(id),
                    std::move(sig));
  return true;
}

Result<AccountRegistry> AccountRegistry::make(std::vector<AccountInfo> accounts) {
  AccountRegistry r;
  r.accounts_ = std::move(accounts);
  for (size_t i = 0; i < r.accounts_.size(); ++i) {
    const auto& a = r.accounts_[i];
    if (a.id.empty() || r.index_.count(a.id))
      return Result<AccountRegistry>(Err::ConfigError, "bad or duplicate account " + a.id);
    r.index_[a.id] = i;
    for (const auto& owner : a.owners) {
      if (r.ownerOf_.count(owner))
        return Result<AccountRegistry>(Err::ConfigError, owner + " owns two accounts");
      r.ownerOf_[owner] = a.id;
    }
    r.genesis_.push_back(Transaction::genesis(a.id, a.genesisAmount));
    r.genesisSet_.insert(r.genesis_.back());
  }
  return r;
}

const AccountInfo* AccountRegistry::find(const AccountId& a) const {
  auto it = index_.find(a);
  return it == index_.end() ? nullptr : &accounts_[it->second];
}

std::optional<AccountId> AccountRegistry::accountOf(const ProcessId& owner) const {
  auto it = ownerOf_.find(owner);
  if (it == ownerOf_.end()) return std::nullopt;
  return it->second;
}

bool AccountRegistry::isOwner(const ProcessId& p, const AccountId& a) const {
  auto it = ownerOf_.find(p);
  return it != ownerOf_.end() && it->second == a;
}

const Transaction& AccountRegistry::genesisTx(const AccountId& a) const {
  return genesis_.at(index_.at(a));
}

bool AccountRegistry::isGenesis(const Transaction& tx) const {
  return genesisSet_.count(tx) != 0;
}

bool validateWellFormed(const Transaction& tx, const AccountRegistry& accounts,
                        const KeyRegistry& keys) {
  if (tx.isGenesisShaped()) return accounts.isGenesis(tx);
  if (!accounts.exists(*tx.sender()) || !accounts.exists(tx.recipient())) return false;
  if (tx.id().size() != kTxIdLen) return false;
  if (std::all_of(tx.id().begin(), tx.id().end(), [](uint8_t b) { return b == 0; }))
    return false;  // the all-zero id stays reserved
  if (!tx.sig()) return false;
  const AccountInfo* acct = accounts.find(*tx.sender());
  for (const auto& owner : acct->owners)
    if (keys.verify(owner, tx.signedPayload(), *tx.sig())) return true;
  return false;
}

Result<Amount> checkedAdd(Amount a, Amount b) {
  Amount s = a + b;
  if (s < a) return Result<Amount>(Err::Overflow, "amount sum overflow");
  return s;
}

Result<Amount> totalValue(const TxSet& txs) {
  Amount total = 0;
  for (const auto& tx : txs) {
    auto s = checkedAdd(total, tx.amount());
    if (!s) return s;
    total = *s;
  }
  return total;
}

TxSet creditsOf(const TxSet& txs, const AccountId& a) {
  TxSet out;
  for (const auto& tx : txs)
    if (tx.recipient() == a) out.insert(tx);
  return out;
}

TxSet debitsOf(const TxSet& txs, const AccountId& a) {
  TxSet out;
  for (const auto& tx : txs)
    if (tx.sender() && *tx.sender() == a) out.insert(tx);
  return out;
}

TxSet transactionsOf(const TxSet& txs, const AccountId& a) {
  TxSet out;
  for (const auto& tx : txs)
    if (tx.recipient() == a || (tx.sender() && *tx.sender() == a)) out.insert(tx);
  return out;
}

Int128 balanceOf(const TxSet& txs, const AccountId& a) {
  Int128 bal = 0;
  for (const auto& tx : txs) {
    if (tx.recipient() == a) bal += tx.amount();
    if (tx.sender() && *tx.sender() == a) bal -= tx.amount();
  }
  return bal;
}

std::string formatInt128(Int128 v) {
  if (v == 0) return "0";
  bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  std::string s;
  while (u > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (neg) s.push_back('-');
  std::reverse(s.begin(), s.end());
  return s;
}

}  // namespace atx
