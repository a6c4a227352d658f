#pragma once
// Run traces: a newline-delimited, deterministic record of everything a
// simulation did.  Identical scenario + seed + schedule produce
// byte-identical trace text.  The checker consumes traces either in memory
// or re-parsed from disk; both paths go through the same structures.
//
// Line format (one event per line):
//   e <idx> <tick> <kind> key=value key=value ...
// preceded by a single header line "atx-trace/1".  Values never contain
// spaces; lists are comma-joined, "-" when empty.
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atx/result.hpp"
#include "atx/types.hpp"

namespace atx {

enum class EvKind {
  Meta,             // scenario facts: replicas, accounts, faults, schedule
  TxDef,            // first sighting of a transaction: id, sender, recipient, amount
  OpStart,          // client operation began
  OpEnd,            // client operation finished
  MsgSend,          // message left a process
  MsgDeliver,       // message handed to a process
  Commit,           // commit certificate for a tx became assemblable
  ConsensusInvoke,  // a client proposed to the per-account consensus
  ConsensusDecide,  // the consensus instance fixed its value
  CertCap,          // some other certificate became assemblable
  RttPhase,         // one request-then-block phase of a client operation
};

const char* evKindName(EvKind k);
std::optional<EvKind> evKindFromName(const std::string& s);

struct TraceEvent {
  uint64_t idx = 0;   // logical time: position in the trace
  int64_t tick = 0;   // scheduling clock position
  EvKind kind = EvKind::Meta;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string* get(const std::string& key) const;
  std::string getOr(const std::string& key, const std::string& dflt) const;
  uint64_t getU64(const std::string& key, uint64_t dflt = 0) const;
};

struct Trace {
  std::vector<TraceEvent> events;

  std::string serialize() const;
  static Result<Trace> parse(const std::string& text);
};

// Append-only builder used by the simulator.
class TraceLog {
 public:
  TraceEvent& add(int64_t tick, EvKind kind,
                  std::vector<std::pair<std::string, std::string>> fields);
  // Records a TxDef event the first time a transaction id is seen.
  void noteTx(const Transaction& tx);
  const Trace& trace() const { return trace_; }
  Trace take() { return std::move(trace_); }

 private:
  Trace trace_;
  uint64_t next_ = 0;
  std::map<Bytes, char> seenTx_;
};

std::string joinIds(const std::vector<std::string>& ids);
std::vector<std::string> splitIds(const std::string& s);
std::string txIdHex(const Transaction& tx);
std::string txIdListOf(const TxSet& txs);

// Round-trip count for a finished client operation: the union of its
// request-then-block intervals (and those of nested operations under the
// same root), divided by the two ticks one round trip takes.  Concurrent
// phases overlap and count once; sequential phases add up.
Result<uint64_t> measureRttFromTrace(const Trace& t, uint64_t rootOpId);

}  // namespace atx
