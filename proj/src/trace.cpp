#include "atx/trace.hpp"

#include <algorithm>
#include <sstream>

namespace atx {

const char* evKindName(EvKind k) {
  switch (k) {
    case EvKind::Meta: return "meta";
    case EvKind::TxDef: return "txdef";
    case EvKind::OpStart: return "opStart";
    case EvKind::OpEnd: return "opEnd";
    case EvKind::MsgSend: return "msgSend";
    case EvKind::MsgDeliver: return "msgDeliver";
    case EvKind::Commit: return "commit";
    case EvKind::ConsensusInvoke: return "consensusInvoke";
    case EvKind::ConsensusDecide: return "consensusDecide";
    case EvKind::CertCap: return "certCap";
    case EvKind::RttPhase: return "rttPhase";
  }
  return "?";
}

std::optional<EvKind> evKindFromName(const std::string& s) {
  static const std::pair<const char*, EvKind> table[] = {
      {"meta", EvKind::Meta},
      {"txdef", EvKind::TxDef},
      {"opStart", EvKind::OpStart},
      {"opEnd", EvKind::OpEnd},
      {"msgSend", EvKind::MsgSend},
      {"msgDeliver", EvKind::MsgDeliver},
      {"commit", EvKind::Commit},
      {"consensusInvoke", EvKind::ConsensusInvoke},
      {"consensusDecide", EvKind::ConsensusDecide},
      {"certCap", EvKind::CertCap},
      {"rttPhase", EvKind::RttPhase},
  };
  for (const auto& [name, kind] : table)
    if (s == name) return kind;
  return std::nullopt;
}

const std::string* TraceEvent::get(const std::string& key) const {
  for (const auto& [k, v] : fields)
    if (k == key) return &v;
  return nullptr;
}

std::string TraceEvent::getOr(const std::string& key, const std::string& dflt) const {
  const std::string* v = get(key);
  return v ? *v : dflt;
}

uint64_t TraceEvent::getU64(const std::string& key, uint64_t dflt) const {
  const std::string* v = get(key);
  if (!v) return dflt;
  return std::stoull(*v);
}

std::string Trace::serialize() const {
  std::ostringstream out;
  out << "atx-trace/1\n";
  for (const auto& e : events) {
    out << "e " << e.idx << ' ' << e.tick << ' ' << evKindName(e.kind);
    for (const auto& [k, v] : e.fields) out << ' ' << k << '=' << v;
    out << '\n';
  }
  return out.str();
}

Result<Trace> Trace::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "atx-trace/1")
    return Result<Trace>(Err::ConfigError, "bad trace header");
  Trace t;
  size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag, kindName;
    TraceEvent e;
    if (!(ls >> tag) || tag != "e" || !(ls >> e.idx >> e.tick >> kindName))
      return Result<Trace>(Err::ConfigError, "bad trace line " + std::to_string(lineNo));
    auto kind = evKindFromName(kindName);
    if (!kind)
      return Result<Trace>(Err::ConfigError, "unknown event kind at line " + std::to_string(lineNo));
    e.kind = *kind;
    std::string kv;
    while (ls >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        return Result<Trace>(Err::ConfigError, "bad field at line " + std::to_string(lineNo));
      e.fields.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    t.events.push_back(std::move(e));
  }
  return t;
}

TraceEvent& TraceLog::add(int64_t tick, EvKind kind,
                          std::vector<std::pair<std::string, std::string>> fields) {
  TraceEvent e;
  e.idx = next_++;
  e.tick = tick;
  e.kind = kind;
  e.fields = std::move(fields);
  trace_.events.push_back(std::move(e));
  return trace_.events.back();
}

void TraceLog::noteTx(const Transaction& tx) {
  if (seenTx_.count(tx.encoded())) return;
  seenTx_[tx.encoded()] = 1;
  add(0, EvKind::TxDef,
      {{"tx", txIdHex(tx)},
       {"from", tx.sender() ? *tx.sender() : "-"},
       {"to", tx.recipient()},
       {"amount", std::to_string(tx.amount())}});
}

std::string joinIds(const std::vector<std::string>& ids) {
  if (ids.empty()) return "-";
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(',');
    out += ids[i];
  }
  return out;
}

std::vector<std::string> splitIds(const std::string& s) {
  std::vector<std::string> out;
  if (s == "-" || s.empty()) return out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

std::string txIdHex(const Transaction& tx) { return toHex(tx.id()); }

std::string txIdListOf(const TxSet& txs) {
  std::vector<std::string> ids;
  ids.reserve(txs.size());
  for (const auto& tx : txs) ids.push_back(txIdHex(tx));
  std::sort(ids.begin(), ids.end());
  return joinIds(ids);
}

Result<uint64_t> measureRttFromTrace(const Trace& t, uint64_t rootOpId) {
  std::vector<std::pair<int64_t, int64_t>> intervals;
  for (const auto& e : t.events) {
    if (e.kind != EvKind::RttPhase) continue;
    if (e.getU64("root") != rootOpId) continue;
    int64_t a = static_cast<int64_t>(e.getU64("a"));
    int64_t b = static_cast<int64_t>(e.getU64("b"));
    if (b <= a) return Result<uint64_t>(Err::NotFailureFree, "degenerate phase interval");
    intervals.emplace_back(a, b);
  }
  std::sort(intervals.begin(), intervals.end());
  int64_t covered = 0, curA = 0, curB = -1;
  for (const auto& [a, b] : intervals) {
    if (curB < 0 || a > curB) {
      if (curB >= 0) covered += curB - curA;
      curA = a;
      curB = b;
    } else {
      curB = std::max(curB, b);
    }
  }
  if (curB >= 0) covered += curB - curA;
  if (covered % 2 != 0)
    return Result<uint64_t>(Err::NotFailureFree, "phases not aligned to round trips");
  return static_cast<uint64_t>(covered / 2);
}

}  // namespace atx
