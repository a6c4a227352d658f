#include "atx/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace atx {

using nlohmann::json;

const char* scheduleModeName(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::Synchronous: return "synchronous";
    case ScheduleMode::RandomDelay: return "random-delay";
    case ScheduleMode::Script: return "script";
  }
  return "?";
}

std::optional<ScheduleMode> scheduleModeFromName(const std::string& s) {
  if (s == "synchronous") return ScheduleMode::Synchronous;
  if (s == "random-delay") return ScheduleMode::RandomDelay;
  if (s == "script") return ScheduleMode::Script;
  return std::nullopt;
}

const char* replicaPresetName(ReplicaPreset p) {
  switch (p) {
    case ReplicaPreset::Crash: return "crash";
    case ReplicaPreset::EquivocatePrepare: return "equivocate-prepare";
    case ReplicaPreset::SignConflictingClose: return "sign-conflicting-close";
    case ReplicaPreset::Withhold: return "withhold";
  }
  return "?";
}

const char* clientPresetName(ClientPreset p) {
  switch (p) {
    case ClientPreset::Replay: return "replay";
    case ClientPreset::StorageGarbage: return "storage-garbage";
    case ClientPreset::DivergentNotarize: return "divergent-notarize";
  }
  return "?";
}

std::optional<ReplicaPreset> replicaPresetFromName(const std::string& s) {
  if (s == "crash") return ReplicaPreset::Crash;
  if (s == "equivocate-prepare") return ReplicaPreset::EquivocatePrepare;
  if (s == "sign-conflicting-close") return ReplicaPreset::SignConflictingClose;
  if (s == "withhold") return ReplicaPreset::Withhold;
  return std::nullopt;
}

std::optional<ClientPreset> clientPresetFromName(const std::string& s) {
  if (s == "replay") return ClientPreset::Replay;
  if (s == "storage-garbage") return ClientPreset::StorageGarbage;
  if (s == "divergent-notarize") return ClientPreset::DivergentNotarize;
  return std::nullopt;
}

std::vector<ReplicaId> ScenarioSpec::replicaIds() const {
  std::vector<ReplicaId> ids;
  for (uint32_t i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
  return ids;
}

std::vector<ProcessId> ScenarioSpec::clientIds() const {
  std::set<ProcessId> ids;
  for (const auto& a : accounts)
    for (const auto& o : a.owners) ids.insert(o);
  for (const auto& [c, p] : byzClients) ids.insert(c);
  return {ids.begin(), ids.end()};
}

Status ScenarioSpec::validate() const {
  auto fail = [](std::string why) {
    return Status{Err::ConfigError, std::move(why)};
  };
  if (n == 0 || 3 * f >= n) return fail("need f < n/3");
  if (accounts.empty()) return fail("no accounts");
  std::set<AccountId> accIds;
  std::set<ProcessId> owners;
  for (const auto& a : accounts) {
    if (a.id.empty()) return fail("empty account id");
    if (!accIds.insert(a.id).second) return fail("duplicate account " + a.id);
    for (const auto& o : a.owners)
      if (!owners.insert(o).second) return fail("process " + o + " owns two accounts");
  }
  auto rids = replicaIds();
  std::set<ReplicaId> ridSet(rids.begin(), rids.end());
  for (const auto& o : owners)
    if (ridSet.count(o)) return fail("owner " + o + " collides with a replica id");
  if (byzReplicas.size() > f)
    return fail("more byzantine replicas than the fault budget f");
  for (const auto& [r, p] : byzReplicas)
    if (!ridSet.count(r)) return fail("unknown byzantine replica " + r);
  for (const auto& [c, p] : byzClients)
    if (ridSet.count(c)) return fail("byzantine client " + c + " collides with a replica id");
  std::set<std::string> labels;
  for (const auto& t : transfers) {
    if (t.label.empty()) return fail("transfer without label");
    if (!labels.insert(t.label).second) return fail("duplicate transfer label " + t.label);
    if (!owners.count(t.client)) return fail("transfer " + t.label + ": client owns no account");
    if (byzClients.count(t.client))
      return fail("transfer " + t.label + ": client is byzantine");
    if (!accIds.count(t.to)) return fail("transfer " + t.label + ": unknown recipient");
    if (t.amount == 0) return fail("transfer " + t.label + ": zero amount");
    if (t.fixedId && t.fixedId->size() != kTxIdLen)
      return fail("transfer " + t.label + ": fixed id must be 16 bytes");
  }
  for (const auto& t : transfers)
    for (const auto& dep : t.after)
      if (!labels.count(dep)) return fail("transfer " + t.label + ": unknown dependency " + dep);
  return okStatus();
}

Result<ScenarioSpec> scenarioFromJson(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    return Result<ScenarioSpec>(Err::Malformed, "not a JSON object");
  if (j.value("format", "") != "atx-scenario/1")
    return Result<ScenarioSpec>(Err::Malformed, "missing format atx-scenario/1");

  ScenarioSpec s;
  try {
    s.n = j.value("n", 4u);
    s.f = j.value("f", 1u);
    s.seed = j.value("seed", uint64_t{1});
    std::string crypto = j.value("crypto", "keyed-hash-mock");
    if (crypto == "ed25519")
      s.crypto = SigScheme::Ed25519;
    else if (crypto == "keyed-hash-mock")
      s.crypto = SigScheme::KeyedHashMock;
    else
      return Result<ScenarioSpec>(Err::Malformed, "unknown crypto " + crypto);
    auto mode = scheduleModeFromName(j.value("schedule", "synchronous"));
    if (!mode) return Result<ScenarioSpec>(Err::Malformed, "unknown schedule");
    s.mode = *mode;
    s.minDelay = j.value("minDelay", 1);
    s.maxDelay = j.value("maxDelay", 3);
    s.maxEvents = j.value("maxEvents", uint64_t{5'000'000});

    for (const auto& ja : j.value("accounts", json::array())) {
      AccountInfo a;
      a.id = ja.at("id").get<std::string>();
      for (const auto& o : ja.value("owners", json::array()))
        a.owners.push_back(o.get<std::string>());
      a.genesisAmount = ja.value("genesis", uint64_t{0});
      s.accounts.push_back(std::move(a));
    }
    for (const auto& jt : j.value("transfers", json::array())) {
      TransferSpec t;
      t.label = jt.at("label").get<std::string>();
      t.client = jt.at("client").get<std::string>();
      t.to = jt.at("to").get<std::string>();
      t.amount = jt.at("amount").get<uint64_t>();
      t.at = jt.value("at", int64_t{0});
      for (const auto& d : jt.value("after", json::array()))
        t.after.push_back(d.get<std::string>());
      if (jt.contains("fixedId")) {
        auto id = fromHex(jt.at("fixedId").get<std::string>());
        if (!id) return Result<ScenarioSpec>(Err::Malformed, "bad fixedId hex");
        t.fixedId = *id;
      }
      s.transfers.push_back(std::move(t));
    }
    // items() iterates by reference, so the object must outlive the loop.
    json jbr = j.value("byzReplicas", json::object());
    for (const auto& [rid, jp] : jbr.items()) {
      auto p = replicaPresetFromName(jp.get<std::string>());
      if (!p) return Result<ScenarioSpec>(Err::Malformed, "unknown replica preset");
      s.byzReplicas[rid] = *p;
    }
    json jbc = j.value("byzClients", json::object());
    for (const auto& [cid, jp] : jbc.items()) {
      auto p = clientPresetFromName(jp.get<std::string>());
      if (!p) return Result<ScenarioSpec>(Err::Malformed, "unknown client preset");
      s.byzClients[cid] = *p;
    }
  } catch (const json::exception& e) {
    return Result<ScenarioSpec>(Err::Malformed, e.what());
  }

  if (Status st = s.validate(); !st.ok())
    return Result<ScenarioSpec>(st.error(), st.note());
  return Result<ScenarioSpec>(std::move(s));
}

std::string scenarioToJson(const ScenarioSpec& s) {
  json j;
  j["format"] = "atx-scenario/1";
  j["n"] = s.n;
  j["f"] = s.f;
  j["seed"] = s.seed;
  j["crypto"] = s.crypto == SigScheme::Ed25519 ? "ed25519" : "keyed-hash-mock";
  j["schedule"] = scheduleModeName(s.mode);
  j["minDelay"] = s.minDelay;
  j["maxDelay"] = s.maxDelay;
  j["maxEvents"] = s.maxEvents;
  j["accounts"] = json::array();
  for (const auto& a : s.accounts) {
    json ja;
    ja["id"] = a.id;
    ja["owners"] = a.owners;
    ja["genesis"] = a.genesisAmount;
    j["accounts"].push_back(std::move(ja));
  }
  j["transfers"] = json::array();
  for (const auto& t : s.transfers) {
    json jt;
    jt["label"] = t.label;
    jt["client"] = t.client;
    jt["to"] = t.to;
    jt["amount"] = t.amount;
    jt["at"] = t.at;
    if (!t.after.empty()) jt["after"] = t.after;
    if (t.fixedId) jt["fixedId"] = toHex(*t.fixedId);
    j["transfers"].push_back(std::move(jt));
  }
  if (!s.byzReplicas.empty()) {
    json jb = json::object();
    for (const auto& [r, p] : s.byzReplicas) jb[r] = replicaPresetName(p);
    j["byzReplicas"] = std::move(jb);
  }
  if (!s.byzClients.empty()) {
    json jb = json::object();
    for (const auto& [c, p] : s.byzClients) jb[c] = clientPresetName(p);
    j["byzClients"] = std::move(jb);
  }
  return j.dump(2) + "\n";
}

Result<ScenarioSpec> loadScenarioFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Result<ScenarioSpec>(Err::ConfigError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenarioFromJson(ss.str());
}

}  // namespace atx
