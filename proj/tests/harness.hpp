#pragma once
// Minimal simulated world for component tests: registries, a deterministic
// engine with its trace log, and a booted honest replica set.  Tests add
// their own clients on top and then drain the engine.  Not movable; every
// piece points into its siblings.
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "atx/protocol.hpp"
#include "doctest.h"

struct WorldCfg {
  int n = 4;
  int f = 1;
  std::vector<atx::AccountInfo> accounts{{"accA", {"alice", "bob"}, 10},
                                         {"accB", {"carol"}, 0}};
  std::vector<atx::ProcessId> clientIds{"alice", "bob", "carol"};
  std::set<atx::ReplicaId> crashed;  // replicas that drop every message
  atx::Engine::Options eng;          // synchronous, seed 1 by default
  uint64_t keySeed = 42;
};

struct World {
  atx::KeyRegistry keys;
  atx::AccountRegistry accounts;
  atx::TraceLog log;
  atx::Engine eng;
  atx::Ctx ctx;
  std::vector<std::unique_ptr<atx::Replica>> replicas;

  explicit World(const WorldCfg& cfg = {})
      : keys(makeKeys(cfg)), accounts(makeAccounts(cfg)), eng(cfg.eng, log) {
    ctx.keys = &keys;
    ctx.accounts = &accounts;
    ctx.eng = &eng;
    eng.observatory().init(&keys, &accounts, &log, {});
    for (const auto& rid : keys.replicas()) {
      auto r = cfg.crashed.count(rid)
                   ? std::make_unique<atx::CrashReplica>(&ctx, rid)
                   : std::make_unique<atx::Replica>(&ctx, rid);
      eng.registerProcess(r.get());
      replicas.push_back(std::move(r));
    }
    for (auto& r : replicas) r->boot();
  }

  World(const World&) = delete;
  World& operator=(const World&) = delete;

  atx::Replica& replica(size_t i) { return *replicas.at(i); }

 private:
  static atx::KeyRegistry makeKeys(const WorldCfg& cfg) {
    std::vector<atx::ReplicaId> rids;
    for (int i = 1; i <= cfg.n; ++i) rids.push_back("r" + std::to_string(i));
    auto r = atx::KeyRegistry::make(rids, cfg.clientIds, cfg.f, atx::SigScheme::KeyedHashMock,
                                    cfg.keySeed);
    REQUIRE(r.ok());
    return r.take();
  }
  static atx::AccountRegistry makeAccounts(const WorldCfg& cfg) {
    auto r = atx::AccountRegistry::make(cfg.accounts);
    REQUIRE(r.ok());
    return r.take();
  }
};

// Client exposing the raw storage operations.
class StorageProbe : public atx::StorageClient {
 public:
  using atx::StorageClient::StorageClient;
  using Map = std::map<atx::Bytes, atx::Bytes>;

  // Both return the root operation id used for round-trip accounting.
  uint64_t startAppend(atx::StorageId inst, std::string key,
                       std::vector<std::pair<atx::Bytes, atx::Bytes>> pairs,
                       std::function<void(Map)> done) {
    uint64_t op = ctx_->eng->nextOpId();
    spawnOp<Map>(op, appendKeyOp(op, std::move(inst), std::move(key), std::move(pairs)),
                 std::move(done));
    return op;
  }
  uint64_t startRead(atx::StorageId inst, std::string key, std::function<void(Map)> done) {
    uint64_t op = ctx_->eng->nextOpId();
    spawnOp<Map>(op, readKeyOp(op, std::move(inst), std::move(key)), std::move(done));
    return op;
  }
};
