#include "atx/storage.hpp"

#include "atx/wire.hpp"
#include "harness.hpp"

using namespace atx;

namespace {

Transaction debitOfA(const World& w, Amount amount, uint8_t idByte) {
  return Transaction::makeSigned(w.keys, "alice", "accA", "accB", amount,
                                 TxId(kTxIdLen, idByte));
}

size_t sendsFrom(const Trace& t, const ProcessId& pid) {
  size_t n = 0;
  for (const auto& ev : t.events)
    if (ev.kind == EvKind::MsgSend && ev.getOr("src", "") == pid) ++n;
  return n;
}

}  // namespace

TEST_CASE("replicas seed genesis storage at boot") {
  World w;
  const auto& txs = w.replica(0).storage().logOf(sidGlobal(), "txs");
  REQUIRE(txs.size() == w.accounts.allGenesis().size());
  for (const auto& g : w.accounts.allGenesis()) CHECK(txs.count(g.encoded()));

  const auto& state = w.replica(0).storage().logOf(sidAccount("accA"), "state");
  REQUIRE(state.size() == 1);
  CHECK(state.begin()->first == bootstrapEpochState(w.accounts, "accA").encode());
  CHECK(w.replica(0).storage().logOf(sidAccount("accA"), "debits").empty());
}

TEST_CASE("validity predicate admits exactly the values a key is for") {
  World w;
  Transaction myDebit = debitOfA(w, 3, 1);
  Bytes garbage{0xDE, 0xAD};

  SUBCASE("account debits key") {
    CHECK(storageValidPair(w.ctx, sidAccount("accA"), "debits", myDebit.encoded(), {}));
    // Some other account's debit, a credit-side genesis and raw bytes are out.
    Transaction foreign =
        Transaction::makeSigned(w.keys, "carol", "accB", "accA", 0, TxId(kTxIdLen, 2));
    CHECK_FALSE(storageValidPair(w.ctx, sidAccount("accA"), "debits", foreign.encoded(), {}));
    CHECK_FALSE(storageValidPair(w.ctx, sidAccount("accA"), "debits",
                                 w.accounts.genesisTx("accA").encoded(), {}));
    CHECK_FALSE(storageValidPair(w.ctx, sidAccount("accA"), "debits", garbage, {}));
  }

  SUBCASE("account state key") {
    Bytes boot = bootstrapEpochState(w.accounts, "accA").encode();
    CHECK(storageValidPair(w.ctx, sidAccount("accA"), "state", boot, {}));
    CHECK_FALSE(storageValidPair(w.ctx, sidAccount("accB"), "state", boot, {}));
    Bytes tampered = boot;
    tampered.back() ^= 1;
    CHECK_FALSE(storageValidPair(w.ctx, sidAccount("accA"), "state", tampered, {}));
  }

  SUBCASE("global transactions key") {
    CHECK(storageValidPair(w.ctx, sidGlobal(), "txs",
                           w.accounts.genesisTx("accB").encoded(), {}));
    // A non-genesis transaction needs an accept certificate.
    CHECK_FALSE(storageValidPair(w.ctx, sidGlobal(), "txs", myDebit.encoded(), {}));
    MerkleTree tree = MerkleTree::build({myDebit.encoded()});
    Bytes ackMsg = payload::acceptAck("accA", 1, tree.root());
    std::vector<std::pair<ReplicaId, Bytes>> shares;
    for (ReplicaId r : {"r1", "r2", "r3"}) shares.emplace_back(r, w.keys.sign(r, ackMsg));
    CodAcceptCert cert{"accA", 1, tree.root(), tree.proofFor(myDebit.encoded()).take(),
                       w.keys.createThresholdSignature(ackMsg, shares).take()};
    CHECK(storageValidPair(w.ctx, sidGlobal(), "txs", myDebit.encoded(), cert.encode()));
  }

  SUBCASE("unknown instances and keys") {
    CHECK_FALSE(storageValidPair(w.ctx, sidGlobal(), "debits", myDebit.encoded(), {}));
    CHECK_FALSE(storageValidPair(w.ctx, sidAccount("accA"), "txs", myDebit.encoded(), {}));
    CHECK_FALSE(storageValidPair(w.ctx, "acct:nosuch", "debits", myDebit.encoded(), {}));
    CHECK_FALSE(storageValidPair(w.ctx, "bogus", "txs", myDebit.encoded(), {}));
  }
}

TEST_CASE("a replica appends whole requests or drops them") {
  World w;
  StorageReplica rep(&w.ctx, "r2");
  rep.seedGenesis();
  Transaction d1 = debitOfA(w, 3, 1);
  Transaction d2 = debitOfA(w, 4, 2);

  auto resp = rep.onAppendKey(AppendKeyReq{1, sidAccount("accA"), "debits",
                                           {{d1.encoded(), {}}, {d2.encoded(), {}}}});
  REQUIRE(resp);
  CHECK(rep.logOf(sidAccount("accA"), "debits").size() == 2);
  // The acknowledged root covers exactly the appended set and the share
  // signs the storage response payload for it.
  CHECK(resp->root == MerkleTree::build({d1.encoded(), d2.encoded()}).root());
  CHECK(w.keys.verify("r2", payload::appendKeyResp(sidAccount("accA"), "debits", resp->root),
                      resp->share));

  // Appending again is harmless.
  auto again = rep.onAppendKey(AppendKeyReq{2, sidAccount("accA"), "debits",
                                            {{d1.encoded(), {}}}});
  REQUIRE(again);
  CHECK(rep.logOf(sidAccount("accA"), "debits").size() == 2);

  // One invalid pair poisons the request; nothing is kept.
  auto bad = rep.onAppendKey(AppendKeyReq{3, sidAccount("accA"), "debits",
                                          {{debitOfA(w, 5, 3).encoded(), {}},
                                           {Bytes{0xDE, 0xAD}, {}}}});
  CHECK_FALSE(bad);
  CHECK(rep.logOf(sidAccount("accA"), "debits").size() == 2);

  auto read = rep.onReadKey(ReadKeyReq{4, sidAccount("accA"), "debits"});
  CHECK(read.pairs.size() == 2);
  CHECK(rep.onReadKey(ReadKeyReq{5, sidAccount("accA"), "nosuch"}).pairs.empty());
}

TEST_CASE("client append takes one round trip and yields verifiable certificates") {
  World w;
  StorageProbe probe(&w.ctx, "alice");
  w.eng.registerProcess(&probe);
  Transaction d1 = debitOfA(w, 3, 1);

  StorageProbe::Map out;
  bool done = false;
  uint64_t op = probe.startAppend(sidAccount("accA"), "debits", {{d1.encoded(), {}}},
                                  [&](StorageProbe::Map m) {
                                    out = std::move(m);
                                    done = true;
                                  });
  w.eng.run();
  REQUIRE(done);
  REQUIRE(out.size() == 1);

  auto rtts = measureRttFromTrace(w.log.trace(), op);
  REQUIRE(rtts.ok());
  CHECK(*rtts == 1);

  auto cert = StoredCert::parse(out.at(d1.encoded()));
  REQUIRE(cert);
  CHECK(verifyStoredCert(w.keys, sidAccount("accA"), "debits", d1.encoded(), *cert));
  CHECK_FALSE(verifyStoredCert(w.keys, sidAccount("accA"), "debits",
                               debitOfA(w, 4, 2).encoded(), *cert));
  CHECK_FALSE(verifyStoredCert(w.keys, sidGlobal(), "txs", d1.encoded(), *cert));

  for (auto& r : w.replicas)
    CHECK(r->storage().logOf(sidAccount("accA"), "debits").count(d1.encoded()));
}

TEST_CASE("client read takes two round trips and returns the stored union") {
  World w;
  StorageProbe probe(&w.ctx, "alice");
  w.eng.registerProcess(&probe);

  StorageProbe::Map out;
  uint64_t op = probe.startRead(sidGlobal(), "txs",
                                [&](StorageProbe::Map m) { out = std::move(m); });
  w.eng.run();
  REQUIRE(out.size() == w.accounts.allGenesis().size());
  for (const auto& g : w.accounts.allGenesis()) CHECK(out.count(g.encoded()));

  auto rtts = measureRttFromTrace(w.log.trace(), op);
  REQUIRE(rtts.ok());
  CHECK(*rtts == 2);
}

TEST_CASE("reading an empty key skips the write-back round") {
  World w;
  StorageProbe probe(&w.ctx, "alice");
  w.eng.registerProcess(&probe);

  bool done = false;
  uint64_t op = probe.startRead(sidAccount("accA"), "debits", [&](StorageProbe::Map m) {
    CHECK(m.empty());
    done = true;
  });
  w.eng.run();
  REQUIRE(done);
  auto rtts = measureRttFromTrace(w.log.trace(), op);
  REQUIRE(rtts.ok());
  CHECK(*rtts == 1);
}

TEST_CASE("an empty append completes without any network traffic") {
  World w;
  StorageProbe probe(&w.ctx, "alice");
  w.eng.registerProcess(&probe);

  bool done = false;
  uint64_t op = probe.startAppend(sidAccount("accA"), "debits", {},
                                  [&](StorageProbe::Map m) {
                                    CHECK(m.empty());
                                    done = true;
                                  });
  CHECK(done);  // completes synchronously
  w.eng.run();
  CHECK(sendsFrom(w.log.trace(), "alice") == 0);
  auto rtts = measureRttFromTrace(w.log.trace(), op);
  REQUIRE(rtts.ok());
  CHECK(*rtts == 0);
}

TEST_CASE("a read propagates values the reader saw to every replica") {
  World w;
  Transaction d1 = debitOfA(w, 3, 1);
  // Three replicas already store the debit; the fourth has never seen it.
  AppendKeyReq inject{77, sidAccount("accA"), "debits", {{d1.encoded(), {}}}};
  for (size_t i : {0u, 1u, 2u}) w.replica(i).onMessage("bob", Message{inject});
  CHECK_FALSE(w.replica(3).storage().logOf(sidAccount("accA"), "debits").count(d1.encoded()));

  StorageProbe probe(&w.ctx, "alice");
  w.eng.registerProcess(&probe);
  StorageProbe::Map out;
  probe.startRead(sidAccount("accA"), "debits",
                  [&](StorageProbe::Map m) { out = std::move(m); });
  w.eng.run();

  // Any quorum of answers includes at least two of the seeded replicas, so
  // the union contains the debit and the write-back hands it to the fourth.
  CHECK(out.count(d1.encoded()));
  CHECK(w.replica(3).storage().logOf(sidAccount("accA"), "debits").count(d1.encoded()));
}

TEST_CASE("storage stays available with a crashed replica") {
  WorldCfg cfg;
  cfg.crashed = {"r4"};
  World w(cfg);
  StorageProbe probe(&w.ctx, "alice");
  w.eng.registerProcess(&probe);
  Transaction d1 = debitOfA(w, 3, 1);

  StorageProbe::Map appended, readBack;
  probe.startAppend(sidAccount("accA"), "debits", {{d1.encoded(), {}}},
                    [&](StorageProbe::Map m) { appended = std::move(m); });
  w.eng.run();
  REQUIRE(appended.size() == 1);

  uint64_t op = probe.startRead(sidAccount("accA"), "debits",
                                [&](StorageProbe::Map m) { readBack = std::move(m); });
  w.eng.run();
  CHECK(readBack.count(d1.encoded()));
  auto rtts = measureRttFromTrace(w.log.trace(), op);
  REQUIRE(rtts.ok());
  CHECK(*rtts == 2);
}
