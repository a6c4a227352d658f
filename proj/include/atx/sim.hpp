#pragma once
// Deterministic discrete-event simulation: the engine (clock, message
// routing, schedules, in-simulation consensus), coroutine plumbing for
// client operations, and the certificate observatory that derives
// commit/certificate events for the trace.
//
// Determinism: all scheduling state lives in ordered containers keyed by
// (tick, sequence number); randomness comes only from the scenario seed.
// Running the same scenario twice yields byte-identical traces.
#include <coroutine>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "atx/scenario.hpp"
#include "atx/trace.hpp"
#include "atx/types.hpp"
#include "atx/wire.hpp"

namespace atx {

class Engine;

// Shared immutable context handed to every process.
struct Ctx {
  const KeyRegistry* keys = nullptr;
  const AccountRegistry* accounts = nullptr;
  Engine* eng = nullptr;
  mutable std::map<Digest, bool> wfMemo;

  bool wellFormed(const Transaction& tx) const;
};

inline StorageId sidGlobal() { return "global"; }
inline StorageId sidAccount(const AccountId& a) { return "acct:" + a; }

class Process {
 public:
  Process(Ctx* ctx, ProcessId id) : ctx_(ctx), id_(std::move(id)) {}
  virtual ~Process() = default;
  virtual void onMessage(const ProcessId& from, const Message& m) = 0;
  // Sweep pruning hint: true when delivering m provably leaves the process
  // state unchanged (late responses to finished phases and the like).
  virtual bool wouldIgnore(const Message&) const { return false; }
  const ProcessId& pid() const { return id_; }

 protected:
  Ctx* ctx_;
  ProcessId id_;
};

// Replayable decision source for the interleaving sweep.  Outside sweeps a
// null oracle means "always the canonical choice".
struct ChoiceOracle {
  std::vector<int> script;
  std::vector<int> chosen;  // filled during the run
  std::vector<int> arity;   // discovered arity per choice point
  size_t pos = 0;

  int choose(int m) {
    int pick = pos < script.size() ? script[pos] : 0;
    ++pos;
    chosen.push_back(pick);
    arity.push_back(m);
    return pick;
  }
};

// Watches every message send and emits commit / certificate-capability
// events at the first instant enough signature shares exist anywhere in the
// system to assemble the certificate.  Byzantine replicas are assumed
// willing to sign anything, so they count toward every candidate threshold.
class Observatory {
 public:
  void init(const KeyRegistry* keys, const AccountRegistry* accounts, TraceLog* log,
            std::set<ReplicaId> byzReplicas);
  void onSend(int64_t tick, const ProcessId& from, const Message& m);

 private:
  bool reached(size_t correctSigners) const {
    return correctSigners + byzN_ >= quorum_;
  }
  void noteAppendTree(const StorageId& inst, const std::string& key,
                      const std::vector<std::pair<Bytes, Bytes>>& pairs);

  const KeyRegistry* keys_ = nullptr;
  const AccountRegistry* accounts_ = nullptr;
  TraceLog* log_ = nullptr;
  std::set<ReplicaId> byz_;
  size_t quorum_ = 0, byzN_ = 0;

  using SKey = std::pair<std::string, std::string>;  // (inst|key, rootHex)
  std::map<SKey, std::vector<Bytes>> appendTrees_;
  std::map<SKey, std::set<ReplicaId>> appendSigners_;
  std::set<Bytes> committed_;

  using AEKey = std::pair<AccountId, Epoch>;
  std::map<std::pair<AEKey, std::string>, std::set<ReplicaId>> prepareSigners_;
  std::map<std::pair<AEKey, std::string>, TxSet> preparedSets_;
  std::set<std::pair<AEKey, std::string>> preparedEmitted_;
  std::map<std::pair<AEKey, std::string>, TxSet> acceptTrees_;
  std::map<std::pair<AEKey, std::string>, std::set<ReplicaId>> acceptSigners_;
  std::set<std::pair<AEKey, Bytes>> acceptedEmitted_;
  std::map<std::pair<AEKey, std::string>, std::set<ReplicaId>> confirmSigners_;
  std::map<std::pair<AEKey, std::string>, std::pair<TxSet, TxSet>> confirmContent_;
  std::set<std::pair<AEKey, std::string>> confirmEmitted_;
  std::map<std::pair<AEKey, std::string>, std::set<ReplicaId>> notarizeSigners_;
  std::map<std::pair<AEKey, std::string>, Bytes> notarizePayloads_;
  std::map<std::pair<AEKey, std::string>, CloseState> notarizeStates_;
  std::set<std::pair<AEKey, std::string>> notarizeEmitted_;
};

class Engine {
 public:
  struct Options {
    ScheduleMode mode = ScheduleMode::Synchronous;
    uint64_t seed = 1;
    int minDelay = 1;
    int maxDelay = 3;
    uint64_t maxEvents = 5'000'000;
    ChoiceOracle* oracle = nullptr;
  };

  Engine(const Options& opt, TraceLog& log);

  void registerProcess(Process* p);
  Observatory& observatory() { return obs_; }

  void invokeAt(int64_t tick, std::function<void()> fn);  // absolute tick
  void soon(std::function<void()> fn);                    // current tick, later seq
  void send(const ProcessId& from, const ProcessId& to, Message m);
  void run();  // drains the queue or stops at the event bound

  int64_t now() const { return now_; }
  std::mt19937_64& rng() { return rng_; }
  TraceLog& trace() { return *log_; }
  bool hitBound() const { return hitBound_; }
  uint64_t nextOpId() { return ++opCounter_; }
  TxId drawTxId();

  // Trusted single-shot consensus register per (account, instance):
  // the first proposal delivered decides; every proposer learns the
  // decided value.  Costs no protocol round trips by construction.
  using ConsensusValue = std::pair<CloseState, ThresholdSig>;
  void propose(const ProcessId& proposer, const AccountId& acc, Epoch instance,
               ConsensusValue v, std::function<void(ConsensusValue)> done);
  // Replicas notarize only the register's decided state, so no two states
  // can both gather a notarization quorum for one epoch.
  const ConsensusValue* decidedFor(const AccountId& acc, Epoch instance) const {
    auto it = decided_.find({acc, instance});
    return it == decided_.end() ? nullptr : &it->second;
  }

 private:
  struct Delivery {
    ProcessId from, to;
    Message msg;
  };
  using QKey = std::pair<int64_t, uint64_t>;  // (tick, seq)

  int64_t delayFor();
  void deliverNow(Delivery& d);
  void runStrict();
  void runScriptTick(int64_t tick);
  bool step();  // bound bookkeeping; false when the event budget is gone

  Options opt_;
  TraceLog* log_;
  Observatory obs_;
  std::map<ProcessId, Process*> procs_;
  std::map<QKey, std::function<void()>> fns_;
  std::map<QKey, Delivery> dlvs_;
  std::map<std::pair<AccountId, Epoch>, ConsensusValue> decided_;
  std::mt19937_64 rng_;
  int64_t now_ = 0;
  uint64_t seq_ = 0;
  uint64_t steps_ = 0;
  uint64_t opCounter_ = 0;
  bool hitBound_ = false;
};

// ---------------------------------------------------------------------------
// coroutine plumbing
// ---------------------------------------------------------------------------
template <typename T>
class [[nodiscard]] Task {
 public:
  struct promise_type {
    std::optional<T> value;
    std::coroutine_handle<> cont;

    Task get_return_object() {
      return Task(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    struct FinalAwaiter {
      bool await_ready() noexcept { return false; }
      std::coroutine_handle<> await_suspend(
          std::coroutine_handle<promise_type> h) noexcept {
        auto c = h.promise().cont;
        return c ? c : std::noop_coroutine();
      }
      void await_resume() noexcept {}
    };
    FinalAwaiter final_suspend() noexcept { return {}; }
    void return_value(T v) { value = std::move(v); }
    void unhandled_exception() { std::terminate(); }
  };

  explicit Task(std::coroutine_handle<promise_type> h) : h_(h) {}
  Task(Task&& o) noexcept : h_(o.h_) { o.h_ = nullptr; }
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;
  ~Task() {
    if (h_) h_.destroy();
  }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept {
    h_.promise().cont = parent;
    return h_;
  }
  T await_resume() { return std::move(*h_.promise().value); }

 private:
  std::coroutine_handle<promise_type> h_;
};

// Self-freeing driver for a top-level operation; registered with its client
// so unfinished frames are destroyed at teardown.
struct OpRunner {
  struct promise_type {
    OpRunner get_return_object() {
      return OpRunner{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_never final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { std::terminate(); }
  };
  std::coroutine_handle<promise_type> h;
};

// Barrier for a group of concurrently running child operations.
struct Join {
  int remaining = 0;
  std::coroutine_handle<> waiter;
  Engine* eng = nullptr;
};
// Trivially destructible on purpose: gcc 11 runs the destructor of awaiter
// temporaries twice when the co_await result is discarded, which corrupts
// the heap if the awaiter owns anything.  The joined coroutine keeps the
// Join alive through its own shared_ptr local.
struct JoinAwaiter {
  Join* j;
  bool await_ready() const noexcept { return j->remaining == 0; }
  void await_suspend(std::coroutine_handle<> h) noexcept { j->waiter = h; }
  void await_resume() const noexcept {}
};

// Base for protocol clients: request/response phase bookkeeping and
// operation lifecycle.  A phase registers a sink keyed by request id, sends
// its messages, then suspends until the sink reports completion; responses
// for finished or unknown request ids are dropped.
class ClientBase : public Process {
 public:
  ClientBase(Ctx* ctx, ProcessId id) : Process(ctx, std::move(id)) {}
  ~ClientBase() override;

  void onMessage(const ProcessId& from, const Message& m) final;
  bool wouldIgnore(const Message& m) const final;

 protected:
  friend struct PhaseAwaiter;
  struct PhaseRec {
    uint64_t opId = 0, rootOpId = 0;
    int64_t start = 0;
    std::function<bool(const ProcessId&, const Message&)> sink;
    std::coroutine_handle<> waiter;
    bool done = false;
  };

  uint64_t newReq() { return ++reqCounter_; }
  // Registers the phase; caller sends the requests right after.
  void openPhase(uint64_t req, uint64_t opId, uint64_t rootOpId,
                 std::function<bool(const ProcessId&, const Message&)> sink);
  struct PhaseAwaiter {
    ClientBase* c;
    uint64_t req;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) noexcept;
    void await_resume() const noexcept { c->phases_.erase(req); }
  };
  PhaseAwaiter awaitPhase(uint64_t req) { return PhaseAwaiter{this, req}; }

  void sendToAllReplicas(const std::function<Message(const ReplicaId&)>& make);

  template <typename T>
  void spawnOp(uint64_t opId, Task<T> t, std::function<void(T)> done) {
    OpRunner r = runOp(std::move(t), opId, std::move(done));
    liveOps_[opId] = r.h;
    r.h.resume();
  }
  void deregisterOp(uint64_t opId) { liveOps_.erase(opId); }

  // Starts a child operation feeding a join barrier.
  template <typename T>
  void startJoined(const std::shared_ptr<Join>& j, uint64_t opId, Task<T> t,
                   std::function<void(T)> sink);

  uint64_t reqCounter_ = 0;
  std::map<uint64_t, PhaseRec> phases_;
  std::map<uint64_t, std::coroutine_handle<>> liveOps_;

 private:
  template <typename T>
  OpRunner runOp(Task<T> t, uint64_t opId, std::function<void(T)> done) {
    T v = co_await std::move(t);
    deregisterOp(opId);
    done(std::move(v));
  }
};

template <typename T>
void ClientBase::startJoined(const std::shared_ptr<Join>& j, uint64_t opId, Task<T> t,
                             std::function<void(T)> sink) {
  ++j->remaining;
  spawnOp<T>(opId, std::move(t), [j, sink = std::move(sink)](T v) {
    sink(std::move(v));
    if (--j->remaining == 0 && j->waiter)
      j->eng->soon([w = j->waiter] { w.resume(); });
  });
}

}  // namespace atx
