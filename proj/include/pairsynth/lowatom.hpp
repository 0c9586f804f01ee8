#pragma once

// Low-atomicity execution over plain read/write shared memory. Every atomic
// proposition and shared variable is a single cell supporting only
// single-cell reads and writes; multi-cell effects happen inside a lock
// epoch covering all touched cells. Locks are per resource group (one per
// process's propositions, one per pair's shared variables) and are acquired
// in a global total order, which is all the dining/drinking philosophers
// machinery this runtime needs for neighbor exclusion and progress.
//
// Agents run the Poll/Choose/Execute/Main loop. Poll repeatedly probes
// branch guards with plain reads until every neighbor offered a true branch
// (sound because guards are temporarily stable); Choose interleaves the
// polls of all moves out of the current state and takes the first to
// complete; Execute locks, performs the bodies and the local-state flip as
// one update (the linearization point, timestamped), and releases.
//
// The same agent code runs under a seeded deterministic stepper (one agent
// micro-operation at a time) and under free-running threads with a backoff.
// Either way every run yields a linearization record sequence; replaying
// those records against the configuration semantics is the empirical
// soundness check.

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pairsynth/dynamic.hpp"

namespace pairsynth {

// ---------------------------------------------------------------------------
// Store and locks

class SharedStore {
 public:
  void add_prop(const Pid& owner, const std::string& name, bool v) {
    std::string cell = owner.id + "." + name;
    if (!cells_.count(cell)) cells_[cell] = std::make_unique<std::atomic<int>>(v ? 1 : 0);
  }
  void add_var(const SharedVar& sv, const std::string& value) {
    if (!cells_.count(sv.name)) {
      domains_[sv.name] = sv.domain;
      cells_[sv.name] = std::make_unique<std::atomic<int>>(index_of(sv.name, value));
    }
  }

  bool read_prop(const Pid& owner, const std::string& name) const {
    return cells_.at(owner.id + "." + name)->load(std::memory_order_seq_cst) != 0;
  }
  std::string read_var(const std::string& var) const {
    return domains_.at(var).at(
        static_cast<std::size_t>(cells_.at(var)->load(std::memory_order_seq_cst)));
  }
  void write_prop(const Pid& owner, const std::string& name, bool v) {
    cells_.at(owner.id + "." + name)->store(v ? 1 : 0, std::memory_order_seq_cst);
  }
  void write_var(const std::string& var, const std::string& value) {
    cells_.at(var)->store(index_of(var, value), std::memory_order_seq_cst);
  }

  bool eval(const GuardPtr& g) const {
    using K = GuardExpr::Kind;
    switch (g->kind) {
      case K::True: return true;
      case K::False: return false;
      case K::Prop: return read_prop(g->prop.owner, g->prop.name);
      case K::VarEq: return read_var(g->var) == g->value;
      case K::Not: return !eval(g->kids[0]);
      case K::And:
        for (auto& k : g->kids)
          if (!eval(k)) return false;
        return true;
      case K::Or:
        for (auto& k : g->kids)
          if (eval(k)) return true;
        return false;
    }
    return false;
  }

 private:
  int index_of(const std::string& var, const std::string& value) const {
    auto& dom = domains_.at(var);
    for (std::size_t i = 0; i < dom.size(); ++i)
      if (dom[i] == value) return static_cast<int>(i);
    throw InputError("value " + value + " outside domain of " + var);
  }
  std::map<std::string, std::unique_ptr<std::atomic<int>>> cells_;
  std::map<std::string, std::vector<std::string>> domains_;
};

class LockManager {
 public:
  void ensure_group(const std::string& group) {
    if (!owners_.count(group)) owners_[group] = std::make_unique<std::atomic<int>>(-1);
  }
  bool try_acquire(const std::string& group, int who) {
    int expect = -1;
    return owners_.at(group)->compare_exchange_strong(expect, who,
                                                      std::memory_order_seq_cst);
  }
  void release(const std::string& group, int who) {
    int expect = who;
    if (!owners_.at(group)->compare_exchange_strong(expect, -1, std::memory_order_seq_cst))
      throw std::logic_error("released a lock not held: " + group);
  }
  int owner(const std::string& group) const {
    return owners_.at(group)->load(std::memory_order_seq_cst);
  }
  static std::string prop_group(const Pid& p) { return "AP:" + p.id; }
  static std::string var_group(const PidPair& pr) { return "SH:" + pr.str(); }

 private:
  std::map<std::string, std::unique_ptr<std::atomic<int>>> owners_;
};

// ---------------------------------------------------------------------------
// Linearization records

struct LinRecord {
  enum class Kind { Step, Create };
  Kind kind = Kind::Step;
  std::uint64_t ts = 0;
  Pid pid;                                 // Step
  std::string from_key, to_key;            // Step: local-state keys
  PidPair pair;                            // Create
  std::vector<std::pair<std::string, std::string>> writes;  // cell -> value token
};

inline void write_lin(std::ostream& os, const std::vector<LinRecord>& recs) {
  for (auto& r : recs) {
    if (r.kind == LinRecord::Kind::Step) {
      os << "LIN " << r.ts << " " << r.pid.id << " " << r.from_key << "->" << r.to_key;
    } else {
      os << "CRE " << r.ts << " " << r.pair.a.id << " " << r.pair.b.id;
    }
    for (auto& [c, v] : r.writes) os << " " << c << "=" << v;
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// Agents

class Runtime;

class Agent {
 public:
  Agent(Runtime& rt, int index, Pid pid) : rt_(rt), index_(index), pid_(std::move(pid)) {}

  const Pid& pid() const { return pid_; }
  std::string local_key() const { return local_.key(); }
  const LocalState& local() const { return local_; }

  // One micro-operation: a guard probe, a lock attempt, the locked update,
  // a release, or servicing the creation protocol. Returns false when there
  // was nothing to do (halted or absorbed with no paperwork pending).
  bool micro_step();

  // Published for the control thread: every outgoing arc a self-loop, so
  // the process only idles from here on.
  bool absorbed() const { return absorbed_flag_.load(std::memory_order_seq_cst) != 0; }

  // creation-protocol mailbox
  void request_halt() { halt_requested_.store(1, std::memory_order_seq_cst); }
  bool acked() const { return halt_acked_.load(std::memory_order_seq_cst) != 0; }
  void resume() {
    halt_requested_.store(0, std::memory_order_seq_cst);
    halt_acked_.store(0, std::memory_order_seq_cst);
  }
  bool halted() const {
    return halt_requested_.load(std::memory_order_seq_cst) != 0 && acked();
  }

  std::uint64_t executed() const { return executed_; }

 private:
  friend class Runtime;

  struct PairView {
    PidPair pair;
    Pid peer;
    const PairProgram* program;
    const SyncSkeleton* skel;  // my side
  };

  struct PollTask {
    LocalState to;
    std::vector<std::size_t> remaining;        // X[a]: indices into pairs_
    std::map<std::size_t, std::size_t> choice;  // pair index -> branch index
  };

  void install_pair(const PairView& pv) {
    pairs_.push_back(pv);
    reset_choose();
    publish_absorbed();
  }

  void publish_absorbed() {
    // absorbed: every outgoing arc is a self-loop whose bodies write
    // nothing, so executing them would be a no-op forever
    bool idle = !pairs_.empty();
    for (auto& pa : pairs_)
      for (auto& arc : pa.skel->arcs) {
        if (!(arc.from == local_)) continue;
        if (!(arc.to == local_)) idle = false;
        for (auto& br : arc.cmd.branches)
          if (!br.body.sets.empty()) idle = false;
      }
    absorbed_flag_.store(idle ? 1 : 0, std::memory_order_seq_cst);
  }

  void reset_choose() {
    tasks_.clear();
    phase_ = Phase::ChooseInit;
    probe_cursor_ = 0;
    chosen_.reset();
    lock_cursor_ = 0;
  }

  const Arc* arc_of(const PairView& pv, const LocalState& from, const LocalState& to) const {
    for (auto& a : pv.skel->arcs)
      if (a.from == from && a.to == to) return &a;
    return nullptr;
  }

  enum class Phase { ChooseInit, Polling, Locking, Updating, Releasing };

  Runtime& rt_;
  int index_;
  Pid pid_;
  LocalState local_;
  std::vector<PairView> pairs_;
  Phase phase_ = Phase::ChooseInit;
  std::vector<PollTask> tasks_;
  std::size_t probe_cursor_ = 0;
  std::optional<std::size_t> chosen_;
  std::vector<std::string> lock_order_;
  std::size_t lock_cursor_ = 0;
  std::uint64_t executed_ = 0;
  std::atomic<int> halt_requested_{0};
  std::atomic<int> halt_acked_{0};
  std::atomic<int> absorbed_flag_{0};
};

// ---------------------------------------------------------------------------
// Runtime: store, locks, agents, creation protocol, record log.

class Runtime {
 public:
  Runtime(DynamicContext& ctx, std::uint64_t seed) : ctx_(ctx), rng_(seed) {
    // every cell and lock group the universe could ever need exists up
    // front; installs only write values, so readers never race a map insert
    for (auto& e : ctx.spec().universe) {
      for (const Pid* p : {&e.spec.pair.a, &e.spec.pair.b}) {
        for (auto& [name, _] : e.program.skeleton_of(*p).states.at(0).assign)
          store_.add_prop(*p, name, false);
        locks_.ensure_group(LockManager::prop_group(*p));
      }
      for (auto& sv : e.program.shared) store_.add_var(sv, sv.initial);
      locks_.ensure_group(LockManager::var_group(e.spec.pair));
    }
    auto inits = initial_configurations(ctx);
    initial_ = inits[pick_index(rng_, inits.size())];
    for (auto& [pr, st] : initial_.states) install(*initial_.programs.at(pr), st, false);
    schedule_pos_ = 0;
  }

  SharedStore& store() { return store_; }
  LockManager& locks() { return locks_; }
  const Configuration& initial_configuration() const { return initial_; }
  const std::vector<LinRecord>& records() const { return records_; }

  // The update line of Execute is atomic: cell writes, the timestamp and
  // the record land in one critical section (the group locks already
  // exclude conflicting writers; this also fixes the record order against
  // read-from dependencies between non-conflicting updates).
  void commit(const std::function<void()>& writes, LinRecord r) {
    std::lock_guard<std::mutex> g(log_mutex_);
    writes();
    r.ts = ++ts_;
    records_.push_back(std::move(r));
  }
  void log(LinRecord r) { commit([] {}, std::move(r)); }

  Agent* agent_of(const Pid& p) {
    for (auto& a : agents_)
      if (a->pid() == p) return a.get();
    return nullptr;
  }
  const std::vector<std::unique_ptr<Agent>>& agents() const { return agents_; }

  bool creates_pending() const { return schedule_pos_ < ctx_.spec().schedule.size(); }

  bool quiescent() const {
    if (creates_pending()) return false;
    for (auto& a : agents_)
      if (!a->absorbed()) return false;
    return !agents_.empty();
  }

  // Creation protocol, one whole batch (all schedule entries of the next
  // step value): halt the affected alive processes, wait for acks, select
  // join states against the frozen locals, install, resume. Ack-waiting is
  // cooperative in stepper mode: the caller keeps stepping agents until the
  // halts land.
  void run_creation_batch(const std::function<void()>& step_agents) {
    const DynamicSpec& ds = ctx_.spec();
    if (!creates_pending()) return;
    std::size_t step_val = ds.schedule[schedule_pos_].at_step;
    std::vector<const UniverseEntry*> batch;
    while (schedule_pos_ < ds.schedule.size() &&
           ds.schedule[schedule_pos_].at_step == step_val) {
      batch.push_back(ds.find(ds.schedule[schedule_pos_].entry));
      ++schedule_pos_;
    }

    std::set<Agent*> to_halt;
    for (auto* e : batch)
      for (const Pid* p : {&e->spec.pair.a, &e->spec.pair.b})
        if (Agent* a = agent_of(*p)) to_halt.insert(a);
    for (auto* a : to_halt) a->request_halt();
    for (;;) {
      bool all = true;
      for (auto* a : to_halt) all = all && a->acked();
      if (all) break;
      step_agents();
    }

    for (auto* e : batch) {
      ctx_.require_spec(*e);
      const Structure& m = ctx_.structure_of(*e);
      auto matches = [&](const GlobalState& s) {
        for (const Pid* p : {&e->spec.pair.a, &e->spec.pair.b})
          if (Agent* a = agent_of(*p))
            if (!(s.local(*p) == a->local())) return false;
        return true;
      };
      const GlobalState* join = nullptr;
      for (std::size_t s0 : m.initials)
        if (matches(m.states[s0])) join = &m.states[s0];
      for (std::size_t s = 0; s < m.n_states() && !join; ++s)
        if (matches(m.states[s])) join = &m.states[s];
      if (!join) throw NoCompatibleState("creation protocol found no join state for " +
                                         e->name());
      install(*e, *join, true);
    }
    for (auto* a : to_halt) a->resume();
  }

  DynamicContext& ctx() { return ctx_; }
  Rng& rng() { return rng_; }

 private:
  void install(const UniverseEntry& e, const GlobalState& join, bool record) {
    LinRecord rec;
    rec.kind = LinRecord::Kind::Create;
    rec.pair = e.spec.pair;
    std::vector<std::pair<Pid, std::pair<std::string, bool>>> prop_writes;
    for (const Pid* p : {&e.spec.pair.a, &e.spec.pair.b}) {
      bool fresh = agent_of(*p) == nullptr;
      for (auto& [name, v] : join.local(*p).assign) {
        if (fresh) prop_writes.push_back({*p, {name, v}});  // alive locals stay untouched
        rec.writes.emplace_back(p->id + "." + name, v ? "1" : "0");
      }
    }
    auto do_writes = [&] {
      for (auto& [p, nv] : prop_writes) store_.write_prop(p, nv.first, nv.second);
      for (auto& sv : e.program.shared) store_.write_var(sv.name, join.shared.at(sv.name));
    };
    for (auto& sv : e.program.shared)
      rec.writes.emplace_back(sv.name, join.shared.at(sv.name));
    if (record) {
      commit(do_writes, std::move(rec));
    } else {
      do_writes();
    }

    for (const Pid* p : {&e.spec.pair.a, &e.spec.pair.b}) {
      Agent* a = agent_of(*p);
      if (!a) {
        agents_.push_back(std::make_unique<Agent>(*this, static_cast<int>(agents_.size()),
                                                  *p));
        a = agents_.back().get();
        a->local_ = join.local(*p);
      }
      Agent::PairView pv{e.spec.pair, e.spec.pair.other(*p), &e.program,
                         &e.program.skeleton_of(*p)};
      a->install_pair(pv);
    }
  }

  DynamicContext& ctx_;
  Rng rng_;
  Configuration initial_;
  SharedStore store_;
  LockManager locks_;
  std::vector<std::unique_ptr<Agent>> agents_;
  std::vector<LinRecord> records_;
  std::uint64_t ts_ = 0;
  std::mutex log_mutex_;
  std::size_t schedule_pos_ = 0;
};

// ---------------------------------------------------------------------------
// Agent micro-step implementation

inline bool Agent::micro_step() {
  // service halts only between executes and during polling
  if (halt_requested_.load(std::memory_order_seq_cst) != 0 &&
      (phase_ == Phase::ChooseInit || phase_ == Phase::Polling)) {
    if (!acked()) {
      halt_acked_.store(1, std::memory_order_seq_cst);
      // drop partial poll observations; the neighbor set may change
      reset_choose();
      return true;
    }
    return false;  // halted, waiting for resume
  }

  switch (phase_) {
    case Phase::ChooseInit: {
      if (pairs_.empty()) return false;
      if (absorbed()) return false;  // only effect-free self-loops remain: idle
      tasks_.clear();
      // moves with my current start state, matched across all pairs
      const SyncSkeleton& ref = *pairs_[0].skel;
      for (auto& ref_arc : ref.arcs) {
        if (!(ref_arc.from == local_)) continue;
        PollTask t;
        t.to = ref_arc.to;
        bool everywhere = true;
        for (std::size_t k = 0; k < pairs_.size(); ++k)
          if (!arc_of(pairs_[k], local_, ref_arc.to)) everywhere = false;
        if (!everywhere) continue;
        for (std::size_t k = 0; k < pairs_.size(); ++k) t.remaining.push_back(k);
        tasks_.push_back(std::move(t));
      }
      if (tasks_.empty()) return false;  // blocked for good; nothing to poll
      phase_ = Phase::Polling;
      probe_cursor_ = 0;
      return true;
    }

    case Phase::Polling: {
      // one probe: next (task, pending neighbor) in round-robin order
      std::size_t ntasks = tasks_.size();
      for (std::size_t off = 0; off < ntasks; ++off) {
        PollTask& t = tasks_[(probe_cursor_ + off) % ntasks];
        if (t.remaining.empty()) continue;
        std::size_t k = t.remaining.front();
        const PairView& pv = pairs_[k];
        const Arc* arc = arc_of(pv, local_, t.to);
        bool hit = false;
        for (std::size_t b = 0; b < arc->cmd.branches.size(); ++b) {
          if (rt_.store().eval(arc->cmd.branches[b].guard)) {
            t.choice[k] = b;
            hit = true;
            break;
          }
        }
        if (hit) {
          t.remaining.erase(t.remaining.begin());
          if (t.remaining.empty()) {
            // first poll to complete wins; cancel the rest
            chosen_ = static_cast<std::size_t>(&t - tasks_.data());
            phase_ = Phase::Locking;
            lock_order_.clear();
            std::set<std::string> groups{LockManager::prop_group(pid_)};
            for (auto& [k2, b2] : t.choice)
              if (!arc_of(pairs_[k2], local_, t.to)->cmd.branches[b2].body.sets.empty())
                groups.insert(LockManager::var_group(pairs_[k2].pair));
            lock_order_.assign(groups.begin(), groups.end());  // global total order
            lock_cursor_ = 0;
          }
        } else {
          // rotate the pending neighbor to the back and move on
          t.remaining.erase(t.remaining.begin());
          t.remaining.push_back(k);
        }
        probe_cursor_ = (probe_cursor_ + off + 1) % ntasks;
        return true;
      }
      return true;
    }

    case Phase::Locking: {
      if (lock_cursor_ >= lock_order_.size()) {
        phase_ = Phase::Updating;
        return true;
      }
      if (rt_.locks().try_acquire(lock_order_[lock_cursor_], index_)) ++lock_cursor_;
      return true;  // on failure simply retry next time (busy wait)
    }

    case Phase::Updating: {
      PollTask& t = tasks_[*chosen_];
      LinRecord rec;
      rec.pid = pid_;
      rec.from_key = local_.key();
      rec.to_key = t.to.key();
      // the observed guards must still hold here; P_i has not moved since
      // the poll, so temporal stability guarantees it
      std::vector<std::pair<std::string, std::string>> var_writes;
      for (auto& [k, b] : t.choice) {
        const Arc* arc = arc_of(pairs_[k], local_, t.to);
        if (!rt_.store().eval(arc->cmd.branches[b].guard))
          throw std::logic_error("guard observed in Poll no longer holds at Execute");
        for (auto& [var, val] : arc->cmd.branches[b].body.sets) {
          var_writes.emplace_back(var, val);
          rec.writes.emplace_back(var, val);
        }
      }
      std::vector<std::pair<std::string, bool>> prop_writes;
      for (auto& [name, v] : t.to.assign) {
        if (local_.assign.at(name) != v) {
          prop_writes.emplace_back(name, v);
          rec.writes.emplace_back(pid_.id + "." + name, v ? "1" : "0");
        }
      }
      rt_.commit(
          [&] {
            for (auto& [var, val] : var_writes) rt_.store().write_var(var, val);
            for (auto& [name, v] : prop_writes) rt_.store().write_prop(pid_, name, v);
          },
          std::move(rec));
      local_ = t.to;
      ++executed_;
      publish_absorbed();
      phase_ = Phase::Releasing;
      return true;
    }

    case Phase::Releasing: {
      for (auto& g : lock_order_) rt_.locks().release(g, index_);
      lock_order_.clear();
      reset_choose();
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Drivers

struct RunResult {
  Configuration initial;
  std::vector<LinRecord> records;
  bool quiescent = false;
  std::size_t micro_steps = 0;
};

// Deterministic cooperative stepper: one seeded agent micro-operation at a
// time; creation batches fire at fixed micro-step thresholds.
inline RunResult run_stepper(DynamicContext& ctx, std::uint64_t seed,
                             std::size_t max_micro_steps = 200000,
                             std::size_t create_gap = 32) {
  Runtime rt(ctx, seed);
  RunResult out;
  out.initial = rt.initial_configuration();

  std::size_t batch_no = 0;
  auto step_one = [&]() {
    auto& agents = rt.agents();
    if (agents.empty()) return;
    std::size_t i = pick_index(rt.rng(), agents.size());
    agents[i]->micro_step();
    ++out.micro_steps;
  };

  while (out.micro_steps < max_micro_steps) {
    if (rt.creates_pending() && out.micro_steps >= batch_no * create_gap) {
      rt.run_creation_batch(step_one);
      ++batch_no;
      continue;
    }
    if (rt.quiescent()) {
      out.quiescent = true;
      break;
    }
    if (rt.agents().empty()) break;  // nothing running and nothing to create
    step_one();
  }
  out.records = rt.records();
  return out;
}

// Free-running mode: one thread per agent with a small backoff; a control
// thread fires creation batches and watches for quiescence.
inline RunResult run_free(DynamicContext& ctx, std::uint64_t seed,
                          std::chrono::milliseconds budget = std::chrono::milliseconds(2000)) {
  Runtime rt(ctx, seed);
  RunResult out;
  out.initial = rt.initial_configuration();

  std::atomic<bool> stop{false};
  std::vector<std::thread> threads;
  std::atomic<std::size_t> started{0};

  auto spawn_missing = [&]() {
    // agents can appear after creation batches; spawn threads lazily
    for (std::size_t i = started.load(); i < rt.agents().size(); ++i) {
      Agent* a = rt.agents()[i].get();
      threads.emplace_back([a, &stop] {
        while (!stop.load(std::memory_order_relaxed)) {
          if (!a->micro_step()) std::this_thread::yield();
        }
      });
      started.fetch_add(1);
    }
  };

  spawn_missing();
  auto deadline = std::chrono::steady_clock::now() + budget;
  while (std::chrono::steady_clock::now() < deadline) {
    if (rt.creates_pending()) {
      rt.run_creation_batch([] { std::this_thread::yield(); });
      spawn_missing();
      continue;
    }
    if (rt.quiescent()) {
      out.quiescent = true;
      break;
    }
    if (rt.agents().empty()) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  stop.store(true);
  for (auto& t : threads) t.join();
  out.records = rt.records();
  return out;
}

// ---------------------------------------------------------------------------
// Replay: validate a linearization record sequence against the
// configuration semantics. Each step record must be a legal normal
// transition of the replayed configuration with exactly the recorded cell
// effects; each create record must be a legal create transition.

struct ReplayVerdict {
  bool valid = true;
  std::size_t failed_index = 0;
  std::string reason;
};

inline ReplayVerdict replay_linearization(DynamicContext& ctx, const Configuration& initial,
                                          const std::vector<LinRecord>& records) {
  ReplayVerdict v;
  Configuration cfg = initial;
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    const LinRecord& r = records[idx];
    if (idx > 0 && records[idx - 1].ts >= r.ts) {
      v.valid = false;
      v.failed_index = idx;
      v.reason = "timestamps not strictly increasing";
      return v;
    }
    if (r.kind == LinRecord::Kind::Create) {
      const UniverseEntry* e = ctx.spec().find(r.pair.str());
      if (!e) {
        v.valid = false;
        v.failed_index = idx;
        v.reason = "create of unknown pair " + r.pair.str();
        return v;
      }
      // reconstruct the installed pair-state from the recorded writes
      GlobalState join;
      for (const Pid* p : {&r.pair.a, &r.pair.b}) {
        LocalState ls;
        ls.owner = *p;
        join.locals[*p] = ls;
      }
      for (auto& [cell, val] : r.writes) {
        auto dot = cell.find('.');
        if (dot != std::string::npos && join.locals.count(Pid(cell.substr(0, dot)))) {
          join.locals[Pid(cell.substr(0, dot))].assign[cell.substr(dot + 1)] = val == "1";
        } else {
          join.shared[cell] = val;
        }
      }
      try {
        cfg = apply_create(ctx, cfg, *e, &join);
      } catch (const std::exception& ex) {
        v.valid = false;
        v.failed_index = idx;
        v.reason = ex.what();
        return v;
      }
      continue;
    }

    // normal step: must match some enabled transition with these effects
    std::optional<Configuration> next;
    for (auto& step : enabled_normal(cfg)) {
      if (!(step.pid == r.pid) || step.to.key() != r.to_key ||
          step.from.key() != r.from_key)
        continue;
      // recorded writes must agree with the step's effects
      bool match = true;
      GlobalState flat = step.target.flatten();
      for (auto& [cell, val] : r.writes) {
        auto dot = cell.find('.');
        if (dot != std::string::npos && flat.locals.count(Pid(cell.substr(0, dot)))) {
          bool want = val == "1";
          if (flat.locals.at(Pid(cell.substr(0, dot))).assign.at(cell.substr(dot + 1)) !=
              want)
            match = false;
        } else if (flat.shared.count(cell)) {
          if (flat.shared.at(cell) != val) match = false;
        } else {
          match = false;
        }
      }
      if (match) {
        next = step.target;
        break;
      }
    }
    if (!next) {
      v.valid = false;
      v.failed_index = idx;
      v.reason = "record is not a legal transition: " + r.pid.id + " " + r.from_key +
                 "->" + r.to_key;
      return v;
    }
    cfg = *next;
  }
  return v;
}

}  // namespace pairsynth
