#pragma once

// Dynamic programs: configurations <I, Pr, S>, normal and create transitions,
// the fair-scheduled simulator, bounded configuration exploration for the
// dynamic wait-for-graph condition, and trace-level property checking.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pairsynth/mc.hpp"
#include "pairsynth/overlay.hpp"
#include "pairsynth/structure.hpp"
#include "pairsynth/waitfor.hpp"

namespace pairsynth {

struct PairSpec {
  PidPair pair;
  FormulaPtr spec;
};

struct UniverseEntry {
  PairSpec spec;
  PairProgram program;
  std::string name() const { return spec.pair.str(); }
};

struct CreateEvent {
  std::size_t at_step = 0;
  std::string entry;  // universe entry name
};

struct Configuration;

struct DynamicSpec {
  std::vector<UniverseEntry> universe;
  std::vector<std::string> initial;    // entry names in force initially
  std::vector<CreateEvent> schedule;   // scripted creates, ordered
  std::size_t max_consecutive_creates = 1;
  // Optional state-dependent part of the creation rule; generators use this
  // to impose the constraints the creation protocol's state selection needs.
  std::function<bool(const Configuration&, const UniverseEntry&)> state_rule;
  // Optional per-move underlying-data annotations, keyed by
  // "<pid>|<from-key>|<to-key>"; carried on traces, never read by guards.
  std::map<std::string, std::string> move_annotations;

  const UniverseEntry* find(const std::string& name) const {
    for (auto& e : universe)
      if (e.name() == name) return &e;
    return nullptr;
  }

  // Scheduled-order part of the creation rule: a pair-specification can come
  // into force once everything earlier in the script is in force.
  bool schedule_allows(const std::set<std::string>& inforce, const std::string& name) const {
    if (inforce.count(name)) return false;
    for (auto& ev : schedule) {
      if (ev.entry == name) return true;
      if (inforce.count(ev.entry) == 0) return false;
    }
    return false;
  }

  bool rule_allows(const Configuration& cfg, const UniverseEntry& e) const;
};

// A static program viewed dynamically: everything in force initially, no
// creates. Exploration and simulation then coincide with the static
// semantics.
inline DynamicSpec to_dynamic(const StaticProgram& sp) {
  DynamicSpec ds;
  for (auto& e : sp.relation) {
    UniverseEntry u;
    u.spec.pair = e.pair;
    u.spec.spec = e.spec;
    u.program = sp.pairs.at(e.pair);
    ds.initial.push_back(u.name());
    ds.universe.push_back(std::move(u));
  }
  return ds;
}

struct RuleForbids : InputError {
  using InputError::InputError;
};
struct SpecViolated : InputError {
  using InputError::InputError;
};
struct InconsistentJoinState : InputError {
  using InputError::InputError;
};
struct NoCompatibleState : InputError {
  using InputError::InputError;
};
struct DeadlockReached : std::runtime_error {
  std::string wfg_dot;
  explicit DeadlockReached(std::string dot)
      : std::runtime_error("deadlock: no enabled move and no applicable create"),
        wfg_dot(std::move(dot)) {}
};

// ---------------------------------------------------------------------------
// Configurations

struct Configuration {
  std::map<PidPair, const UniverseEntry*> programs;  // Pr, keyed by pairs(I)
  std::map<PidPair, GlobalState> states;             // S

  std::set<std::string> inforce_names() const {
    std::set<std::string> out;
    for (auto& [pr, e] : programs) out.insert(e->name());
    return out;
  }
  std::set<Pid> procs() const {
    std::set<Pid> out;
    for (auto& [pr, _] : programs) {
      out.insert(pr.a);
      out.insert(pr.b);
    }
    return out;
  }
  bool alive(const Pid& p) const {
    for (auto& [pr, _] : programs)
      if (pr.contains(p)) return true;
    return false;
  }
  std::vector<PidPair> pairs_of(const Pid& p) const {
    std::vector<PidPair> out;
    for (auto& [pr, _] : programs)
      if (pr.contains(p)) out.push_back(pr);
    return out;
  }

  // s|i: well defined on consistent configurations.
  const LocalState& local(const Pid& p) const {
    for (auto& [pr, st] : states)
      if (pr.contains(p)) return st.local(p);
    throw UndefinedProjection("process " + p.id + " not alive");
  }

  // All pair-states must assign the same local state to common processes.
  std::vector<Violation> check_consistency() const {
    std::vector<Violation> out;
    std::map<Pid, const LocalState*> seen;
    for (auto& [pr, st] : states) {
      for (const Pid* p : {&pr.a, &pr.b}) {
        auto [it, fresh] = seen.emplace(*p, &st.local(*p));
        if (!fresh && !(*it->second == st.local(*p)))
          out.push_back({"InconsistentConfiguration",
                         p->id + " differs between pair-states"});
      }
    }
    for (auto& [pr, e] : programs)
      if (states.count(pr) == 0)
        out.push_back({"MissingPairState", pr.str()});
    return out;
  }

  // Merge all pair-states into one global view (prop and variable names are
  // globally unique by construction).
  GlobalState flatten() const {
    GlobalState g;
    for (auto& [pr, st] : states) {
      for (auto& [pid, ls] : st.locals) g.locals[pid] = ls;
      for (auto& [x, v] : st.shared) g.shared[x] = v;
    }
    return g;
  }

  std::string key() const {
    std::string s;
    for (auto& [pr, st] : states) s += pr.str() + "=" + st.key() + "&";
    return s;
  }
};

inline bool DynamicSpec::rule_allows(const Configuration& cfg, const UniverseEntry& e) const {
  if (!schedule_allows(cfg.inforce_names(), e.name())) return false;
  return !state_rule || state_rule(cfg, e);
}

// ---------------------------------------------------------------------------
// Shared model-checking caches for one dynamic specification.

class DynamicContext {
 public:
  explicit DynamicContext(const DynamicSpec& ds) : ds_(ds) {}

  const DynamicSpec& spec() const { return ds_; }

  const Structure& structure_of(const UniverseEntry& e) {
    auto it = structures_.find(e.name());
    if (it == structures_.end())
      it = structures_.emplace(e.name(), build_pair_structure(e.program)).first;
    return it->second;
  }

  // Pair-spec satisfaction, verified once per entry.
  void require_spec(const UniverseEntry& e) {
    auto it = verified_.find(e.name());
    if (it == verified_.end()) {
      SpecResult r = check_spec(structure_of(e), e.spec.spec);
      it = verified_.emplace(e.name(), r.holds).first;
    }
    if (!it->second)
      throw SpecViolated("pair-program " + e.name() + " violates its specification");
  }

  // Pending-eventuality states of the pair, by structure state index.
  const std::set<std::size_t>& pnd_states(const UniverseEntry& e) {
    auto it = pnd_.find(e.name());
    if (it == pnd_.end()) {
      auto v = compute_pnd(structure_of(e), e.spec.spec);
      it = pnd_.emplace(e.name(), std::set<std::size_t>(v.begin(), v.end())).first;
    }
    return it->second;
  }

 private:
  const DynamicSpec& ds_;
  std::map<std::string, Structure> structures_;
  std::map<std::string, bool> verified_;
  std::map<std::string, std::set<std::size_t>> pnd_;
};

// ---------------------------------------------------------------------------
// Initial configurations: every in-force pair at one of its initial states,
// consistent on shared processes.

inline std::vector<Configuration> initial_configurations(DynamicContext& ctx) {
  const DynamicSpec& ds = ctx.spec();
  std::vector<Configuration> out{Configuration{}};
  for (auto& name : ds.initial) {
    const UniverseEntry* e = ds.find(name);
    if (!e) throw InputError("unknown universe entry " + name);
    ctx.require_spec(*e);
    std::vector<Configuration> next;
    for (auto& cfg : out)
      for (auto& s0 : e->program.initial_states()) {
        Configuration c2 = cfg;
        c2.programs[e->spec.pair] = e;
        c2.states[e->spec.pair] = s0;
        if (c2.check_consistency().empty()) next.push_back(std::move(c2));
      }
    out = std::move(next);
  }
  if (out.empty()) throw InputError("EmptyInitialSet: no consistent initial configuration");
  return out;
}

// ---------------------------------------------------------------------------
// Normal transitions

struct NormalStep {
  Pid pid;
  LocalState from, to;
  Configuration target;
};

// Lightweight enumeration for the scheduler: which (process, arc, branch
// choice) moves are enabled, without materializing successor configurations.
struct MoveOption {
  Pid pid;
  const LocalState* from = nullptr;
  const LocalState* to = nullptr;
  std::map<PidPair, const Branch*> choice;  // least-index true branch per pair
  bool self_loop = false;
};

inline std::vector<MoveOption> enabled_options(const Configuration& cfg) {
  std::vector<MoveOption> out;
  for (auto& i : cfg.procs()) {
    std::vector<PidPair> prs = cfg.pairs_of(i);
    const SyncSkeleton& ref = cfg.programs.at(prs[0])->program.skeleton_of(i);
    const LocalState& mine = cfg.local(i);
    for (auto* ref_arc : ref.arcs_from(mine)) {
      MoveOption opt;
      opt.pid = i;
      opt.from = &ref_arc->from;
      opt.to = &ref_arc->to;
      opt.self_loop = ref_arc->from == ref_arc->to;
      bool blocked = false;
      for (auto& pr : prs) {
        const PairProgram& pp = cfg.programs.at(pr)->program;
        const SyncSkeleton& sk = pp.skeleton_of(i);
        const Pid peer = pr.other(i);
        const Arc* found = nullptr;
        for (auto& a : sk.arcs)
          if (a.from == mine && a.to == ref_arc->to) {
            found = &a;
            break;
          }
        if (!found) {
          blocked = true;
          break;
        }
        const GlobalState& pst = cfg.states.at(pr);
        const Branch* open = nullptr;
        for (auto& br : found->cmd.branches)
          if (eval_guard(br.guard, pst.local(peer), pst.shared)) {
            open = &br;
            break;
          }
        if (!open) {
          blocked = true;
          break;
        }
        opt.choice[pr] = open;
      }
      if (!blocked) out.push_back(std::move(opt));
    }
  }
  return out;
}

inline Configuration apply_option(const Configuration& cfg, const MoveOption& opt) {
  Configuration out = cfg;
  for (auto& [pr, br] : opt.choice) {
    GlobalState& pst = out.states.at(pr);
    pst.locals[opt.pid] = *opt.to;
    pst.shared = apply_body(br->body, pst.shared);
  }
  return out;
}

inline std::vector<NormalStep> enabled_normal(const Configuration& cfg) {
  std::vector<NormalStep> out;
  std::set<std::string> seen;
  for (auto& i : cfg.procs()) {
    std::vector<PidPair> prs = cfg.pairs_of(i);
    const SyncSkeleton& ref = cfg.programs.at(prs[0])->program.skeleton_of(i);
    const LocalState& mine = cfg.local(i);
    for (auto* ref_arc : ref.arcs_from(mine)) {
      // per-pair enabled branches
      std::vector<std::vector<const Branch*>> options;
      bool blocked = false;
      for (auto& pr : prs) {
        const PairProgram& pp = cfg.programs.at(pr)->program;
        const SyncSkeleton& sk = pp.skeleton_of(i);
        const Pid peer = pr.other(i);
        const Arc* found = nullptr;
        for (auto& a : sk.arcs)
          if (a.from == mine && a.to == ref_arc->to) {
            found = &a;
            break;
          }
        if (!found) {
          blocked = true;
          break;
        }
        const GlobalState& pst = cfg.states.at(pr);
        std::vector<const Branch*> enabled;
        for (auto& br : found->cmd.branches)
          if (eval_guard(br.guard, pst.local(peer), pst.shared)) enabled.push_back(&br);
        if (enabled.empty()) {
          blocked = true;
          break;
        }
        options.push_back(std::move(enabled));
      }
      if (blocked) continue;
      // cross product of branch choices
      std::vector<std::map<PidPair, const Branch*>> combos{{}};
      for (std::size_t k = 0; k < prs.size(); ++k) {
        std::vector<std::map<PidPair, const Branch*>> next;
        for (auto& c : combos)
          for (auto* br : options[k]) {
            auto c2 = c;
            c2[prs[k]] = br;
            next.push_back(std::move(c2));
          }
        combos = std::move(next);
      }
      for (auto& combo : combos) {
        NormalStep step;
        step.pid = i;
        step.from = mine;
        step.to = ref_arc->to;
        step.target = cfg;
        for (auto& [pr, br] : combo) {
          GlobalState& pst = step.target.states.at(pr);
          pst.locals[i] = ref_arc->to;
          pst.shared = apply_body(br->body, pst.shared);
        }
        std::string k = i.id + ">" + step.target.key();
        if (seen.insert(k).second) out.push_back(std::move(step));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Create transitions. The new pair installs at a reachable pair-state whose
// components match whatever alive processes are doing; existing pair-states
// are untouched.

inline Configuration apply_create(DynamicContext& ctx, const Configuration& cfg,
                                  const UniverseEntry& e,
                                  const GlobalState* requested = nullptr,
                                  Rng* rng = nullptr) {
  const PidPair& pr = e.spec.pair;
  if (cfg.programs.count(pr))
    throw RuleForbids("pair " + pr.str() + " already in force");
  if (!ctx.spec().rule_allows(cfg, e))
    throw RuleForbids("creation rule forbids " + e.name());
  ctx.require_spec(e);
  const Structure& m = ctx.structure_of(e);

  auto matches = [&](const GlobalState& s) {
    for (const Pid* p : {&pr.a, &pr.b})
      if (cfg.alive(*p) && !(s.local(*p) == cfg.local(*p))) return false;
    return true;
  };

  const GlobalState* chosen = nullptr;
  if (requested) {
    if (!m.find(*requested))
      throw InconsistentJoinState("requested join state is not reachable in " + e.name());
    if (!matches(*requested))
      throw InconsistentJoinState("requested join state disagrees with alive processes");
    chosen = requested;
  } else {
    std::vector<const GlobalState*> candidates;
    for (std::size_t s0 : m.initials)
      if (matches(m.states[s0])) candidates.push_back(&m.states[s0]);
    if (candidates.empty())
      for (std::size_t s = 0; s < m.n_states(); ++s)
        if (matches(m.states[s])) candidates.push_back(&m.states[s]);
    if (candidates.empty())
      throw NoCompatibleState("no reachable state of " + e.name() +
                              " matches the alive processes");
    chosen = rng ? candidates[pick_index(*rng, candidates.size())] : candidates.front();
  }

  Configuration out = cfg;
  out.programs[pr] = &e;
  out.states[pr] = *chosen;
  auto vio = out.check_consistency();
  if (!vio.empty()) throw InconsistentJoinState(vio[0].str());
  return out;
}

// ---------------------------------------------------------------------------
// Wait-for graph of a configuration.

inline WfgInput wfg_input_for(const Configuration& cfg) {
  WfgInput in;
  for (auto& i : cfg.procs()) {
    in.moves[i];
    std::vector<PidPair> prs = cfg.pairs_of(i);
    const SyncSkeleton& ref = cfg.programs.at(prs[0])->program.skeleton_of(i);
    for (auto* ref_arc : ref.arcs_from(cfg.local(i))) {
      WfgInput::MoveEntry entry;
      entry.label = i.id + ":" + ref_arc->from.key() + "->" + ref_arc->to.key();
      bool everywhere = true;
      for (auto& pr : prs) {
        const PairProgram& pp = cfg.programs.at(pr)->program;
        const SyncSkeleton& sk = pp.skeleton_of(i);
        const Arc* found = nullptr;
        for (auto& a : sk.arcs)
          if (a.from == ref_arc->from && a.to == ref_arc->to) {
            found = &a;
            break;
          }
        if (!found) {
          everywhere = false;
          break;
        }
        const GlobalState& pst = cfg.states.at(pr);
        entry.neighbor_guard[pr.other(i)] =
            found->cmd.enabled(pst.local(pr.other(i)), pst.shared);
      }
      if (everywhere) in.moves[i].push_back(std::move(entry));
    }
  }
  return in;
}

inline std::set<Pid> blocked_set(const Configuration& cfg, const PidPair& pr) {
  if (cfg.programs.count(pr) == 0)
    throw UndefinedProjection("pair " + pr.str() + " not in force");
  return blocked_from(build_wfg(wfg_input_for(cfg)), pr);
}

// ---------------------------------------------------------------------------
// Traces

struct TraceStep {
  TransLabel label;
  Configuration after;
  std::vector<std::string> annotations;
};

struct Trace {
  Configuration initial;
  std::vector<TraceStep> steps;
  bool quiescent = false;       // only self-loops enabled, nothing left to create
  bool budget_exhausted = false;
  // scheduler audit
  std::size_t max_enabled_streak = 0;
  std::map<std::string, std::size_t> max_pair_pnd_streak;

  const Configuration& at(std::size_t idx) const {
    return idx == 0 ? initial : steps[idx - 1].after;
  }
  std::size_t length() const { return steps.size() + 1; }
};

// ---------------------------------------------------------------------------
// The simulator. Oldest-continuously-enabled-first with seeded tie-breaking
// realizes bounded fairness: a continuously enabled process runs within
// alive-count normal steps. Scripted creates fire at their step, capped at
// max_consecutive_creates in a row unless nothing normal is enabled.

struct SimulateOptions {
  std::size_t max_steps = 10000;
  bool stop_when_quiescent = true;
};

inline Trace simulate(DynamicContext& ctx, std::uint64_t seed,
                      const SimulateOptions& opts = {}) {
  const DynamicSpec& ds = ctx.spec();
  Rng rng(seed);

  std::vector<Configuration> inits = initial_configurations(ctx);
  Trace tr;
  tr.initial = inits[pick_index(rng, inits.size())];

  Configuration cfg = tr.initial;
  std::map<Pid, std::size_t> streak;
  std::map<std::string, std::size_t> pnd_streak;
  std::size_t schedule_pos = 0;
  std::size_t consecutive_creates = 0;

  // per-pair structure-state index, maintained incrementally for the
  // pending-eventuality audit
  std::map<PidPair, std::size_t> state_idx;
  auto refresh_idx = [&](const PidPair& pr) {
    const Structure& m = ctx.structure_of(*cfg.programs.at(pr));
    auto sid = m.find(cfg.states.at(pr));
    if (!sid) throw std::logic_error("pair-state left its structure");
    state_idx[pr] = *sid;
  };
  for (auto& [pr, _] : cfg.programs) refresh_idx(pr);

  auto do_create = [&]() {
    const UniverseEntry* e = ds.find(ds.schedule[schedule_pos].entry);
    if (!e) throw InputError("schedule references unknown entry");
    cfg = apply_create(ctx, cfg, *e);
    refresh_idx(e->spec.pair);
    ++schedule_pos;
    ++consecutive_creates;
    TraceStep ts;
    ts.label = TransLabel::create(e->spec.pair);
    ts.after = cfg;
    tr.steps.push_back(std::move(ts));
  };

  for (std::size_t step_no = 1; step_no <= opts.max_steps; ++step_no) {
    std::vector<MoveOption> enabled = enabled_options(cfg);

    bool create_due = schedule_pos < ds.schedule.size() &&
                      ds.schedule[schedule_pos].at_step < step_no;
    bool create_capped = consecutive_creates >= ds.max_consecutive_creates;
    if (create_due && (!create_capped || enabled.empty())) {
      do_create();
      continue;
    }
    if (enabled.empty()) {
      if (schedule_pos < ds.schedule.size()) {
        // remaining creates are scheduled later; pull the next one forward
        // rather than deadlock (creation fairness keeps them finite anyway)
        do_create();
        continue;
      }
      throw DeadlockReached(to_dot(build_wfg(wfg_input_for(cfg))));
    }
    consecutive_creates = 0;

    // quiescence: every enabled move is a self-loop and the script is done
    bool all_self = true;
    for (auto& opt : enabled) all_self = all_self && opt.self_loop;
    if (all_self && schedule_pos >= ds.schedule.size() && opts.stop_when_quiescent) {
      tr.quiescent = true;
      break;
    }

    // scheduler: oldest continuously enabled first, seeded tie-break
    std::set<Pid> enabled_pids;
    for (auto& opt : enabled) enabled_pids.insert(opt.pid);
    std::vector<Pid> best;
    std::size_t best_streak = 0;
    for (auto& p : enabled_pids) {
      std::size_t s = streak.count(p) ? streak[p] : 0;
      if (best.empty() || s > best_streak) {
        best = {p};
        best_streak = s;
      } else if (s == best_streak) {
        best.push_back(p);
      }
    }
    Pid chosen = best[pick_index(rng, best.size())];
    std::vector<const MoveOption*> moves;
    for (auto& opt : enabled)
      if (opt.pid == chosen) moves.push_back(&opt);
    const MoveOption* mv = moves[pick_index(rng, moves.size())];

    // audit streaks before applying
    for (auto& p : cfg.procs()) {
      if (enabled_pids.count(p) == 0 || p == chosen) {
        streak[p] = 0;
      } else {
        streak[p] += 1;
        tr.max_enabled_streak = std::max(tr.max_enabled_streak, streak[p]);
        if (streak[p] > cfg.procs().size())
          throw std::logic_error("scheduler starved a continuously enabled process");
      }
    }

    // pair pending-eventuality audit
    for (auto& [pr, e] : cfg.programs) {
      bool pending = ctx.pnd_states(*e).count(state_idx.at(pr)) > 0;
      bool member_enabled = enabled_pids.count(pr.a) || enabled_pids.count(pr.b);
      bool member_executed = chosen == pr.a || chosen == pr.b;
      std::string k = pr.str();
      if (pending && member_enabled && !member_executed) {
        pnd_streak[k] += 1;
        auto& mx = tr.max_pair_pnd_streak[k];
        mx = std::max(mx, pnd_streak[k]);
      } else {
        pnd_streak[k] = 0;
      }
    }

    TraceStep ts;
    ts.label = TransLabel::proc(chosen);
    auto anno = ds.move_annotations.find(chosen.id + "|" + mv->from->key() + "|" +
                                         mv->to->key());
    if (anno != ds.move_annotations.end()) ts.annotations.push_back(anno->second);
    cfg = apply_option(cfg, *mv);
    for (auto& [pr, _] : mv->choice) refresh_idx(pr);
    ts.after = cfg;
    if (!ts.after.check_consistency().empty())
      throw std::logic_error("normal transition broke configuration consistency");
    tr.steps.push_back(std::move(ts));
  }
  if (!tr.quiescent && tr.steps.size() >= opts.max_steps) tr.budget_exhausted = true;
  return tr;
}

// ---------------------------------------------------------------------------
// Dynamic path mapping: the projection of a trace onto a pair present from
// some point on is a path of that pair-structure.

inline bool verify_trace_pair_projection(DynamicContext& ctx, const Trace& tr,
                                         const PidPair& pr, std::string* why = nullptr) {
  const UniverseEntry* e = ctx.spec().find(pr.str());
  if (!e) return false;
  const Structure& m = ctx.structure_of(*e);
  std::optional<std::size_t> cur;
  for (std::size_t idx = 0; idx < tr.length(); ++idx) {
    const Configuration& cfg = tr.at(idx);
    auto it = cfg.states.find(pr);
    if (it == cfg.states.end()) {
      if (cur) {
        if (why) *why = "pair left force mid-trace";
        return false;
      }
      continue;
    }
    auto sid = m.find(it->second);
    if (!sid) {
      if (why) *why = "pair-state outside the pair-structure at index " + std::to_string(idx);
      return false;
    }
    if (cur && *cur != *sid) {
      const TransLabel& l = tr.steps[idx - 1].label;
      if (l.is_create || !pr.contains(l.pid)) {
        if (why) *why = "pair-state changed by a foreign transition at " + std::to_string(idx);
        return false;
      }
      if (!m.has_transition(*cur, l, *sid)) {
        if (why) *why = "projected step not in R_" + pr.str() + " at " + std::to_string(idx);
        return false;
      }
    }
    cur = *sid;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Trace-checkable properties.

struct TraceProp {
  enum class Kind { Invariant, Precedence, Absorption, LeadsToBounded };
  Kind kind;
  std::string name;
  FormulaPtr p, q;          // q unused for Invariant/Absorption
  std::size_t bound = SIZE_MAX;  // LeadsToBounded window, steps
};

struct TracePropResult {
  std::string name;
  bool pass = true;
  std::size_t violation_index = 0;
};

namespace detail {

// Propositional evaluation over a flattened configuration; symbols of
// processes not (yet) alive read as false.
inline bool eval_on(const GlobalState& g, const FormulaPtr& f) {
  using K = Formula::Kind;
  switch (f->kind) {
    case K::True: return true;
    case K::False: return false;
    case K::Prop: {
      auto it = g.locals.find(f->prop.owner);
      if (it == g.locals.end()) return false;
      auto pit = it->second.assign.find(f->prop.name);
      return pit != it->second.assign.end() && pit->second;
    }
    case K::VarEq: {
      auto it = g.shared.find(f->var);
      return it != g.shared.end() && it->second == f->value;
    }
    case K::Not: return !eval_on(g, f->kids[0]);
    case K::And:
      for (auto& k : f->kids)
        if (!eval_on(g, k)) return false;
      return true;
    case K::Or:
      for (auto& k : f->kids)
        if (eval_on(g, k)) return true;
      return false;
    default:
      throw InputError("trace properties must be propositional: " + formula_str(f));
  }
}

}  // namespace detail

inline std::vector<TracePropResult> check_trace(const Trace& tr,
                                                const std::vector<TraceProp>& props) {
  std::vector<GlobalState> flat;
  flat.reserve(tr.length());
  for (std::size_t i = 0; i < tr.length(); ++i) flat.push_back(tr.at(i).flatten());

  std::vector<TracePropResult> out;
  for (auto& prop : props) {
    TracePropResult r;
    r.name = prop.name;
    switch (prop.kind) {
      case TraceProp::Kind::Invariant: {
        for (std::size_t i = 0; i < flat.size(); ++i)
          if (!detail::eval_on(flat[i], prop.p)) {
            r.pass = false;
            r.violation_index = i;
            break;
          }
        break;
      }
      case TraceProp::Kind::Precedence: {
        // p must hold at or before the first index where q holds
        std::optional<std::size_t> first_p, first_q;
        for (std::size_t i = 0; i < flat.size(); ++i) {
          if (!first_p && detail::eval_on(flat[i], prop.p)) first_p = i;
          if (!first_q && detail::eval_on(flat[i], prop.q)) first_q = i;
        }
        if (first_q && (!first_p || *first_p > *first_q)) {
          r.pass = false;
          r.violation_index = *first_q;
        }
        break;
      }
      case TraceProp::Kind::Absorption: {
        bool seen = false;
        for (std::size_t i = 0; i < flat.size(); ++i) {
          bool now = detail::eval_on(flat[i], prop.p);
          if (seen && !now) {
            r.pass = false;
            r.violation_index = i;
            break;
          }
          seen = seen || now;
        }
        break;
      }
      case TraceProp::Kind::LeadsToBounded: {
        for (std::size_t i = 0; i < flat.size() && r.pass; ++i) {
          if (!detail::eval_on(flat[i], prop.p)) continue;
          bool found = false;
          std::size_t hi = prop.bound == SIZE_MAX ? flat.size() - 1
                                                  : std::min(flat.size() - 1, i + prop.bound);
          for (std::size_t k = i; k <= hi && !found; ++k)
            found = detail::eval_on(flat[k], prop.q);
          if (!found) {
            r.pass = false;
            r.violation_index = i;
          }
        }
        break;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace file: line-oriented STEP records with changed-state deltas.

inline void write_trace(std::ostream& os, const Trace& tr) {
  auto dump_delta = [&](const GlobalState& before, const GlobalState& after) {
    std::string line;
    for (auto& [pid, ls] : after.locals) {
      auto bit = before.locals.find(pid);
      for (auto& [p, v] : ls.assign) {
        bool old_v = bit != before.locals.end() && bit->second.assign.count(p) &&
                     bit->second.assign.at(p);
        bool fresh = bit == before.locals.end() || bit->second.assign.count(p) == 0;
        if (fresh || old_v != v)
          line += "  " + pid.id + "." + p + "=" + (v ? "1" : "0") + "\n";
      }
    }
    for (auto& [x, v] : after.shared) {
      auto bit = before.shared.find(x);
      if (bit == before.shared.end() || bit->second != v) line += "  " + x + "=" + v + "\n";
    }
    os << line;
  };

  GlobalState prev;  // empty
  os << "STEP 0 INIT\n";
  GlobalState cur = tr.initial.flatten();
  dump_delta(prev, cur);
  prev = cur;
  for (std::size_t i = 0; i < tr.steps.size(); ++i) {
    os << "STEP " << (i + 1) << " " << tr.steps[i].label.str() << "\n";
    cur = tr.steps[i].after.flatten();
    dump_delta(prev, cur);
    for (auto& a : tr.steps[i].annotations) os << "  # " << a << "\n";
    prev = cur;
  }
  if (tr.quiescent) os << "QUIESCENT\n";
}

// ---------------------------------------------------------------------------
// Dynamic wait-for-graph condition. The definition constrains k-star
// contexts: configurations whose in-force pairs all contain k, entered by a
// k-transition, or extended by a create that adds {j,k} to such a star. The
// l-list is a size-n multiset tiling the star's other pairs (n = arc count
// of k's local state), so the adversarial value set is the neighbor set,
// dropping j when the multiset is too short to cover it. Alongside the
// condition instances, every explored configuration's wait-for graph is
// checked supercycle-free, which is the conclusion the condition exists to
// guarantee and the empirical content of the deadlock-freedom theorem.

struct DynWfgReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::size_t configurations = 0;
  std::size_t star_instances = 0;
  bool bounded = false;
};

namespace detail {

inline std::size_t arc_count_at(const Configuration& cfg, const Pid& k) {
  auto prs = cfg.pairs_of(k);
  const SyncSkeleton& sk = cfg.programs.at(prs.at(0))->program.skeleton_of(k);
  return sk.arcs_from(cfg.local(k)).size();
}

inline bool is_star_around(const Configuration& cfg, const Pid& k) {
  if (cfg.programs.empty()) return false;
  for (auto& [pr, _] : cfg.programs)
    if (!pr.contains(k)) return false;
  return true;
}

}  // namespace detail

inline DynWfgReport check_dynamic_wfg_condition(DynamicContext& ctx, std::size_t bound) {
  DynWfgReport rep;
  const DynamicSpec& ds = ctx.spec();

  auto check_star = [&](const Configuration& t, const Pid& k, const Pid& j,
                        const std::set<Pid>& ellset, const std::string& what) {
    ++rep.star_instances;
    WaitForGraph w = build_wfg(wfg_input_for(t));
    std::string why;
    if (!wfg_condition_disjunction(w, k, j, ellset, &why)) {
      rep.ok = false;
      rep.violations.push_back(what + " k=" + k.id + " j=" + j.id + ": " + why);
    }
  };

  auto check_supercycle = [&](const Configuration& cfg, const std::string& what) {
    WaitForGraph w = build_wfg(wfg_input_for(cfg));
    if (auto sc = find_supercycle(w)) {
      rep.ok = false;
      std::string who;
      for (auto& p : sc->processes) who += p.id + " ";
      rep.violations.push_back(what + ": supercycle over " + who);
    }
  };

  std::deque<Configuration> work;
  std::set<std::string> seen;
  for (auto& c0 : initial_configurations(ctx)) {
    check_supercycle(c0, "initial configuration");
    if (seen.insert(c0.key()).second) work.push_back(c0);
  }

  while (!work.empty() && rep.configurations < bound) {
    Configuration cfg = work.front();
    work.pop_front();
    ++rep.configurations;

    for (auto& step : enabled_normal(cfg)) {
      const Configuration& t = step.target;
      const Pid& k = step.pid;
      if (detail::is_star_around(t, k)) {
        std::set<Pid> nbrs;
        for (auto& pr : t.pairs_of(k)) nbrs.insert(pr.other(k));
        std::size_t n = detail::arc_count_at(t, k);
        if (nbrs.size() >= 1 && nbrs.size() - 1 <= n) {
          for (auto& j : nbrs) {
            std::set<Pid> V = nbrs;
            if (n < nbrs.size()) V.erase(j);
            check_star(t, k, j, V, "normal");
          }
        }
      }
      check_supercycle(t, "after " + k.id);
      if (seen.insert(t.key()).second) work.push_back(t);
    }
    for (auto& e : ds.universe) {
      if (cfg.programs.count(e.spec.pair)) continue;
      if (!ds.rule_allows(cfg, e)) continue;
      Configuration t = apply_create(ctx, cfg, e);
      for (const Pid* kp : {&e.spec.pair.a, &e.spec.pair.b}) {
        const Pid& k = *kp;
        const Pid j = e.spec.pair.other(k);
        if (!detail::is_star_around(cfg, k)) continue;  // pairs(s) must tile around k
        std::set<Pid> V;
        for (auto& pr : cfg.pairs_of(k)) V.insert(pr.other(k));
        std::size_t n = detail::arc_count_at(t, k);
        if (!V.empty() && V.size() <= n) check_star(t, k, j, V, "create " + e.name());
      }
      check_supercycle(t, "after create " + e.name());
      if (seen.insert(t.key()).second) work.push_back(t);
    }
  }
  rep.bounded = !work.empty();
  return rep;
}

}  // namespace pairsynth
