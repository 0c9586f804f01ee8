#pragma once

// Explicit global-state transition diagrams: pair-structures, J-structures
// built as product oracles, the projection operators, and the mapping-lemma
// verifier. Product construction is reachable-only by default and guarded by
// an explicit state budget; these products exist as small test oracles, the
// synthesis itself never builds them.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pairsynth/common.hpp"
#include "pairsynth/formula.hpp"
#include "pairsynth/skeleton.hpp"

namespace pairsynth {

// A global state over some domain of processes: local states plus a shared
// valuation. Identity is the canonical serialization of (sorted locals,
// sorted valuation).
struct GlobalState {
  std::map<Pid, LocalState> locals;
  Valuation shared;

  bool operator==(const GlobalState& o) const {
    return locals == o.locals && shared == o.shared;
  }
  bool operator<(const GlobalState& o) const {
    if (locals != o.locals) return locals < o.locals;
    return shared < o.shared;
  }

  std::string key() const {
    std::string s;
    for (auto& [pid, ls] : locals) s += ls.key() + ";";
    s += "|";
    for (auto& [x, v] : shared) s += x + "=" + v + ";";
    return s;
  }

  const LocalState& local(const Pid& i) const {
    auto it = locals.find(i);
    if (it == locals.end())
      throw UndefinedProjection("no local state for process " + i.id);
    return it->second;
  }

  bool prop(const AtomicProp& p) const { return local(p.owner).value(p.name); }
};

// Transition label: a process index or the create marker.
struct TransLabel {
  bool is_create = false;
  Pid pid;          // when !is_create
  PidPair created;  // when is_create

  static TransLabel proc(Pid p) { return TransLabel{false, std::move(p), {}}; }
  static TransLabel create(PidPair pr) { return TransLabel{true, {}, std::move(pr)}; }

  std::string str() const {
    return is_create ? "CREATE(" + created.a.id + "," + created.b.id + ")" : pid.id;
  }
  bool operator==(const TransLabel& o) const {
    return is_create == o.is_create && pid == o.pid && created == o.created;
  }
};

// Explicit structure M = (S0, S, R). States are interned; transitions are
// stored both flat and indexed by source.
struct Structure {
  std::vector<GlobalState> states;
  std::set<std::size_t> initials;
  struct Trans {
    std::size_t from;
    TransLabel label;
    std::size_t to;
  };
  std::vector<Trans> transitions;
  std::vector<std::vector<std::size_t>> out;  // state -> transition indices
  std::vector<std::vector<std::size_t>> in;   // state -> transition indices
  std::set<Pid> pids;
  std::unordered_map<std::string, std::size_t> index;  // GlobalState::key -> id

  std::size_t intern(const GlobalState& s) {
    auto it = index.find(s.key());
    if (it != index.end()) return it->second;
    std::size_t id = states.size();
    states.push_back(s);
    index.emplace(s.key(), id);
    out.emplace_back();
    in.emplace_back();
    return id;
  }

  std::optional<std::size_t> find(const GlobalState& s) const {
    auto it = index.find(s.key());
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  void add_transition(std::size_t from, TransLabel label, std::size_t to) {
    for (std::size_t ti : out[from]) {
      const Trans& t = transitions[ti];
      if (t.to == to && t.label == label) return;  // R is a set
    }
    transitions.push_back({from, label, to});
    out[from].push_back(transitions.size() - 1);
    in[to].push_back(transitions.size() - 1);
  }

  bool has_transition(std::size_t from, const TransLabel& label, std::size_t to) const {
    for (std::size_t ti : out[from]) {
      const Trans& t = transitions[ti];
      if (t.to == to && t.label == label) return true;
    }
    return false;
  }

  std::size_t n_states() const { return states.size(); }

  // States from which some path leads on; deadlocks are states with no
  // outgoing transitions at all (fullpaths ending there are finite).
  bool is_deadlock(std::size_t s) const { return out[s].empty(); }
};

// ---------------------------------------------------------------------------
// Pair-programs

struct PairProgram {
  Pid i, j;
  SyncSkeleton skel_i;  // P_i^j
  SyncSkeleton skel_j;  // P_j^i
  std::vector<SharedVar> shared;
  // Initial pair states: all combinations of skeleton initials with the
  // shared variables at their declared initial values.
  PidPair pair() const { return {i, j}; }

  const SyncSkeleton& skeleton_of(const Pid& p) const {
    if (p == i) return skel_i;
    if (p == j) return skel_j;
    throw UndefinedProjection("process " + p.id + " not in pair " + pair().str());
  }

  Valuation initial_valuation() const {
    Valuation v;
    for (auto& sv : shared) v[sv.name] = sv.initial;
    return v;
  }

  std::vector<GlobalState> initial_states() const {
    std::vector<GlobalState> out;
    for (auto& si : skel_i.initials)
      for (auto& sj : skel_j.initials) {
        GlobalState g;
        g.locals[i] = si;
        g.locals[j] = sj;
        g.shared = initial_valuation();
        out.push_back(g);
      }
    return out;
  }
};

// Projection s|i.
inline LocalState project_pid(const GlobalState& s, const Pid& i) { return s.local(i); }

// Projection s|SH_ij given the pair's variable list.
inline Valuation project_shared(const GlobalState& s, const std::vector<SharedVar>& vars) {
  Valuation v;
  for (auto& sv : vars) {
    auto it = s.shared.find(sv.name);
    if (it == s.shared.end())
      throw UndefinedProjection("variable " + sv.name + " absent from state");
    v[sv.name] = it->second;
  }
  return v;
}

// Projection s|ij.
inline GlobalState project_pair(const GlobalState& s, const PairProgram& pp) {
  GlobalState g;
  g.locals[pp.i] = s.local(pp.i);
  g.locals[pp.j] = s.local(pp.j);
  g.shared = project_shared(s, pp.shared);
  return g;
}

// ---------------------------------------------------------------------------
// Pair-structure construction (Definition: pair-structure).

enum class StateSpace { Reachable, Full };

namespace detail {

// Successors of a pair-state by process h: every arc from h's current local
// state, every branch with a true guard. The other component is unchanged.
inline void pair_successors(const PairProgram& pp, const GlobalState& s, const Pid& h,
                            std::vector<GlobalState>& out) {
  const SyncSkeleton& sk = pp.skeleton_of(h);
  const Pid peer = (h == pp.i) ? pp.j : pp.i;
  const LocalState& mine = s.local(h);
  const LocalState& theirs = s.local(peer);
  for (auto* arc : sk.arcs_from(mine)) {
    for (auto& br : arc->cmd.branches) {
      if (!eval_guard(br.guard, theirs, s.shared)) continue;
      GlobalState t = s;
      t.locals[h] = arc->to;
      t.shared = apply_body(br.body, s.shared);
      out.push_back(std::move(t));
    }
  }
}

}  // namespace detail

inline Structure build_pair_structure(const PairProgram& pp,
                                      StateSpace space = StateSpace::Reachable,
                                      std::size_t budget = 200000) {
  {
    std::set<std::string> props_i, props_j;
    for (auto& [p, _] : pp.skel_i.states.at(0).assign) props_i.insert(p);
    for (auto& [p, _] : pp.skel_j.states.at(0).assign) props_j.insert(p);
    auto vio_i = validate_skeleton(pp.skel_i, props_i, props_j, pp.shared);
    auto vio_j = validate_skeleton(pp.skel_j, props_j, props_i, pp.shared);
    if (!vio_i.empty() || !vio_j.empty()) {
      std::string msg = "pair " + pp.pair().str() + ":";
      for (auto& v : vio_i) msg += " [" + pp.i.id + "] " + v.str() + ";";
      for (auto& v : vio_j) msg += " [" + pp.j.id + "] " + v.str() + ";";
      throw InvalidSkeleton(msg);
    }
  }

  Structure m;
  m.pids = {pp.i, pp.j};
  std::deque<std::size_t> work;
  for (auto& s0 : pp.initial_states()) {
    std::size_t id = m.intern(s0);
    m.initials.insert(id);
    work.push_back(id);
  }

  if (space == StateSpace::Full) {
    // Cross product of all local-state pairs over all shared valuations.
    std::vector<Valuation> vals{Valuation{}};
    for (auto& sv : pp.shared) {
      std::vector<Valuation> next;
      for (auto& v : vals)
        for (auto& d : sv.domain) {
          Valuation w = v;
          w[sv.name] = d;
          next.push_back(std::move(w));
        }
      vals = std::move(next);
    }
    for (auto& si : pp.skel_i.states)
      for (auto& sj : pp.skel_j.states)
        for (auto& v : vals) {
          GlobalState g;
          g.locals[pp.i] = si;
          g.locals[pp.j] = sj;
          g.shared = v;
          if (!m.find(g)) work.push_back(m.intern(g));
        }
  }

  std::set<std::size_t> expanded;
  while (!work.empty()) {
    std::size_t sid = work.front();
    work.pop_front();
    if (!expanded.insert(sid).second) continue;
    if (m.n_states() > budget) throw BudgetExceeded(m.n_states());
    for (const Pid& h : {pp.i, pp.j}) {
      std::vector<GlobalState> succs;
      detail::pair_successors(pp, m.states[sid], h, succs);
      for (auto& t : succs) {
        std::size_t tid = m.intern(t);
        m.add_transition(sid, TransLabel::proc(h), tid);
        if (expanded.count(tid) == 0) work.push_back(tid);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Static programs over an interconnection relation

struct Interconnection {
  PidPair pair;
  FormulaPtr spec;  // conjunction of the pair-specification formulae
};

struct StaticProgram {
  std::vector<Interconnection> relation;       // I, one entry per unordered pair
  std::map<PidPair, PairProgram> pairs;

  std::set<Pid> domain() const {
    std::set<Pid> d;
    for (auto& e : relation) {
      d.insert(e.pair.a);
      d.insert(e.pair.b);
    }
    return d;
  }

  std::vector<Pid> neighbors(const Pid& i) const {
    std::vector<Pid> out;
    for (auto& e : relation)
      if (e.pair.contains(i)) out.push_back(e.pair.other(i));
    return out;
  }

  bool related(const Pid& i, const Pid& j) const {
    return pairs.count(PidPair(i, j)) > 0;
  }

  const PairProgram& pair_program(const Pid& i, const Pid& j) const {
    auto it = pairs.find(PidPair(i, j));
    if (it == pairs.end())
      throw UndefinedProjection("pair " + PidPair(i, j).str() + " not in I");
    return it->second;
  }

  const SharedVar* find_var(const std::string& name) const {
    for (auto& [_, pp] : pairs)
      for (auto& sv : pp.shared)
        if (sv.name == name) return &sv;
    return nullptr;
  }

  // Local-structure compatibility: every process's skeletons across its
  // pair-programs must have equal stripped graphs (and equal initial sets,
  // so the derived initial states are well formed).
  std::vector<Violation> validate() const {
    std::vector<Violation> out;
    std::set<PidPair> seen;
    for (auto& e : relation) {
      if (e.pair.a == e.pair.b) out.push_back({"ReflexivePair", e.pair.str()});
      if (!seen.insert(e.pair).second) out.push_back({"DuplicatePair", e.pair.str()});
      if (pairs.count(e.pair) == 0) out.push_back({"MissingPairProgram", e.pair.str()});
    }
    std::map<Pid, const SyncSkeleton*> rep;
    for (auto& [pr, pp] : pairs) {
      for (const Pid* p : {&pp.i, &pp.j}) {
        const SyncSkeleton& sk = pp.skeleton_of(*p);
        auto [it, fresh] = rep.emplace(*p, &sk);
        if (!fresh && strip_labels(*it->second) != strip_labels(sk))
          out.push_back({"IncompatibleLocalStructure",
                         p->id + " differs between pair-programs"});
        std::set<std::string> props;
        for (auto& [name, _] : sk.states.at(0).assign) props.insert(name);
        std::set<std::string> peer_props;
        const SyncSkeleton& other = pp.skeleton_of(pr.other(*p));
        for (auto& [name, _] : other.states.at(0).assign) peer_props.insert(name);
        for (auto& v : validate_skeleton(sk, props, peer_props, pp.shared))
          out.push_back(v);
      }
    }
    return out;
  }

  // Derived initial J-states: every pair projection initial. Because initial
  // local-state sets agree per process, this is the cross product of
  // per-process initial local states with each pair's initial valuation.
  std::vector<GlobalState> initial_states(const std::vector<PidPair>& J) const {
    std::map<Pid, std::vector<LocalState>> inits;
    Valuation v0;
    for (auto& pr : J) {
      const PairProgram& pp = pair_program(pr.a, pr.b);
      for (const Pid* p : {&pp.i, &pp.j}) {
        const SyncSkeleton& sk = pp.skeleton_of(*p);
        std::vector<LocalState> is = sk.initials;
        std::sort(is.begin(), is.end());
        auto [it, fresh] = inits.emplace(*p, is);
        if (!fresh) {
          std::vector<LocalState> common;
          std::set_intersection(it->second.begin(), it->second.end(), is.begin(), is.end(),
                                std::back_inserter(common));
          it->second = std::move(common);
        }
      }
      for (auto& sv : pp.shared) v0[sv.name] = sv.initial;
    }
    std::vector<GlobalState> out{GlobalState{}};
    out[0].shared = v0;
    for (auto& [pid, options] : inits) {
      std::vector<GlobalState> next;
      for (auto& g : out)
        for (auto& ls : options) {
          GlobalState h = g;
          h.locals[pid] = ls;
          next.push_back(std::move(h));
        }
      out = std::move(next);
    }
    return out;
  }
};

// s|J for a set of pairs J drawn from sp.
inline GlobalState project_onto(const GlobalState& s, const StaticProgram& sp,
                                const std::vector<PidPair>& J) {
  GlobalState g;
  for (auto& pr : J) {
    const PairProgram& pp = sp.pair_program(pr.a, pr.b);
    g.locals[pp.i] = s.local(pp.i);
    g.locals[pp.j] = s.local(pp.j);
    for (auto& sv : pp.shared) {
      auto it = s.shared.find(sv.name);
      if (it == s.shared.end()) throw UndefinedProjection("variable " + sv.name + " absent");
      g.shared[sv.name] = it->second;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// J-structure construction (Definition: I-structure). For a J-transition by
// process i, every pair {i,j} in J must contribute a branch with a true
// guard; all other locals and all other pairs' variables are frozen.

namespace detail {

inline void product_successors(const StaticProgram& sp, const std::vector<PidPair>& J,
                               const GlobalState& s, const Pid& i,
                               std::vector<GlobalState>& out) {
  // Neighbors of i within J.
  std::vector<const PairProgram*> pps;
  for (auto& pr : J)
    if (pr.contains(i)) pps.push_back(&sp.pair_program(pr.a, pr.b));
  if (pps.empty()) return;
  const LocalState& mine = s.local(i);

  // Arcs are matched by (from, to) across all of i's pair-skeletons.
  const SyncSkeleton& ref = pps[0]->skeleton_of(i);
  for (auto* ref_arc : ref.arcs_from(mine)) {
    // For each pair, find the matching arc and its enabled branches.
    std::vector<std::vector<const Branch*>> choices;
    bool arc_everywhere = true;
    for (auto* pp : pps) {
      const SyncSkeleton& sk = pp->skeleton_of(i);
      const Pid peer = (i == pp->i) ? pp->j : pp->i;
      const Branch* unused = nullptr;
      (void)unused;
      std::vector<const Branch*> enabled;
      bool arc_found = false;
      for (auto& a : sk.arcs) {
        if (!(a.from == mine && a.to == ref_arc->to)) continue;
        arc_found = true;
        Valuation pv = project_shared(s, pp->shared);
        for (auto& br : a.cmd.branches)
          if (eval_guard(br.guard, s.local(peer), pv)) enabled.push_back(&br);
        break;
      }
      if (!arc_found) {
        arc_everywhere = false;
        break;
      }
      if (enabled.empty()) {
        arc_everywhere = false;  // this neighbor blocks the move
        break;
      }
      choices.push_back(std::move(enabled));
    }
    if (!arc_everywhere) continue;

    // Cross product of branch choices; distinct bodies may give distinct
    // successors, identical results are deduplicated by the caller's intern.
    std::vector<Valuation> shared_opts{s.shared};
    for (std::size_t k = 0; k < pps.size(); ++k) {
      std::vector<Valuation> next;
      for (auto& v : shared_opts)
        for (auto* br : choices[k]) next.push_back(apply_body(br->body, v));
      shared_opts = std::move(next);
    }
    for (auto& v : shared_opts) {
      GlobalState t = s;
      t.locals[i] = ref_arc->to;
      t.shared = std::move(v);
      out.push_back(std::move(t));
    }
  }
}

}  // namespace detail

inline Structure build_product_structure(const StaticProgram& sp,
                                         const std::vector<PidPair>& J,
                                         std::size_t budget = 200000) {
  Structure m;
  for (auto& pr : J) {
    m.pids.insert(pr.a);
    m.pids.insert(pr.b);
  }
  std::deque<std::size_t> work;
  for (auto& s0 : sp.initial_states(J)) {
    std::size_t id = m.intern(s0);
    m.initials.insert(id);
    work.push_back(id);
  }
  std::set<std::size_t> expanded;
  while (!work.empty()) {
    std::size_t sid = work.front();
    work.pop_front();
    if (!expanded.insert(sid).second) continue;
    if (m.n_states() > budget) throw BudgetExceeded(m.n_states());
    GlobalState s = m.states[sid];
    for (auto& i : m.pids) {
      std::vector<GlobalState> succs;
      detail::product_successors(sp, J, s, i, succs);
      for (auto& t : succs) {
        std::size_t tid = m.intern(t);
        m.add_transition(sid, TransLabel::proc(i), tid);
        if (expanded.count(tid) == 0) work.push_back(tid);
      }
    }
  }
  return m;
}

inline std::vector<PidPair> all_pairs(const StaticProgram& sp) {
  std::vector<PidPair> J;
  for (auto& e : sp.relation) J.push_back(e.pair);
  return J;
}

// ---------------------------------------------------------------------------
// Labeled paths and path projection

struct Path {
  std::vector<GlobalState> states;
  std::vector<TransLabel> labels;  // labels.size() == states.size() - 1 (or both 0)
};

// Coalesce maximal J-blocks to single states, keep only transitions by
// processes in dom(J). Requires states projectable onto J throughout.
inline Path project_path(const Path& pi, const StaticProgram& sp,
                         const std::vector<PidPair>& J) {
  std::set<Pid> dom;
  for (auto& pr : J) {
    dom.insert(pr.a);
    dom.insert(pr.b);
  }
  Path out;
  if (pi.states.empty()) return out;
  out.states.push_back(project_onto(pi.states[0], sp, J));
  for (std::size_t k = 0; k < pi.labels.size(); ++k) {
    const TransLabel& l = pi.labels[k];
    bool mine = !l.is_create && dom.count(l.pid) > 0;
    if (mine) {
      out.labels.push_back(l);
      out.states.push_back(project_onto(pi.states[k + 1], sp, J));
    }
    // otherwise the next state joins the current J-block; its projection is
    // unchanged by construction.
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transition-mapping verification (Lemma: transition mapping). Checks the
// three-way iff for every transition of a built product, and the converse by
// constructing every candidate move.

struct MappingReport {
  std::vector<std::string> violations;
  std::size_t transitions_checked = 0;
  std::size_t candidates_checked = 0;
  bool ok() const { return violations.empty(); }
};

inline MappingReport verify_transition_mapping(const StaticProgram& sp, const Structure& mI) {
  MappingReport rep;
  std::vector<PidPair> I = all_pairs(sp);
  std::map<PidPair, Structure> pair_structs;
  for (auto& pr : I) pair_structs.emplace(pr, build_pair_structure(sp.pair_program(pr.a, pr.b)));

  // Forward direction: every product transition projects into R_ij for all
  // neighbor pairs, freezes unrelated locals and unrelated shared variables.
  for (auto& t : mI.transitions) {
    ++rep.transitions_checked;
    const GlobalState& s = mI.states[t.from];
    const GlobalState& u = mI.states[t.to];
    const Pid& i = t.label.pid;
    for (auto& pr : I) {
      const PairProgram& pp = sp.pair_program(pr.a, pr.b);
      if (pr.contains(i)) {
        const Structure& mij = pair_structs.at(pr);
        auto sid = mij.find(project_pair(s, pp));
        auto uid = mij.find(project_pair(u, pp));
        // Projections of reachable product states are reachable pair states
        // (state-mapping corollary); absence is itself a violation.
        if (!sid || !uid) {
          rep.violations.push_back("projection of transition by " + i.id + " onto " +
                                   pr.str() + " leaves the pair-structure");
          continue;
        }
        if (!mij.has_transition(*sid, TransLabel::proc(i), *uid))
          rep.violations.push_back("transition by " + i.id + " does not project into R_" +
                                   pr.str());
      } else {
        if (!(project_shared(s, pp.shared) == project_shared(u, pp.shared)))
          rep.violations.push_back("transition by " + i.id + " disturbs variables of " +
                                   pr.str());
      }
    }
    for (auto& [pid, ls] : s.locals)
      if (!(pid == i) && !(u.local(pid) == ls))
        rep.violations.push_back("transition by " + i.id + " moves local state of " + pid.id);
  }

  // Converse: every candidate move whose projections are pairwise legal and
  // which freezes everything else must be a product transition.
  for (std::size_t sid = 0; sid < mI.n_states(); ++sid) {
    const GlobalState& s = mI.states[sid];
    for (auto& i : mI.pids) {
      std::vector<GlobalState> succs;
      detail::product_successors(sp, I, s, i, succs);
      for (auto& u : succs) {
        ++rep.candidates_checked;
        auto uid = mI.find(u);
        if (!uid || !mI.has_transition(sid, TransLabel::proc(i), *uid))
          rep.violations.push_back("legal move by " + i.id + " from " + s.key() +
                                   " missing from the product");
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// DOT export: states labeled with their characterizing assignment, edges
// with the executing process.

inline std::string state_label(const GlobalState& s) {
  std::string out;
  for (auto& [pid, ls] : s.locals) {
    std::string truo;
    for (auto& [p, v] : ls.assign)
      if (v) truo += (truo.empty() ? "" : ",") + p;
    out += pid.id + ":" + (truo.empty() ? "-" : truo) + "\\n";
  }
  for (auto& [x, v] : s.shared) out += x + "=" + v + " ";
  return out;
}

inline std::string to_dot(const Structure& m, const std::string& name = "M") {
  std::string d = "digraph \"" + name + "\" {\n  node [shape=box, fontsize=10];\n";
  for (std::size_t i = 0; i < m.n_states(); ++i) {
    d += "  s" + std::to_string(i) + " [label=\"" + state_label(m.states[i]) + "\"";
    if (m.initials.count(i)) d += ", penwidth=2";
    d += "];\n";
  }
  for (auto& t : m.transitions)
    d += "  s" + std::to_string(t.from) + " -> s" + std::to_string(t.to) + " [label=\"" +
         t.label.str() + "\"];\n";
  d += "}\n";
  return d;
}

}  // namespace pairsynth
