#pragma once

// Wait-for graphs and supercycle analysis. The graph of a state has a node
// per process, a node per start-matching move, an edge from each process to
// its own moves, and an edge from a move to every neighbor whose guard
// conjunct is false. A supercycle is the deadlock witness: a nonempty
// subgraph where every included process carries all its moves and every
// included move stays blocked inside the subgraph.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pairsynth/overlay.hpp"
#include "pairsynth/structure.hpp"

namespace pairsynth {

struct WaitForGraph {
  struct MoveNode {
    Pid owner;
    std::string label;            // "from->to"
    std::vector<Pid> blocks;      // neighbors whose guard conjunct is false
  };
  std::vector<Pid> processes;
  std::vector<MoveNode> moves;
  std::map<Pid, std::vector<std::size_t>> moves_of;

  bool has_process(const Pid& p) const {
    return std::find(processes.begin(), processes.end(), p) != processes.end();
  }
  std::size_t total_edges() const {
    std::size_t n = 0;
    for (auto& m : moves) n += 1 + m.blocks.size();  // owner edge + block edges
    return n;
  }
};

// Generic construction input: per process, its start-matching moves with the
// per-neighbor guard evaluation already carried out. Static states and
// dynamic configurations both assemble one of these.
struct WfgInput {
  struct MoveEntry {
    std::string label;
    std::map<Pid, bool> neighbor_guard;  // j -> disjunction-of-branch-guards value
  };
  std::map<Pid, std::vector<MoveEntry>> moves;
};

inline WaitForGraph build_wfg(const WfgInput& in) {
  WaitForGraph w;
  for (auto& [p, _] : in.moves) w.processes.push_back(p);
  for (auto& [p, entries] : in.moves) {
    for (auto& e : entries) {
      WaitForGraph::MoveNode node;
      node.owner = p;
      node.label = e.label;
      for (auto& [j, ok] : e.neighbor_guard)
        if (!ok) node.blocks.push_back(j);
      w.moves_of[p].push_back(w.moves.size());
      w.moves.push_back(std::move(node));
    }
  }
  return w;
}

// Wait-for graph of a J-state. Moves are the J-composed moves: arcs present
// in all of the owner's J-pairs, with the guard conjunct toward each
// neighbor being the disjunction of that pair's branch guards.
inline WfgInput wfg_input_for(const StaticProgram& sp, const std::vector<PidPair>& J,
                              const GlobalState& s) {
  WfgInput in;
  std::set<Pid> dom;
  for (auto& pr : J) {
    dom.insert(pr.a);
    dom.insert(pr.b);
  }
  for (auto& h : dom) {
    in.moves[h];  // process node exists even if no move matches
    std::vector<const PairProgram*> pps;
    for (auto& pr : J)
      if (pr.contains(h)) pps.push_back(&sp.pair_program(pr.a, pr.b));
    if (pps.empty()) continue;
    const SyncSkeleton& ref = pps[0]->skeleton_of(h);
    for (auto* ref_arc : ref.arcs_from(s.local(h))) {
      WfgInput::MoveEntry entry;
      entry.label = h.id + ":" + ref_arc->from.key() + "->" + ref_arc->to.key();
      bool everywhere = true;
      for (auto* pp : pps) {
        const SyncSkeleton& sk = pp->skeleton_of(h);
        const Pid peer = pp->pair().other(h);
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
        entry.neighbor_guard[peer] =
            found->cmd.enabled(s.local(peer), project_shared(s, pp->shared));
      }
      if (everywhere) in.moves[h].push_back(std::move(entry));
    }
  }
  return in;
}

// ---------------------------------------------------------------------------
// Supercycles

struct Supercycle {
  std::vector<Pid> processes;
  std::vector<std::string> move_labels;
};

// Definitional validator: does the process set X induce a supercycle? True
// iff X is nonempty and every move of every member has a blocked edge back
// into X. (The induced subgraph takes all member moves and their edges.)
inline bool induces_supercycle(const WaitForGraph& w, const std::set<Pid>& X) {
  if (X.empty()) return false;
  for (auto& p : X) {
    auto it = w.moves_of.find(p);
    if (it == w.moves_of.end()) continue;
    for (std::size_t mi : it->second) {
      bool blocked_in_X = false;
      for (auto& q : w.moves[mi].blocks)
        if (X.count(q)) {
          blocked_in_X = true;
          break;
        }
      if (!blocked_in_X) return false;
    }
  }
  return true;
}

// Brute-force existence check by subset enumeration; the independent oracle
// for the pruning fixpoint. Only meant for small graphs.
inline bool supercycle_exists_brute(const WaitForGraph& w) {
  const std::size_t n = w.processes.size();
  if (n > 20) throw BudgetExceeded(std::size_t(1) << 20);
  for (std::size_t mask = 1; mask < (std::size_t(1) << n); ++mask) {
    std::set<Pid> X;
    for (std::size_t b = 0; b < n; ++b)
      if (mask & (std::size_t(1) << b)) X.insert(w.processes[b]);
    if (induces_supercycle(w, X)) return true;
  }
  return false;
}

// Iterative pruning fixpoint: delete moves with no remaining blocked edge,
// then their owners (a process in a supercycle carries all its moves), then
// everything dangling from the deletions. The nonempty residue is returned
// as a supercycle; emptiness means supercycle-free, in which case some move
// of the original graph necessarily had no outgoing edges.
inline std::optional<Supercycle> find_supercycle(const WaitForGraph& w) {
  std::map<Pid, bool> proc_alive;
  for (auto& p : w.processes) proc_alive[p] = true;
  std::vector<bool> move_alive(w.moves.size(), true);

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t mi = 0; mi < w.moves.size(); ++mi) {
      if (!move_alive[mi]) continue;
      const auto& mv = w.moves[mi];
      if (!proc_alive[mv.owner]) {  // dangling move of a deleted process
        move_alive[mi] = false;
        changed = true;
        continue;
      }
      bool blocked = false;
      for (auto& q : mv.blocks)
        if (proc_alive[q]) {
          blocked = true;
          break;
        }
      if (!blocked) {
        move_alive[mi] = false;
        proc_alive[mv.owner] = false;
        changed = true;
      }
    }
  }

  Supercycle sc;
  for (auto& p : w.processes)
    if (proc_alive[p]) sc.processes.push_back(p);
  for (std::size_t mi = 0; mi < w.moves.size(); ++mi)
    if (move_alive[mi]) sc.move_labels.push_back(w.moves[mi].label);
  if (sc.processes.empty()) {
    // Supercycle proposition: with every process carrying at least one move,
    // freedom implies some move had no outgoing edges at all.
    bool any_move = !w.moves.empty();
    if (any_move) {
      bool some_unblocked = false;
      for (auto& mv : w.moves)
        if (mv.blocks.empty()) some_unblocked = true;
      if (!some_unblocked)
        throw std::logic_error("supercycle pruning reached an impossible residue");
    }
    return std::nullopt;
  }
  std::set<Pid> X(sc.processes.begin(), sc.processes.end());
  if (!induces_supercycle(w, X))
    throw std::logic_error("pruning residue fails the supercycle definition");
  return sc;
}

// Processes reachable from P_i or P_j by wait-for paths: the set that blocks
// the pair from executing.
inline std::set<Pid> blocked_from(const WaitForGraph& w, const PidPair& pr) {
  std::set<Pid> seen;
  std::vector<Pid> work;
  auto push_targets = [&](const Pid& p) {
    auto it = w.moves_of.find(p);
    if (it == w.moves_of.end()) return;
    for (std::size_t mi : it->second)
      for (auto& q : w.moves[mi].blocks)
        if (seen.insert(q).second) work.push_back(q);
  };
  push_targets(pr.a);
  push_targets(pr.b);
  while (!work.empty()) {
    Pid p = work.back();
    work.pop_back();
    push_targets(p);
  }
  return seen;
}

// ---------------------------------------------------------------------------
// The wait-for-graph condition's per-state disjunction: after a k-transition
// (or a create adding {j,k}), either no move of j is blocked on k, or some
// move of k is unblocked toward every member of the l-list.

inline bool wfg_condition_disjunction(const WaitForGraph& w, const Pid& k, const Pid& j,
                                      const std::set<Pid>& ells, std::string* why = nullptr) {
  bool first = true;
  auto jt = w.moves_of.find(j);
  if (jt != w.moves_of.end()) {
    for (std::size_t mi : jt->second)
      for (auto& q : w.moves[mi].blocks)
        if (q == k) {
          first = false;
          if (why) *why = "move " + w.moves[mi].label + " blocked on " + k.id;
        }
  }
  if (first) return true;

  auto kt = w.moves_of.find(k);
  if (kt != w.moves_of.end()) {
    for (std::size_t mi : kt->second) {
      bool clean = true;
      for (auto& q : w.moves[mi].blocks)
        if (ells.count(q)) {
          clean = false;
          break;
        }
      if (clean) return true;
    }
  }
  if (why) *why += "; no move of " + k.id + " unblocked toward the l-set";
  return false;
}

// ---------------------------------------------------------------------------
// Static wait-for-graph condition. For every process k, local state t_k with
// n outgoing arcs, j in I(k) and size-n multiset {l_1..l_n} over I(k), and
// every reachable J-state entered by a k-transition with k at t_k, the
// disjunction must hold. Initial states of the full program must have
// supercycle-free wait-for graphs.

struct WfgConditionReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::size_t stars_checked = 0;
  std::size_t states_checked = 0;
};

namespace detail {

inline void multisets_over(const std::vector<Pid>& opts, std::size_t n,
                           std::vector<Pid>& cur, std::size_t start,
                           std::vector<std::vector<Pid>>& out) {
  if (cur.size() == n) {
    out.push_back(cur);
    return;
  }
  for (std::size_t i = start; i < opts.size(); ++i) {
    cur.push_back(opts[i]);
    multisets_over(opts, n, cur, i, out);
    cur.pop_back();
  }
}

}  // namespace detail

inline WfgConditionReport check_static_wfg_condition(const StaticProgram& sp,
                                                     std::size_t budget = 200000) {
  WfgConditionReport rep;
  std::map<std::string, Structure> product_cache;

  auto product_for = [&](const std::vector<PidPair>& J) -> const Structure& {
    std::string key;
    for (auto& pr : J) key += pr.str();
    auto it = product_cache.find(key);
    if (it == product_cache.end())
      it = product_cache.emplace(key, build_product_structure(sp, J, budget)).first;
    return it->second;
  };

  for (auto& k : sp.domain()) {
    std::vector<Pid> nbrs = sp.neighbors(k);
    const SyncSkeleton& sk = sp.pair_program(k, nbrs[0]).skeleton_of(k);
    for (auto& t_k : sk.states) {
      const std::size_t n = sk.arcs_from(t_k).size();
      std::vector<std::vector<Pid>> ell_lists;
      std::vector<Pid> cur;
      detail::multisets_over(nbrs, n, cur, 0, ell_lists);
      for (auto& j : nbrs) {
        for (auto& ells : ell_lists) {
          std::set<PidPair> Jset{PidPair(j, k)};
          std::set<Pid> ellset(ells.begin(), ells.end());
          for (auto& l : ells) Jset.insert(PidPair(k, l));
          std::vector<PidPair> J(Jset.begin(), Jset.end());
          ++rep.stars_checked;
          const Structure& mj = product_for(J);
          for (auto& tr : mj.transitions) {
            if (tr.label.is_create || !(tr.label.pid == k)) continue;
            const GlobalState& t = mj.states[tr.to];
            if (!(t.local(k) == t_k)) continue;
            ++rep.states_checked;
            WaitForGraph w = build_wfg(wfg_input_for(sp, J, t));
            std::string why;
            if (!wfg_condition_disjunction(w, k, j, ellset, &why)) {
              rep.ok = false;
              rep.violations.push_back("k=" + k.id + " t_k=" + t_k.key() + " J=" + [&] {
                std::string s;
                for (auto& pr : J) s += pr.str();
                return s;
              }() + " state=" + t.key() + ": " + why);
            }
          }
        }
      }
    }
  }

  // Initial wait-for graphs of the full program must be supercycle-free.
  std::vector<PidPair> I = all_pairs(sp);
  for (auto& s0 : sp.initial_states(I)) {
    WaitForGraph w = build_wfg(wfg_input_for(sp, I, s0));
    if (auto sc = find_supercycle(w)) {
      rep.ok = false;
      std::string who;
      for (auto& p : sc->processes) who += p.id + " ";
      rep.violations.push_back("initial state " + s0.key() + " has a supercycle over: " + who);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// DOT export: process nodes as boxes, move nodes as ellipses, blocked edges
// dashed.

inline std::string to_dot(const WaitForGraph& w, const std::string& name = "W") {
  std::string d = "digraph \"" + name + "\" {\n";
  for (auto& p : w.processes)
    d += "  \"P_" + p.id + "\" [shape=box];\n";
  for (std::size_t mi = 0; mi < w.moves.size(); ++mi) {
    d += "  \"m" + std::to_string(mi) + "\" [shape=ellipse, label=\"" + w.moves[mi].label +
         "\"];\n";
    d += "  \"P_" + w.moves[mi].owner.id + "\" -> \"m" + std::to_string(mi) + "\";\n";
    for (auto& q : w.moves[mi].blocks)
      d += "  \"m" + std::to_string(mi) + "\" -> \"P_" + q.id + "\" [style=dashed];\n";
  }
  d += "}\n";
  return d;
}

}  // namespace pairsynth
