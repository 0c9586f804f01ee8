#pragma once

// Conjunctive overlay: the synthesis transformation itself. A process's
// composed move keeps one guarded command per neighbor and fires only when
// every neighbor's command has a true branch. The transformation touches
// pair-program elements only; an element counter backs the linearity check.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pairsynth/skeleton.hpp"
#include "pairsynth/structure.hpp"

namespace pairsynth {

struct ComposedMove {
  LocalState from, to;
  std::map<Pid, GuardedCommand> per_neighbor;  // neighbor j -> the arc's command in P_i^j
};

struct ComposedProcess {
  Pid owner;
  std::vector<LocalState> states;
  std::vector<LocalState> initials;
  std::vector<ComposedMove> moves;

  std::vector<const ComposedMove*> moves_from(const LocalState& s) const {
    std::vector<const ComposedMove*> out;
    for (auto& m : moves)
      if (m.from == s) out.push_back(&m);
    return out;
  }
};

struct OverlayStats {
  std::size_t elements = 0;  // pair-program arcs, branches and states visited
};

// Conjunctive overlay of one process's pair-skeletons. An arc (s,t) survives
// iff present in every input; its label maps each peer to that input's
// command. Inputs must share local structure; initial sets intersect.
inline ComposedProcess overlay(const std::vector<const SyncSkeleton*>& skels,
                               OverlayStats* stats = nullptr) {
  if (skels.empty()) throw InputError("overlay of zero skeletons");
  const SyncSkeleton& ref = *skels[0];
  for (auto* sk : skels) {
    if (sk->owner != ref.owner)
      throw InputError("overlay across different owners: " + sk->owner.id + " vs " +
                       ref.owner.id);
    if (strip_labels(*sk) != strip_labels(ref))
      throw InvalidSkeleton("IncompatibleLocalStructure for process " + ref.owner.id);
  }

  ComposedProcess cp;
  cp.owner = ref.owner;
  cp.states = ref.states;
  cp.initials = ref.initials;
  std::sort(cp.initials.begin(), cp.initials.end());
  for (auto* sk : skels) {
    if (stats) stats->elements += sk->states.size();
    std::vector<LocalState> inits = sk->initials;
    std::sort(inits.begin(), inits.end());
    std::vector<LocalState> common;
    std::set_intersection(cp.initials.begin(), cp.initials.end(), inits.begin(), inits.end(),
                          std::back_inserter(common));
    cp.initials = std::move(common);
  }

  for (auto& ref_arc : ref.arcs) {
    ComposedMove mv;
    mv.from = ref_arc.from;
    mv.to = ref_arc.to;
    bool everywhere = true;
    for (auto* sk : skels) {
      const Arc* found = nullptr;
      for (auto& a : sk->arcs) {
        if (stats) ++stats->elements;
        if (a.from == ref_arc.from && a.to == ref_arc.to) {
          found = &a;
          break;
        }
      }
      if (!found) {
        everywhere = false;
        break;
      }
      GuardedCommand cmd = found->cmd;
      cmd.canonicalize();
      if (stats) stats->elements += cmd.branches.size();
      mv.per_neighbor[sk->peer] = std::move(cmd);
    }
    if (everywhere) cp.moves.push_back(std::move(mv));
  }
  // Stripped structures are equal, so every input has exactly the reference
  // arcs; the intersection step above is the general form all the same.
  return cp;
}

// One true branch per neighbor, or none when any neighbor blocks. In
// deterministic mode the least-index branch is taken (the canonical order),
// matching the runtime's polling order; a seeded mode covers the
// nondeterministic choice the model allows.
inline std::optional<std::map<Pid, std::size_t>> enabled_branches(
    const ComposedMove& mv, const std::map<Pid, LocalState>& peers,
    const std::map<Pid, Valuation>& shareds, Rng* rng = nullptr) {
  std::map<Pid, std::size_t> choice;
  for (auto& [j, cmd] : mv.per_neighbor) {
    auto pit = peers.find(j);
    auto vit = shareds.find(j);
    if (pit == peers.end() || vit == shareds.end())
      throw UnresolvedSymbol("enabled_branches: no state supplied for neighbor " + j.id);
    if (rng) {
      std::vector<std::size_t> open;
      for (std::size_t b = 0; b < cmd.branches.size(); ++b)
        if (eval_guard(cmd.branches[b].guard, pit->second, vit->second)) open.push_back(b);
      if (open.empty()) return std::nullopt;
      choice[j] = open[pick_index(*rng, open.size())];
    } else {
      auto b = cmd.first_enabled(pit->second, vit->second);
      if (!b) return std::nullopt;
      choice[j] = *b;
    }
  }
  return choice;
}

// ---------------------------------------------------------------------------
// Static synthesis: per-process overlays plus the derived initial set.

struct SynthesizedProgram {
  std::map<Pid, ComposedProcess> processes;
  std::vector<GlobalState> initial_states;
  OverlayStats stats;
};

inline SynthesizedProgram synthesize_static(const StaticProgram& sp) {
  {
    auto vio = sp.validate();
    for (auto& v : vio)
      if (v.kind == "IncompatibleLocalStructure") throw InvalidSkeleton(v.str());
  }
  SynthesizedProgram out;
  for (auto& i : sp.domain()) {
    std::vector<const SyncSkeleton*> skels;
    for (auto& [pr, pp] : sp.pairs)
      if (pr.contains(i)) skels.push_back(&pp.skeleton_of(i));
    out.processes.emplace(i, overlay(skels, &out.stats));
    if (out.processes.at(i).initials.empty())
      throw InputError("EmptyInitialSet: process " + i.id +
                       " has no common initial local state");
  }
  out.initial_states = sp.initial_states(all_pairs(sp));
  out.stats.elements += out.initial_states.size();
  if (out.initial_states.empty()) throw InputError("EmptyInitialSet: no consistent I-state");
  return out;
}

// Step the synthesized program at a global state: all (process, move,
// successor) options per enabled_branches. This is the execution semantics
// the product oracle must coincide with.
struct SynthStep {
  Pid pid;
  const ComposedMove* move;
  GlobalState target;
};

inline std::vector<SynthStep> enabled_steps(const StaticProgram& sp,
                                            const SynthesizedProgram& prog,
                                            const GlobalState& s) {
  std::vector<SynthStep> out;
  for (auto& [i, cp] : prog.processes) {
    std::map<Pid, LocalState> peers;
    std::map<Pid, Valuation> shareds;
    for (auto& j : sp.neighbors(i)) {
      peers.emplace(j, s.local(j));
      shareds.emplace(j, project_shared(s, sp.pair_program(i, j).shared));
    }
    for (auto* mv : cp.moves_from(s.local(i))) {
      // Enumerate every per-neighbor combination of true branches; distinct
      // bodies give distinct successors.
      std::vector<std::map<Pid, std::size_t>> combos{{}};
      bool blocked = false;
      for (auto& [j, cmd] : mv->per_neighbor) {
        std::vector<std::size_t> open;
        for (std::size_t b = 0; b < cmd.branches.size(); ++b)
          if (eval_guard(cmd.branches[b].guard, peers.at(j), shareds.at(j))) open.push_back(b);
        if (open.empty()) {
          blocked = true;
          break;
        }
        std::vector<std::map<Pid, std::size_t>> next;
        for (auto& c : combos)
          for (std::size_t b : open) {
            auto c2 = c;
            c2[j] = b;
            next.push_back(std::move(c2));
          }
        combos = std::move(next);
      }
      if (blocked) continue;
      for (auto& combo : combos) {
        GlobalState t = s;
        t.locals[i] = mv->to;
        for (auto& [j, b] : combo)
          t.shared = apply_body(mv->per_neighbor.at(j).branches[b].body, t.shared);
        out.push_back({i, mv, std::move(t)});
      }
    }
  }
  return out;
}

}  // namespace pairsynth
