#pragma once

// Ring two-phase commit corpus. Coordinator 0 initiates, participants submit
// in a first cycle around the ring, the coordinator decides by observing the
// last participant, and the decision relays around in a second cycle.
// Participants can abort unilaterally from their start state; the
// coordinator can abort unilaterally while proposing.
//
// Guard choices keep every guard temporarily stable: a participant leaves sb
// only once the decision reaches it, so readers of sb are never invalidated,
// and submit guards read only monotone or frozen peer state.

#include <map>
#include <string>
#include <vector>

#include "pairsynth/formula.hpp"
#include "pairsynth/structure.hpp"

namespace pairsynth {

namespace twophase {

inline LocalState one_hot(const Pid& owner, const std::vector<std::string>& props,
                          const std::string& active) {
  return one_hot_state(owner, props, active);
}

inline Arc arc1(const LocalState& from, const LocalState& to, GuardPtr g) {
  return make_arc(from, to, std::move(g));
}

struct Guards {
  GuardPtr st_sb, st_ab, sb_cm, sb_ab, cm_loop, ab_loop;
};

// Participant skeleton facing one neighbor with the given guards.
inline SyncSkeleton participant_skeleton(const Pid& me, const Pid& peer, const Guards& g) {
  static const std::vector<std::string> P{"st", "sb", "cm", "ab"};
  SyncSkeleton sk;
  sk.owner = me;
  sk.peer = peer;
  LocalState st = one_hot(me, P, "st"), sb = one_hot(me, P, "sb"),
             cm = one_hot(me, P, "cm"), ab = one_hot(me, P, "ab");
  sk.states = {st, sb, cm, ab};
  sk.initials = {st};
  sk.state_names = {{st.key(), "st"}, {sb.key(), "sb"}, {cm.key(), "cm"}, {ab.key(), "ab"}};
  sk.arcs = {arc1(st, sb, g.st_sb), arc1(st, ab, g.st_ab), arc1(sb, cm, g.sb_cm),
             arc1(sb, ab, g.sb_ab), arc1(cm, cm, g.cm_loop), arc1(ab, ab, g.ab_loop)};
  return sk;
}

struct CoordGuards {
  GuardPtr st_pr, pr_cm, pr_ab, cm_loop, ab_loop;
};

inline SyncSkeleton coordinator_skeleton(const Pid& me, const Pid& peer, const CoordGuards& g) {
  static const std::vector<std::string> P{"st", "pr", "cm", "ab"};
  SyncSkeleton sk;
  sk.owner = me;
  sk.peer = peer;
  LocalState st = one_hot(me, P, "st"), pr = one_hot(me, P, "pr"),
             cm = one_hot(me, P, "cm"), ab = one_hot(me, P, "ab");
  sk.states = {st, pr, cm, ab};
  sk.initials = {st};
  sk.state_names = {{st.key(), "st"}, {pr.key(), "pr"}, {cm.key(), "cm"}, {ab.key(), "ab"}};
  sk.arcs = {arc1(st, pr, g.st_pr), arc1(pr, cm, g.pr_cm), arc1(pr, ab, g.pr_ab),
             arc1(cm, cm, g.cm_loop), arc1(ab, ab, g.ab_loop)};
  return sk;
}

}  // namespace twophase

struct TwoPhase {
  std::size_t n = 0;
  StaticProgram program;
  // Itemized pair properties; program.relation carries their conjunctions.
  std::map<PidPair, std::vector<FormulaPtr>> properties;

  Pid coordinator() const { return Pid("p0"); }
  Pid participant(std::size_t i) const { return Pid("p" + std::to_string(i)); }
};

// gen_two_phase: pair-programs for (n-1,0), (0,1) and every (i-1,i), with
// the property-table formulae attached per pair.
inline TwoPhase gen_two_phase(std::size_t n) {
  using F = Formula;
  namespace tp = twophase;
  if (n < 2) throw InputError("two-phase ring needs n >= 2");

  TwoPhase out;
  out.n = n;
  auto pid = [&](std::size_t i) { return Pid("p" + std::to_string(i)); };
  auto tru = [] { return GuardExpr::truth(); };
  auto prop = [](const Pid& p, const std::string& q) { return GuardExpr::mk_prop({p, q}); };

  Pid p0 = pid(0);

  // Coordinator toward its successor (participant 1): participant 1's guards
  // read only monotone/absorbing coordinator state, so nothing here waits.
  tp::CoordGuards coord_succ{tru(), tru(), tru(), tru(), tru()};
  // Coordinator toward its predecessor (participant n-1): commit requires
  // the whole first cycle, visible as sb_{n-1}; abort is unilateral.
  auto coord_pred = [&](const Pid& last) {
    return tp::CoordGuards{tru(), prop(last, "sb"), tru(), tru(), tru()};
  };
  // Participant facing its predecessor: the relay guards.
  auto part_pred = [&](const Pid& prev, bool prev_is_coord) {
    GuardPtr submit = prev_is_coord ? GuardExpr::mk_not(prop(prev, "st")) : prop(prev, "sb");
    return tp::Guards{submit, tru(), prop(prev, "cm"), prop(prev, "ab"), tru(), tru()};
  };
  // Participant facing its successor: departures from sb wait until the
  // successor has reacted, which keeps the successor's sb-read stable.
  auto part_succ = [&](const Pid& next, bool next_is_coord) {
    GuardPtr seen = next_is_coord
                        ? GuardExpr::mk_or({prop(next, "cm"), prop(next, "ab")})
                        : GuardExpr::mk_or({prop(next, "sb"), prop(next, "ab")});
    return tp::Guards{tru(), tru(), seen, seen, tru(), tru()};
  };

  auto add_pair = [&](const Pid& a, SyncSkeleton ska, const Pid& b, SyncSkeleton skb) {
    PairProgram pp;
    pp.i = a;
    pp.j = b;
    pp.skel_i = std::move(ska);
    pp.skel_j = std::move(skb);
    out.program.pairs.emplace(PidPair(a, b), std::move(pp));
  };

  if (n == 2) {
    Pid p1 = pid(1);
    add_pair(p0, tp::coordinator_skeleton(p0, p1, coord_pred(p1)), p1,
             tp::participant_skeleton(p1, p0, part_pred(p0, true)));
  } else {
    add_pair(p0, tp::coordinator_skeleton(p0, pid(1), coord_succ), pid(1),
             tp::participant_skeleton(pid(1), p0, part_pred(p0, true)));
    for (std::size_t i = 2; i < n; ++i)
      add_pair(pid(i - 1),
               tp::participant_skeleton(pid(i - 1), pid(i), part_succ(pid(i), false)), pid(i),
               tp::participant_skeleton(pid(i), pid(i - 1), part_pred(pid(i - 1), false)));
    add_pair(pid(n - 1), tp::participant_skeleton(pid(n - 1), p0, part_succ(p0, true)), p0,
             tp::coordinator_skeleton(p0, pid(n - 1), coord_pred(pid(n - 1))));
  }

  // Property table. term_i == cm_i \/ ab_i.
  auto cm = [&](std::size_t i) { return F::p(pid(i), "cm"); };
  auto ab = [&](std::size_t i) { return F::p(pid(i), "ab"); };
  auto sb = [&](std::size_t i) { return F::p(pid(i), "sb"); };
  auto st = [&](std::size_t i) { return F::p(pid(i), "st"); };
  auto line7 = [&](std::size_t i) {
    return F::and_({F::ag(F::or_({F::not_(cm(i)), F::not_(ab(i))})),
                    F::ag(F::implies(cm(i), F::ag(cm(i))))});
  };
  auto line8 = [&](std::size_t i) {
    FormulaPtr dec = F::or_({cm(i - 1), ab(i - 1)});
    return F::ag(F::implies(sb(i), F::au(sb(i), F::and_({sb(i), dec}))));
  };
  auto line4 = [&](std::size_t i) { return F::leads_weak(cm(i), cm(i - 1)); };
  auto line4_safety = [&](std::size_t i) { return F::ag(F::implies(cm(i), cm(i - 1))); };
  auto line6 = [&](std::size_t i) {
    return F::leads(F::and_({cm(i - 1), sb(i)}), cm(i));
  };
  auto ex_ab = [&](std::size_t i) { return F::ag(F::implies(st(i), F::ex(pid(i), ab(i)))); };

  auto attach = [&](const PidPair& pr, std::vector<FormulaPtr> fs) {
    auto& list = out.properties[pr];
    for (auto& f : fs) list.push_back(f);
  };

  if (n == 2) {
    attach(PidPair(p0, pid(1)),
           {F::leads_weak(cm(0), sb(1)), line4(1), line4_safety(1), line6(1), line7(0),
            line7(1), line8(1), ex_ab(1)});
  } else {
    attach(PidPair(p0, pid(1)),
           {line4(1), line4_safety(1), line6(1), line7(0), line7(1), line8(1), ex_ab(1)});
    for (std::size_t i = 2; i < n; ++i)
      attach(PidPair(pid(i - 1), pid(i)),
             {F::leads_weak(sb(i), sb(i - 1)), line4(i), line4_safety(i), line6(i),
              line7(i - 1), line7(i), line8(i), ex_ab(i)});
    attach(PidPair(pid(n - 1), p0), {F::leads_weak(cm(0), sb(n - 1)), line7(0), line7(n - 1)});
  }

  for (auto& [pr, fs] : out.properties) {
    Interconnection e;
    e.pair = pr;
    e.spec = fs.size() == 1 ? fs[0] : Formula::and_(fs);
    out.program.relation.push_back(e);
  }
  return out;
}

}  // namespace pairsynth
