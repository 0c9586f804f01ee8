#include <catch2/catch_amalgamated.hpp>

#include "pairsynth/mc.hpp"
#include "pairsynth/twophase.hpp"

using namespace pairsynth;

namespace {

// Hand-built structures over one "real" process a (three bits) plus a second
// label-only process b.
struct MiniBuilder {
  Structure m;
  MiniBuilder() { m.pids = {Pid("a"), Pid("b")}; }

  std::size_t state(bool b0, bool b1, bool b2 = false) {
    GlobalState g;
    LocalState la;
    la.owner = Pid("a");
    la.assign = {{"b0", b0}, {"b1", b1}, {"b2", b2}};
    g.locals[Pid("a")] = la;
    LocalState lb;
    lb.owner = Pid("b");
    g.locals[Pid("b")] = lb;
    return m.intern(g);
  }
  void arc(std::size_t s, const char* who, std::size_t t) {
    m.add_transition(s, TransLabel::proc(Pid(who)), t);
  }
};

// Brute-force path-enumeration oracle, plain semantics, depth cap 2|S|.
// Complete (deadlock-terminated) paths are judged literally; a truncated
// branch witnesses a loop, which fails a strong until and satisfies a weak
// one. Violating prefixes, when they exist, have a cycle-free witness found
// within the cap.
enum class OKind { AU, AUw, EF };

bool oracle_paths(const Structure& m, std::size_t s, const std::vector<bool>& f,
                  const std::vector<bool>& g, OKind kind, std::size_t depth,
                  std::size_t cap) {
  if (kind == OKind::EF) {
    if (g[s]) return true;
    if (depth >= cap) return false;
    for (std::size_t ti : m.out[s])
      if (oracle_paths(m, m.transitions[ti].to, f, g, kind, depth + 1, cap)) return true;
    return false;
  }
  if (g[s]) return true;
  if (!f[s]) return false;
  if (m.out[s].empty()) return kind == OKind::AUw;  // finite maximal path
  if (depth >= cap) return kind == OKind::AUw;      // loop without g exists
  for (std::size_t ti : m.out[s])
    if (!oracle_paths(m, m.transitions[ti].to, f, g, kind, depth + 1, cap)) return false;
  return true;
}

std::vector<bool> prop_set(const Structure& m, const std::string& bit) {
  std::vector<bool> out(m.n_states());
  for (std::size_t s = 0; s < m.n_states(); ++s)
    out[s] = m.states[s].local(Pid("a")).assign.at(bit);
  return out;
}

PairProgram tiny_pair(GuardPtr j_guard) {
  // a: one bit flipping once; b: one bit set when j_guard (over a) holds.
  PairProgram pp;
  pp.i = Pid("a");
  pp.j = Pid("b");
  LocalState a0, a1, b0, b1;
  a0.owner = a1.owner = pp.i;
  b0.owner = b1.owner = pp.j;
  a0.assign = {{"p", false}};
  a1.assign = {{"p", true}};
  b0.assign = {{"q", false}};
  b1.assign = {{"q", true}};
  pp.skel_i.owner = pp.i;
  pp.skel_i.peer = pp.j;
  pp.skel_i.states = {a0, a1};
  pp.skel_i.initials = {a0};
  pp.skel_i.arcs = {twophase::arc1(a0, a1, GuardExpr::truth()),
                    twophase::arc1(a1, a1, GuardExpr::truth())};
  pp.skel_j.owner = pp.j;
  pp.skel_j.peer = pp.i;
  pp.skel_j.states = {b0, b1};
  pp.skel_j.initials = {b0};
  pp.skel_j.arcs = {twophase::arc1(b0, b1, std::move(j_guard)),
                    twophase::arc1(b1, b1, GuardExpr::truth())};
  return pp;
}

}  // namespace

TEST_CASE("check basics") {
  SECTION("true labels every state") {
    MiniBuilder mb;
    std::size_t s = mb.state(false, false), t = mb.state(true, false);
    mb.arc(s, "a", t);
    mb.arc(t, "a", t);
    Labeling lab = check(mb.m, Formula::truth());
    CHECK(lab.of(Formula::truth()) == std::vector<bool>{true, true});
  }
  SECTION("forced path satisfies AF") {
    MiniBuilder mb;
    std::size_t s = mb.state(false, false), t = mb.state(true, false);
    mb.arc(s, "a", t);
    mb.arc(t, "a", t);  // sink with self-loop
    auto f = Formula::af(Formula::p(Pid("a"), "b0"));
    Labeling lab = check(mb.m, f);
    CHECK(lab.holds(f, s));
    CHECK(lab.holds(f, t));
  }
  SECTION("AX and EX follow the transition label") {
    MiniBuilder mb;
    std::size_t s = mb.state(false, false), t = mb.state(true, false),
                u = mb.state(false, true);
    mb.arc(s, "a", t);
    mb.arc(s, "b", u);
    mb.arc(t, "a", t);
    mb.arc(u, "a", u);
    auto pa = Formula::p(Pid("a"), "b0");
    auto axa = Formula::ax(Pid("a"), pa);
    auto exb = Formula::ex(Pid("b"), pa);
    auto axb1 = Formula::ax(Pid("a"), Formula::p(Pid("a"), "b1"));
    Labeling lab = check(mb.m, Formula::and_({axa, exb, axb1}));
    CHECK(lab.holds(axa, s));        // the only a-successor satisfies b0
    CHECK_FALSE(lab.holds(exb, s));  // the b-successor does not
    CHECK_FALSE(lab.holds(axa, u));  // u's a-successor is u itself, where b0 is false
    CHECK_FALSE(lab.holds(axb1, s));
    CHECK(lab.holds(axa, t));
  }
  SECTION("foreign symbols are rejected") {
    MiniBuilder mb;
    std::size_t s = mb.state(false, false);
    mb.arc(s, "a", s);
    CHECK_THROWS_AS(check(mb.m, parse_formula("(prop zz p)")), ForeignSymbol);
    CHECK_THROWS_AS(check(mb.m, parse_formula("(eq novar 1)")), ForeignSymbol);
  }
}

TEST_CASE("check agrees with the path-enumeration oracle") {
  Rng rng(20240817);
  for (int trial = 0; trial < 40; ++trial) {
    MiniBuilder mb;
    std::size_t n = 3 + pick_index(rng, 4);  // 3..6 states
    std::vector<std::size_t> ids;
    // distinct bit patterns
    std::vector<std::size_t> patterns{0, 1, 2, 3, 4, 5, 6, 7};
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t pi = pick_index(rng, patterns.size());
      std::size_t bits = patterns[pi];
      patterns.erase(patterns.begin() + static_cast<long>(pi));
      ids.push_back(mb.state(bits & 1, bits & 2, bits & 4));
    }
    std::size_t ntrans = 4 + pick_index(rng, 9);  // 4..12
    for (std::size_t k = 0; k < ntrans; ++k)
      mb.arc(ids[pick_index(rng, n)], pick_index(rng, 2) ? "a" : "b",
             ids[pick_index(rng, n)]);

    const Structure& m = mb.m;
    std::vector<bool> p = prop_set(m, "b0"), q = prop_set(m, "b1");
    std::vector<bool> all(m.n_states(), true);
    std::size_t cap = 2 * m.n_states();

    auto fp = Formula::p(Pid("a"), "b0");
    auto fq = Formula::p(Pid("a"), "b1");
    auto af = Formula::af(fq);
    auto ag = Formula::ag(fp);
    auto au = Formula::au(fp, fq);
    auto auw = Formula::auw(fp, fq);
    auto ef = Formula::ef(fq);
    Labeling lab = check(m, Formula::and_({af, ag, au, auw, ef}));

    for (std::size_t s = 0; s < m.n_states(); ++s) {
      INFO("trial " << trial << " state " << s);
      CHECK(lab.holds(af, s) == oracle_paths(m, s, all, q, OKind::AU, 0, cap));
      // AG p == A[p Uw false]
      CHECK(lab.holds(ag, s) ==
            oracle_paths(m, s, p, std::vector<bool>(m.n_states(), false), OKind::AUw, 0, cap));
      CHECK(lab.holds(au, s) == oracle_paths(m, s, p, q, OKind::AU, 0, cap));
      CHECK(lab.holds(auw, s) == oracle_paths(m, s, p, q, OKind::AUw, 0, cap));
      CHECK(lab.holds(ef, s) == oracle_paths(m, s, all, q, OKind::EF, 0, cap));
    }
  }
}

TEST_CASE("labeling monotonicity") {
  MiniBuilder mb;
  std::size_t s = mb.state(true, false), t = mb.state(true, true), u = mb.state(false, true);
  mb.arc(s, "a", t);
  mb.arc(t, "b", u);
  mb.arc(u, "a", s);
  auto fp = Formula::p(Pid("a"), "b0");
  auto fq = Formula::p(Pid("a"), "b1");
  auto conj = Formula::and_({fp, fq});
  auto agp = Formula::ag(fp);
  Labeling lab = check(mb.m, Formula::and_({conj, agp}));
  for (std::size_t i = 0; i < mb.m.n_states(); ++i) {
    CHECK(lab.holds(conj, i) == (lab.holds(fp, i) && lab.holds(fq, i)));
    if (lab.holds(agp, i)) CHECK(lab.holds(fp, i));
  }
}

TEST_CASE("weak process fairness") {
  // s has a b-self-loop and an a-transition to t where p holds; plain AF p
  // fails through the loop, fair AF p holds because a is continuously
  // enabled but never executed on the looping path.
  MiniBuilder mb;
  std::size_t s = mb.state(false, false), t = mb.state(true, false);
  mb.arc(s, "b", s);
  mb.arc(s, "a", t);
  mb.arc(t, "a", t);
  auto af = Formula::af(Formula::p(Pid("a"), "b0"));
  CHECK_FALSE(check(mb.m, af, Fairness::None).holds(af, s));
  CHECK(check(mb.m, af, Fairness::WeakProcess).holds(af, s));

  // Without the a-option the loop is fair and AF p fails in both modes.
  MiniBuilder mb2;
  std::size_t s2 = mb2.state(false, false), t2 = mb2.state(true, false);
  mb2.arc(s2, "b", s2);
  mb2.arc(t2, "a", t2);
  auto af2 = Formula::af(Formula::p(Pid("a"), "b0"));
  CHECK_FALSE(check(mb2.m, af2, Fairness::None).holds(af2, s2));
  CHECK_FALSE(check(mb2.m, af2, Fairness::WeakProcess).holds(af2, s2));
}

TEST_CASE("check_spec on pair programs") {
  SECTION("propositional violation reports an initial counterexample") {
    PairProgram pp = tiny_pair(GuardExpr::truth());
    auto spec = parse_formula("(prop a p)");  // false initially
    SpecResult r = check_spec(pp, spec);
    CHECK_FALSE(r.holds);
    REQUIRE(r.counterexample.has_value());
    CHECK_FALSE(r.counterexample->local(Pid("a")).value("p"));
  }
  SECTION("entailed safety holds") {
    PairProgram pp = tiny_pair(parse_guard("(prop a p)"));
    // b sets q only after observing p, and p is absorbing: AG(q => p).
    auto spec = parse_formula("(AG (or (not (prop b q)) (prop a p)))");
    CHECK(check_spec(pp, spec).holds);
  }
  SECTION("foreign propositions are rejected") {
    PairProgram pp = tiny_pair(GuardExpr::truth());
    CHECK_THROWS_AS(check_spec(pp, parse_formula("(AG (prop zz r))")), ForeignSymbol);
  }
}

TEST_CASE("compute_blk") {
  SECTION("all peer guards true means nothing blocks") {
    PairProgram pp = tiny_pair(GuardExpr::truth());
    CHECK(compute_blk(pp, Pid("a")).states.empty());
  }
  SECTION("a guarded peer move marks the blocking state") {
    PairProgram pp = tiny_pair(parse_guard("(prop a p)"));
    BlkResult blk = compute_blk(pp, Pid("a"));
    REQUIRE(blk.states.size() == 1);
    CHECK_FALSE(blk.states[0].value("p"));  // a at p=false blocks b's move
    CHECK(formula_str(blk.blk_formula) == "(not (prop a p))");
  }
}

TEST_CASE("compute_pnd") {
  SECTION("satisfied propositional spec pends nothing") {
    PairProgram pp = tiny_pair(GuardExpr::truth());
    auto spec = parse_formula("(or (prop a p) (not (prop a p)))");
    CHECK(compute_pnd(pp, spec).empty());
  }
  SECTION("a forced eventuality pends while the peer is blocked") {
    // b is blocked until p holds, so from (p=0, q=0) every maximal path
    // must execute a's flip: p is pending there and nowhere else.
    PairProgram pp = tiny_pair(parse_guard("(prop a p)"));
    Structure m = build_pair_structure(pp);
    auto spec = Formula::af(parse_formula("(prop a p)"));
    auto pend = compute_pnd(m, spec);
    REQUIRE(pend.size() == 1);
    const GlobalState& g = m.states[pend[0]];
    CHECK_FALSE(g.local(Pid("a")).value("p"));
    CHECK_FALSE(g.local(Pid("b")).value("q"));
  }
}

TEST_CASE("check_tstab") {
  SECTION("constant guards are stable") {
    PairProgram pp = tiny_pair(GuardExpr::truth());
    CHECK(check_tstab(pp).holds);
  }
  SECTION("a toggled guard is flagged at the branch") {
    // b's move waits on p while a flips p on and off.
    PairProgram pp = tiny_pair(parse_guard("(prop a p)"));
    LocalState a0 = pp.skel_i.states[0], a1 = pp.skel_i.states[1];
    pp.skel_i.arcs = {twophase::arc1(a0, a1, GuardExpr::truth()),
                      twophase::arc1(a1, a0, GuardExpr::truth())};
    TstabResult r = check_tstab(pp);
    REQUIRE_FALSE(r.holds);
    CHECK(r.owner == Pid("b"));
    CHECK(r.branch == 0);
  }
}

TEST_CASE("check_tstab is invariant under renaming") {
  TwoPhase tp = gen_two_phase(3);
  PairProgram pp = tp.program.pair_program(Pid("p1"), Pid("p2"));

  // rename every proposition with a prefix, consistently across states,
  // guards and the skeletons of both sides
  auto rename_guard = [](const GuardPtr& g, auto&& self) -> GuardPtr {
    using K = GuardExpr::Kind;
    switch (g->kind) {
      case K::Prop: return GuardExpr::mk_prop({g->prop.owner, "z_" + g->prop.name});
      case K::Not: return GuardExpr::mk_not(self(g->kids[0], self));
      case K::And:
      case K::Or: {
        std::vector<GuardPtr> kids;
        for (auto& k : g->kids) kids.push_back(self(k, self));
        return g->kind == K::And ? GuardExpr::mk_and(std::move(kids))
                                 : GuardExpr::mk_or(std::move(kids));
      }
      default: return g;
    }
  };
  auto rename_state = [](const LocalState& s) {
    LocalState out;
    out.owner = s.owner;
    for (auto& [p, v] : s.assign) out.assign["z_" + p] = v;
    return out;
  };
  auto rename_skel = [&](SyncSkeleton& sk) {
    for (auto& s : sk.states) s = rename_state(s);
    for (auto& s : sk.initials) s = rename_state(s);
    for (auto& a : sk.arcs) {
      a.from = rename_state(a.from);
      a.to = rename_state(a.to);
      for (auto& br : a.cmd.branches) br.guard = rename_guard(br.guard, rename_guard);
    }
    sk.state_names.clear();
  };
  PairProgram renamed = pp;
  rename_skel(renamed.skel_i);
  rename_skel(renamed.skel_j);
  CHECK(check_tstab(pp).holds == check_tstab(renamed).holds);

  // and the non-stable mutant stays non-stable after renaming
  for (auto& arc : pp.skel_i.arcs)
    for (auto& br : arc.cmd.branches)
      if (arc.from.value("sb")) br.guard = GuardExpr::truth();
  PairProgram renamed_mutant = pp;
  rename_skel(renamed_mutant.skel_i);
  rename_skel(renamed_mutant.skel_j);
  CHECK(check_tstab(pp).holds == check_tstab(renamed_mutant).holds);
  CHECK_FALSE(check_tstab(renamed_mutant).holds);
}

TEST_CASE("guard conjunction and disjunction commute under evaluation") {
  LocalState peer;
  peer.owner = Pid("j");
  Valuation shared{{"x", "1"}};
  Rng rng(5);
  std::vector<GuardPtr> atoms{parse_guard("true"), parse_guard("false"),
                              parse_guard("(eq x 1)"), parse_guard("(eq x 0)")};
  for (int trial = 0; trial < 50; ++trial) {
    GuardPtr a = atoms[pick_index(rng, atoms.size())];
    GuardPtr b = atoms[pick_index(rng, atoms.size())];
    GuardPtr c = atoms[pick_index(rng, atoms.size())];
    CHECK(eval_guard(GuardExpr::mk_and({a, b}), peer, shared) ==
          eval_guard(GuardExpr::mk_and({b, a}), peer, shared));
    CHECK(eval_guard(GuardExpr::mk_or({a, b}), peer, shared) ==
          eval_guard(GuardExpr::mk_or({b, a}), peer, shared));
    CHECK(eval_guard(GuardExpr::mk_and({a, GuardExpr::mk_and({b, c})}), peer, shared) ==
          eval_guard(GuardExpr::mk_and({GuardExpr::mk_and({a, b}), c}), peer, shared));
  }
}

TEST_CASE("check_liveness_condition") {
  SECTION("alternating guards leave no i-only cycle") {
    PairProgram pp = tiny_pair(GuardExpr::truth());
    LocalState a0 = pp.skel_i.states[0], a1 = pp.skel_i.states[1];
    pp.skel_i.arcs = {twophase::arc1(a0, a1, parse_guard("(not (prop b q))")),
                      twophase::arc1(a1, a0, parse_guard("(prop b q)"))};
    CHECK(check_liveness_condition(pp, Pid("a")).holds);
  }
  SECTION("a self-loop over a blocked peer move is a one-cycle witness") {
    PairProgram pp = tiny_pair(parse_guard("(prop a p)"));
    LocalState a0 = pp.skel_i.states[0];
    // a only self-loops at p=false; b's move stays blocked forever.
    pp.skel_i.states = {a0};
    pp.skel_i.initials = {a0};
    pp.skel_i.arcs = {twophase::arc1(a0, a0, GuardExpr::truth())};
    LivenessResult r = check_liveness_condition(pp, Pid("a"));
    REQUIRE_FALSE(r.holds);
    CHECK(r.witness_cycle.size() == 1);
    // strict and relaxed agree when the peer has a single pending move
    CHECK_FALSE(check_liveness_condition(pp, Pid("a"), AenMode::EveryMoveEnabled).holds);
  }
}
