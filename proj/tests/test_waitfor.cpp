#include <catch2/catch_amalgamated.hpp>

#include "pairsynth/twophase.hpp"
#include "pairsynth/waitfor.hpp"

using namespace pairsynth;

namespace {

// Two processes each solely guarded on the other's unreached state.
StaticProgram mutual_block_toy() {
  StaticProgram sp;
  auto skel = [](const char* me, const char* other) {
    SyncSkeleton sk;
    sk.owner = Pid(me);
    sk.peer = Pid(other);
    LocalState s0, s1;
    s0.owner = s1.owner = Pid(me);
    s0.assign = {{"go", false}};
    s1.assign = {{"go", true}};
    sk.states = {s0, s1};
    sk.initials = {s0};
    sk.arcs = {twophase::arc1(s0, s1, GuardExpr::mk_prop({Pid(other), "go"})),
               twophase::arc1(s1, s1, GuardExpr::truth())};
    return sk;
  };
  PairProgram pp;
  pp.i = Pid("a");
  pp.j = Pid("b");
  pp.skel_i = skel("a", "b");
  pp.skel_j = skel("b", "a");
  sp.pairs.emplace(PidPair(Pid("a"), Pid("b")), pp);
  sp.relation.push_back({PidPair(Pid("a"), Pid("b")), Formula::truth()});
  return sp;
}

// A three-process chain where c, after moving, blocks b while having no
// enabled move itself (its second move waits on a, which never moves first).
StaticProgram condition_violating_toy() {
  StaticProgram sp;
  auto mk_state = [](const char* owner, bool v) {
    LocalState s;
    s.owner = Pid(owner);
    s.assign = {{"go", v}};
    return s;
  };
  auto add = [&](const char* x, SyncSkeleton skx, const char* y, SyncSkeleton sky) {
    PairProgram pp;
    pp.i = Pid(x);
    pp.j = Pid(y);
    pp.skel_i = std::move(skx);
    pp.skel_j = std::move(sky);
    sp.pairs.emplace(PidPair(Pid(x), Pid(y)), pp);
    sp.relation.push_back({PidPair(Pid(x), Pid(y)), Formula::truth()});
  };
  // c: moves freely to go, then can only return when a has moved.
  SyncSkeleton c_vs_a;
  c_vs_a.owner = Pid("c");
  c_vs_a.peer = Pid("a");
  {
    LocalState s0 = mk_state("c", false), s1 = mk_state("c", true);
    c_vs_a.states = {s0, s1};
    c_vs_a.initials = {s0};
    c_vs_a.arcs = {twophase::arc1(s0, s1, GuardExpr::truth()),
                   twophase::arc1(s1, s0, GuardExpr::mk_prop({Pid("a"), "go"}))};
  }
  // a: waits for b to move before moving at all.
  SyncSkeleton a_vs_c;
  a_vs_c.owner = Pid("a");
  a_vs_c.peer = Pid("c");
  {
    LocalState s0 = mk_state("a", false), s1 = mk_state("a", true);
    a_vs_c.states = {s0, s1};
    a_vs_c.initials = {s0};
    a_vs_c.arcs = {twophase::arc1(s0, s1, GuardExpr::truth()),
                   twophase::arc1(s1, s1, GuardExpr::truth())};
  }
  SyncSkeleton a_vs_b = a_vs_c;
  a_vs_b.peer = Pid("b");
  a_vs_b.arcs = {twophase::arc1(a_vs_b.states[0], a_vs_b.states[1],
                                GuardExpr::mk_prop({Pid("b"), "go"})),
                 twophase::arc1(a_vs_b.states[1], a_vs_b.states[1], GuardExpr::truth())};
  // b: waits for c to be back at rest.
  SyncSkeleton b_vs_a;
  b_vs_a.owner = Pid("b");
  b_vs_a.peer = Pid("a");
  {
    LocalState s0 = mk_state("b", false), s1 = mk_state("b", true);
    b_vs_a.states = {s0, s1};
    b_vs_a.initials = {s0};
    b_vs_a.arcs = {twophase::arc1(s0, s1, GuardExpr::truth()),
                   twophase::arc1(s1, s1, GuardExpr::truth())};
  }
  SyncSkeleton b_vs_c = b_vs_a;
  b_vs_c.peer = Pid("c");
  b_vs_c.arcs = {twophase::arc1(b_vs_c.states[0], b_vs_c.states[1],
                                GuardExpr::mk_not(GuardExpr::mk_prop({Pid("c"), "go"}))),
                 twophase::arc1(b_vs_c.states[1], b_vs_c.states[1], GuardExpr::truth())};

  add("a", a_vs_c, "c", c_vs_a);
  SyncSkeleton c_vs_b = c_vs_a;
  c_vs_b.peer = Pid("b");
  c_vs_b.arcs = {twophase::arc1(c_vs_b.states[0], c_vs_b.states[1], GuardExpr::truth()),
                 twophase::arc1(c_vs_b.states[1], c_vs_b.states[0], GuardExpr::truth())};
  add("b", b_vs_c, "c", c_vs_b);
  add("a", a_vs_b, "b", b_vs_a);
  return sp;
}

WaitForGraph random_wfg(Rng& rng) {
  WfgInput in;
  std::size_t nproc = 2 + pick_index(rng, 11);  // 2..12
  std::vector<Pid> procs;
  for (std::size_t i = 0; i < nproc; ++i) procs.push_back(Pid("w" + std::to_string(i)));
  for (auto& p : procs) {
    std::size_t nmoves = 1 + pick_index(rng, 3);
    for (std::size_t k = 0; k < nmoves; ++k) {
      WfgInput::MoveEntry e;
      e.label = p.id + "#" + std::to_string(k);
      for (auto& q : procs) {
        if (q == p) continue;
        std::size_t roll = pick_index(rng, 4);
        if (roll == 0) e.neighbor_guard[q] = false;       // blocked edge
        else if (roll == 1) e.neighbor_guard[q] = true;   // explicit neighbor, open
      }
      in.moves[p].push_back(std::move(e));
    }
  }
  return build_wfg(in);
}

}  // namespace

TEST_CASE("wait-for graph construction") {
  SECTION("true guards leave no blocking edges") {
    TwoPhase tp = gen_two_phase(3);
    std::vector<PidPair> I = all_pairs(tp.program);
    GlobalState s0 = tp.program.initial_states(I).at(0);
    // coordinator's initiate move is unguarded: no edges out of it
    WaitForGraph w = build_wfg(wfg_input_for(tp.program, I, s0));
    bool coord_clean = false;
    for (std::size_t mi : w.moves_of.at(Pid("p0")))
      if (w.moves[mi].blocks.empty()) coord_clean = true;
    CHECK(coord_clean);
  }
  SECTION("a participant's submit waits on its predecessor") {
    TwoPhase tp = gen_two_phase(3);
    std::vector<PidPair> I = all_pairs(tp.program);
    GlobalState s0 = tp.program.initial_states(I).at(0);
    WaitForGraph w = build_wfg(wfg_input_for(tp.program, I, s0));
    bool found = false;
    for (std::size_t mi : w.moves_of.at(Pid("p2")))
      for (auto& q : w.moves[mi].blocks)
        if (q == Pid("p1")) found = true;
    CHECK(found);
  }
  SECTION("mutual blocking forms a complete cycle") {
    StaticProgram sp = mutual_block_toy();
    std::vector<PidPair> I = all_pairs(sp);
    GlobalState s0 = sp.initial_states(I).at(0);
    WaitForGraph w = build_wfg(wfg_input_for(sp, I, s0));
    auto sc = find_supercycle(w);
    REQUIRE(sc.has_value());
    CHECK(sc->processes.size() == 2);
    CHECK(sc->move_labels.size() == 2);
  }
}

TEST_CASE("supercycle pruning matches the definitional oracle") {
  SECTION("an unblocked move prunes everything") {
    WfgInput in;
    in.moves[Pid("x")].push_back({"x#0", {{Pid("y"), true}}});
    in.moves[Pid("y")].push_back({"y#0", {{Pid("x"), false}}});
    WaitForGraph w = build_wfg(in);
    CHECK_FALSE(find_supercycle(w).has_value());
  }
  SECTION("two-process mutual block yields a four-node supercycle") {
    WfgInput in;
    in.moves[Pid("x")].push_back({"x#0", {{Pid("y"), false}}});
    in.moves[Pid("y")].push_back({"y#0", {{Pid("x"), false}}});
    WaitForGraph w = build_wfg(in);
    auto sc = find_supercycle(w);
    REQUIRE(sc.has_value());
    CHECK(sc->processes.size() + sc->move_labels.size() == 4);
  }
  SECTION("200 random graphs agree with brute force") {
    Rng rng(20240818);
    for (int trial = 0; trial < 200; ++trial) {
      WaitForGraph w = random_wfg(rng);
      INFO("trial " << trial);
      CHECK(find_supercycle(w).has_value() == supercycle_exists_brute(w));
    }
  }
}

TEST_CASE("blocked set") {
  SECTION("unblocked pair has an empty blocked set") {
    WfgInput in;
    in.moves[Pid("i")].push_back({"i#0", {{Pid("j"), true}}});
    in.moves[Pid("j")].push_back({"j#0", {{Pid("i"), true}}});
    WaitForGraph w = build_wfg(in);
    CHECK(blocked_from(w, PidPair(Pid("i"), Pid("j"))).empty());
  }
  SECTION("a chain closes transitively") {
    WfgInput in;
    in.moves[Pid("i")].push_back({"i#0", {{Pid("k"), false}}});
    in.moves[Pid("j")].push_back({"j#0", {}});
    in.moves[Pid("k")].push_back({"k#0", {{Pid("m"), false}}});
    in.moves[Pid("m")].push_back({"m#0", {}});
    WaitForGraph w = build_wfg(in);
    std::set<Pid> expect{Pid("k"), Pid("m")};
    CHECK(blocked_from(w, PidPair(Pid("i"), Pid("j"))) == expect);
  }
}

TEST_CASE("an unblocked move is executable in the product") {
  // move enablement: at every reachable product state, pruning leaves some
  // move without outgoing edges, and that move is an actual transition
  TwoPhase tp = gen_two_phase(3);
  std::vector<PidPair> I = all_pairs(tp.program);
  Structure m = build_product_structure(tp.program, I);
  for (std::size_t s = 0; s < m.n_states(); ++s) {
    WaitForGraph w = build_wfg(wfg_input_for(tp.program, I, m.states[s]));
    CHECK_FALSE(find_supercycle(w).has_value());
    const WaitForGraph::MoveNode* unblocked = nullptr;
    for (auto& mv : w.moves)
      if (mv.blocks.empty()) unblocked = &mv;
    REQUIRE(unblocked != nullptr);
    std::string to_key = unblocked->label.substr(unblocked->label.find("->") + 2);
    bool executable = false;
    for (std::size_t ti : m.out[s]) {
      const auto& t = m.transitions[ti];
      if (t.label.pid == unblocked->owner &&
          m.states[t.to].local(unblocked->owner).key() == to_key)
        executable = true;
    }
    CHECK(executable);
  }
}

TEST_CASE("wait-for graph dot export uses the documented shapes") {
  WfgInput in;
  in.moves[Pid("i")].push_back({"i#0", {{Pid("j"), false}}});
  in.moves[Pid("j")].push_back({"j#0", {{Pid("i"), true}}});
  std::string dot = to_dot(build_wfg(in), "W");
  CHECK(dot.find("shape=box") != std::string::npos);
  CHECK(dot.find("shape=ellipse") != std::string::npos);
  CHECK(dot.find("style=dashed") != std::string::npos);
}

TEST_CASE("static wait-for-graph condition") {
  SECTION("two-phase rings pass") {
    for (std::size_t n : {3, 4, 5}) {
      TwoPhase tp = gen_two_phase(n);
      WfgConditionReport rep = check_static_wfg_condition(tp.program);
      INFO("n=" << n << (rep.violations.empty() ? "" : " first: " + rep.violations[0]));
      CHECK(rep.ok);
      CHECK(rep.stars_checked > 0);
    }
  }
  SECTION("the mutual-block toy fails with a witness") {
    WfgConditionReport rep = check_static_wfg_condition(mutual_block_toy());
    CHECK_FALSE(rep.ok);
    REQUIRE_FALSE(rep.violations.empty());
    CHECK(rep.violations.back().find("supercycle") != std::string::npos);
  }
  SECTION("a process that blocks its neighbor while itself disabled fails") {
    WfgConditionReport rep = check_static_wfg_condition(condition_violating_toy());
    CHECK_FALSE(rep.ok);
    REQUIRE_FALSE(rep.violations.empty());
    CHECK(rep.violations[0].find("k=c") != std::string::npos);
  }
}
