#include <catch2/catch_amalgamated.hpp>

#include "pairsynth/mc.hpp"
#include "pairsynth/overlay.hpp"
#include "pairsynth/twophase.hpp"

using namespace pairsynth;

TEST_CASE("overlay of a single skeleton is the skeleton") {
  TwoPhase tp = gen_two_phase(2);
  const SyncSkeleton& sk = tp.program.pair_program(Pid("p0"), Pid("p1")).skel_i;
  ComposedProcess cp = overlay({&sk});
  CHECK(cp.owner == sk.owner);
  CHECK(cp.states.size() == sk.states.size());
  CHECK(cp.moves.size() == sk.arcs.size());
  for (auto& mv : cp.moves) {
    REQUIRE(mv.per_neighbor.size() == 1);
    CHECK(mv.per_neighbor.begin()->first == sk.peer);
  }
}

TEST_CASE("overlay with itself evaluates like the original") {
  TwoPhase tp = gen_two_phase(3);
  const PairProgram& pp = tp.program.pair_program(Pid("p0"), Pid("p1"));
  const SyncSkeleton& sk = pp.skeleton_of(Pid("p1"));
  SyncSkeleton copy = sk;
  ComposedProcess cp = overlay({&sk, &copy});
  // both entries key the same peer; the move fires iff the original arc does
  Structure m = build_pair_structure(pp);
  for (std::size_t s = 0; s < m.n_states(); ++s) {
    const GlobalState& g = m.states[s];
    std::map<Pid, LocalState> peers{{Pid("p0"), g.local(Pid("p0"))}};
    std::map<Pid, Valuation> shareds{{Pid("p0"), Valuation{}}};
    for (auto* mv : cp.moves_from(g.local(Pid("p1")))) {
      bool via_overlay = enabled_branches(*mv, peers, shareds).has_value();
      bool direct = false;
      for (auto* arc : sk.arcs_from(g.local(Pid("p1"))))
        if (arc->to == mv->to) direct = arc->cmd.enabled(g.local(Pid("p0")), {});
      CHECK(via_overlay == direct);
    }
  }
}

TEST_CASE("overlay is invariant under input permutation") {
  TwoPhase tp = gen_two_phase(4);
  const SyncSkeleton& a = tp.program.pair_program(Pid("p1"), Pid("p2")).skeleton_of(Pid("p2"));
  const SyncSkeleton& b = tp.program.pair_program(Pid("p2"), Pid("p3")).skeleton_of(Pid("p2"));
  ComposedProcess ab = overlay({&a, &b});
  ComposedProcess ba = overlay({&b, &a});
  REQUIRE(ab.moves.size() == ba.moves.size());
  for (auto& mv : ab.moves) {
    bool found = false;
    for (auto& mw : ba.moves) {
      if (!(mv.from == mw.from && mv.to == mw.to)) continue;
      found = true;
      REQUIRE(mv.per_neighbor.size() == mw.per_neighbor.size());
      for (auto& [j, cmd] : mv.per_neighbor) CHECK(cmd.str() == mw.per_neighbor.at(j).str());
    }
    CHECK(found);
  }
}

TEST_CASE("incompatible local structures are rejected") {
  TwoPhase tp = gen_two_phase(3);
  const SyncSkeleton& part =
      tp.program.pair_program(Pid("p1"), Pid("p2")).skeleton_of(Pid("p2"));
  SyncSkeleton mutated = part;
  mutated.arcs.pop_back();  // drop an arc; stripped graphs now differ
  CHECK_THROWS_AS(overlay({&part, &mutated}), InvalidSkeleton);
}

TEST_CASE("enabled_branches") {
  TwoPhase tp = gen_two_phase(4);
  SynthesizedProgram prog = synthesize_static(tp.program);
  const ComposedProcess& p2 = prog.processes.at(Pid("p2"));

  LocalState st1 = twophase::one_hot(Pid("p1"), {"st", "sb", "cm", "ab"}, "st");
  LocalState sb1 = twophase::one_hot(Pid("p1"), {"st", "sb", "cm", "ab"}, "sb");
  LocalState st3 = twophase::one_hot(Pid("p3"), {"st", "sb", "cm", "ab"}, "st");
  LocalState st2 = twophase::one_hot(Pid("p2"), {"st", "sb", "cm", "ab"}, "st");
  std::map<Pid, Valuation> shareds{{Pid("p1"), {}}, {Pid("p3"), {}}};

  const ComposedMove* submit = nullptr;
  for (auto* mv : p2.moves_from(st2))
    if (mv->to.value("sb")) submit = mv;
  REQUIRE(submit != nullptr);

  SECTION("submit fires once the predecessor submitted") {
    auto choice = enabled_branches(*submit, {{Pid("p1"), sb1}, {Pid("p3"), st3}}, shareds);
    REQUIRE(choice.has_value());
    CHECK(choice->size() == 2);
  }
  SECTION("submit blocks while the predecessor is at start") {
    CHECK_FALSE(
        enabled_branches(*submit, {{Pid("p1"), st1}, {Pid("p3"), st3}}, shareds).has_value());
  }
  SECTION("missing neighbor state is an error") {
    CHECK_THROWS_AS(enabled_branches(*submit, {{Pid("p1"), sb1}}, {{Pid("p1"), Valuation{}}}),
                    UnresolvedSymbol);
  }
}

TEST_CASE("synthesize_static") {
  SECTION("one pair passes through") {
    TwoPhase tp = gen_two_phase(2);
    SynthesizedProgram prog = synthesize_static(tp.program);
    CHECK(prog.processes.size() == 2);
    CHECK(prog.initial_states.size() == 1);
  }
  SECTION("ring of four: coordinator plus three participants") {
    TwoPhase tp = gen_two_phase(4);
    SynthesizedProgram prog = synthesize_static(tp.program);
    CHECK(prog.processes.size() == 4);
    for (auto& [pid, cp] : prog.processes) {
      std::size_t degree = tp.program.neighbors(pid).size();
      for (auto& mv : cp.moves) CHECK(mv.per_neighbor.size() == degree);
    }
  }
  SECTION("disjoint initial projections yield EmptyInitialSet") {
    TwoPhase tp = gen_two_phase(3);
    PairProgram& pp =
        const_cast<PairProgram&>(tp.program.pair_program(Pid("p1"), Pid("p2")));
    // p2 starts at sb in this pair but at st in the other: intersection empty
    pp.skel_j.initials = {twophase::one_hot(Pid("p2"), {"st", "sb", "cm", "ab"}, "sb")};
    CHECK_THROWS_WITH(synthesize_static(tp.program),
                      Catch::Matchers::ContainsSubstring("EmptyInitialSet"));
  }
}

TEST_CASE("overlay semantics coincide with the product oracle") {
  TwoPhase tp = gen_two_phase(3);
  SynthesizedProgram prog = synthesize_static(tp.program);
  Structure m = build_product_structure(tp.program, all_pairs(tp.program));
  for (std::size_t s = 0; s < m.n_states(); ++s) {
    std::set<std::string> via_product;
    for (std::size_t ti : m.out[s])
      via_product.insert(m.transitions[ti].label.str() + ">" +
                         m.states[m.transitions[ti].to].key());
    std::set<std::string> via_steps;
    for (auto& step : enabled_steps(tp.program, prog, m.states[s]))
      via_steps.insert(step.pid.id + ">" + step.target.key());
    CHECK(via_product == via_steps);
  }
}

TEST_CASE("synthesis complexity counter grows linearly in the ring size") {
  std::vector<double> xs, ys;
  for (std::size_t n = 2; n <= 64; ++n) {
    TwoPhase tp = gen_two_phase(n);
    SynthesizedProgram prog = synthesize_static(tp.program);
    xs.push_back(double(n));
    ys.push_back(double(prog.stats.elements));
  }
  LinearFit fit = fit_line(xs, ys);
  CHECK(fit.r2 > 0.99);
  CHECK(fit.slope > 0);
}
