#include <catch2/catch_amalgamated.hpp>

#include "pairsynth/skeleton.hpp"
#include "pairsynth/twophase.hpp"

using namespace pairsynth;

namespace {

LocalState mk_state(const std::string& owner, std::map<std::string, bool> assign) {
  LocalState s;
  s.owner = Pid(owner);
  s.assign = std::move(assign);
  return s;
}

}  // namespace

TEST_CASE("guard evaluation") {
  LocalState peer = mk_state("j", {{"sb", true}, {"ab", false}});
  Valuation shared{{"x", "0"}};

  SECTION("constants") {
    CHECK(eval_guard(parse_guard("true"), peer, shared));
    CHECK_FALSE(eval_guard(parse_guard("false"), peer, shared));
  }
  SECTION("literal combinations") {
    auto g = parse_guard("(and (prop j sb) (not (prop j ab)))");
    CHECK(eval_guard(g, peer, shared));
  }
  SECTION("variable equality") {
    CHECK_FALSE(eval_guard(parse_guard("(eq x 1)"), peer, shared));
    CHECK(eval_guard(parse_guard("(eq x 0)"), peer, shared));
  }
  SECTION("unresolved symbols") {
    CHECK_THROWS_AS(eval_guard(parse_guard("(prop j nope)"), peer, shared), UnresolvedSymbol);
    CHECK_THROWS_AS(eval_guard(parse_guard("(eq y 0)"), peer, shared), UnresolvedSymbol);
    CHECK_THROWS_AS(eval_guard(parse_guard("(prop k sb)"), peer, shared), UnresolvedSymbol);
  }
  SECTION("negation involution and de-morgan samples") {
    for (auto& txt : {"(prop j sb)", "(eq x 0)", "(or (prop j ab) (eq x 1))"}) {
      auto g = parse_guard(txt);
      CHECK(eval_guard(GuardExpr::mk_not(g), peer, shared) == !eval_guard(g, peer, shared));
    }
  }
  SECTION("round trip through the printed form") {
    auto g = parse_guard("(or (and (prop j sb) (eq x 0)) (not (prop j ab)))");
    CHECK(guard_str(parse_guard(guard_str(g))) == guard_str(g));
  }
}

TEST_CASE("apply_body") {
  Valuation v{{"x", "0"}, {"y", "2"}};

  SECTION("empty body is the identity") { CHECK(apply_body(parse_body("(set)"), v) == v); }
  SECTION("pointwise update") {
    Valuation w = apply_body(parse_body("(set (x 1))"), v);
    CHECK(w.at("x") == "1");
    CHECK(w.at("y") == "2");
  }
  SECTION("parallel update") {
    Valuation w = apply_body(parse_body("(set (x 1) (y 0))"), v);
    CHECK(w.at("x") == "1");
    CHECK(w.at("y") == "0");
  }
  SECTION("idempotence") {
    Body a = parse_body("(set (x 1) (y 0))");
    CHECK(apply_body(a, apply_body(a, v)) == apply_body(a, v));
  }
  SECTION("unknown target") {
    CHECK_THROWS_AS(apply_body(parse_body("(set (z 1))"), v), UnresolvedSymbol);
  }
  SECTION("double assignment is rejected at parse") {
    CHECK_THROWS_AS(parse_body("(set (x 1) (x 0))"), InputError);
  }
}

TEST_CASE("validate_skeleton") {
  Pid me("a"), peer("b");
  std::set<std::string> my_props{"p"};
  std::set<std::string> peer_props{"q"};
  LocalState s0 = mk_state("a", {{"p", false}});
  LocalState s1 = mk_state("a", {{"p", true}});

  SECTION("sink state without a self-loop is a dead end") {
    SyncSkeleton sk;
    sk.owner = me;
    sk.peer = peer;
    sk.states = {s0, s1};
    sk.initials = {s0};
    sk.arcs = {twophase::arc1(s0, s1, GuardExpr::truth())};
    auto v = validate_skeleton(sk, my_props, peer_props, {});
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == "DeadEnd");
  }
  SECTION("two arcs between the same states") {
    SyncSkeleton sk;
    sk.owner = me;
    sk.peer = peer;
    sk.states = {s0, s1};
    sk.initials = {s0};
    sk.arcs = {twophase::arc1(s0, s1, GuardExpr::truth()),
               twophase::arc1(s0, s1, GuardExpr::mk_prop({peer, "q"})),
               twophase::arc1(s1, s1, GuardExpr::truth())};
    auto v = validate_skeleton(sk, my_props, peer_props, {});
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == "DuplicateArc");
  }
  SECTION("guard scope violations are reported") {
    SyncSkeleton sk;
    sk.owner = me;
    sk.peer = peer;
    sk.states = {s0, s1};
    sk.initials = {s0};
    sk.arcs = {twophase::arc1(s0, s1, GuardExpr::mk_prop({me, "p"})),
               twophase::arc1(s1, s1, GuardExpr::truth())};
    auto v = validate_skeleton(sk, my_props, peer_props, {});
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == "GuardScope");
  }
  SECTION("the generated two-phase participant skeletons are clean") {
    TwoPhase tp = gen_two_phase(4);
    CHECK(tp.program.validate().empty());
  }
}

TEST_CASE("strip_labels") {
  Pid me("a"), peer("b");
  LocalState s = mk_state("a", {{"p", false}});

  SECTION("single state with self-loop") {
    SyncSkeleton sk;
    sk.owner = me;
    sk.peer = peer;
    sk.states = {s};
    sk.initials = {s};
    sk.arcs = {twophase::arc1(s, s, GuardExpr::truth())};
    StrippedGraph g = strip_labels(sk);
    CHECK(g.nodes == std::set<std::string>{s.key()});
    CHECK(g.edges == std::set<std::pair<std::string, std::string>>{{s.key(), s.key()}});
  }
  SECTION("stripping forgets guards") {
    SyncSkeleton sk1, sk2;
    sk1.owner = sk2.owner = me;
    sk1.peer = sk2.peer = peer;
    sk1.states = sk2.states = {s};
    sk1.initials = sk2.initials = {s};
    sk1.arcs = {twophase::arc1(s, s, GuardExpr::truth())};
    sk2.arcs = {twophase::arc1(s, s, GuardExpr::mk_prop({peer, "q"}))};
    CHECK(strip_labels(sk1) == strip_labels(sk2));
  }
  SECTION("two-phase participant skeletons agree across their pairs") {
    TwoPhase tp = gen_two_phase(5);
    const PairProgram& left = tp.program.pair_program(Pid("p1"), Pid("p2"));
    const PairProgram& right = tp.program.pair_program(Pid("p2"), Pid("p3"));
    CHECK(strip_labels(left.skeleton_of(Pid("p2"))) ==
          strip_labels(right.skeleton_of(Pid("p2"))));
  }
}
