#pragma once

// Synchronization skeletons: local-state graphs whose arcs carry guarded
// commands. A process's skeleton in a pair-program reads only the peer's
// atomic propositions and the pair's shared variables.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pairsynth/common.hpp"

namespace pairsynth {

struct AtomicProp {
  Pid owner;
  std::string name;

  bool operator==(const AtomicProp& o) const { return owner == o.owner && name == o.name; }
  bool operator<(const AtomicProp& o) const {
    if (owner != o.owner) return owner < o.owner;
    return name < o.name;
  }
  std::string str() const { return owner.id + "." + name; }
};

// A local state is a total truth assignment over the owner's propositions.
// Two local states are equal iff their assignments are equal; display names
// live in the skeleton's alias table, not here.
struct LocalState {
  Pid owner;
  std::map<std::string, bool> assign;  // prop name -> value, total over AP_owner

  bool operator==(const LocalState& o) const { return owner == o.owner && assign == o.assign; }
  bool operator!=(const LocalState& o) const { return !(*this == o); }
  bool operator<(const LocalState& o) const {
    if (owner != o.owner) return owner < o.owner;
    return assign < o.assign;
  }

  bool value(const std::string& prop) const {
    auto it = assign.find(prop);
    if (it == assign.end())
      throw UnresolvedSymbol("proposition " + owner.id + "." + prop + " not in local state");
    return it->second;
  }

  std::string key() const {
    std::string s = owner.id + "[";
    for (auto& [p, v] : assign) s += p + (v ? "+" : "-");
    s += "]";
    return s;
  }
};

// Shared variable of one pair, over a finite ordered domain of value tokens.
struct SharedVar {
  std::string name;
  PidPair pair;
  std::vector<std::string> domain;
  std::string initial;

  bool has_value(const std::string& v) const {
    return std::find(domain.begin(), domain.end(), v) != domain.end();
  }
};

// Valuation of shared variables (name -> value token).
using Valuation = std::map<std::string, std::string>;

// ---------------------------------------------------------------------------
// Guards

struct GuardExpr;
using GuardPtr = std::shared_ptr<const GuardExpr>;

struct GuardExpr {
  enum class Kind { True, False, Prop, VarEq, Not, And, Or };
  Kind kind;
  AtomicProp prop;                // Kind::Prop
  std::string var, value;         // Kind::VarEq
  std::vector<GuardPtr> kids;     // Not (1), And/Or (>= 1)

  static GuardPtr truth() { return std::make_shared<GuardExpr>(GuardExpr{Kind::True, {}, {}, {}, {}}); }
  static GuardPtr falsity() { return std::make_shared<GuardExpr>(GuardExpr{Kind::False, {}, {}, {}, {}}); }
  static GuardPtr mk_prop(AtomicProp p) {
    return std::make_shared<GuardExpr>(GuardExpr{Kind::Prop, std::move(p), {}, {}, {}});
  }
  static GuardPtr var_eq(std::string x, std::string v) {
    return std::make_shared<GuardExpr>(GuardExpr{Kind::VarEq, {}, std::move(x), std::move(v), {}});
  }
  static GuardPtr mk_not(GuardPtr g) {
    return std::make_shared<GuardExpr>(GuardExpr{Kind::Not, {}, {}, {}, {std::move(g)}});
  }
  static GuardPtr mk_and(std::vector<GuardPtr> gs) {
    return std::make_shared<GuardExpr>(GuardExpr{Kind::And, {}, {}, {}, std::move(gs)});
  }
  static GuardPtr mk_or(std::vector<GuardPtr> gs) {
    return std::make_shared<GuardExpr>(GuardExpr{Kind::Or, {}, {}, {}, std::move(gs)});
  }
};

// Canonical s-expression form; structural equality of guards is string
// equality of this form.
inline std::string guard_str(const GuardPtr& g) {
  using K = GuardExpr::Kind;
  switch (g->kind) {
    case K::True: return "true";
    case K::False: return "false";
    case K::Prop: return "(prop " + g->prop.owner.id + " " + g->prop.name + ")";
    case K::VarEq: return "(eq " + g->var + " " + g->value + ")";
    case K::Not: return "(not " + guard_str(g->kids[0]) + ")";
    case K::And:
    case K::Or: {
      std::string s = g->kind == K::And ? "(and" : "(or";
      for (auto& k : g->kids) s += " " + guard_str(k);
      return s + ")";
    }
  }
  return "?";
}

inline GuardPtr guard_from_sexpr(const Sexpr& e) {
  if (e.is_atom) {
    if (e.atom == "true") return GuardExpr::truth();
    if (e.atom == "false") return GuardExpr::falsity();
    throw InputError("unknown guard atom: " + e.atom);
  }
  const std::string& h = e.head();
  if (h == "prop") {
    if (e.arity() != 2) throw InputError("(prop <pid> <name>) expects 2 args");
    return GuardExpr::mk_prop({Pid(e.arg(0).atom), e.arg(1).atom});
  }
  if (h == "eq") {
    if (e.arity() != 2) throw InputError("(eq <var> <value>) expects 2 args");
    return GuardExpr::var_eq(e.arg(0).atom, e.arg(1).atom);
  }
  if (h == "not") {
    if (e.arity() != 1) throw InputError("(not G) expects 1 arg");
    return GuardExpr::mk_not(guard_from_sexpr(e.arg(0)));
  }
  if (h == "and" || h == "or") {
    if (e.arity() < 1) throw InputError("(" + h + " ...) expects at least 1 arg");
    std::vector<GuardPtr> kids;
    for (std::size_t i = 0; i < e.arity(); ++i) kids.push_back(guard_from_sexpr(e.arg(i)));
    return h == "and" ? GuardExpr::mk_and(std::move(kids)) : GuardExpr::mk_or(std::move(kids));
  }
  throw InputError("unknown guard operator: " + h);
}

inline GuardPtr parse_guard(const std::string& s) { return guard_from_sexpr(parse_sexpr(s)); }

// Standard inductive evaluation over the peer's local state and the pair's
// shared valuation.
inline bool eval_guard(const GuardPtr& g, const LocalState& peer, const Valuation& shared) {
  using K = GuardExpr::Kind;
  switch (g->kind) {
    case K::True: return true;
    case K::False: return false;
    case K::Prop:
      if (g->prop.owner != peer.owner)
        throw UnresolvedSymbol("guard references " + g->prop.str() + " but peer is " +
                               peer.owner.id);
      return peer.value(g->prop.name);
    case K::VarEq: {
      auto it = shared.find(g->var);
      if (it == shared.end()) throw UnresolvedSymbol("guard references unknown variable " + g->var);
      return it->second == g->value;
    }
    case K::Not: return !eval_guard(g->kids[0], peer, shared);
    case K::And:
      for (auto& k : g->kids)
        if (!eval_guard(k, peer, shared)) return false;
      return true;
    case K::Or:
      for (auto& k : g->kids)
        if (eval_guard(k, peer, shared)) return true;
      return false;
  }
  return false;
}

// Collect symbols so validators can check guard scope.
inline void guard_symbols(const GuardPtr& g, std::set<AtomicProp>& props,
                          std::set<std::string>& vars) {
  using K = GuardExpr::Kind;
  if (g->kind == K::Prop) props.insert(g->prop);
  if (g->kind == K::VarEq) vars.insert(g->var);
  for (auto& k : g->kids) guard_symbols(k, props, vars);
}

// ---------------------------------------------------------------------------
// Bodies and guarded commands

// Parallel assignment of constants to shared variables.
struct Body {
  std::map<std::string, std::string> sets;  // var -> constant

  bool operator==(const Body& o) const { return sets == o.sets; }

  std::string str() const {
    std::string s = "(set";
    for (auto& [x, v] : sets) s += " (" + x + " " + v + ")";
    return s + ")";
  }
};

inline Body body_from_sexpr(const Sexpr& e) {
  Body b;
  if (e.is_atom || e.items.empty() || e.items[0].atom != "set")
    throw InputError("body must be (set (<var> <value>) ...): " + e.str());
  for (std::size_t i = 0; i < e.arity(); ++i) {
    const Sexpr& pair = e.arg(i);
    if (pair.is_atom || pair.items.size() != 2)
      throw InputError("body assignment must be (<var> <value>): " + pair.str());
    auto [it, fresh] = b.sets.emplace(pair.items[0].atom, pair.items[1].atom);
    if (!fresh) throw InputError("body assigns " + pair.items[0].atom + " twice");
  }
  return b;
}

inline Body parse_body(const std::string& s) { return body_from_sexpr(parse_sexpr(s)); }

// apply_body: pointwise update; targets must already exist in the valuation.
inline Valuation apply_body(const Body& a, const Valuation& v) {
  Valuation out = v;
  for (auto& [x, c] : a.sets) {
    auto it = out.find(x);
    if (it == out.end()) throw UnresolvedSymbol("body assigns unknown variable " + x);
    it->second = c;
  }
  return out;
}

struct Branch {
  GuardPtr guard;
  Body body;

  std::string str() const { return guard_str(guard) + " -> " + body.str(); }
};

// Guarded-command disjunction: enabled when any branch guard holds. Branches
// are kept sorted by serialized form so composition is order-insensitive.
struct GuardedCommand {
  std::vector<Branch> branches;

  void canonicalize() {
    std::stable_sort(branches.begin(), branches.end(),
                     [](const Branch& a, const Branch& b) { return a.str() < b.str(); });
  }

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      if (i) s += " | ";
      s += branches[i].str();
    }
    return s;
  }

  // Disjunction of the branch guards; this is the move's guard in the
  // wait-for-graph sense.
  bool enabled(const LocalState& peer, const Valuation& shared) const {
    for (auto& br : branches)
      if (eval_guard(br.guard, peer, shared)) return true;
    return false;
  }

  std::optional<std::size_t> first_enabled(const LocalState& peer, const Valuation& shared) const {
    for (std::size_t i = 0; i < branches.size(); ++i)
      if (eval_guard(branches[i].guard, peer, shared)) return i;
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Skeletons

struct Arc {
  LocalState from;
  GuardedCommand cmd;
  LocalState to;
};

inline Arc make_arc(const LocalState& from, const LocalState& to, GuardPtr g, Body b = {}) {
  Arc a;
  a.from = from;
  a.to = to;
  a.cmd.branches.push_back({std::move(g), std::move(b)});
  a.cmd.canonicalize();
  return a;
}

inline LocalState one_hot_state(const Pid& owner, const std::vector<std::string>& props,
                                const std::string& active) {
  LocalState s;
  s.owner = owner;
  for (auto& p : props) s.assign[p] = (p == active);
  return s;
}

struct SyncSkeleton {
  Pid owner;
  Pid peer;
  std::vector<LocalState> states;
  std::vector<LocalState> initials;
  std::vector<Arc> arcs;
  std::map<std::string, std::string> state_names;  // LocalState::key() -> alias

  const std::string& alias(const LocalState& s) const {
    static const std::string empty;
    auto it = state_names.find(s.key());
    return it == state_names.end() ? empty : it->second;
  }
  std::string display(const LocalState& s) const {
    const std::string& a = alias(s);
    return a.empty() ? s.key() : owner.id + ":" + a;
  }

  std::vector<const Arc*> arcs_from(const LocalState& s) const {
    std::vector<const Arc*> out;
    for (auto& a : arcs)
      if (a.from == s) out.push_back(&a);
    return out;
  }
};

// Unlabeled local structure, used for the compatibility requirement between
// a process's pair-skeletons.
struct StrippedGraph {
  std::set<std::string> nodes;                       // LocalState keys
  std::set<std::pair<std::string, std::string>> edges;

  bool operator==(const StrippedGraph& o) const { return nodes == o.nodes && edges == o.edges; }
  bool operator!=(const StrippedGraph& o) const { return !(*this == o); }
};

inline StrippedGraph strip_labels(const SyncSkeleton& sk) {
  StrippedGraph g;
  for (auto& s : sk.states) g.nodes.insert(s.key());
  for (auto& a : sk.arcs) g.edges.emplace(a.from.key(), a.to.key());
  return g;
}

// ---------------------------------------------------------------------------
// Validation. Violations are data, not failures.

struct Violation {
  std::string kind;
  std::string detail;

  std::string str() const { return kind + ": " + detail; }
};

// Checks every SyncSkeleton invariant: total assignments over one prop set,
// members declared, dead ends, duplicate arcs, guard/body scope
// (peer props and the pair's shared variables only), body values in domain.
inline std::vector<Violation> validate_skeleton(
    const SyncSkeleton& sk, const std::set<std::string>& owner_props,
    const std::set<std::string>& peer_props,
    const std::vector<SharedVar>& pair_vars) {
  std::vector<Violation> out;
  auto state_known = [&](const LocalState& s) {
    return std::find(sk.states.begin(), sk.states.end(), s) != sk.states.end();
  };

  std::set<std::string> seen_keys;
  for (auto& s : sk.states) {
    if (s.owner != sk.owner)
      out.push_back({"ForeignState", sk.display(s) + " owned by " + s.owner.id});
    if (!seen_keys.insert(s.key()).second)
      out.push_back({"DuplicateState", sk.display(s)});
    std::set<std::string> names;
    for (auto& [p, _] : s.assign) names.insert(p);
    if (names != owner_props)
      out.push_back({"PartialAssignment",
                     sk.display(s) + " is not a total assignment over AP_" + sk.owner.id});
  }
  if (sk.initials.empty()) out.push_back({"NoInitialState", "skeleton of " + sk.owner.id});
  for (auto& s : sk.initials)
    if (!state_known(s)) out.push_back({"UnknownInitial", sk.display(s)});

  std::set<std::pair<std::string, std::string>> arc_keys;
  std::set<std::string> has_out;
  for (auto& a : sk.arcs) {
    if (!state_known(a.from) || !state_known(a.to)) {
      out.push_back({"UnknownArcEndpoint", sk.display(a.from) + " -> " + sk.display(a.to)});
      continue;
    }
    has_out.insert(a.from.key());
    if (!arc_keys.emplace(a.from.key(), a.to.key()).second)
      out.push_back({"DuplicateArc", sk.display(a.from) + " -> " + sk.display(a.to)});
    if (a.cmd.branches.empty())
      out.push_back({"EmptyCommand", sk.display(a.from) + " -> " + sk.display(a.to)});
    for (auto& br : a.cmd.branches) {
      std::set<AtomicProp> props;
      std::set<std::string> vars;
      guard_symbols(br.guard, props, vars);
      for (auto& p : props)
        if (p.owner != sk.peer || peer_props.count(p.name) == 0)
          out.push_back({"GuardScope", "guard of " + sk.display(a.from) + " -> " +
                                            sk.display(a.to) + " references " + p.str()});
      auto find_var = [&](const std::string& x) -> const SharedVar* {
        for (auto& sv : pair_vars)
          if (sv.name == x) return &sv;
        return nullptr;
      };
      for (auto& x : vars)
        if (find_var(x) == nullptr)
          out.push_back({"GuardScope", "guard references variable " + x +
                                            " outside this pair's shared set"});
      for (auto& [x, c] : br.body.sets) {
        const SharedVar* sv = find_var(x);
        if (sv == nullptr)
          out.push_back({"BodyScope", "body assigns variable " + x +
                                          " outside this pair's shared set"});
        else if (!sv->has_value(c))
          out.push_back({"BodyDomain", "body assigns " + x + " := " + c + " outside domain"});
      }
    }
  }
  for (auto& s : sk.states)
    if (has_out.count(s.key()) == 0)
      out.push_back({"DeadEnd", sk.display(s)});
  return out;
}

}  // namespace pairsynth
