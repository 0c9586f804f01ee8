#pragma once

// Formula AST for the ACTL-minus / CTL fragment used by pair-specifications
// and by the derived checks (blk, TSTAB, liveness plumbing). Negation is
// unrestricted in the AST; acceptance of a formula as a pair-specification
// goes through is_actl_minus(), which enforces negation-on-propositions and
// the absence of existential operators.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "pairsynth/common.hpp"
#include "pairsynth/skeleton.hpp"

namespace pairsynth {

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind {
    True, False,
    Prop,        // atomic proposition
    VarEq,       // shared-variable equality; internal plumbing (guards in TSTAB)
    Not,
    And, Or,
    AX, EX,      // next by a specific process
    AU, AUw,     // A[f U g], A[f Uw g]
    AG, AF, EF,
    LeadsWeak,   // f ~> g  ==  A[(f => AF g) Uw g]
    Leads        // f ~~> g ==  AG(f => AF g)
  };

  Kind kind;
  AtomicProp prop;            // Prop
  std::string var, value;     // VarEq
  Pid proc;                   // AX / EX
  std::vector<FormulaPtr> kids;

  static FormulaPtr mk(Kind k, std::vector<FormulaPtr> kids = {}) {
    return std::make_shared<Formula>(Formula{k, {}, {}, {}, {}, std::move(kids)});
  }
  static FormulaPtr truth() { return mk(Kind::True); }
  static FormulaPtr falsity() { return mk(Kind::False); }
  static FormulaPtr p(AtomicProp a) {
    return std::make_shared<Formula>(Formula{Kind::Prop, std::move(a), {}, {}, {}, {}});
  }
  static FormulaPtr p(const Pid& owner, const std::string& name) { return p({owner, name}); }
  static FormulaPtr var_eq(std::string x, std::string v) {
    return std::make_shared<Formula>(
        Formula{Kind::VarEq, {}, std::move(x), std::move(v), {}, {}});
  }
  static FormulaPtr not_(FormulaPtr f) { return mk(Kind::Not, {std::move(f)}); }
  static FormulaPtr and_(std::vector<FormulaPtr> fs) {
    if (fs.size() == 1) return fs[0];
    return mk(Kind::And, std::move(fs));
  }
  static FormulaPtr or_(std::vector<FormulaPtr> fs) {
    if (fs.size() == 1) return fs[0];
    return mk(Kind::Or, std::move(fs));
  }
  static FormulaPtr implies(FormulaPtr f, FormulaPtr g) {
    return or_({not_(std::move(f)), std::move(g)});
  }
  static FormulaPtr ax(Pid j, FormulaPtr f) {
    return std::make_shared<Formula>(
        Formula{Kind::AX, {}, {}, {}, std::move(j), {std::move(f)}});
  }
  static FormulaPtr ex(Pid j, FormulaPtr f) {
    return std::make_shared<Formula>(
        Formula{Kind::EX, {}, {}, {}, std::move(j), {std::move(f)}});
  }
  static FormulaPtr au(FormulaPtr f, FormulaPtr g) {
    return mk(Kind::AU, {std::move(f), std::move(g)});
  }
  static FormulaPtr auw(FormulaPtr f, FormulaPtr g) {
    return mk(Kind::AUw, {std::move(f), std::move(g)});
  }
  static FormulaPtr ag(FormulaPtr f) { return mk(Kind::AG, {std::move(f)}); }
  static FormulaPtr af(FormulaPtr f) { return mk(Kind::AF, {std::move(f)}); }
  static FormulaPtr ef(FormulaPtr f) { return mk(Kind::EF, {std::move(f)}); }
  static FormulaPtr leads_weak(FormulaPtr f, FormulaPtr g) {
    return mk(Kind::LeadsWeak, {std::move(f), std::move(g)});
  }
  static FormulaPtr leads(FormulaPtr f, FormulaPtr g) {
    return mk(Kind::Leads, {std::move(f), std::move(g)});
  }
};

inline std::string formula_str(const FormulaPtr& f) {
  using K = Formula::Kind;
  switch (f->kind) {
    case K::True: return "true";
    case K::False: return "false";
    case K::Prop: return "(prop " + f->prop.owner.id + " " + f->prop.name + ")";
    case K::VarEq: return "(eq " + f->var + " " + f->value + ")";
    case K::Not: return "(not " + formula_str(f->kids[0]) + ")";
    case K::And:
    case K::Or: {
      std::string s = f->kind == K::And ? "(and" : "(or";
      for (auto& k : f->kids) s += " " + formula_str(k);
      return s + ")";
    }
    case K::AX: return "(AX " + f->proc.id + " " + formula_str(f->kids[0]) + ")";
    case K::EX: return "(EX " + f->proc.id + " " + formula_str(f->kids[0]) + ")";
    case K::AU: return "(AU " + formula_str(f->kids[0]) + " " + formula_str(f->kids[1]) + ")";
    case K::AUw: return "(AUw " + formula_str(f->kids[0]) + " " + formula_str(f->kids[1]) + ")";
    case K::AG: return "(AG " + formula_str(f->kids[0]) + ")";
    case K::AF: return "(AF " + formula_str(f->kids[0]) + ")";
    case K::EF: return "(EF " + formula_str(f->kids[0]) + ")";
    case K::LeadsWeak:
      return "(leads-weak " + formula_str(f->kids[0]) + " " + formula_str(f->kids[1]) + ")";
    case K::Leads:
      return "(leads " + formula_str(f->kids[0]) + " " + formula_str(f->kids[1]) + ")";
  }
  return "?";
}

inline FormulaPtr formula_from_sexpr(const Sexpr& e) {
  using F = Formula;
  if (e.is_atom) {
    if (e.atom == "true") return F::truth();
    if (e.atom == "false") return F::falsity();
    throw InputError("unknown formula atom: " + e.atom);
  }
  const std::string& h = e.head();
  auto unary = [&](std::size_t want = 1) {
    if (e.arity() != want) throw InputError("(" + h + " ...) expects " + std::to_string(want) + " args");
  };
  if (h == "prop") {
    unary(2);
    return F::p(Pid(e.arg(0).atom), e.arg(1).atom);
  }
  if (h == "eq") {
    unary(2);
    return F::var_eq(e.arg(0).atom, e.arg(1).atom);
  }
  if (h == "not") {
    unary(1);
    return F::not_(formula_from_sexpr(e.arg(0)));
  }
  if (h == "and" || h == "or") {
    if (e.arity() < 1) throw InputError("(" + h + " ...) expects at least 1 arg");
    std::vector<FormulaPtr> kids;
    for (std::size_t i = 0; i < e.arity(); ++i) kids.push_back(formula_from_sexpr(e.arg(i)));
    return h == "and" ? F::and_(std::move(kids)) : F::or_(std::move(kids));
  }
  if (h == "AG" || h == "AF" || h == "EF") {
    unary(1);
    FormulaPtr k = formula_from_sexpr(e.arg(0));
    if (h == "AG") return F::ag(k);
    if (h == "AF") return F::af(k);
    return F::ef(k);
  }
  if (h == "AX" || h == "EX") {
    unary(2);
    FormulaPtr k = formula_from_sexpr(e.arg(1));
    return h == "AX" ? F::ax(Pid(e.arg(0).atom), k) : F::ex(Pid(e.arg(0).atom), k);
  }
  if (h == "AU" || h == "AUw" || h == "leads-weak" || h == "leads") {
    unary(2);
    FormulaPtr a = formula_from_sexpr(e.arg(0));
    FormulaPtr b = formula_from_sexpr(e.arg(1));
    if (h == "AU") return F::au(a, b);
    if (h == "AUw") return F::auw(a, b);
    if (h == "leads-weak") return F::leads_weak(a, b);
    return F::leads(a, b);
  }
  throw InputError("unknown formula operator: " + h);
}

inline FormulaPtr parse_formula(const std::string& s) {
  return formula_from_sexpr(parse_sexpr(s));
}

// ---------------------------------------------------------------------------
// Closure CL(f): all subformulae including f, children before parents. The
// leads-to abbreviations contribute their expansions' key members (notably
// AF g), since the pending-eventuality computation quantifies over them.

inline void closure_into(const FormulaPtr& f, std::vector<FormulaPtr>& out,
                         std::set<std::string>& seen) {
  using K = Formula::Kind;
  for (auto& k : f->kids) closure_into(k, out, seen);
  if (f->kind == K::LeadsWeak || f->kind == K::Leads) {
    closure_into(Formula::af(f->kids[1]), out, seen);
  }
  if (seen.insert(formula_str(f)).second) out.push_back(f);
}

inline std::vector<FormulaPtr> closure(const FormulaPtr& f) {
  std::vector<FormulaPtr> out;
  std::set<std::string> seen;
  closure_into(f, out, seen);
  return out;
}

// ---------------------------------------------------------------------------
// Fragment checks

// ACTL-minus over AP_i + AP_j: negation only on propositions, no EX/EF, no
// AX (the logic drops the nexttime modality), props drawn from the pair.
inline bool is_actl_minus(const FormulaPtr& f, const std::set<Pid>& owners,
                          std::string* why = nullptr) {
  using K = Formula::Kind;
  auto fail = [&](const std::string& w) {
    if (why) *why = w;
    return false;
  };
  switch (f->kind) {
    case K::True:
    case K::False: return true;
    case K::Prop:
      if (owners.count(f->prop.owner) == 0)
        return fail("proposition " + f->prop.str() + " outside the pair");
      return true;
    case K::VarEq: return true;
    case K::Not:
      if (f->kids[0]->kind != K::Prop && f->kids[0]->kind != K::VarEq)
        return fail("negation applied to non-proposition " + formula_str(f->kids[0]));
      return is_actl_minus(f->kids[0], owners, why);
    case K::EX:
    case K::EF: return fail("existential operator " + formula_str(f));
    case K::AX: return fail("AX is outside ACTL-minus");
    default:
      for (auto& k : f->kids)
        if (!is_actl_minus(k, owners, why)) return false;
      return true;
  }
}

// State-to-formula operator F(s_i): the conjunction of literals that
// characterizes a local state.
inline FormulaPtr state_formula(const LocalState& s) {
  std::vector<FormulaPtr> lits;
  for (auto& [p, v] : s.assign) {
    FormulaPtr lit = Formula::p(s.owner, p);
    lits.push_back(v ? lit : Formula::not_(lit));
  }
  if (lits.empty()) return Formula::truth();
  if (lits.size() == 1) return lits[0];
  return Formula::and_(std::move(lits));
}

// Embed a guard as a formula (used by TSTAB and blk).
inline FormulaPtr guard_formula(const GuardPtr& g) {
  using K = GuardExpr::Kind;
  switch (g->kind) {
    case K::True: return Formula::truth();
    case K::False: return Formula::falsity();
    case K::Prop: return Formula::p(g->prop);
    case K::VarEq: return Formula::var_eq(g->var, g->value);
    case K::Not: return Formula::not_(guard_formula(g->kids[0]));
    case K::And:
    case K::Or: {
      std::vector<FormulaPtr> kids;
      for (auto& k : g->kids) kids.push_back(guard_formula(k));
      return g->kind == K::And ? Formula::and_(std::move(kids))
                               : Formula::or_(std::move(kids));
    }
  }
  return Formula::falsity();
}

// Strongest purely propositional consequence of f; non-propositional leaves
// weaken to true. Used by the large-model safety cross-check.
inline FormulaPtr propositional_content(const FormulaPtr& f) {
  using K = Formula::Kind;
  switch (f->kind) {
    case K::True:
    case K::False:
    case K::Prop:
    case K::VarEq: return f;
    case K::Not:
      if (f->kids[0]->kind == K::Prop || f->kids[0]->kind == K::VarEq) return f;
      return Formula::truth();
    case K::And: {
      std::vector<FormulaPtr> kids;
      for (auto& k : f->kids) kids.push_back(propositional_content(k));
      return Formula::and_(std::move(kids));
    }
    case K::Or: {
      std::vector<FormulaPtr> kids;
      for (auto& k : f->kids) kids.push_back(propositional_content(k));
      return Formula::or_(std::move(kids));
    }
    default: return Formula::truth();
  }
}

inline bool is_propositional(const FormulaPtr& f) {
  using K = Formula::Kind;
  switch (f->kind) {
    case K::True:
    case K::False:
    case K::Prop:
    case K::VarEq: return true;
    case K::Not:
    case K::And:
    case K::Or:
      for (auto& k : f->kids)
        if (!is_propositional(k)) return false;
      return true;
    default: return false;
  }
}

}  // namespace pairsynth
