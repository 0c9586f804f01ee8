#pragma once

// System files: the JSON document format the CLI consumes and the
// generators emit. A file declares processes and their propositions, shared
// variables, per-pair skeletons (states as proposition assignments, arcs
// with s-expression guard/body labels), pair-specifications, and either a
// static interconnection or a dynamic section (universe, initially in-force
// set, scripted creates, named creation rule).

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairsynth/dynamic.hpp"
#include "pairsynth/esds.hpp"
#include "pairsynth/structure.hpp"

namespace pairsynth {

struct SystemFile {
  std::string name;
  bool dynamic = false;
  StaticProgram static_program;  // populated when !dynamic
  DynamicSpec dynamic_spec;      // always populated (static systems convert)
  std::map<PidPair, std::vector<FormulaPtr>> pair_properties;
  std::vector<TraceProp> trace_properties;
};

namespace sysio {

using nlohmann::json;

inline json pair_to_json(const PidPair& pr) { return json::array({pr.a.id, pr.b.id}); }

inline PidPair pair_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InputError("pair must be a two-element array");
  return PidPair(Pid(j[0].get<std::string>()), Pid(j[1].get<std::string>()));
}

inline json skeleton_to_json(const SyncSkeleton& sk) {
  json out;
  out["process"] = sk.owner.id;
  out["peer"] = sk.peer.id;
  json states = json::array();
  for (auto& s : sk.states) {
    json st;
    st["name"] = sk.alias(s).empty() ? s.key() : sk.alias(s);
    json assign;
    for (auto& [p, v] : s.assign) assign[p] = v;
    st["assign"] = assign;
    states.push_back(st);
  }
  out["states"] = states;
  json inits = json::array();
  for (auto& s : sk.initials) inits.push_back(sk.alias(s).empty() ? s.key() : sk.alias(s));
  out["initial"] = inits;
  json arcs = json::array();
  auto name_of = [&](const LocalState& s) {
    return sk.alias(s).empty() ? s.key() : sk.alias(s);
  };
  for (auto& a : sk.arcs) {
    json ja;
    ja["from"] = name_of(a.from);
    ja["to"] = name_of(a.to);
    json branches = json::array();
    for (auto& br : a.cmd.branches) {
      json jb;
      jb["guard"] = guard_str(br.guard);
      jb["body"] = br.body.str();
      branches.push_back(jb);
    }
    ja["branches"] = branches;
    arcs.push_back(ja);
  }
  out["arcs"] = arcs;
  return out;
}

inline SyncSkeleton skeleton_from_json(const json& j) {
  SyncSkeleton sk;
  sk.owner = Pid(j.at("process").get<std::string>());
  sk.peer = Pid(j.at("peer").get<std::string>());
  std::map<std::string, LocalState> by_name;
  for (auto& st : j.at("states")) {
    LocalState s;
    s.owner = sk.owner;
    for (auto& [p, v] : st.at("assign").items()) s.assign[p] = v.get<bool>();
    std::string nm = st.at("name").get<std::string>();
    if (by_name.count(nm)) throw InputError("duplicate state name " + nm);
    by_name[nm] = s;
    sk.states.push_back(s);
    sk.state_names[s.key()] = nm;
  }
  auto lookup = [&](const std::string& nm) -> const LocalState& {
    auto it = by_name.find(nm);
    if (it == by_name.end())
      throw InputError("skeleton of " + sk.owner.id + " references unknown state " + nm);
    return it->second;
  };
  for (auto& nm : j.at("initial")) sk.initials.push_back(lookup(nm.get<std::string>()));
  for (auto& ja : j.at("arcs")) {
    Arc a;
    a.from = lookup(ja.at("from").get<std::string>());
    a.to = lookup(ja.at("to").get<std::string>());
    for (auto& jb : ja.at("branches")) {
      Branch br;
      br.guard = parse_guard(jb.at("guard").get<std::string>());
      br.body = jb.count("body") ? parse_body(jb.at("body").get<std::string>()) : Body{};
      a.cmd.branches.push_back(std::move(br));
    }
    a.cmd.canonicalize();
    sk.arcs.push_back(std::move(a));
  }
  return sk;
}

inline json save_system(const SystemFile& sf) {
  json out;
  out["name"] = sf.name;

  std::map<std::string, std::set<std::string>> props;
  std::vector<const PairProgram*> programs;
  if (sf.dynamic) {
    for (auto& e : sf.dynamic_spec.universe) programs.push_back(&e.program);
  } else {
    for (auto& [pr, pp] : sf.static_program.pairs) programs.push_back(&pp);
  }
  json shared = json::array();
  std::set<std::string> seen_vars;
  json skels = json::array();
  for (auto* pp : programs) {
    for (const Pid* p : {&pp->i, &pp->j}) {
      const SyncSkeleton& sk = pp->skeleton_of(*p);
      for (auto& [name, _] : sk.states.at(0).assign) props[p->id].insert(name);
      skels.push_back(skeleton_to_json(sk));
    }
    for (auto& sv : pp->shared) {
      if (!seen_vars.insert(sv.name).second) continue;
      json jv;
      jv["name"] = sv.name;
      jv["pair"] = pair_to_json(sv.pair);
      jv["domain"] = sv.domain;
      jv["initial"] = sv.initial;
      shared.push_back(jv);
    }
  }
  json procs = json::array();
  for (auto& [pid, ps] : props) {
    json jp;
    jp["pid"] = pid;
    jp["props"] = std::vector<std::string>(ps.begin(), ps.end());
    procs.push_back(jp);
  }
  out["processes"] = procs;
  out["shared_vars"] = shared;
  out["skeletons"] = skels;

  json pairs = json::array();
  auto dump_specs = [&](const PidPair& pr) {
    json specs = json::array();
    auto it = sf.pair_properties.find(pr);
    if (it != sf.pair_properties.end())
      for (auto& f : it->second) specs.push_back(formula_str(f));
    return specs;
  };
  if (sf.dynamic) {
    json dyn;
    json universe = json::array();
    for (auto& e : sf.dynamic_spec.universe) {
      json je;
      je["pair"] = pair_to_json(e.spec.pair);
      je["specs"] = dump_specs(e.spec.pair);
      universe.push_back(je);
    }
    dyn["universe"] = universe;
    json inits = json::array();
    for (auto& nm : sf.dynamic_spec.initial)
      inits.push_back(pair_to_json(sf.dynamic_spec.find(nm)->spec.pair));
    dyn["initial"] = inits;
    json creates = json::array();
    for (auto& ev : sf.dynamic_spec.schedule) {
      json jc;
      jc["at_step"] = ev.at_step;
      jc["pair"] = pair_to_json(sf.dynamic_spec.find(ev.entry)->spec.pair);
      creates.push_back(jc);
    }
    dyn["creates"] = creates;
    dyn["max_consecutive_creates"] = sf.dynamic_spec.max_consecutive_creates;
    if (!sf.dynamic_spec.move_annotations.empty()) {
      json annos;
      for (auto& [k, v] : sf.dynamic_spec.move_annotations) annos[k] = v;
      dyn["annotations"] = annos;
    }
    out["dynamic"] = dyn;
  } else {
    for (auto& e : sf.static_program.relation) {
      json jp;
      jp["pair"] = pair_to_json(e.pair);
      jp["specs"] = dump_specs(e.pair);
      pairs.push_back(jp);
    }
    out["pairs"] = pairs;
  }

  if (!sf.trace_properties.empty()) {
    json tp = json::array();
    for (auto& p : sf.trace_properties) {
      json jp;
      switch (p.kind) {
        case TraceProp::Kind::Invariant: jp["kind"] = "invariant"; break;
        case TraceProp::Kind::Precedence: jp["kind"] = "precedence"; break;
        case TraceProp::Kind::Absorption: jp["kind"] = "absorption"; break;
        case TraceProp::Kind::LeadsToBounded: jp["kind"] = "leads-bounded"; break;
      }
      jp["name"] = p.name;
      jp["p"] = formula_str(p.p);
      if (p.q) jp["q"] = formula_str(p.q);
      if (p.kind == TraceProp::Kind::LeadsToBounded && p.bound != SIZE_MAX)
        jp["bound"] = p.bound;
      tp.push_back(jp);
    }
    out["trace_props"] = tp;
  }
  return out;
}

// Named state-dependent creation rules the file format can reference.
inline json rule_to_json(const std::string& rule_name,
                         const std::map<std::string, Pid>& handlers) {
  json out;
  out["name"] = rule_name;
  json h;
  for (auto& [entry, pid] : handlers) h[entry] = pid.id;
  out["handlers"] = h;
  return out;
}

inline SystemFile load_system(const json& j) {
  SystemFile sf;
  sf.name = j.value("name", "unnamed");

  std::map<std::string, std::set<std::string>> declared_props;
  for (auto& jp : j.at("processes"))
    for (auto& p : jp.at("props"))
      declared_props[jp.at("pid").get<std::string>()].insert(p.get<std::string>());

  std::vector<SharedVar> all_vars;
  if (j.count("shared_vars"))
    for (auto& jv : j.at("shared_vars")) {
      SharedVar sv;
      sv.name = jv.at("name").get<std::string>();
      sv.pair = pair_from_json(jv.at("pair"));
      for (auto& d : jv.at("domain")) sv.domain.push_back(d.get<std::string>());
      sv.initial = jv.at("initial").get<std::string>();
      if (!sv.has_value(sv.initial))
        throw InputError("variable " + sv.name + " initialized outside its domain");
      all_vars.push_back(sv);
    }

  std::map<std::pair<std::string, std::string>, SyncSkeleton> skels;
  for (auto& js : j.at("skeletons")) {
    SyncSkeleton sk = skeleton_from_json(js);
    if (declared_props.count(sk.owner.id) == 0)
      throw InputError("skeleton owner " + sk.owner.id + " not declared");
    skels[{sk.owner.id, sk.peer.id}] = std::move(sk);
  }

  auto build_pair = [&](const PidPair& pr) {
    PairProgram pp;
    pp.i = pr.a;
    pp.j = pr.b;
    auto it_i = skels.find({pr.a.id, pr.b.id});
    auto it_j = skels.find({pr.b.id, pr.a.id});
    if (it_i == skels.end() || it_j == skels.end())
      throw InputError("missing skeleton(s) for pair " + pr.str());
    pp.skel_i = it_i->second;
    pp.skel_j = it_j->second;
    for (auto& sv : all_vars)
      if (sv.pair == pr) pp.shared.push_back(sv);
    return pp;
  };

  auto parse_specs = [&](const json& arr) {
    std::vector<FormulaPtr> out;
    for (auto& s : arr) out.push_back(parse_formula(s.get<std::string>()));
    return out;
  };

  if (j.count("dynamic")) {
    sf.dynamic = true;
    const json& dyn = j.at("dynamic");
    for (auto& je : dyn.at("universe")) {
      UniverseEntry e;
      e.spec.pair = pair_from_json(je.at("pair"));
      auto fs = parse_specs(je.value("specs", json::array()));
      sf.pair_properties[e.spec.pair] = fs;
      e.spec.spec = fs.empty() ? Formula::truth()
                               : (fs.size() == 1 ? fs[0] : Formula::and_(fs));
      e.program = build_pair(e.spec.pair);
      sf.dynamic_spec.universe.push_back(std::move(e));
    }
    if (dyn.count("initial"))
      for (auto& jp : dyn.at("initial"))
        sf.dynamic_spec.initial.push_back(pair_from_json(jp).str());
    if (dyn.count("creates"))
      for (auto& jc : dyn.at("creates"))
        sf.dynamic_spec.schedule.push_back(
            {jc.at("at_step").get<std::size_t>(), pair_from_json(jc.at("pair")).str()});
    sf.dynamic_spec.max_consecutive_creates = dyn.value("max_consecutive_creates", 1u);
    if (dyn.count("annotations"))
      for (auto& [k, v] : dyn.at("annotations").items())
        sf.dynamic_spec.move_annotations[k] = v.get<std::string>();
    if (dyn.count("rule")) {
      const json& rule = dyn.at("rule");
      if (rule.at("name").get<std::string>() == "handler-initial") {
        std::map<std::string, Pid> handlers;
        for (auto& [entry, pid] : rule.at("handlers").items())
          handlers[entry] = Pid(pid.get<std::string>());
        sf.dynamic_spec.state_rule = [handlers](const Configuration& cfg,
                                                const UniverseEntry& e) {
          auto it = handlers.find(e.name());
          if (it == handlers.end()) return true;
          return !cfg.alive(it->second) || cfg.local(it->second).value("in");
        };
      } else {
        throw InputError("unknown creation rule " + rule.at("name").get<std::string>());
      }
    }
  } else {
    if (!j.count("pairs")) throw InputError("system file has neither pairs nor dynamic");
    for (auto& jp : j.at("pairs")) {
      Interconnection e;
      e.pair = pair_from_json(jp.at("pair"));
      auto fs = parse_specs(jp.value("specs", json::array()));
      sf.pair_properties[e.pair] = fs;
      e.spec = fs.empty() ? Formula::truth()
                          : (fs.size() == 1 ? fs[0] : Formula::and_(fs));
      sf.static_program.relation.push_back(e);
      sf.static_program.pairs.emplace(e.pair, build_pair(e.pair));
    }
    sf.dynamic_spec = to_dynamic(sf.static_program);
  }

  if (j.count("trace_props")) {
    for (auto& jp : j.at("trace_props")) {
      TraceProp p;
      std::string kind = jp.at("kind").get<std::string>();
      if (kind == "invariant") p.kind = TraceProp::Kind::Invariant;
      else if (kind == "precedence") p.kind = TraceProp::Kind::Precedence;
      else if (kind == "absorption") p.kind = TraceProp::Kind::Absorption;
      else if (kind == "leads-bounded") p.kind = TraceProp::Kind::LeadsToBounded;
      else throw InputError("unknown trace property kind " + kind);
      p.name = jp.at("name").get<std::string>();
      p.p = parse_formula(jp.at("p").get<std::string>());
      if (jp.count("q")) p.q = parse_formula(jp.at("q").get<std::string>());
      p.bound = jp.value("bound", SIZE_MAX);
      sf.trace_properties.push_back(std::move(p));
    }
  }
  return sf;
}

inline SystemFile load_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw InputError(std::string("JSON parse error: ") + ex.what());
  }
  return load_system(j);
}

// Structural validation beyond what loading enforces: every skeleton's
// invariants plus cross-pair local-structure compatibility.
inline std::vector<Violation> validate_system(const SystemFile& sf) {
  if (!sf.dynamic) return sf.static_program.validate();
  std::vector<Violation> out;
  std::map<Pid, StrippedGraph> seen;
  for (auto& e : sf.dynamic_spec.universe) {
    StaticProgram one;
    one.relation.push_back({e.spec.pair, e.spec.spec});
    one.pairs.emplace(e.spec.pair, e.program);
    for (auto& v : one.validate()) out.push_back(v);
    for (const Pid* p : {&e.program.i, &e.program.j}) {
      StrippedGraph g = strip_labels(e.program.skeleton_of(*p));
      auto [it, fresh] = seen.emplace(*p, g);
      if (!fresh && !(it->second == g))
        out.push_back({"IncompatibleLocalStructure", p->id + " differs across pairs"});
    }
  }
  return out;
}

}  // namespace sysio

using sysio::load_system;
using sysio::load_system_file;
using sysio::save_system;
using sysio::validate_system;

}  // namespace pairsynth
