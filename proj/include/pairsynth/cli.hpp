#pragma once

// Command-line surface. Every command is deterministic given its inputs and
// seed. Exit codes: 0 pass, 1 property failure, 2 input error, 3 budget
// refusal. Budgets default from PAIRSYNTH_MAX_STATES when set.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairsynth/esds.hpp"
#include "pairsynth/lowatom.hpp"
#include "pairsynth/mc.hpp"
#include "pairsynth/overlay.hpp"
#include "pairsynth/system_io.hpp"
#include "pairsynth/twophase.hpp"
#include "pairsynth/waitfor.hpp"

namespace pairsynth::cli {

inline constexpr int kPass = 0, kFail = 1, kInputError = 2, kBudget = 3;

inline std::size_t default_budget() {
  if (const char* env = std::getenv("PAIRSYNTH_MAX_STATES")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 200000;
}

inline void maybe_write_report(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

inline int cmd_validate(const std::string& file, const std::string& report) {
  SystemFile sf = load_system_file(file);
  auto vio = validate_system(sf);
  nlohmann::json rep;
  rep["command"] = "validate";
  rep["file"] = file;
  rep["violations"] = nlohmann::json::array();
  for (auto& v : vio) {
    std::cout << "violation: " << v.str() << "\n";
    rep["violations"].push_back(v.str());
  }
  rep["ok"] = vio.empty();
  maybe_write_report(report, rep);
  std::cout << (vio.empty() ? "validate: ok\n" : "validate: FAILED\n");
  return vio.empty() ? kPass : kFail;
}

inline int cmd_check_pair(const std::string& file, const std::string& pair_arg,
                          const std::string& report) {
  SystemFile sf = load_system_file(file);
  auto comma = pair_arg.find(',');
  if (comma == std::string::npos)
    throw InputError("--pair expects <i>,<j>");
  PidPair pr(Pid(pair_arg.substr(0, comma)), Pid(pair_arg.substr(comma + 1)));

  const PairProgram* pp = nullptr;
  if (sf.dynamic) {
    if (const UniverseEntry* e = sf.dynamic_spec.find(pr.str())) pp = &e->program;
  } else if (sf.static_program.pairs.count(pr)) {
    pp = &sf.static_program.pairs.at(pr);
  }
  if (!pp) throw InputError("pair " + pr.str() + " not in the system");

  nlohmann::json rep;
  rep["command"] = "check-pair";
  rep["pair"] = pr.str();
  bool ok = true;

  Structure m = build_pair_structure(*pp);
  std::cout << "pair-structure: " << m.n_states() << " states, " << m.transitions.size()
            << " transitions\n";

  auto it = sf.pair_properties.find(pr);
  rep["specs"] = nlohmann::json::array();
  if (it != sf.pair_properties.end()) {
    for (auto& f : it->second) {
      SpecResult r = check_spec(m, f);
      std::cout << (r.holds ? "  spec ok:   " : "  spec FAIL: ") << formula_str(f) << "\n";
      if (!r.holds && r.counterexample)
        std::cout << "    at initial state " << r.counterexample->key() << "\n";
      nlohmann::json js;
      js["formula"] = formula_str(f);
      js["holds"] = r.holds;
      rep["specs"].push_back(js);
      ok = ok && r.holds;
    }
  }

  TstabResult ts = check_tstab(*pp, &m);
  std::cout << (ts.holds ? "  tstab ok\n" : "  tstab FAIL\n");
  if (!ts.holds)
    std::cout << "    at arc of " << ts.owner.id << ": " << ts.from.key() << " -> "
              << ts.to.key() << " branch " << ts.branch << "\n";
  rep["tstab"] = ts.holds;
  ok = ok && ts.holds;

  for (const Pid* who : {&pr.a, &pr.b}) {
    LivenessResult lv = check_liveness_condition(*pp, *who, AenMode::SomeMoveEnabled, &m);
    LivenessResult strict =
        check_liveness_condition(*pp, *who, AenMode::EveryMoveEnabled, &m);
    std::cout << "  liveness condition (" << who->id << "): "
              << (lv.holds ? "ok" : "FAIL")
              << (strict.holds ? "" : "  [strict every-move reading fails]") << "\n";
    rep["liveness_" + who->id] = lv.holds;
    rep["liveness_strict_" + who->id] = strict.holds;
    ok = ok && lv.holds;
  }
  rep["ok"] = ok;
  maybe_write_report(report, rep);
  std::cout << (ok ? "check-pair: ok\n" : "check-pair: FAILED\n");
  return ok ? kPass : kFail;
}

inline int cmd_synthesize(const std::string& file, const std::string& outdir, bool dot,
                          const std::string& report) {
  SystemFile sf = load_system_file(file);
  if (sf.dynamic) throw InputError("synthesize expects a static system");
  SynthesizedProgram prog = synthesize_static(sf.static_program);
  std::filesystem::create_directories(outdir);

  std::ofstream txt(outdir + "/program.txt");
  for (auto& [pid, cp] : prog.processes) {
    txt << "process " << pid.id << "\n";
    for (auto& mv : cp.moves) {
      txt << "  " << mv.from.key() << " -> " << mv.to.key() << "\n";
      for (auto& [j, cmd] : mv.per_neighbor)
        txt << "    [" << j.id << "] " << cmd.str() << "\n";
    }
  }
  txt << "initial states: " << prog.initial_states.size() << "\n";

  if (dot) {
    for (auto& [pr, pp] : sf.static_program.pairs) {
      Structure m = build_pair_structure(pp);
      std::ofstream d(outdir + "/pair_" + pr.a.id + "_" + pr.b.id + ".dot");
      d << to_dot(m, pr.str());
    }
  }
  nlohmann::json rep;
  rep["command"] = "synthesize";
  rep["processes"] = prog.processes.size();
  rep["elements"] = prog.stats.elements;
  maybe_write_report(report, rep);
  std::cout << "synthesize: " << prog.processes.size() << " composed processes -> " << outdir
            << "\n";
  return kPass;
}

inline int cmd_analyze(const std::string& file, bool dynamic, std::size_t bound,
                       const std::string& report) {
  SystemFile sf = load_system_file(file);
  nlohmann::json rep;
  rep["command"] = "analyze";
  bool ok = true;
  if (!dynamic) {
    if (sf.dynamic) throw InputError("--static analysis expects a static system");
    WfgConditionReport r = check_static_wfg_condition(sf.static_program, default_budget());
    std::cout << "static wait-for-graph condition: " << (r.ok ? "ok" : "FAIL") << " ("
              << r.stars_checked << " star contexts, " << r.states_checked
              << " entered states)\n";
    for (auto& v : r.violations) std::cout << "  " << v << "\n";
    rep["ok"] = r.ok;
    rep["violations"] = r.violations;
    ok = r.ok;
  } else {
    DynamicContext ctx(sf.dynamic_spec);
    DynWfgReport r = check_dynamic_wfg_condition(ctx, bound);
    std::cout << "dynamic wait-for-graph condition: " << (r.ok ? "ok" : "FAIL") << " ("
              << r.configurations << " configurations, " << r.star_instances
              << " star instances" << (r.bounded ? ", bounded" : "") << ")\n";
    for (auto& v : r.violations) std::cout << "  " << v << "\n";
    rep["ok"] = r.ok;
    rep["violations"] = r.violations;
    rep["configurations"] = r.configurations;
    rep["bounded"] = r.bounded;
    ok = r.ok;
  }
  maybe_write_report(report, rep);
  return ok ? kPass : kFail;
}

inline int cmd_oracle(const std::string& file, std::size_t max_states,
                      const std::string& report) {
  SystemFile sf = load_system_file(file);
  if (sf.dynamic) throw InputError("oracle expects a static system");
  const StaticProgram& sp = sf.static_program;
  nlohmann::json rep;
  rep["command"] = "oracle";
  bool ok = true;

  Structure m = build_product_structure(sp, all_pairs(sp), max_states);
  std::cout << "product: " << m.n_states() << " states, " << m.transitions.size()
            << " transitions\n";
  rep["states"] = m.n_states();

  MappingReport mr = verify_transition_mapping(sp, m);
  std::cout << "transition mapping: " << (mr.ok() ? "ok" : "FAIL") << " ("
            << mr.transitions_checked << " transitions)\n";
  for (auto& v : mr.violations) std::cout << "  " << v << "\n";
  rep["transition_mapping"] = mr.ok();
  ok = ok && mr.ok();

  // state mapping: every reachable product state projects into each pair
  bool state_map_ok = true;
  std::map<PidPair, Structure> pair_structs;
  for (auto& [pr, pp] : sp.pairs) pair_structs.emplace(pr, build_pair_structure(pp));
  for (std::size_t s = 0; s < m.n_states() && state_map_ok; ++s)
    for (auto& [pr, pp] : sp.pairs)
      if (!pair_structs.at(pr).find(project_pair(m.states[s], pp))) {
        state_map_ok = false;
        break;
      }
  std::cout << "state mapping: " << (state_map_ok ? "ok" : "FAIL") << "\n";
  rep["state_mapping"] = state_map_ok;
  ok = ok && state_map_ok;

  // deadlock freedom: AG EX true over reachable states
  bool agex = true;
  for (std::size_t s = 0; s < m.n_states(); ++s)
    if (m.is_deadlock(s)) agex = false;
  std::cout << "AG EX true: " << (agex ? "ok" : "FAIL") << "\n";
  rep["ag_ex_true"] = agex;
  ok = ok && agex;

  // large-model safety cross-check: AG-rooted closure members that hold in
  // the pair projection must propositionally hold in the product state
  bool lm_ok = true;
  std::size_t lm_checked = 0;
  for (auto& [pr, fs] : sf.pair_properties) {
    const PairProgram& pp = sp.pairs.at(pr);
    const Structure& mij = pair_structs.at(pr);
    for (auto& spec : fs) {
      Labeling lab = check(mij, spec, Fairness::WeakProcess);
      for (auto& g : closure(spec)) {
        if (g->kind != Formula::Kind::AG) continue;
        FormulaPtr content = propositional_content(g->kids[0]);
        Labeling content_lab = check(m, content);
        for (std::size_t s = 0; s < m.n_states(); ++s) {
          auto sid = mij.find(project_pair(m.states[s], pp));
          if (!sid || !lab.holds(g, *sid)) continue;
          ++lm_checked;
          if (!content_lab.holds(content, s)) {
            lm_ok = false;
            std::cout << "  large-model violation: " << formula_str(g) << " at "
                      << m.states[s].key() << "\n";
          }
        }
      }
    }
  }
  std::cout << "large-model safety cross-check: " << (lm_ok ? "ok" : "FAIL") << " ("
            << lm_checked << " state/formula pairs)\n";
  rep["large_model"] = lm_ok;
  ok = ok && lm_ok;

  rep["ok"] = ok;
  maybe_write_report(report, rep);
  return ok ? kPass : kFail;
}

inline int cmd_simulate(const std::string& file, std::uint64_t seed, std::size_t steps,
                        const std::string& trace_out, const std::string& report) {
  SystemFile sf = load_system_file(file);
  DynamicContext ctx(sf.dynamic_spec);
  nlohmann::json rep;
  rep["command"] = "simulate";
  rep["seed"] = seed;
  try {
    Trace tr = simulate(ctx, seed, {steps, true});
    if (!trace_out.empty()) {
      std::ofstream os(trace_out);
      write_trace(os, tr);
    }
    std::cout << "simulate: " << tr.steps.size() << " steps"
              << (tr.quiescent ? ", quiescent" : "") << ", max enabled streak "
              << tr.max_enabled_streak << "\n";
    rep["steps"] = tr.steps.size();
    rep["quiescent"] = tr.quiescent;
    bool ok = true;
    rep["trace_props"] = nlohmann::json::array();
    for (auto& r : check_trace(tr, sf.trace_properties)) {
      std::cout << "  " << (r.pass ? "ok:   " : "FAIL: ") << r.name;
      if (!r.pass) std::cout << " at step " << r.violation_index;
      std::cout << "\n";
      nlohmann::json jr;
      jr["name"] = r.name;
      jr["pass"] = r.pass;
      rep["trace_props"].push_back(jr);
      ok = ok && r.pass;
    }
    rep["ok"] = ok;
    maybe_write_report(report, rep);
    return ok ? kPass : kFail;
  } catch (const DeadlockReached& dl) {
    std::cout << "simulate: DEADLOCK\n" << dl.wfg_dot;
    rep["ok"] = false;
    rep["deadlock"] = true;
    maybe_write_report(report, rep);
    return kFail;
  }
}

inline int cmd_run_lowatom(const std::string& file, std::uint64_t seed,
                           const std::string& mode, const std::string& lin_out,
                           const std::string& report) {
  SystemFile sf = load_system_file(file);
  DynamicContext ctx(sf.dynamic_spec);
  // refuse non-TSTAB inputs up front: polling is only sound for stable guards
  for (auto& e : sf.dynamic_spec.universe) {
    TstabResult ts = check_tstab(e.program);
    if (!ts.holds) {
      std::cout << "run-lowatom: refused, guard not temporarily stable in " << e.name()
                << " (arc of " << ts.owner.id << ")\n";
      return kInputError;
    }
  }
  RunResult rr;
  if (mode == "stepper") {
    rr = run_stepper(ctx, seed);
  } else if (mode == "free") {
    rr = run_free(ctx, seed);
  } else {
    throw InputError("--agents-mode must be stepper or free");
  }
  if (!lin_out.empty()) {
    std::ofstream os(lin_out);
    write_lin(os, rr.records);
  }
  ReplayVerdict v = replay_linearization(ctx, rr.initial, rr.records);
  std::cout << "run-lowatom: " << rr.records.size() << " records"
            << (rr.quiescent ? ", quiescent" : "") << ", replay "
            << (v.valid ? "valid" : "INVALID") << "\n";
  if (!v.valid)
    std::cout << "  at record " << v.failed_index << ": " << v.reason << "\n";
  nlohmann::json rep;
  rep["command"] = "run-lowatom";
  rep["records"] = rr.records.size();
  rep["quiescent"] = rr.quiescent;
  rep["replay_valid"] = v.valid;
  maybe_write_report(report, rep);
  return v.valid ? kPass : kFail;
}

// ---------------------------------------------------------------------------
// Generators

inline SystemFile twophase_system(std::size_t n) {
  TwoPhase tp = gen_two_phase(n);
  SystemFile sf;
  sf.name = "twophase-" + std::to_string(n);
  sf.dynamic = false;
  sf.static_program = tp.program;
  sf.dynamic_spec = to_dynamic(sf.static_program);
  sf.pair_properties = tp.properties;
  // trace-level rendering of the decision properties
  auto cm = [&](std::size_t i) { return Formula::p(Pid("p" + std::to_string(i)), "cm"); };
  auto ab = [&](std::size_t i) { return Formula::p(Pid("p" + std::to_string(i)), "ab"); };
  sf.trace_properties.push_back({TraceProp::Kind::LeadsToBounded, "decision reached",
                                 Formula::truth(), Formula::or_({cm(0), ab(0)}), SIZE_MAX});
  for (std::size_t i = 0; i < n; ++i) {
    sf.trace_properties.push_back(
        {TraceProp::Kind::Invariant, "no dual decision p" + std::to_string(i),
         Formula::or_({Formula::not_(cm(i)), Formula::not_(ab(i))}), nullptr, 0});
    sf.trace_properties.push_back({TraceProp::Kind::Absorption,
                                   "commit absorbs p" + std::to_string(i), cm(i), nullptr, 0});
    if (i > 0) {
      sf.trace_properties.push_back({TraceProp::Kind::LeadsToBounded,
                                     "commit relays to p" + std::to_string(i), cm(0), cm(i),
                                     SIZE_MAX});
      sf.trace_properties.push_back({TraceProp::Kind::LeadsToBounded,
                                     "abort relays to p" + std::to_string(i), ab(0), ab(i),
                                     SIZE_MAX});
    }
  }
  return sf;
}

inline SystemFile esds_system(const EsdsScenario& scn) {
  Esds esds = gen_esds(scn);
  SystemFile sf;
  sf.name = "esds";
  sf.dynamic = true;
  sf.dynamic_spec = std::move(esds.spec);
  sf.pair_properties = esds.pair_properties;
  sf.trace_properties = esds.trace_properties;
  return sf;
}

inline int cmd_gen_twophase(std::size_t n, const std::string& out) {
  SystemFile sf = twophase_system(n);
  nlohmann::json j = save_system(sf);
  std::ofstream os(out);
  os << j.dump(2) << "\n";
  std::cout << "gen twophase: n=" << n << " -> " << out << "\n";
  return kPass;
}

inline int cmd_gen_esds(std::size_t ops, std::size_t replicas, std::size_t clients,
                        const std::string& strict_csv, const std::string& prev_spec,
                        const std::string& out) {
  EsdsScenario scn;
  for (std::size_t r = 1; r <= replicas; ++r) scn.replicas.push_back("r" + std::to_string(r));
  std::set<std::size_t> strict;
  {
    std::stringstream ss(strict_csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) strict.insert(std::stoul(tok));
  }
  std::map<std::size_t, std::vector<std::string>> prev;
  {
    std::stringstream ss(prev_spec);
    std::string entry;
    while (std::getline(ss, entry, ';')) {
      if (entry.empty()) continue;
      auto colon = entry.find(':');
      if (colon == std::string::npos) throw InputError("--prev expects k:i,j;...");
      std::size_t op = std::stoul(entry.substr(0, colon));
      std::stringstream ps(entry.substr(colon + 1));
      std::string p;
      while (std::getline(ps, p, ','))
        if (!p.empty()) prev[op].push_back("x" + p);
    }
  }
  for (std::size_t k = 1; k <= ops; ++k) {
    EsdsOp op;
    op.id = "x" + std::to_string(k);
    op.client = "c" + std::to_string((k - 1) % std::max<std::size_t>(clients, 1) + 1);
    op.replica = "r" + std::to_string((k - 1) % std::max<std::size_t>(replicas, 1) + 1);
    op.strict = strict.count(k) > 0;
    if (prev.count(k)) op.prev = prev[k];
    scn.operations.push_back(std::move(op));
  }
  Esds esds = gen_esds(scn);
  SystemFile sf;
  sf.name = "esds";
  sf.dynamic = true;
  sf.pair_properties = esds.pair_properties;
  sf.trace_properties = esds.trace_properties;
  sf.dynamic_spec = std::move(esds.spec);
  nlohmann::json j = save_system(sf);
  std::map<std::string, Pid> handlers = esds.handler_of;
  j["dynamic"]["rule"] = sysio::rule_to_json("handler-initial", handlers);
  std::ofstream os(out);
  os << j.dump(2) << "\n";
  std::cout << "gen esds: " << ops << " ops, " << replicas << " replicas -> " << out << "\n";
  return kPass;
}

}  // namespace pairsynth::cli
