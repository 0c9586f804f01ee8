#pragma once

// Eventually-serializable data service corpus. Each operation x gets a
// client process <client>:x and one replica process <replica>:x per replica,
// created dynamically as the client issues x. The handler replica receives x
// from the client, performs it after the client-specified predecessors, and
// stabilizes once every replica has performed it; a strict operation sends
// its response only after global stability, a non-strict one may send
// straight from done.
//
// Replica progress propositions persist (dn, st, snt stay true once
// reached), so the section's safety implications read off directly; wt is
// the transient received-and-unperformed flag. The ordering labels lb/val
// are underlying data: they ride on traces as annotations and never appear
// in guards.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pairsynth/dynamic.hpp"
#include "pairsynth/formula.hpp"

namespace pairsynth {

struct EsdsOp {
  std::string id;                  // operation token, unique
  std::string client;              // issuing client
  std::string replica;             // handling replica
  std::vector<std::string> prev;   // earlier operation ids that must precede
  bool strict = false;
};

struct EsdsScenario {
  std::vector<EsdsOp> operations;          // creation order
  std::vector<std::string> replicas;       // initially known replicas (may grow)
};

struct Esds {
  DynamicSpec spec;
  std::map<PidPair, std::vector<FormulaPtr>> pair_properties;
  std::vector<TraceProp> trace_properties;
  std::map<std::string, std::vector<std::string>> replicas_at_creation;  // op -> replicas
  std::map<std::string, Pid> handler_of;  // universe entry -> handler process

  static Pid client_pid(const EsdsOp& op) { return Pid(op.client + ":" + op.id); }
  static Pid replica_pid(const std::string& r, const std::string& op) {
    return Pid(r + ":" + op);
  }
};

namespace esds_detail {

inline LocalState rstate(const Pid& owner, bool in, bool wt, bool dn, bool st, bool snt) {
  LocalState s;
  s.owner = owner;
  s.assign = {{"in", in}, {"wt", wt}, {"dn", dn}, {"st", st}, {"snt", snt}};
  return s;
}

struct ReplicaStates {
  LocalState in, wt, dn, st, stsnt, dnsnt;
};

inline ReplicaStates replica_states(const Pid& owner) {
  ReplicaStates r;
  r.in = rstate(owner, true, false, false, false, false);
  r.wt = rstate(owner, false, true, false, false, false);
  r.dn = rstate(owner, false, false, true, false, false);
  r.st = rstate(owner, false, false, true, true, false);
  r.stsnt = rstate(owner, false, false, true, true, true);
  r.dnsnt = rstate(owner, false, false, true, false, true);
  return r;
}

struct ReplicaGuards {
  GuardPtr in_wt, wt_dn, dn_st, st_stsnt;
  GuardPtr dn_dnsnt, dnsnt_stsnt;  // non-strict branch only
};

inline ReplicaGuards all_true() {
  auto t = GuardExpr::truth();
  return {t, t, t, t, t, t};
}

inline SyncSkeleton replica_skeleton(const Pid& me, const Pid& peer, bool strict,
                                     const ReplicaGuards& g) {
  SyncSkeleton sk;
  sk.owner = me;
  sk.peer = peer;
  ReplicaStates rs = replica_states(me);
  sk.states = {rs.in, rs.wt, rs.dn, rs.st, rs.stsnt};
  sk.initials = {rs.in};
  sk.state_names = {{rs.in.key(), "in"},   {rs.wt.key(), "wt"},       {rs.dn.key(), "dn"},
                    {rs.st.key(), "st"},   {rs.stsnt.key(), "st.snt"}};
  sk.arcs = {make_arc(rs.in, rs.wt, g.in_wt), make_arc(rs.wt, rs.dn, g.wt_dn),
             make_arc(rs.dn, rs.st, g.dn_st),
             make_arc(rs.st, rs.stsnt, g.st_stsnt),
             make_arc(rs.stsnt, rs.stsnt, GuardExpr::truth())};
  if (!strict) {
    sk.states.push_back(rs.dnsnt);
    sk.state_names[rs.dnsnt.key()] = "dn.snt";
    sk.arcs.push_back(make_arc(rs.dn, rs.dnsnt, g.dn_dnsnt));
    sk.arcs.push_back(make_arc(rs.dnsnt, rs.stsnt, g.dnsnt_stsnt));
  }
  return sk;
}

inline SyncSkeleton client_skeleton(const Pid& me, const Pid& handler) {
  SyncSkeleton sk;
  sk.owner = me;
  sk.peer = handler;
  LocalState in, wt, dn;
  in.owner = wt.owner = dn.owner = me;
  in.assign = {{"in", true}, {"wt", false}, {"dn", false}};
  wt.assign = {{"in", false}, {"wt", true}, {"dn", false}};
  dn.assign = {{"in", false}, {"wt", false}, {"dn", true}};
  sk.states = {in, wt, dn};
  sk.initials = {in};
  sk.state_names = {{in.key(), "in"}, {wt.key(), "wt"}, {dn.key(), "dn"}};
  sk.arcs = {make_arc(in, wt, GuardExpr::truth()),
             make_arc(wt, dn, GuardExpr::mk_prop({handler, "snt"})),
             make_arc(dn, dn, GuardExpr::truth())};
  return sk;
}

}  // namespace esds_detail

inline Esds gen_esds(const EsdsScenario& scn) {
  using F = Formula;
  namespace ed = esds_detail;
  Esds out;

  // scenario invariants
  std::map<std::string, const EsdsOp*> by_id;
  for (auto& op : scn.operations) {
    if (by_id.count(op.id)) throw InputError("duplicate operation id " + op.id);
    for (auto& p : op.prev)
      if (by_id.count(p) == 0)
        throw InputError("operation " + op.id + " lists unknown or later prev " + p);
    by_id[op.id] = &op;
  }

  auto prop = [](const Pid& p, const std::string& n) { return GuardExpr::mk_prop({p, n}); };
  auto fprop = [](const Pid& p, const std::string& n) { return Formula::p(p, n); };

  // An operation's pair-programs must all be installed before its handler
  // process makes a move, so the creation protocol always finds a join state
  // (the handler component of every new pair is still initial). The rule
  // enforces exactly that.

  std::vector<std::string> replicas = scn.replicas;
  auto known = [&](const std::string& r) {
    return std::find(replicas.begin(), replicas.end(), r) != replicas.end();
  };

  std::size_t step = 0;
  for (auto& op : scn.operations) {
    if (!known(op.replica)) replicas.push_back(op.replica);  // grows at run time
    out.replicas_at_creation[op.id] = replicas;

    Pid c = Esds::client_pid(op);
    Pid r = Esds::replica_pid(op.replica, op.id);
    std::size_t batch = 0;

    auto add_entry = [&](UniverseEntry e, std::vector<FormulaPtr> props_list) {
      out.pair_properties[e.spec.pair] = props_list;
      e.spec.spec = props_list.size() == 1 ? props_list[0] : F::and_(props_list);
      out.spec.schedule.push_back({step, e.name()});
      out.handler_of[e.name()] = r;
      out.spec.universe.push_back(std::move(e));
      ++batch;
    };

    // client-replica pair
    {
      UniverseEntry e;
      e.spec.pair = PidPair(c, r);
      e.program.i = c;
      e.program.j = r;
      e.program.skel_i = ed::client_skeleton(c, r);
      ed::ReplicaGuards g = ed::all_true();
      g.in_wt = prop(c, "wt");
      e.program.skel_j = ed::replica_skeleton(r, c, op.strict, g);
      std::vector<FormulaPtr> props_list{
          F::ag(F::implies(fprop(r, "wt"), fprop(c, "wt"))),
          F::leads_weak(fprop(c, "wt"), fprop(r, "wt")),
          F::ag(F::implies(fprop(c, "wt"), F::af(fprop(c, "dn")))),
          F::ag(F::implies(fprop(c, "dn"), F::ag(fprop(c, "dn")))),
          // client local structure
          F::ag(F::implies(fprop(c, "in"),
                           F::and_({F::ax(c, fprop(c, "wt")), F::ex(c, fprop(c, "wt"))}))),
          F::ag(F::implies(fprop(c, "wt"), F::ax(c, fprop(c, "dn")))),
          F::ag(F::implies(fprop(c, "dn"),
                           F::and_({F::ax(c, fprop(c, "dn")), F::ex(c, fprop(c, "dn"))}))),
          F::ag(F::and_(
              {F::implies(fprop(c, "in"),
                          F::and_({F::not_(fprop(c, "wt")), F::not_(fprop(c, "dn"))})),
               F::implies(fprop(c, "wt"),
                          F::and_({F::not_(fprop(c, "in")), F::not_(fprop(c, "dn"))})),
               F::implies(fprop(c, "dn"),
                          F::and_({F::not_(fprop(c, "in")), F::not_(fprop(c, "wt"))})),
               F::or_({fprop(c, "in"), fprop(c, "wt"), fprop(c, "dn")})}))};
      add_entry(std::move(e), std::move(props_list));
    }

    // client-specified constraints: x after every x' in prev
    for (auto& prev_id : op.prev) {
      const EsdsOp& prev_op = *by_id.at(prev_id);
      Pid rp = Esds::replica_pid(prev_op.replica, prev_op.id);
      UniverseEntry e;
      e.spec.pair = PidPair(r, rp);
      e.program.i = r;
      e.program.j = rp;
      ed::ReplicaGuards g = ed::all_true();
      g.wt_dn = prop(rp, "dn");
      e.program.skel_i = ed::replica_skeleton(r, rp, op.strict, g);
      e.program.skel_j = ed::replica_skeleton(rp, r, prev_op.strict, ed::all_true());
      std::vector<FormulaPtr> props_list{
          F::ag(F::implies(fprop(r, "dn"), fprop(rp, "dn"))),
          F::ag(F::implies(fprop(r, "dn"), F::ag(fprop(r, "dn")))),
          F::ag(F::implies(fprop(rp, "dn"), F::ag(fprop(rp, "dn"))))};
      add_entry(std::move(e), std::move(props_list));
    }

    // strictness and eventual stabilization against every other replica
    for (auto& other : replicas) {
      if (other == op.replica) continue;
      Pid i = Esds::replica_pid(other, op.id);
      UniverseEntry e;
      e.spec.pair = PidPair(r, i);
      e.program.i = r;
      e.program.j = i;
      ed::ReplicaGuards gr = ed::all_true();
      gr.dn_st = prop(i, "dn");
      if (op.strict) gr.st_stsnt = prop(i, "st");
      if (!op.strict) gr.dnsnt_stsnt = prop(i, "dn");
      e.program.skel_i = ed::replica_skeleton(r, i, op.strict, gr);
      // The peer process exists exactly because x reached the service, so
      // its receive step is unguarded; ordering is enforced at perform,
      // stabilize and send.
      ed::ReplicaGuards gi = ed::all_true();
      gi.dn_st = prop(r, "st");
      gi.st_stsnt = prop(r, "snt");
      if (!op.strict) {
        gi.dn_dnsnt = prop(r, "snt");
        gi.dnsnt_stsnt = prop(r, "st");
      }
      e.program.skel_j = ed::replica_skeleton(i, r, op.strict, gi);
      std::vector<FormulaPtr> props_list{
          F::ag(F::implies(fprop(r, "wt"), F::af(fprop(i, "st")))),
          F::ag(F::implies(fprop(r, "wt"), F::af(fprop(r, "st")))),
          F::ag(F::implies(fprop(r, "st"), F::ag(fprop(r, "st")))),
          F::ag(F::implies(fprop(r, "snt"), F::ag(fprop(r, "snt"))))};
      if (op.strict)
        props_list.insert(props_list.begin(),
                          F::ag(F::implies(fprop(r, "snt"), fprop(i, "st"))));
      add_entry(std::move(e), std::move(props_list));
    }

    // underlying data, shown on traces only
    ed::ReplicaStates rs = ed::replica_states(r);
    out.spec.move_annotations[r.id + "|" + rs.wt.key() + "|" + rs.dn.key()] =
        "lb_" + op.replica + "(" + op.id + ") := next(lb_" + op.replica + ")";
    out.spec.move_annotations[r.id + "|" + rs.st.key() + "|" + rs.stsnt.key()] =
        "v := val(" + op.id + ", lb_" + op.replica + ")";
    if (!op.strict)
      out.spec.move_annotations[r.id + "|" + rs.dn.key() + "|" + rs.dnsnt.key()] =
          "v := val(" + op.id + ", lb_" + op.replica + ")";

    out.spec.max_consecutive_creates = std::max(out.spec.max_consecutive_creates, batch);
    ++step;
  }

  auto handlers = out.handler_of;
  out.spec.state_rule = [handlers](const Configuration& cfg, const UniverseEntry& e) {
    auto it = handlers.find(e.name());
    if (it == handlers.end()) return true;
    return !cfg.alive(it->second) || cfg.local(it->second).value("in");
  };

  // trace-level acceptance properties
  for (auto& op : scn.operations) {
    Pid c = Esds::client_pid(op);
    Pid r = Esds::replica_pid(op.replica, op.id);
    auto fp = [](const Pid& p, const std::string& n) { return Formula::p(p, n); };
    out.trace_properties.push_back(
        {TraceProp::Kind::LeadsToBounded, op.id + " reaches dn", fp(c, "in"),
         fp(c, "dn"), SIZE_MAX});
    for (auto& rep : out.replicas_at_creation[op.id]) {
      Pid i = Esds::replica_pid(rep, op.id);
      out.trace_properties.push_back(
          {TraceProp::Kind::LeadsToBounded, op.id + " stabilizes at " + rep,
           fp(c, "in"), fp(i, "st"), SIZE_MAX});
      if (op.strict && !(i == r))
        out.trace_properties.push_back({TraceProp::Kind::Precedence,
                                        op.id + " strict: st at " + rep + " before snt",
                                        fp(i, "st"), fp(r, "snt"), 0});
    }
    for (auto& prev_id : op.prev) {
      const EsdsOp* prev_op = nullptr;
      for (auto& o : scn.operations)
        if (o.id == prev_id) prev_op = &o;
      Pid rp = Esds::replica_pid(prev_op->replica, prev_op->id);
      out.trace_properties.push_back({TraceProp::Kind::Precedence,
                                      prev_id + " done before " + op.id, fp(rp, "dn"),
                                      fp(r, "dn"), 0});
    }
    out.trace_properties.push_back(
        {TraceProp::Kind::Absorption, op.id + " done stays done", fp(r, "dn"), nullptr, 0});
  }
  return out;
}

}  // namespace pairsynth
