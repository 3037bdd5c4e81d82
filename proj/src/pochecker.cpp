#include "ubdb/pochecker.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ubdb/parser.hpp"

namespace ubdb {

const char* po_kind_name(POKind k) {
  switch (k) {
    case POKind::INV: return "INV";
    case POKind::GRD: return "GRD";
    case POKind::SIM: return "SIM";
    case POKind::GLU: return "GLU";
    case POKind::FEAS: return "FEAS";
  }
  return "?";
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::HoldsByConstruction: return "holds-by-construction";
    case Verdict::Violated: return "violated";
    case Verdict::ScopeExhausted: return "scope-exhausted";
  }
  return "?";
}

std::string ProofObligation::describe() const {
  std::string s = machine;
  if (!abstract_machine.empty()) s = abstract_machine + "->" + machine;
  s += "/" + event;
  if (!invariant_label.empty()) s += "/" + invariant_label;
  s += "/";
  s += po_kind_name(kind);
  return s;
}

Scope default_scope(const ResolvedChain& chain) {
  Scope s;
  s.bounds.resize(chain.carriers.size(), 2);
  for (size_t i = 0; i < chain.carriers.size(); ++i)
    if (chain.carrier_is_value[i]) s.bounds[i] = 3;
  return s;
}

// ---------------------------------------------------------------------------
// Variable read/write sets
// ---------------------------------------------------------------------------

namespace {

void collect_slots(const Expr& e, std::set<int>& out) {
  if (e.kind == Expr::Kind::Var) out.insert(e.index);
  for (const auto& k : e.kids) collect_slots(*k, out);
}

void collect_slots(const Pred& p, std::set<int>& out) {
  for (const auto& e : p.exprs) collect_slots(*e, out);
  for (const auto& q : p.preds) collect_slots(*q, out);
  for (const auto& b : p.binders) collect_slots(*b.typing, out);
}

std::set<int> event_reads(const REvent& re) {
  std::set<int> out;
  for (const auto& p : re.ev.params) collect_slots(*p.typing, out);
  for (const auto& g : re.ev.guards) collect_slots(*g.pred, out);
  return out;
}

std::set<int> event_writes(const RMachine& m, const REvent& re) {
  std::set<int> out;
  for (const auto& a : re.ev.actions) {
    int vi = m.find_var(a.target);
    if (vi >= 0) out.insert(vi);
  }
  return out;
}

// Cone-of-influence closure. Slicing is exact: retained events (those writing
// a cone variable) read only cone variables in their guards, parameter
// typings and cone-targeting action expressions, so the sliced system has
// exactly the projected reachable states of the full one.
struct Cone {
  std::vector<int> slots;            // sorted
  std::vector<int> retained_events;  // machine order
};

Cone cone_closure(const RMachine& m, const std::set<int>& seed,
                  const std::set<int>& forced_events) {
  std::set<int> cone = seed;
  std::set<int> retained;
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t ei = 0; ei < m.events.size(); ++ei) {
      const REvent& re = m.events[ei];
      bool keep = forced_events.count(static_cast<int>(ei)) > 0;
      if (!keep)
        for (const auto& a : re.ev.actions) {
          int vi = m.find_var(a.target);
          if (vi >= 0 && cone.count(vi)) keep = true;
        }
      if (!keep) continue;
      retained.insert(static_cast<int>(ei));
      std::set<int> reads = event_reads(re);
      for (const auto& a : re.ev.actions) {
        int vi = m.find_var(a.target);
        if (vi >= 0 && cone.count(vi)) collect_slots(*a.value, reads);
      }
      for (int v : reads)
        if (cone.insert(v).second) changed = true;
    }
  }
  Cone c;
  c.slots.assign(cone.begin(), cone.end());
  c.retained_events.assign(retained.begin(), retained.end());
  return c;
}

// ---------------------------------------------------------------------------
// Sliced exploration, cached by semantic fingerprint
// ---------------------------------------------------------------------------

struct Exploration {
  std::vector<std::string> cone_names;   // variable names, slot-sorted
  std::vector<std::string> event_names;  // retained events, machine order
  struct Entry {
    int parent = -1;
    uint16_t event = 0;
    std::string binding;  // serialized values, sorted-parameter order
  };
  struct StateRec {
    std::string key;
    std::vector<Entry> entries;  // first edge per incoming event; [0] = discovery
  };
  std::vector<StateRec> states;
  std::vector<char> fired;
  std::vector<std::string> wd_error;  // per event, first well-definedness failure
  std::vector<int> wd_state;
  bool exhausted = false;
  long long transitions = 0;
  double elapsed = 0;
  // invariant verdict memo, keyed by printed predicate: 0 unknown, 1 true,
  // 2 false, 3 well-definedness failure
  std::unordered_map<std::string, std::vector<uint8_t>> pred_memo;
};

std::string scope_fingerprint(const ResolvedChain& chain, const Scope& scope) {
  std::string s;
  for (size_t i = 0; i < chain.carriers.size(); ++i)
    s += chain.carriers[i] + "#" + std::to_string(i) + "=" +
         std::to_string(scope.bound(static_cast<int>(i))) + ";";
  return s;
}

std::string event_fingerprint(const REvent& re, const RMachine& m,
                              const std::set<int>& cone) {
  std::string s = re.ev.name + "(";
  std::vector<const Param*> params;
  for (const auto& p : re.ev.params) params.push_back(&p);
  std::sort(params.begin(), params.end(),
            [](const Param* a, const Param* b) { return a->name < b->name; });
  for (const auto* p : params) s += p->name + ":" + pretty_print(*p->typing) + ",";
  s += ")[";
  for (const auto& g : re.ev.guards) s += pretty_print(*g.pred) + "&";
  s += "]{";
  for (const auto& a : re.ev.actions) {
    int vi = m.find_var(a.target);
    if (vi >= 0 && cone.count(vi)) s += a.target + ":=" + pretty_print(*a.value) + ";";
  }
  s += "}";
  return s;
}

std::string exploration_key(const ResolvedChain& chain, const RMachine& m,
                            const Cone& cone, const Scope& scope, long long budget) {
  std::set<int> cone_set(cone.slots.begin(), cone.slots.end());
  std::string key = scope_fingerprint(chain, scope);
  key += "|budget=" + std::to_string(budget) + "|";
  for (int s : cone.slots) key += m.vars[s].name + ",";
  key += "|";
  for (int ei : cone.retained_events)
    key += event_fingerprint(m.events[ei], m, cone_set) + "\n";
  for (const auto& [n, e] : chain.constants) key += n + "=" + pretty_print(*e) + ";";
  return key;
}

std::mutex g_cache_mutex;
std::map<std::string, std::shared_ptr<Exploration>> g_cache;

std::string serialize_cone(const State& full, const std::vector<int>& slots) {
  std::string out;
  for (int s : slots) serialize_value(full[s], out);
  return out;
}

void fill_cone(State& full, const std::vector<int>& slots, const std::string& key) {
  size_t pos = 0;
  for (int s : slots) full[s] = deserialize_value(key, pos);
}

std::string serialize_binding(const Binding& b) {
  std::string out;
  for (const auto& [n, v] : b) serialize_value(v, out);
  return out;
}

std::shared_ptr<Exploration> explore(const ResolvedChain& chain, const RMachine& m,
                                     const Cone& cone, const Scope& scope,
                                     long long budget) {
  std::string key = exploration_key(chain, m, cone, scope, budget);
  {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    auto it = g_cache.find(key);
    if (it != g_cache.end()) return it->second;
  }

  auto ex = std::make_shared<Exploration>();
  for (int s : cone.slots) ex->cone_names.push_back(m.vars[s].name);
  for (int ei : cone.retained_events) ex->event_names.push_back(m.events[ei].ev.name);
  ex->fired.assign(cone.retained_events.size(), 0);
  ex->wd_error.assign(cone.retained_events.size(), "");
  ex->wd_state.assign(cone.retained_events.size(), -1);

  auto t0 = std::chrono::steady_clock::now();

  State blank(m.vars.size(), Value::empty_set());
  std::unordered_map<std::string, int> index;
  ex->states.push_back({serialize_cone(blank, cone.slots), {}});
  index.emplace(ex->states[0].key, 0);

  for (size_t cur = 0; cur < ex->states.size(); ++cur) {
    State pre = blank;
    fill_cone(pre, cone.slots, ex->states[cur].key);
    for (size_t k = 0; k < cone.retained_events.size(); ++k) {
      const REvent& re = m.events[cone.retained_events[k]];
      EnumerateResult en;
      try {
        en = enumerate_bindings(chain, m, re, pre, scope);
      } catch (const EvalError& err) {
        if (ex->wd_error[k].empty()) {
          ex->wd_error[k] = err.what();
          ex->wd_state[k] = static_cast<int>(cur);
        }
        continue;
      }
      for (const auto& binding : en.bindings) {
        ex->fired[k] = 1;
        ++ex->transitions;
        State post = pre;
        try {
          Env env{&chain, &m, &pre, &binding, &scope};
          std::vector<std::pair<int, Value>> updates;
          for (const auto& a : re.ev.actions) {
            int vi = m.find_var(a.target);
            if (vi >= 0 &&
                std::binary_search(cone.slots.begin(), cone.slots.end(), vi))
              updates.emplace_back(vi, eval(*a.value, env));
          }
          for (auto& [vi, v] : updates) post[vi] = std::move(v);
        } catch (const EvalError& err) {
          if (ex->wd_error[k].empty()) {
            ex->wd_error[k] = err.what();
            ex->wd_state[k] = static_cast<int>(cur);
          }
          continue;
        }
        std::string pkey = serialize_cone(post, cone.slots);
        auto [it, fresh] = index.emplace(pkey, static_cast<int>(ex->states.size()));
        if (fresh) ex->states.push_back({std::move(pkey), {}});
        auto& rec = ex->states[it->second];
        bool seen = false;
        for (const auto& en2 : rec.entries)
          if (en2.event == k) { seen = true; break; }
        if (!seen)
          rec.entries.push_back({static_cast<int>(cur), static_cast<uint16_t>(k),
                                 serialize_binding(binding)});
      }
    }
    if (static_cast<long long>(ex->states.size()) > budget) {
      ex->exhausted = true;
      break;
    }
  }

  ex->elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  g_cache.emplace(std::move(key), ex);
  return ex;
}

// Rebuild one full-size state (non-cone slots empty) for predicate evaluation.
State state_at(const Exploration& ex, const RMachine& m, const std::vector<int>& slots,
               int idx) {
  State s(m.vars.size(), Value::empty_set());
  fill_cone(s, slots, ex.states[idx].key);
  return s;
}

Trace trace_to(const Exploration& ex, const RMachine& m,
               const std::vector<int>& retained, int state_idx,
               const Exploration::Entry* final_edge) {
  std::vector<const Exploration::Entry*> edges;
  int cur = state_idx;
  if (final_edge) {
    edges.push_back(final_edge);
    cur = final_edge->parent;
  }
  while (cur > 0) {
    edges.push_back(&ex.states[cur].entries[0]);
    cur = edges.back()->parent;
  }
  std::reverse(edges.begin(), edges.end());
  Trace t;
  for (const auto* e : edges) {
    const REvent& re = m.events[retained[e->event]];
    std::vector<std::string> names;
    for (const auto& p : re.ev.params) names.push_back(p.name);
    std::sort(names.begin(), names.end());
    TraceStep step;
    step.event = re.ev.name;
    size_t pos = 0;
    for (const auto& n : names)
      step.binding.emplace_back(n, deserialize_value(e->binding, pos));
    t.steps.push_back(std::move(step));
  }
  return t;
}

uint8_t memo_eval(Exploration& ex, const ResolvedChain& chain, const RMachine& m,
                  const std::vector<int>& slots, const PredPtr& pred,
                  const std::string& pkey, int idx, const Scope& scope) {
  auto& memo = ex.pred_memo[pkey];
  if (memo.empty()) memo.assign(ex.states.size(), 0);
  if (memo[idx]) return memo[idx];
  State s = state_at(ex, m, slots, idx);
  uint8_t r;
  try {
    Env env{&chain, &m, &s, nullptr, &scope};
    r = eval_predicate(*pred, env) ? 1 : 2;
  } catch (const EvalError&) {
    r = 3;
  }
  memo[idx] = r;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Obligation generation
// ---------------------------------------------------------------------------

std::vector<ProofObligation> generate_obligations(const ResolvedChain& chain) {
  std::vector<ProofObligation> out;
  for (const auto& m : chain.machines) {
    for (const auto& re : m.events) {
      for (const auto& inv : m.invariants) {
        if (inv.gluing) continue;
        out.push_back({POKind::INV, m.name, "", re.ev.name, inv.label});
      }
      out.push_back({POKind::FEAS, m.name, "", re.ev.name, ""});
    }
    if (m.refines >= 0) {
      const RMachine& a = chain.machines[m.refines];
      for (const auto& re : m.events) {
        if (re.origin != EventOrigin::New)
          out.push_back({POKind::GRD, m.name, a.name, re.ev.name, ""});
        out.push_back({POKind::SIM, m.name, a.name, re.ev.name, ""});
        for (const auto& inv : m.invariants)
          if (inv.gluing)
            out.push_back({POKind::GLU, m.name, a.name, re.ev.name, inv.label});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Machine-level check: INV + FEAS
// ---------------------------------------------------------------------------

namespace {

bool self_check_inv(const ResolvedChain& chain, const RMachine& m, const Trace& trace,
                    const PredPtr& inv, const Scope& scope) {
  auto states = replay_trace(chain, m.name, trace, scope);
  if (!states || states->empty()) return false;
  try {
    Env env{&chain, &m, &states->back(), nullptr, &scope};
    return !eval_predicate(*inv, env);
  } catch (const EvalError&) {
    return true;  // well-definedness failure reproduced
  }
}

}  // namespace

std::vector<CheckReport> check(const ResolvedChain& chain, const std::string& machine,
                               const CheckOptions& options) {
  std::vector<CheckReport> reports;
  int mi = chain.find_machine(machine);
  if (mi < 0) return reports;
  const RMachine& m = chain.machines[mi];

  for (const auto& re : m.events) {
    std::set<int> writes = event_writes(m, re);
    int eidx = m.find_event(re.ev.name);
    for (const auto& inv : m.invariants) {
      if (inv.gluing) continue;
      CheckReport rep;
      rep.obligation = {POKind::INV, m.name, "", re.ev.name, inv.label};
      std::set<int> ivars;
      collect_slots(*inv.pred, ivars);
      bool relevant = ivars.empty();  // constant predicate: every event can expose it
      for (int v : ivars)
        if (writes.count(v)) relevant = true;
      if (!relevant) {
        rep.verdict = Verdict::HoldsByConstruction;
        rep.detail = "event does not modify the invariant's variables";
        reports.push_back(std::move(rep));
        continue;
      }
      std::set<int> seed = ivars;
      for (int v : event_reads(re)) seed.insert(v);
      Cone cone = cone_closure(m, seed, {eidx});
      auto ex = explore(chain, m, cone, options.scope, options.budget);
      rep.states_explored = static_cast<long long>(ex->states.size());
      rep.elapsed_seconds = ex->elapsed;
      int k = -1;
      for (size_t j = 0; j < ex->event_names.size(); ++j)
        if (ex->event_names[j] == re.ev.name) k = static_cast<int>(j);
      std::string pkey = pretty_print(*inv.pred);
      bool violated = false;
      if (k >= 0 && !ex->wd_error[k].empty()) {
        rep.verdict = Verdict::Violated;
        rep.detail = "well-definedness failure: " + ex->wd_error[k];
        rep.counterexample =
            trace_to(*ex, m, cone.retained_events, ex->wd_state[k], nullptr);
        violated = true;
      } else if (k >= 0) {
        for (size_t si = 0; si < ex->states.size() && !violated; ++si) {
          const Exploration::Entry* edge = nullptr;
          for (const auto& en : ex->states[si].entries)
            if (en.event == k) edge = &en;
          if (!edge) continue;
          uint8_t r = memo_eval(*ex, chain, m, cone.slots, inv.pred, pkey,
                                static_cast<int>(si), options.scope);
          if (r == 2 || r == 3) {
            rep.verdict = Verdict::Violated;
            Trace t = trace_to(*ex, m, cone.retained_events,
                               static_cast<int>(si), edge);
            if (r == 3) rep.detail = "well-definedness failure in invariant";
            if (!self_check_inv(chain, m, t, inv.pred, options.scope))
              rep.detail += (rep.detail.empty() ? "" : "; ") + std::string("replay-mismatch");
            rep.counterexample = std::move(t);
            violated = true;
          }
        }
      }
      if (!violated)
        rep.verdict = ex->exhausted ? Verdict::ScopeExhausted : Verdict::Holds;
      reports.push_back(std::move(rep));
    }

    CheckReport feas;
    feas.obligation = {POKind::FEAS, m.name, "", re.ev.name, ""};
    std::set<int> seed = event_reads(re);
    Cone cone = cone_closure(m, seed, {eidx});
    auto ex = explore(chain, m, cone, options.scope, options.budget);
    feas.states_explored = static_cast<long long>(ex->states.size());
    feas.elapsed_seconds = ex->elapsed;
    int k = -1;
    for (size_t j = 0; j < ex->event_names.size(); ++j)
      if (ex->event_names[j] == re.ev.name) k = static_cast<int>(j);
    if (k >= 0 && ex->fired[k]) {
      feas.verdict = Verdict::Holds;
    } else if (ex->exhausted) {
      feas.verdict = Verdict::ScopeExhausted;
    } else {
      feas.verdict = Verdict::Violated;
      feas.counterexample = Trace{};
      feas.detail = "never enabled in " + std::to_string(ex->states.size()) +
                    " reachable states";
    }
    reports.push_back(std::move(feas));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Refinement check: joint exploration
// ---------------------------------------------------------------------------

namespace {

struct JointObligation {
  CheckReport* report;
  int event = -1;      // concrete event index; -1 = any (unused)
  PredPtr glu;         // GLU only
};

}  // namespace

std::vector<CheckReport> check_refinement(const ResolvedChain& chain,
                                          const std::string& abstract_machine,
                                          const std::string& concrete_machine,
                                          const CheckOptions& options) {
  std::vector<CheckReport> reports;
  int ai = chain.find_machine(abstract_machine);
  int ci = chain.find_machine(concrete_machine);
  if (ai < 0 || ci < 0) return reports;
  const RMachine& A = chain.machines[ai];
  const RMachine& C = chain.machines[ci];
  if (C.refines != ai) return reports;

  // abstract slot -> joint slot (concrete slot, or ghost slot past vars)
  std::vector<int> a2j(A.vars.size(), -1);
  for (size_t i = 0; i < A.vars.size(); ++i) a2j[i] = C.find_var(A.vars[i].name);

  std::vector<const RInvariant*> gluing;
  for (const auto& inv : C.invariants)
    if (inv.gluing) gluing.push_back(&inv);

  // Decide statically which obligations need dynamic discharge. Reports are
  // referenced by index; the vector grows during setup.
  struct Dyn {
    int grd = -1;
    int sim = -1;
    std::vector<std::pair<int, const RInvariant*>> glu;
  };
  std::vector<Dyn> dyn(C.events.size());
  bool need_explore = false;

  for (size_t ei = 0; ei < C.events.size(); ++ei) {
    const REvent& re = C.events[ei];
    if (re.origin != EventOrigin::New) {
      CheckReport grd;
      grd.obligation = {POKind::GRD, C.name, A.name, re.ev.name, ""};
      if (re.origin == EventOrigin::Redeclared) {
        dyn[ei].grd = static_cast<int>(reports.size());
        need_explore = true;
      } else {
        grd.verdict = Verdict::HoldsByConstruction;
        grd.detail = "concrete guards include the abstract guards";
      }
      reports.push_back(std::move(grd));
    }
    CheckReport sim;
    sim.obligation = {POKind::SIM, C.name, A.name, re.ev.name, ""};
    bool sim_dynamic;
    if (re.origin == EventOrigin::Redeclared) {
      sim_dynamic = true;
    } else if (re.origin == EventOrigin::New) {
      sim_dynamic = false;
      for (const auto& a : re.ev.actions) {
        int as = -1;
        for (size_t i = 0; i < A.vars.size(); ++i)
          if (A.vars[i].name == a.target) as = static_cast<int>(i);
        if (as >= 0 && a2j[as] >= 0 && a2j[as] < static_cast<int>(C.vars.size()))
          sim_dynamic = true;  // new event writes a retained abstract variable
      }
      if (!sim_dynamic) sim.detail = "refines skip; abstract variables untouched";
    } else {
      sim_dynamic = false;
      sim.detail = "abstract actions are reproduced verbatim";
    }
    if (sim_dynamic) {
      dyn[ei].sim = static_cast<int>(reports.size());
      need_explore = true;
    } else {
      sim.verdict = Verdict::HoldsByConstruction;
    }
    reports.push_back(std::move(sim));
    for (const auto* gi : gluing) {
      CheckReport glu;
      glu.obligation = {POKind::GLU, C.name, A.name, re.ev.name, gi->label};
      dyn[ei].glu.emplace_back(static_cast<int>(reports.size()), gi);
      need_explore = true;
      reports.push_back(std::move(glu));
    }
  }

  if (!need_explore) return reports;

  auto t0 = std::chrono::steady_clock::now();

  // Joint BFS over concrete variables plus ghost slots.
  struct Rec {
    std::string key;
    int parent = -1;
    int event = -1;
    std::string binding;
  };
  std::vector<Rec> states;
  std::unordered_map<std::string, int> index;
  State init = initial_state(C, true);
  {
    std::string k;
    serialize_state(init, k);
    states.push_back({std::move(k), -1, -1, ""});
    index.emplace(states[0].key, 0);
  }
  bool exhausted = false;

  auto build_trace = [&](int idx, int ev, const Binding* b) {
    std::vector<std::tuple<int, std::string>> edges;  // event, binding
    Trace t;
    std::vector<TraceStep> rev;
    if (ev >= 0 && b) {
      TraceStep s;
      s.event = C.events[ev].ev.name;
      s.binding = *b;
      rev.push_back(std::move(s));
    }
    int cur = idx;
    while (cur > 0) {
      const Rec& r = states[cur];
      const REvent& re = C.events[r.event];
      std::vector<std::string> names;
      for (const auto& p : re.ev.params) names.push_back(p.name);
      std::sort(names.begin(), names.end());
      TraceStep s;
      s.event = re.ev.name;
      size_t pos = 0;
      for (const auto& n : names) s.binding.emplace_back(n, deserialize_value(r.binding, pos));
      rev.push_back(std::move(s));
      cur = r.parent;
    }
    std::reverse(rev.begin(), rev.end());
    t.steps = std::move(rev);
    return t;
  };

  long long transitions = 0;
  for (size_t cur = 0; cur < states.size(); ++cur) {
    State pre = deserialize_state(states[cur].key);
    for (size_t ei = 0; ei < C.events.size(); ++ei) {
      const REvent& re = C.events[ei];
      EnumerateResult en;
      try {
        en = enumerate_bindings(chain, C, re, pre, options.scope);
      } catch (const EvalError& err) {
        for (auto& [ri, gi] : dyn[ei].glu) {
          CheckReport& rep = reports[ri];
          if (!rep.counterexample) {
            rep.verdict = Verdict::Violated;
            rep.detail = std::string("well-definedness failure: ") + err.what();
            rep.counterexample = build_trace(static_cast<int>(cur), -1, nullptr);
          }
        }
        continue;
      }
      for (const auto& binding : en.bindings) {
        ++transitions;
        // abstract view of the pre-state
        State astate(A.vars.size(), Value::empty_set());
        for (size_t i = 0; i < A.vars.size(); ++i) astate[i] = pre[a2j[i]];
        const REvent* aev = nullptr;
        if (re.origin != EventOrigin::New && re.abstract_index >= 0)
          aev = &A.events[re.abstract_index];
        Binding ab;
        bool ab_ok = true;
        if (aev) {
          std::vector<std::string> names;
          for (const auto& p : aev->ev.params) names.push_back(p.name);
          std::sort(names.begin(), names.end());
          for (const auto& n : names) {
            const Value* v = nullptr;
            for (const auto& [bn, bv] : binding)
              if (bn == n) v = &bv;
            if (!v) { ab_ok = false; break; }
            ab.emplace_back(n, *v);
          }
        }
        if (dyn[ei].grd >= 0) {
          CheckReport& rep = reports[dyn[ei].grd];
          if (!rep.counterexample) {
            bool ok = ab_ok;
            if (ok)
              try {
                Env env{&chain, &A, &astate, &ab, &options.scope};
                for (const auto& g : aev->ev.guards)
                  if (!eval_predicate(*g.pred, env)) { ok = false; break; }
              } catch (const EvalError&) {
                ok = false;
              }
            if (!ok) {
              rep.verdict = Verdict::Violated;
              rep.detail = ab_ok ? "abstract guard false under concrete guards"
                                 : "abstract parameter missing in concrete event";
              rep.counterexample =
                  build_trace(static_cast<int>(cur), static_cast<int>(ei), &binding);
            }
          }
        }
        State apost = astate;
        bool apost_ok = true;
        if (aev && ab_ok) {
          try {
            apost = apply_event(chain, A, *aev, ab, astate, options.scope);
          } catch (const EvalError&) {
            apost_ok = false;
          }
        }
        State post;
        try {
          post = apply_event(chain, C, re, binding, pre, options.scope);
        } catch (const EvalError& err) {
          for (auto& [ri, gi] : dyn[ei].glu) {
            CheckReport& rep = reports[ri];
            if (!rep.counterexample) {
              rep.verdict = Verdict::Violated;
              rep.detail = std::string("well-definedness failure: ") + err.what();
              rep.counterexample =
                  build_trace(static_cast<int>(cur), static_cast<int>(ei), &binding);
            }
          }
          continue;
        }
        if (dyn[ei].sim >= 0) {
          CheckReport& rep = reports[dyn[ei].sim];
          if (!rep.counterexample) {
            bool ok = apost_ok && ab_ok;
            if (ok)
              for (size_t i = 0; i < A.vars.size(); ++i)
                if (a2j[i] < static_cast<int>(C.vars.size()) &&
                    !(post[a2j[i]] == apost[i]))
                  ok = false;
            if (!ok) {
              rep.verdict = Verdict::Violated;
              rep.detail = "concrete effect diverges from the abstract event";
              rep.counterexample =
                  build_trace(static_cast<int>(cur), static_cast<int>(ei), &binding);
            }
          }
        }
        // ghost slots advance with the abstract event
        for (size_t i = 0; i < A.vars.size(); ++i)
          if (a2j[i] >= static_cast<int>(C.vars.size())) post[a2j[i]] = apost[i];
        for (auto& [ri, gi] : dyn[ei].glu) {
          CheckReport& rep = reports[ri];
          if (rep.counterexample) continue;
          bool ok = true;
          try {
            Env env{&chain, &C, &post, nullptr, &options.scope};
            ok = eval_predicate(*gi->pred, env);
          } catch (const EvalError&) {
            ok = false;
          }
          if (!ok) {
            rep.verdict = Verdict::Violated;
            rep.detail = "gluing invariant false after paired transition";
            rep.counterexample =
                build_trace(static_cast<int>(cur), static_cast<int>(ei), &binding);
          }
        }
        std::string pkey;
        serialize_state(post, pkey);
        auto [it, fresh] = index.emplace(pkey, static_cast<int>(states.size()));
        if (fresh)
          states.push_back({std::move(pkey), static_cast<int>(cur),
                            static_cast<int>(ei), serialize_binding(binding)});
      }
    }
    if (static_cast<long long>(states.size()) > options.budget) {
      exhausted = true;
      break;
    }
  }

  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (auto& rep : reports) {
    if (rep.verdict == Verdict::HoldsByConstruction) continue;
    rep.states_explored = static_cast<long long>(states.size());
    rep.elapsed_seconds = elapsed;
    if (!rep.counterexample && exhausted) rep.verdict = Verdict::ScopeExhausted;
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Enabledness / reachability / replay
// ---------------------------------------------------------------------------

std::vector<CheckReport> check_enabledness(const ResolvedChain& chain,
                                           const CheckOptions& options) {
  std::vector<CheckReport> reports;
  for (const auto& m : chain.machines) {
    auto mreports = check(chain, m.name, options);
    std::vector<CheckReport*> blocked;
    for (auto& r : mreports)
      if (r.obligation.kind == POKind::FEAS) {
        if (r.verdict == Verdict::Violated) blocked.push_back(&r);
        reports.push_back(r);
      }
    if (blocked.size() >= 2) {
      std::string names;
      int ctors = 0;
      for (auto* r : blocked) {
        int ei = m.find_event(r->obligation.event);
        if (ei >= 0 && m.events[ei].ev.kind == EventKind::Constructor) {
          ++ctors;
          names += (names.empty() ? "" : ", ") + r->obligation.event;
        }
      }
      if (ctors >= 2)
        for (auto& r : reports)
          if (r.obligation.machine == m.name && r.verdict == Verdict::Violated &&
              r.obligation.kind == POKind::FEAS)
            r.detail += "; mutually blocked constructors: " + names;
    }
  }
  return reports;
}

std::vector<State> reachable_states(const ResolvedChain& chain, const std::string& machine,
                                    const CheckOptions& options, bool* exhausted) {
  std::vector<State> out;
  int mi = chain.find_machine(machine);
  if (mi < 0) return out;
  const RMachine& m = chain.machines[mi];
  Cone cone;
  for (size_t i = 0; i < m.vars.size(); ++i) cone.slots.push_back(static_cast<int>(i));
  for (size_t i = 0; i < m.events.size(); ++i)
    cone.retained_events.push_back(static_cast<int>(i));
  auto ex = explore(chain, m, cone, options.scope, options.budget);
  if (exhausted) *exhausted = ex->exhausted;
  out.reserve(ex->states.size());
  for (size_t i = 0; i < ex->states.size(); ++i)
    out.push_back(state_at(*ex, m, cone.slots, static_cast<int>(i)));
  return out;
}

ReachResult reachable_state_count(const ResolvedChain& chain, const std::string& machine,
                                  const CheckOptions& options) {
  ReachResult r;
  bool ex = false;
  r.states = static_cast<long long>(reachable_states(chain, machine, options, &ex).size());
  r.exhausted = ex;
  return r;
}

std::optional<std::vector<State>> replay_trace(const ResolvedChain& chain,
                                               const std::string& machine,
                                               const Trace& trace, const Scope& scope) {
  int mi = chain.find_machine(machine);
  if (mi < 0) return std::nullopt;
  const RMachine& m = chain.machines[mi];
  std::vector<State> out;
  out.push_back(initial_state(m));
  for (const auto& step : trace.steps) {
    int ei = m.find_event(step.event);
    if (ei < 0) return std::nullopt;
    const REvent& re = m.events[ei];
    try {
      Env env{&chain, &m, &out.back(), &step.binding, &scope};
      for (const auto& g : re.ev.guards)
        if (!eval_predicate(*g.pred, env)) return std::nullopt;
      out.push_back(apply_event(chain, m, re, step.binding, out.back(), scope));
    } catch (const EvalError&) {
      return std::nullopt;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string report_to_text(const std::vector<CheckReport>& reports,
                           const ResolvedChain& chain) {
  std::ostringstream os;
  for (const auto& r : reports) {
    os << po_kind_name(r.obligation.kind) << " " << r.obligation.describe() << ": "
       << verdict_name(r.verdict) << " (states=" << r.states_explored << ")";
    if (!r.detail.empty()) os << " -- " << r.detail;
    os << "\n";
    if (r.counterexample) {
      for (const auto& s : r.counterexample->steps) {
        os << "    " << s.event << "(";
        for (size_t i = 0; i < s.binding.size(); ++i) {
          if (i) os << ", ";
          os << s.binding[i].first << "="
             << value_to_string(s.binding[i].second, chain.carriers);
        }
        os << ")\n";
      }
    }
  }
  return os.str();
}

nlohmann::json trace_to_json(const Trace& trace, const ResolvedChain& chain) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    nlohmann::json binding = nlohmann::json::object();
    for (const auto& [n, v] : s.binding) binding[n] = value_to_string(v, chain.carriers);
    steps.push_back({{"event", s.event}, {"binding", binding}});
  }
  return steps;
}

nlohmann::json report_to_json(const std::vector<CheckReport>& reports,
                              const ResolvedChain& chain) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["kind"] = po_kind_name(r.obligation.kind);
    j["machine"] = r.obligation.machine;
    if (!r.obligation.abstract_machine.empty())
      j["abstract"] = r.obligation.abstract_machine;
    j["event"] = r.obligation.event;
    if (!r.obligation.invariant_label.empty())
      j["invariant"] = r.obligation.invariant_label;
    j["verdict"] = verdict_name(r.verdict);
    j["states_explored"] = r.states_explored;
    j["elapsed_seconds"] = r.elapsed_seconds;
    if (!r.detail.empty()) j["detail"] = r.detail;
    if (r.counterexample) j["trace"] = trace_to_json(*r.counterexample, chain);
    out.push_back(std::move(j));
  }
  return {{"reports", out}};
}

// Textual value grammar: `NAME#k`, `true`/`false`, `{v, ...}`, `a|->b`.
namespace {

std::optional<Value> parse_value_at(const std::string& t, size_t& i,
                                    const ResolvedChain& chain);

void skip_ws(const std::string& t, size_t& i) {
  while (i < t.size() && (t[i] == ' ' || t[i] == '\t')) ++i;
}

std::optional<Value> parse_atomic(const std::string& t, size_t& i,
                                  const ResolvedChain& chain) {
  skip_ws(t, i);
  if (i >= t.size()) return std::nullopt;
  if (t[i] == '{') {
    ++i;
    std::vector<Value> items;
    skip_ws(t, i);
    if (i < t.size() && t[i] == '}') {
      ++i;
      return Value::set({});
    }
    while (true) {
      auto v = parse_value_at(t, i, chain);
      if (!v) return std::nullopt;
      items.push_back(std::move(*v));
      skip_ws(t, i);
      if (i < t.size() && t[i] == ',') { ++i; continue; }
      if (i < t.size() && t[i] == '}') { ++i; break; }
      return std::nullopt;
    }
    return Value::set(std::move(items));
  }
  size_t start = i;
  while (i < t.size() && (std::isalnum(static_cast<unsigned char>(t[i])) || t[i] == '_'))
    ++i;
  std::string word = t.substr(start, i - start);
  if (word == "true") return Value::boolean(true);
  if (word == "false") return Value::boolean(false);
  if (i < t.size() && t[i] == '#') {
    ++i;
    size_t ns = i;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (ns == i) return std::nullopt;
    int cid = chain.find_carrier(word);
    if (cid < 0) return std::nullopt;
    int idx = std::stoi(t.substr(ns, i - ns)) - 1;
    if (idx < 0) return std::nullopt;
    return Value::atom(cid, idx);
  }
  return std::nullopt;
}

std::optional<Value> parse_value_at(const std::string& t, size_t& i,
                                    const ResolvedChain& chain) {
  auto left = parse_atomic(t, i, chain);
  if (!left) return std::nullopt;
  skip_ws(t, i);
  if (i + 2 < t.size() && t.compare(i, 3, "|->") == 0) {
    i += 3;
    auto right = parse_value_at(t, i, chain);
    if (!right) return std::nullopt;
    return Value::pair(std::move(*left), std::move(*right));
  }
  return left;
}

}  // namespace

std::optional<Value> value_from_string(const std::string& text, const ResolvedChain& chain) {
  size_t i = 0;
  auto v = parse_value_at(text, i, chain);
  if (!v) return std::nullopt;
  skip_ws(text, i);
  if (i != text.size()) return std::nullopt;
  return v;
}

std::optional<Trace> trace_from_json(const nlohmann::json& j, const ResolvedChain& chain) {
  if (!j.is_array()) return std::nullopt;
  Trace t;
  for (const auto& s : j) {
    if (!s.is_object() || !s.contains("event")) return std::nullopt;
    TraceStep step;
    step.event = s["event"].get<std::string>();
    if (s.contains("binding")) {
      for (auto it = s["binding"].begin(); it != s["binding"].end(); ++it) {
        auto v = value_from_string(it.value().get<std::string>(), chain);
        if (!v) return std::nullopt;
        step.binding.emplace_back(it.key(), std::move(*v));
      }
      std::sort(step.binding.begin(), step.binding.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    t.steps.push_back(std::move(step));
  }
  return t;
}

}  // namespace ubdb
