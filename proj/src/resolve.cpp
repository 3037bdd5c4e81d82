#include "ubdb/resolve.hpp"

#include <algorithm>
#include <unordered_set>

namespace ubdb {

namespace {

ExprPtr clone_expr(const ExprPtr& e) {
  auto c = std::make_shared<Expr>(*e);
  for (auto& k : c->kids) k = clone_expr(k);
  return c;
}

PredPtr clone_pred(const PredPtr& p) {
  auto c = std::make_shared<Pred>(*p);
  for (auto& e : c->exprs) e = clone_expr(e);
  for (auto& q : c->preds) q = clone_pred(q);
  for (auto& b : c->binders) b.typing = clone_expr(b.typing);
  return c;
}

Event clone_event(const Event& ev) {
  Event c = ev;
  for (auto& p : c.params) p.typing = clone_expr(p.typing);
  for (auto& g : c.guards) g.pred = clone_pred(g.pred);
  for (auto& a : c.actions) a.value = clone_expr(a.value);
  return c;
}

bool is_leaf(Expr::Kind k) {
  return k == Expr::Kind::Ident || k == Expr::Kind::Var || k == Expr::Kind::Carrier ||
         k == Expr::Kind::ConstRef || k == Expr::Kind::Bound;
}

class Resolver {
 public:
  Resolver(const RefinementChain& chain, std::vector<Diagnostic>& diags)
      : src_(chain), diags_(diags) {}

  std::optional<ResolvedChain> run() {
    out_.source = src_;
    resolve_contexts();
    index_machines();
    if (has_errors(diags_)) return std::nullopt;
    for (size_t i = 0; i < src_.machines.size(); ++i) resolve_machine(static_cast<int>(i));
    classify_carriers();
    if (has_errors(diags_)) return std::nullopt;
    return std::move(out_);
  }

 private:
  void error(const SourceSpan& span, const std::string& msg) {
    diags_.push_back({span, Severity::Error, msg});
  }

  void resolve_contexts() {
    std::unordered_set<std::string> seen_ctx;
    for (const auto& ctx : src_.contexts) {
      if (!seen_ctx.insert(ctx.name).second)
        error(ctx.span, "DuplicateName: context '" + ctx.name + "' declared twice");
      if (ctx.extends && !seen_ctx.count(*ctx.extends))
        error(ctx.span, "UnresolvedName: context '" + ctx.name + "' extends unknown context '" +
                            *ctx.extends + "'");
      for (const auto& s : ctx.carrier_sets) {
        if (out_.carrier_id.count(s)) {
          error(ctx.span, "DuplicateName: carrier set '" + s + "' declared twice");
          continue;
        }
        out_.carrier_id[s] = static_cast<int>(out_.carriers.size());
        out_.carriers.push_back(s);
      }
    }
    for (const auto& ctx : src_.contexts) {
      for (const auto& [name, value] : ctx.constants) {
        if (out_.carrier_id.count(name) || find_constant(name) >= 0) {
          error(ctx.span, "DuplicateName: constant '" + name + "' clashes with another declaration");
          continue;
        }
        auto v = clone_expr(value);
        resolve_expr(v, nullptr, nullptr, false);
        out_.constants.emplace_back(name, v);
      }
    }
  }

  int find_constant(const std::string& name) const {
    for (size_t i = 0; i < out_.constants.size(); ++i)
      if (out_.constants[i].first == name) return static_cast<int>(i);
    return -1;
  }

  void index_machines() {
    std::unordered_set<std::string> seen;
    for (const auto& m : src_.machines) {
      if (!seen.insert(m.name).second)
        error(m.span, "DuplicateName: machine '" + m.name + "' declared twice");
    }
    // Cycle detection over refines edges by name.
    auto index_of = [&](const std::string& n) -> int {
      for (size_t i = 0; i < src_.machines.size(); ++i)
        if (src_.machines[i].name == n) return static_cast<int>(i);
      return -1;
    };
    for (size_t i = 0; i < src_.machines.size(); ++i) {
      std::unordered_set<int> visited;
      int cur = static_cast<int>(i);
      while (cur >= 0 && src_.machines[cur].refines) {
        if (!visited.insert(cur).second) {
          error(src_.machines[i].span,
                "CyclicRefinement: machine '" + src_.machines[i].name +
                    "' participates in a refinement cycle");
          break;
        }
        cur = index_of(*src_.machines[cur].refines);
      }
    }
    if (has_errors(diags_)) return;
    for (size_t i = 0; i < src_.machines.size(); ++i) {
      const auto& m = src_.machines[i];
      if (!m.refines) continue;
      int r = index_of(*m.refines);
      if (r < 0) {
        error(m.span, "UnresolvedName: machine '" + m.name + "' refines unknown machine '" +
                          *m.refines + "'");
      } else if (r != static_cast<int>(i) - 1) {
        error(m.span, "machine '" + m.name +
                          "' must refine its immediate predecessor in the chain");
      }
    }
  }

  void resolve_machine(int idx) {
    const Machine& m = src_.machines[idx];
    RMachine rm;
    rm.name = m.name;
    rm.index = idx;
    rm.layer = m.layer;
    rm.refines = m.refines ? out_.find_machine(*m.refines) : -1;
    const RMachine* abs = rm.refines >= 0 ? &out_.machines[rm.refines] : nullptr;

    // Classes: inherited + own.
    if (abs) rm.classes = abs->classes;
    for (const auto& c : m.classes) {
      if (rm.find_class(c.class_name))
        error(c.span, "DuplicateName: class '" + c.class_name + "' already declared");
      if (out_.find_carrier(c.carrier) < 0)
        error(c.span, "UnresolvedName: carrier set '" + c.carrier + "' for class '" +
                          c.class_name + "'");
      if (c.supertype && !rm.find_class(*c.supertype) &&
          [&] {  // own classes declared later in this machine also count
            for (const auto& o : m.classes)
              if (o.class_name == *c.supertype) return false;
            return true;
          }())
        error(c.span, "UnresolvedName: supertype '" + *c.supertype + "' of class '" +
                          c.class_name + "'");
      rm.classes.push_back(c);
    }

    // Variables: inherited minus drops, then own.
    std::unordered_set<std::string> dropped(m.drops.begin(), m.drops.end());
    if (abs) {
      for (const auto& v : abs->vars) {
        if (dropped.count(v.name)) {
          rm.ghosts.push_back(v);
          dropped.erase(v.name);
        } else {
          rm.vars.push_back(v);
        }
      }
    }
    for (const auto& d : dropped)
      error(m.span, "UnresolvedName: drops '" + d + "' which is not an inherited variable");
    for (auto v : m.variables) {
      if (v.role != VarRole::ClassInstanceSet) {
        // Complete the typing from the declared source/target names.
        const ClassAnnotation* sc = rm.find_class(v.source);
        if (!sc) {
          error(v.span, "UnresolvedName: '" + v.name + "' declared on unknown class '" +
                            v.source + "'");
          continue;
        }
        std::string tgt_carrier;
        if (const ClassAnnotation* tc = rm.find_class(v.target)) {
          if (v.role == VarRole::Attribute)
            error(v.span, "attribute '" + v.name + "' must target a carrier set, not class '" +
                              v.target + "'");
          tgt_carrier = tc->carrier;
        } else if (out_.find_carrier(v.target) >= 0) {
          if (v.role == VarRole::Association)
            error(v.span, "association '" + v.name + "' must target a class, not carrier set '" +
                              v.target + "'");
          tgt_carrier = v.target;
        } else {
          error(v.span, "UnresolvedName: target '" + v.target + "' of '" + v.name + "'");
          continue;
        }
        v.typing = SetType::relation(sc->carrier, tgt_carrier);
      }
      if (v.rel.injective && v.rel.arrow == RelArrow::Relation)
        error(v.span, "'" + v.name + "': injective requires a function arrow");
      rm.vars.push_back(v);
    }

    // Name registry: variables vs carriers vs constants, and duplicates.
    std::unordered_set<std::string> var_names;
    for (const auto& v : rm.vars) {
      if (!var_names.insert(v.name).second)
        error(v.span, "DuplicateName: variable '" + v.name + "' declared twice");
      if (out_.find_carrier(v.name) >= 0 || find_constant(v.name) >= 0)
        error(v.span, "DuplicateName: variable '" + v.name +
                          "' clashes with a carrier set or constant");
    }
    for (size_t i = 0; i < rm.vars.size(); ++i)
      rm.var_index[rm.vars[i].name] = static_cast<int>(i);
    for (size_t i = 0; i < rm.ghosts.size(); ++i)
      rm.var_index[rm.ghosts[i].name] = static_cast<int>(rm.vars.size() + i);

    // Invariants: inherited non-gluing, auto typing for own declarations, own.
    if (abs) {
      for (const auto& inv : abs->invariants)
        if (!inv.gluing) {
          RInvariant r = inv;
          r.pred = clone_pred(inv.pred);
          remap_pred(r.pred, rm);
          // An inherited invariant that now touches a dropped variable turns
          // into a gluing invariant of this refinement step.
          if (mentions_ghost(*r.pred, rm)) r.gluing = true;
          rm.invariants.push_back(std::move(r));
        }
    }
    for (const auto& c : m.classes) {
      if (!c.supertype) continue;
      auto p = Pred::make(Pred::Kind::Subset);
      p->exprs = {Expr::ident(c.class_name), Expr::ident(*c.supertype)};
      p->span = c.span;
      RInvariant inv{"typ_" + c.class_name + "_sub", p, true, idx, false};
      rm.invariants.push_back(inv);
    }
    for (const auto& v : m.variables) {
      if (v.role == VarRole::ClassInstanceSet) continue;
      auto p = Pred::make(Pred::Kind::RelAssert);
      const ClassAnnotation* tc = rm.find_class(v.target);
      p->exprs = {Expr::ident(v.name), Expr::ident(v.source),
                  tc ? Expr::ident(v.target) : Expr::ident(v.target)};
      p->rel = v.rel;
      p->span = v.span;
      RInvariant inv{"typ_" + v.name, p, true, idx, false};
      rm.invariants.push_back(inv);
    }
    for (const auto& src_inv : m.invariants) {
      RInvariant inv{src_inv.label, clone_pred(src_inv.pred), false, idx, false};
      rm.invariants.push_back(std::move(inv));
    }
    for (auto& inv : rm.invariants)
      if (inv.origin_machine == idx || inv.origin_machine == -1) {
        if (inv.origin_machine == -1) inv.origin_machine = idx;
        resolve_pred(inv.pred, rm, true);
        if (mentions_ghost(*inv.pred, rm)) inv.gluing = true;
      }

    // Events: abstraction's events (inherited or replaced in place), then new ones.
    std::vector<const Event*> own_events;
    for (const auto& e : m.events) own_events.push_back(&e);
    std::unordered_set<std::string> consumed;  // own events merged into abstract slots

    auto find_own = [&](const std::string& name) -> const Event* {
      for (const Event* e : own_events)
        if (e->name == name) return e;
      return nullptr;
    };

    if (abs) {
      for (size_t ai = 0; ai < abs->events.size(); ++ai) {
        const REvent& a = abs->events[ai];
        const Event* own = find_own(a.ev.name);
        if (own && own->extends && *own->extends != a.ev.name) {
          error(own->span, "ExtendMismatch: event '" + own->name + "' extends '" +
                               *own->extends + "' but redeclares abstract event '" + a.ev.name +
                               "'");
          own = nullptr;
        }
        if (own) {
          consumed.insert(own->name);
          if (own->extends)
            rm.events.push_back(merge_extended(a, *own, static_cast<int>(ai), rm));
          else
            rm.events.push_back(make_redeclared(a, *own, static_cast<int>(ai)));
        } else {
          REvent r;
          r.ev = clone_event(a.ev);
          r.origin = EventOrigin::Inherited;
          r.abstract_index = static_cast<int>(ai);
          rm.events.push_back(std::move(r));
        }
      }
    }
    for (const Event* e : own_events) {
      if (consumed.count(e->name)) continue;
      if (e->extends) {
        int ai = abs ? abs->find_event(*e->extends) : -1;
        if (ai < 0) {
          error(e->span, "ExtendMismatch: event '" + e->name + "' extends unknown abstract event '" +
                             *e->extends + "'");
          continue;
        }
        rm.events.push_back(merge_extended(abs->events[ai], *e, ai, rm));
      } else {
        REvent r;
        r.ev = clone_event(*e);
        r.origin = EventOrigin::New;
        rm.events.push_back(std::move(r));
      }
    }

    {
      std::unordered_set<std::string> evnames;
      for (const auto& e : rm.events)
        if (!evnames.insert(e.ev.name).second)
          error(e.ev.span, "DuplicateName: event '" + e.ev.name + "' declared twice");
    }

    for (auto& re : rm.events) resolve_event(re, rm);
    out_.machines.push_back(std::move(rm));
  }

  REvent merge_extended(const REvent& a, const Event& own, int ai, RMachine& rm) {
    REvent r;
    r.origin = EventOrigin::Extended;
    r.abstract_index = ai;
    r.ev = clone_event(a.ev);
    r.ev.name = own.name;
    r.ev.span = own.span;
    r.ev.extends = own.extends ? own.extends : std::optional<std::string>(a.ev.name);
    if (own.kind != EventKind::Normal) r.ev.kind = own.kind;
    if (own.class_owner) r.ev.class_owner = own.class_owner;
    for (const auto& p : own.params) {
      for (const auto& q : r.ev.params)
        if (q.name == p.name)
          error(own.span, "ExtendMismatch: parameter '" + p.name +
                              "' of event '" + own.name + "' already exists in the abstract event");
      Param c = p;
      c.typing = clone_expr(p.typing);
      r.ev.params.push_back(std::move(c));
    }
    for (const auto& g : own.guards) {
      Guard c = g;
      c.pred = clone_pred(g.pred);
      r.ev.guards.push_back(std::move(c));
    }
    for (const auto& a2 : own.actions) {
      Action c = a2;
      c.value = clone_expr(a2.value);
      r.ev.actions.push_back(std::move(c));
    }
    (void)rm;
    return r;
  }

  REvent make_redeclared(const REvent& a, const Event& own, int ai) {
    REvent r;
    r.origin = EventOrigin::Redeclared;
    r.abstract_index = ai;
    r.ev = clone_event(own);
    if (own.kind == EventKind::Normal && a.ev.kind != EventKind::Normal) r.ev.kind = a.ev.kind;
    if (!own.class_owner && a.ev.class_owner) r.ev.class_owner = a.ev.class_owner;
    return r;
  }

  void resolve_event(REvent& re, RMachine& rm) {
    Event& ev = re.ev;
    std::vector<std::string> bound;
    for (auto& p : ev.params) {
      resolve_expr(p.typing, &rm, &bound, false);
      if (std::find(bound.begin(), bound.end(), p.name) != bound.end())
        error(ev.span, "DuplicateName: parameter '" + p.name + "' of event '" + ev.name + "'");
      bound.push_back(p.name);
    }
    for (auto& g : ev.guards) resolve_pred(g.pred, rm, false, &bound);
    std::unordered_set<std::string> labels, targets;
    for (auto& a : ev.actions) {
      if (!labels.insert(a.label).second)
        error(a.span, "DuplicateName: action label '" + a.label + "' in event '" + ev.name + "'");
      if (!targets.insert(a.target).second)
        error(a.span, "ConflictingAssignment: variable '" + a.target +
                          "' assigned twice in event '" + ev.name + "'");
      int vi = rm.find_var(a.target);
      if (vi < 0)
        error(a.span, "UnresolvedName: action target '" + a.target + "' in event '" + ev.name + "'");
      else if (vi >= static_cast<int>(rm.vars.size()))
        error(a.span, "action target '" + a.target + "' was removed by data refinement");
      resolve_expr(a.value, &rm, &bound, false);
    }
    if (ev.kind == EventKind::Query && !ev.actions.empty())
      error(ev.span, "query event '" + ev.name + "' must not have actions");
    if (ev.kind == EventKind::Constructor) {
      if (!ev.class_owner || !rm.find_class(*ev.class_owner)) {
        error(ev.span, "constructor event '" + ev.name + "' must name its class with 'of'");
      } else {
        int owner_var = rm.find_var(*ev.class_owner);
        for (size_t pi = 0; pi < ev.params.size() && re.fresh_param < 0; ++pi) {
          for (const auto& g : ev.guards) {
            const Pred& p = *g.pred;
            if (p.kind == Pred::Kind::NotIn && p.exprs[0]->kind == Expr::Kind::Bound &&
                p.exprs[0]->name == ev.params[pi].name && p.exprs[1]->kind == Expr::Kind::Var &&
                p.exprs[1]->index == owner_var) {
              re.fresh_param = static_cast<int>(pi);
              break;
            }
          }
        }
        if (re.fresh_param < 0)
          error(ev.span, "constructor event '" + ev.name +
                             "' needs a parameter with a non-membership guard on class '" +
                             *ev.class_owner + "'");
      }
    }
  }

  // Rewrites any leaf to its binding in the current scope.
  void resolve_expr(ExprPtr& e, const RMachine* rm, std::vector<std::string>* bound,
                    bool allow_ghost) {
    if (is_leaf(e->kind)) {
      const std::string& n = e->name;
      if (bound && std::find(bound->begin(), bound->end(), n) != bound->end()) {
        e->kind = Expr::Kind::Bound;
        return;
      }
      if (rm) {
        int vi = rm->find_var(n);
        if (vi >= 0) {
          if (!allow_ghost && vi >= static_cast<int>(rm->vars.size())) {
            error(e->span, "UnresolvedName: '" + n + "' was removed by data refinement");
            return;
          }
          e->kind = Expr::Kind::Var;
          e->index = vi;
          return;
        }
      }
      int ci = out_.find_carrier(n);
      if (ci >= 0) {
        e->kind = Expr::Kind::Carrier;
        e->index = ci;
        return;
      }
      if (find_constant(n) >= 0) {
        e->kind = Expr::Kind::ConstRef;
        return;
      }
      error(e->span, "UnresolvedName: '" + n + "'");
      return;
    }
    for (auto& k : e->kids) resolve_expr(k, rm, bound, allow_ghost);
  }

  void resolve_pred(PredPtr& p, const RMachine& rm, bool allow_ghost,
                    std::vector<std::string>* bound0 = nullptr) {
    std::vector<std::string> local;
    std::vector<std::string>* bound = bound0 ? bound0 : &local;
    if (p->kind == Pred::Kind::Forall || p->kind == Pred::Kind::Exists) {
      for (auto& b : p->binders) resolve_expr(b.typing, &rm, bound, allow_ghost);
      size_t mark = bound->size();
      for (auto& b : p->binders) bound->push_back(b.name);
      for (auto& q : p->preds) resolve_pred(q, rm, allow_ghost, bound);
      bound->resize(mark);
      return;
    }
    for (auto& e : p->exprs) resolve_expr(e, &rm, bound, allow_ghost);
    for (auto& q : p->preds) resolve_pred(q, rm, allow_ghost, bound);
  }

  // Re-resolve a cloned predicate against this machine's variable indices.
  void remap_pred(PredPtr& p, const RMachine& rm) { resolve_pred(p, rm, true); }

  static bool mentions_ghost(const Expr& e, const RMachine& rm) {
    if (e.kind == Expr::Kind::Var) return e.index >= static_cast<int>(rm.vars.size());
    for (const auto& k : e.kids)
      if (mentions_ghost(*k, rm)) return true;
    return false;
  }
  static bool mentions_ghost(const Pred& p, const RMachine& rm) {
    for (const auto& e : p.exprs)
      if (mentions_ghost(*e, rm)) return true;
    for (const auto& q : p.preds)
      if (mentions_ghost(*q, rm)) return true;
    for (const auto& b : p.binders)
      if (mentions_ghost(*b.typing, rm)) return true;
    return false;
  }

  void classify_carriers() {
    out_.carrier_is_value.assign(out_.carriers.size(), true);
    for (const auto& m : out_.machines)
      for (const auto& c : m.classes) {
        int ci = out_.find_carrier(c.carrier);
        if (ci >= 0) out_.carrier_is_value[ci] = false;
      }
  }

  const RefinementChain& src_;
  std::vector<Diagnostic>& diags_;
  ResolvedChain out_;
};

}  // namespace

ResolveResult resolve(const RefinementChain& chain) {
  ResolveResult res;
  Resolver r(chain, res.diagnostics);
  res.chain = r.run();
  return res;
}

}  // namespace ubdb
