#include "ubdb/patterns.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace ubdb {

namespace {

const RMachine& final_machine(const ResolvedChain& chain) { return chain.machines.back(); }

bool is_function(const VariableDecl& v) {
  return v.rel.arrow == RelArrow::TotalFn || v.rel.arrow == RelArrow::PartialFn;
}

bool removes_from_live_class(const RMachine& m, const Event& ev) {
  for (const auto& a : ev.actions) {
    const ClassAnnotation* c = m.find_class(a.target);
    if (!c || c->kind == ClassKind::Historical) continue;
    if (a.value->kind == Expr::Kind::Minus || a.value->kind == Expr::Kind::DomSub) return true;
  }
  return false;
}

}  // namespace

std::vector<LintFinding> classify_classes(const ResolvedChain& chain) {
  std::vector<LintFinding> out;
  const RMachine& m = final_machine(chain);
  for (const auto& c : m.classes) {
    if (c.kind == ClassKind::Secondary) {
      int fns = 0;
      for (const auto& v : m.vars) {
        if (v.role != VarRole::Association || v.source != c.class_name || !is_function(v))
          continue;
        const ClassAnnotation* t = m.find_class(v.target);
        if (t && t->kind == ClassKind::Primary) ++fns;
      }
      if (fns < 2)
        out.push_back({"secondary-structure", LintSeverity::Warning, c.class_name,
                       "secondary class '" + c.class_name + "' has " + std::to_string(fns) +
                           " function(s) to primary classes; expected at least 2"});
    }
    if (c.kind == ClassKind::Attribute) {
      for (const auto& v : m.vars) {
        if (v.role != VarRole::Association || v.source != c.class_name) continue;
        const ClassAnnotation* t = m.find_class(v.target);
        if (t && (t->kind == ClassKind::Primary || t->kind == ClassKind::Secondary))
          out.push_back({"attribute-source", LintSeverity::Warning, v.name,
                         "attribute class '" + c.class_name + "' is the source of association '" +
                             v.name + "'; declare it from '" + v.target + "' instead"});
      }
    }
    if (c.kind == ClassKind::Historical) {
      for (const auto& re : m.events) {
        bool writes_h = false;
        for (const auto& a : re.ev.actions)
          if (a.target == c.class_name) writes_h = true;
        if (writes_h && !removes_from_live_class(m, re.ev))
          out.push_back({"historical-write", LintSeverity::Error, re.ev.name,
                         "event '" + re.ev.name + "' writes historical class '" + c.class_name +
                             "' without removing from a live class"});
      }
    }
  }
  return out;
}

std::vector<LintFinding> lint_layering(const ResolvedChain& chain) {
  std::vector<LintFinding> out;
  int prev_rank = -1;
  std::string sequence;
  for (const auto& m : chain.source.machines) {
    int rank = layer_rank(m.layer);
    if (m.layer != Layer::Other) {
      if (!sequence.empty()) sequence += " -> ";
      sequence += layer_name(m.layer);
      if (prev_rank > rank)
        out.push_back({"layer-order", LintSeverity::Warning, m.name,
                       "machine '" + m.name + "' is labelled '" + layer_name(m.layer) +
                           "' after a later layer"});
      prev_rank = rank;
    }
    if (m.layer == Layer::Other) continue;
    for (const auto& c : m.classes) {
      if (c.kind == ClassKind::Secondary && rank < layer_rank(Layer::Secondary))
        out.push_back({"secondary-layer", LintSeverity::Warning, c.class_name,
                       "secondary class '" + c.class_name + "' introduced in the '" +
                           layer_name(m.layer) + "' layer"});
      if (c.kind == ClassKind::Attribute && rank < layer_rank(Layer::AttributeClasses))
        out.push_back({"attribute-class-layer", LintSeverity::Warning, c.class_name,
                       "attribute class '" + c.class_name + "' introduced in the '" +
                           layer_name(m.layer) + "' layer"});
      if (c.kind == ClassKind::Historical && rank < layer_rank(Layer::Historical))
        out.push_back({"historical-layer", LintSeverity::Warning, c.class_name,
                       "historical class '" + c.class_name + "' introduced in the '" +
                           layer_name(m.layer) + "' layer"});
    }
    for (const auto& e : m.events)
      if (e.kind == EventKind::Query && rank < layer_rank(Layer::Queries))
        out.push_back({"query-layer", LintSeverity::Warning, e.name,
                       "query event '" + e.name + "' introduced in the '" +
                           layer_name(m.layer) + "' layer"});
    bool own_attrs = false;
    for (const auto& v : m.variables)
      if (v.role == VarRole::Attribute) own_attrs = true;
    if (own_attrs && rank < layer_rank(Layer::Attributes))
      out.push_back({"attribute-layer", LintSeverity::Info, m.name,
                     "machine '" + m.name +
                         "' introduces attributes alongside its classes; the methodology "
                         "prefers a separate attributes refinement"});
  }
  out.push_back({"layer-sequence", LintSeverity::Info, "chain",
                 sequence.empty() ? "no layer labels present" : sequence});
  return out;
}

std::vector<LintFinding> check_historical_pattern(const ResolvedChain& chain) {
  std::vector<LintFinding> out;
  const RMachine& m = final_machine(chain);
  for (const auto& c : m.classes) {
    if (c.kind != ClassKind::Historical) continue;
    std::vector<std::string> attrs;
    for (const auto& v : m.vars)
      if (v.role != VarRole::ClassInstanceSet && v.source == c.class_name)
        attrs.push_back(v.name);
    for (const auto& re : m.events) {
      bool writes_h = false;
      for (const auto& a : re.ev.actions)
        if (a.target == c.class_name) writes_h = true;
      if (!writes_h) continue;
      if (!removes_from_live_class(m, re.ev)) {
        out.push_back({"non-atomic-move", LintSeverity::Error, re.ev.name,
                       "event '" + re.ev.name + "' inserts into historical class '" +
                           c.class_name + "' without removing from a live class"});
        continue;
      }
      for (const auto& attr : attrs) {
        bool assigned = false;
        for (const auto& a : re.ev.actions)
          if (a.target == attr) assigned = true;
        if (!assigned)
          out.push_back({"historical-attribute", LintSeverity::Warning, attr,
                         "move event '" + re.ev.name + "' does not assign historical attribute '" +
                             attr + "'"});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Association splitting
// ---------------------------------------------------------------------------

namespace {

ExprPtr uclone(const ExprPtr& e) {
  auto c = std::make_shared<Expr>(*e);
  if (c->kind == Expr::Kind::Var || c->kind == Expr::Kind::Carrier ||
      c->kind == Expr::Kind::ConstRef || c->kind == Expr::Kind::Bound)
    c->kind = Expr::Kind::Ident;
  for (auto& k : c->kids) k = uclone(k);
  return c;
}

PredPtr uclone(const PredPtr& p) {
  auto c = std::make_shared<Pred>(*p);
  for (auto& e : c->exprs) e = uclone(e);
  for (auto& q : c->preds) q = uclone(q);
  for (auto& b : c->binders) b.typing = uclone(b.typing);
  return c;
}

bool mentions(const Expr& e, const std::string& name) {
  if (e.kind == Expr::Kind::Ident && e.name == name) return true;
  for (const auto& k : e.kids)
    if (mentions(*k, name)) return true;
  return false;
}

bool mentions(const Pred& p, const std::string& name) {
  for (const auto& e : p.exprs)
    if (mentions(*e, name)) return true;
  for (const auto& q : p.preds)
    if (mentions(*q, name)) return true;
  for (const auto& b : p.binders)
    if (mentions(*b.typing, name)) return true;
  return false;
}

ExprPtr ident(const std::string& n) { return Expr::ident(n); }

ExprPtr maplet(ExprPtr a, ExprPtr b) {
  return Expr::make(Expr::Kind::Maplet, {std::move(a), std::move(b)});
}

ExprPtr singleton(ExprPtr a) { return Expr::make(Expr::Kind::EnumSet, {std::move(a)}); }

// R1~[S] for a set expression S
ExprPtr preimage(const std::string& fn, ExprPtr s) {
  return Expr::make(Expr::Kind::Image,
                    {Expr::make(Expr::Kind::Inverse, {ident(fn)}), std::move(s)});
}

PredPtr pin(ExprPtr x, ExprPtr s) {
  auto p = Pred::make(Pred::Kind::In);
  p->exprs = {std::move(x), std::move(s)};
  return p;
}

PredPtr pand(PredPtr a, PredPtr b) {
  auto p = Pred::make(Pred::Kind::And);
  p->preds = {std::move(a), std::move(b)};
  return p;
}

struct Splitter {
  const SplitSpec& spec;
  std::string witness;  // fresh binder name for membership rewrites

  // a |-> b : R  becomes  # w : C . w|->a : R1 & w|->b : R2
  PredPtr membership(const ExprPtr& a, const ExprPtr& b) {
    auto ex = Pred::make(Pred::Kind::Exists);
    ex->binders = {{witness, ident(spec.new_class)}};
    ex->preds = {pand(pin(maplet(ident(witness), uclone(a)), ident(spec.fn1_name)),
                      pin(maplet(ident(witness), uclone(b)), ident(spec.fn2_name)))};
    return ex;
  }

  // Substitute R by R1~;R2 inside an expression.
  void substitute(ExprPtr& e) {
    if (e->kind == Expr::Kind::Ident && e->name == spec.relation) {
      e = Expr::make(Expr::Kind::Comp,
                     {Expr::make(Expr::Kind::Inverse, {ident(spec.fn1_name)}),
                      ident(spec.fn2_name)});
      return;
    }
    for (auto& k : e->kids) substitute(k);
  }

  void rewrite_pred(PredPtr& p) {
    if ((p->kind == Pred::Kind::In || p->kind == Pred::Kind::NotIn) &&
        p->exprs[1]->kind == Expr::Kind::Ident && p->exprs[1]->name == spec.relation &&
        p->exprs[0]->kind == Expr::Kind::Maplet) {
      PredPtr ex = membership(p->exprs[0]->kids[0], p->exprs[0]->kids[1]);
      if (p->kind == Pred::Kind::NotIn) {
        auto n = Pred::make(Pred::Kind::Not);
        n->preds = {std::move(ex)};
        p = std::move(n);
      } else {
        p = std::move(ex);
      }
      return;
    }
    for (auto& e : p->exprs) substitute(e);
    for (auto& q : p->preds) rewrite_pred(q);
    for (auto& b : p->binders) substitute(b.typing);
  }
};

}  // namespace

SplitResult split_association(const RefinementChain& chain, const SplitSpec& spec) {
  SplitResult result;
  auto& diags = result.diagnostics;

  ResolveResult rr = resolve(chain);
  if (!rr.chain) {
    diags = std::move(rr.diagnostics);
    return result;
  }
  const ResolvedChain& rc = *rr.chain;
  const RMachine& last = rc.machines.back();
  const Machine& last_src = chain.machines.back();

  int rv = last.find_var(spec.relation);
  if (rv < 0 || rv >= static_cast<int>(last.vars.size())) {
    diags.push_back({{}, Severity::Error,
                     "UnresolvedName: relation '" + spec.relation + "' not found in machine '" +
                         last.name + "'"});
    return result;
  }
  const VariableDecl& R = last.vars[rv];
  if (R.role != VarRole::Association || R.rel.arrow != RelArrow::Relation) {
    diags.push_back({R.span, Severity::Error,
                     "NotARelation: '" + spec.relation + "' is not a relation-kind association"});
    return result;
  }

  std::string carrier = spec.new_class + "_SET";
  std::string ctx_name = spec.new_class + "_ctx";
  std::string machine_name = last.name + "_split";
  std::set<std::string> taken;
  for (const auto& c : rc.carriers) taken.insert(c);
  for (const auto& [n, e] : rc.constants) taken.insert(n);
  for (const auto& ctx : chain.contexts) taken.insert(ctx.name);
  for (const auto& m : rc.machines) {
    taken.insert(m.name);
    for (const auto& v : m.vars) taken.insert(v.name);
    for (const auto& g : m.ghosts) taken.insert(g.name);
    for (const auto& c : m.classes) taken.insert(c.class_name);
    for (const auto& e : m.events) taken.insert(e.ev.name);
  }
  for (const auto& n : {spec.new_class, spec.fn1_name, spec.fn2_name, carrier, ctx_name,
                        machine_name})
    if (taken.count(n)) {
      diags.push_back({{}, Severity::Error, "NameClash: '" + n + "' is already in use"});
      return result;
    }

  result.chain = chain;
  RefinementChain& out = *result.chain;

  Context ctx;
  ctx.name = ctx_name;
  if (!chain.contexts.empty()) ctx.extends = chain.contexts.back().name;
  ctx.carrier_sets = {carrier};
  out.contexts.push_back(std::move(ctx));

  Machine nm;
  nm.name = machine_name;
  nm.refines = last.name;
  nm.sees = last_src.sees;
  nm.sees.push_back(ctx_name);
  nm.layer = last_src.layer;
  nm.drops = {spec.relation};

  ClassAnnotation ca;
  ca.class_name = spec.new_class;
  ca.kind = ClassKind::Secondary;
  ca.carrier = carrier;
  nm.classes.push_back(ca);

  VariableDecl inst;
  inst.name = spec.new_class;
  inst.role = VarRole::ClassInstanceSet;
  inst.typing = SetType::set_of(SetType::atom(carrier));
  nm.variables.push_back(inst);

  VariableDecl r1;
  r1.name = spec.fn1_name;
  r1.role = VarRole::Association;
  r1.source = spec.new_class;
  r1.target = R.source;
  r1.rel = {RelArrow::TotalFn, false};
  nm.variables.push_back(r1);

  VariableDecl r2 = r1;
  r2.name = spec.fn2_name;
  r2.target = R.target;
  nm.variables.push_back(r2);

  {
    auto inv1 = Pred::make(Pred::Kind::Eq);
    inv1->exprs = {ident(spec.relation),
                   Expr::make(Expr::Kind::Comp,
                              {Expr::make(Expr::Kind::Inverse, {ident(spec.fn1_name)}),
                               ident(spec.fn2_name)})};
    nm.invariants.push_back({"inv1", inv1, {}});

    auto body = Pred::make(Pred::Kind::Implies);
    auto hyp = pand(pand(pin(maplet(ident("c1"), ident("a")), ident(spec.fn1_name)),
                         pin(maplet(ident("c2"), ident("a")), ident(spec.fn1_name))),
                    pand(pin(maplet(ident("c1"), ident("b")), ident(spec.fn2_name)),
                         pin(maplet(ident("c2"), ident("b")), ident(spec.fn2_name))));
    auto conc = Pred::make(Pred::Kind::Eq);
    conc->exprs = {ident("c1"), ident("c2")};
    body->preds = {std::move(hyp), std::move(conc)};
    auto inv2 = Pred::make(Pred::Kind::Forall);
    inv2->binders = {{"c1", ident(spec.new_class)},
                     {"c2", ident(spec.new_class)},
                     {"a", ident(R.source)},
                     {"b", ident(R.target)}};
    inv2->preds = {std::move(body)};
    nm.invariants.push_back({"inv2", inv2, {}});
  }

  // Rewrite every effective event of the final machine that touches R.
  Splitter sp{spec, "w"};
  {
    std::set<std::string> used;
    for (const auto& re : last.events) {
      for (const auto& p : re.ev.params) used.insert(p.name);
      std::vector<std::string> ids;
      for (const auto& g : re.ev.guards) collect_idents(*g.pred, ids);
      for (const auto& a : re.ev.actions) collect_idents(*a.value, ids);
      used.insert(ids.begin(), ids.end());
    }
    int n = 0;
    while (used.count(sp.witness)) sp.witness = "w" + std::to_string(++n);
  }

  for (const auto& re : last.events) {
    bool touches = false;
    for (const auto& g : re.ev.guards)
      if (mentions(*uclone(g.pred), spec.relation)) touches = true;
    for (const auto& a : re.ev.actions)
      if (a.target == spec.relation || mentions(*uclone(a.value), spec.relation))
        touches = true;
    if (!touches) continue;

    Event ev;
    ev.name = re.ev.name;
    ev.kind = re.ev.kind;
    ev.class_owner = re.ev.class_owner;
    for (const auto& p : re.ev.params) ev.params.push_back({p.name, uclone(p.typing)});
    for (const auto& g : re.ev.guards) {
      Guard gg{g.label, uclone(g.pred)};
      sp.rewrite_pred(gg.pred);
      ev.guards.push_back(std::move(gg));
    }

    int split_idx = 0;
    for (const auto& a : re.ev.actions) {
      if (a.target != spec.relation) {
        Action aa{a.label, a.target, uclone(a.value), a.span};
        sp.substitute(aa.value);
        ev.actions.push_back(std::move(aa));
        continue;
      }
      ExprPtr rhs = uclone(a.value);
      std::string sfx = split_idx++ ? std::to_string(split_idx) : "";
      if (rhs->kind == Expr::Kind::Union && rhs->kids[0]->kind == Expr::Kind::Ident &&
          rhs->kids[0]->name == spec.relation &&
          rhs->kids[1]->kind == Expr::Kind::EnumSet && rhs->kids[1]->kids.size() == 1 &&
          rhs->kids[1]->kids[0]->kind == Expr::Kind::Maplet) {
        // insertion: fresh C instance with both function maplets
        ExprPtr a0 = rhs->kids[1]->kids[0]->kids[0];
        ExprPtr b0 = rhs->kids[1]->kids[0]->kids[1];
        std::string c = "c_new" + sfx;
        ev.params.push_back({c, ident(carrier)});
        auto fresh = Pred::make(Pred::Kind::NotIn);
        fresh->exprs = {ident(c), ident(spec.new_class)};
        ev.guards.push_back({"grd_" + c, fresh});
        ev.actions.push_back({a.label + "_c", spec.new_class,
                              Expr::make(Expr::Kind::Union,
                                         {ident(spec.new_class), singleton(ident(c))}),
                              a.span});
        ev.actions.push_back({a.label + "_1", spec.fn1_name,
                              Expr::make(Expr::Kind::Union,
                                         {ident(spec.fn1_name),
                                          singleton(maplet(ident(c), uclone(a0)))}),
                              a.span});
        ev.actions.push_back({a.label + "_2", spec.fn2_name,
                              Expr::make(Expr::Kind::Union,
                                         {ident(spec.fn2_name),
                                          singleton(maplet(ident(c), uclone(b0)))}),
                              a.span});
        if (ev.kind == EventKind::Normal) {
          ev.kind = EventKind::Constructor;
          ev.class_owner = spec.new_class;
        }
        continue;
      }
      ExprPtr doomed;  // the set of C instances this action removes
      if (rhs->kind == Expr::Kind::Minus && rhs->kids[0]->kind == Expr::Kind::Ident &&
          rhs->kids[0]->name == spec.relation &&
          rhs->kids[1]->kind == Expr::Kind::EnumSet && rhs->kids[1]->kids.size() == 1 &&
          rhs->kids[1]->kids[0]->kind == Expr::Kind::Maplet) {
        ExprPtr a0 = rhs->kids[1]->kids[0]->kids[0];
        ExprPtr b0 = rhs->kids[1]->kids[0]->kids[1];
        doomed = Expr::make(Expr::Kind::Inter,
                            {preimage(spec.fn1_name, singleton(uclone(a0))),
                             preimage(spec.fn2_name, singleton(uclone(b0)))});
      } else if (rhs->kind == Expr::Kind::DomSub && rhs->kids[1]->kind == Expr::Kind::Ident &&
                 rhs->kids[1]->name == spec.relation) {
        doomed = preimage(spec.fn1_name, uclone(rhs->kids[0]));
      }
      if (!doomed) {
        diags.push_back({a.span, Severity::Error,
                         "UnsupportedSplit: action '" + a.label + "' of event '" + re.ev.name +
                             "' updates '" + spec.relation +
                             "' in a form the splitting transformer does not recognise"});
        continue;
      }
      ev.actions.push_back({a.label + "_c", spec.new_class,
                            Expr::make(Expr::Kind::Minus,
                                       {ident(spec.new_class), uclone(doomed)}),
                            a.span});
      ev.actions.push_back({a.label + "_1", spec.fn1_name,
                            Expr::make(Expr::Kind::DomSub,
                                       {uclone(doomed), ident(spec.fn1_name)}),
                            a.span});
      ev.actions.push_back({a.label + "_2", spec.fn2_name,
                            Expr::make(Expr::Kind::DomSub,
                                       {uclone(doomed), ident(spec.fn2_name)}),
                            a.span});
      if (ev.kind == EventKind::Normal) {
        ev.kind = EventKind::Destructor;
        ev.class_owner = spec.new_class;
      }
    }
    nm.events.push_back(std::move(ev));
  }

  if (has_errors(diags)) {
    result.chain.reset();
    return result;
  }
  out.machines.push_back(std::move(nm));
  return result;
}

std::string findings_to_text(const std::vector<LintFinding>& findings) {
  std::ostringstream os;
  for (const auto& f : findings) {
    const char* sev = f.severity == LintSeverity::Error     ? "error"
                      : f.severity == LintSeverity::Warning ? "warning"
                                                        : "info";
    os << sev << " [" << f.rule << "] " << f.subject << ": " << f.message << "\n";
  }
  return os.str();
}

nlohmann::json findings_to_json(const std::vector<LintFinding>& findings) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : findings) {
    const char* sev = f.severity == LintSeverity::Error     ? "error"
                      : f.severity == LintSeverity::Warning ? "warning"
                                                        : "info";
    out.push_back({{"rule", f.rule},
                   {"severity", sev},
                   {"subject", f.subject},
                   {"message", f.message}});
  }
  return {{"findings", out}};
}

}  // namespace ubdb
