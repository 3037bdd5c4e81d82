#include "ubdb/eval.hpp"

#include <algorithm>
#include <functional>

namespace ubdb {

namespace {

const Value& require_set(const Value& v, const char* what) {
  if (v.tag != Value::Tag::Set)
    throw EvalError(EvalError::Kind::Unsupported, std::string(what) + ": operand is not a set");
  return v;
}

const Value& require_pair(const Value& v, const char* what) {
  if (v.tag != Value::Tag::Pair)
    throw EvalError(EvalError::Kind::Unsupported, std::string(what) + ": element is not a pair");
  return v;
}

const Value* lookup_binding(const Binding* b, const std::string& name) {
  if (!b) return nullptr;
  for (const auto& [n, v] : *b)
    if (n == name) return &v;
  return nullptr;
}

Value eval_const(const Env& env, const std::string& name) {
  for (const auto& [n, e] : env.chain->constants)
    if (n == name) return eval(*e, env);
  throw EvalError(EvalError::Kind::Unsupported, "unknown constant '" + name + "'");
}

}  // namespace

Value carrier_value(int carrier_id, const Scope& scope) {
  std::vector<Value> atoms;
  int n = scope.bound(carrier_id);
  atoms.reserve(n);
  for (int i = 0; i < n; ++i) atoms.push_back(Value::atom(carrier_id, i));
  Value v;
  v.items = std::move(atoms);  // already sorted
  return v;
}

Value eval(const Expr& e, const Env& env) {
  switch (e.kind) {
    case Expr::Kind::Var:
      return (*env.state)[e.index];
    case Expr::Kind::Carrier:
      return carrier_value(e.index, *env.scope);
    case Expr::Kind::ConstRef:
      return eval_const(env, e.name);
    case Expr::Kind::Bound: {
      if (const Value* v = lookup_binding(env.binding, e.name)) return *v;
      throw EvalError(EvalError::Kind::Unsupported, "unbound identifier '" + e.name + "'");
    }
    case Expr::Kind::Ident:
      throw EvalError(EvalError::Kind::Unsupported, "unresolved identifier '" + e.name + "'");
    case Expr::Kind::EnumSet: {
      std::vector<Value> items;
      items.reserve(e.kids.size());
      for (const auto& k : e.kids) items.push_back(eval(*k, env));
      return Value::set(std::move(items));
    }
    case Expr::Kind::Maplet:
      return Value::pair(eval(*e.kids[0], env), eval(*e.kids[1], env));
    case Expr::Kind::Union: {
      Value a = eval(*e.kids[0], env);
      Value b = eval(*e.kids[1], env);
      require_set(a, "union");
      require_set(b, "union");
      std::vector<Value> out;
      out.reserve(a.items.size() + b.items.size());
      std::set_union(a.items.begin(), a.items.end(), b.items.begin(), b.items.end(),
                     std::back_inserter(out));
      Value v;
      v.items = std::move(out);
      return v;
    }
    case Expr::Kind::Minus: {
      Value a = eval(*e.kids[0], env);
      Value b = eval(*e.kids[1], env);
      require_set(a, "set minus");
      require_set(b, "set minus");
      std::vector<Value> out;
      std::set_difference(a.items.begin(), a.items.end(), b.items.begin(), b.items.end(),
                          std::back_inserter(out));
      Value v;
      v.items = std::move(out);
      return v;
    }
    case Expr::Kind::Inter: {
      Value a = eval(*e.kids[0], env);
      Value b = eval(*e.kids[1], env);
      require_set(a, "intersection");
      require_set(b, "intersection");
      std::vector<Value> out;
      std::set_intersection(a.items.begin(), a.items.end(), b.items.begin(), b.items.end(),
                            std::back_inserter(out));
      Value v;
      v.items = std::move(out);
      return v;
    }
    case Expr::Kind::Cross: {
      Value a = eval(*e.kids[0], env);
      Value b = eval(*e.kids[1], env);
      require_set(a, "cartesian product");
      require_set(b, "cartesian product");
      std::vector<Value> out;
      out.reserve(a.items.size() * b.items.size());
      for (const auto& x : a.items)
        for (const auto& y : b.items) out.push_back(Value::pair(x, y));
      return Value::set(std::move(out));
    }
    case Expr::Kind::Dom: {
      Value r = eval(*e.kids[0], env);
      require_set(r, "dom");
      std::vector<Value> out;
      for (const auto& p : r.items) out.push_back(require_pair(p, "dom").items[0]);
      return Value::set(std::move(out));
    }
    case Expr::Kind::Ran: {
      Value r = eval(*e.kids[0], env);
      require_set(r, "ran");
      std::vector<Value> out;
      for (const auto& p : r.items) out.push_back(require_pair(p, "ran").items[1]);
      return Value::set(std::move(out));
    }
    case Expr::Kind::DomSub: {
      Value s = eval(*e.kids[0], env);
      Value r = eval(*e.kids[1], env);
      require_set(s, "domain subtraction");
      require_set(r, "domain subtraction");
      std::vector<Value> out;
      for (const auto& p : r.items)
        if (!s.contains(require_pair(p, "domain subtraction").items[0])) out.push_back(p);
      Value v;
      v.items = std::move(out);
      return v;
    }
    case Expr::Kind::DomRes: {
      Value s = eval(*e.kids[0], env);
      Value r = eval(*e.kids[1], env);
      require_set(s, "domain restriction");
      require_set(r, "domain restriction");
      std::vector<Value> out;
      for (const auto& p : r.items)
        if (s.contains(require_pair(p, "domain restriction").items[0])) out.push_back(p);
      Value v;
      v.items = std::move(out);
      return v;
    }
    case Expr::Kind::Override: {
      Value f = eval(*e.kids[0], env);
      Value g = eval(*e.kids[1], env);
      require_set(f, "override");
      require_set(g, "override");
      std::vector<Value> dom_g;
      for (const auto& p : g.items) dom_g.push_back(require_pair(p, "override").items[0]);
      std::sort(dom_g.begin(), dom_g.end());
      std::vector<Value> out;
      for (const auto& p : f.items)
        if (!std::binary_search(dom_g.begin(), dom_g.end(),
                                require_pair(p, "override").items[0]))
          out.push_back(p);
      for (const auto& p : g.items) out.push_back(p);
      return Value::set(std::move(out));
    }
    case Expr::Kind::Inverse: {
      Value r = eval(*e.kids[0], env);
      require_set(r, "inverse");
      std::vector<Value> out;
      for (const auto& p : r.items) {
        require_pair(p, "inverse");
        out.push_back(Value::pair(p.items[1], p.items[0]));
      }
      return Value::set(std::move(out));
    }
    case Expr::Kind::Comp: {
      // forward composition: r1 ; r2 = { a|->c | exists b. a|->b : r1 & b|->c : r2 }
      Value r1 = eval(*e.kids[0], env);
      Value r2 = eval(*e.kids[1], env);
      require_set(r1, "composition");
      require_set(r2, "composition");
      std::vector<Value> out;
      for (const auto& p : r1.items) {
        require_pair(p, "composition");
        for (const auto& q : r2.items) {
          require_pair(q, "composition");
          if (p.items[1] == q.items[0]) out.push_back(Value::pair(p.items[0], q.items[1]));
        }
      }
      return Value::set(std::move(out));
    }
    case Expr::Kind::Image: {
      Value r = eval(*e.kids[0], env);
      Value s = eval(*e.kids[1], env);
      require_set(r, "image");
      require_set(s, "image");
      std::vector<Value> out;
      for (const auto& p : r.items)
        if (s.contains(require_pair(p, "image").items[0])) out.push_back(p.items[1]);
      return Value::set(std::move(out));
    }
    case Expr::Kind::Apply: {
      Value f = eval(*e.kids[0], env);
      Value x = eval(*e.kids[1], env);
      require_set(f, "application");
      const Value* found = nullptr;
      for (const auto& p : f.items) {
        if (require_pair(p, "application").items[0] == x) {
          if (found)
            throw EvalError(EvalError::Kind::NotAFunction,
                            "function application on a non-functional relation");
          found = &p.items[1];
        }
      }
      if (!found)
        throw EvalError(EvalError::Kind::ApplyOutsideDomain,
                        "function applied outside its domain");
      return *found;
    }
    case Expr::Kind::Pow: {
      Value s = eval(*e.kids[0], env);
      require_set(s, "POW");
      if (s.items.size() > 12)
        throw EvalError(EvalError::Kind::Unsupported, "POW over a set larger than 12 elements");
      size_t n = s.items.size();
      std::vector<Value> subsets;
      subsets.reserve(size_t{1} << n);
      for (size_t mask = 0; mask < (size_t{1} << n); ++mask) {
        std::vector<Value> sub;
        for (size_t i = 0; i < n; ++i)
          if (mask & (size_t{1} << i)) sub.push_back(s.items[i]);
        Value v;
        v.items = std::move(sub);
        subsets.push_back(std::move(v));
      }
      return Value::set(std::move(subsets));
    }
  }
  throw EvalError(EvalError::Kind::Unsupported, "unknown expression kind");
}

namespace {

bool eval_quantifier(const Pred& p, const Env& env, bool universal) {
  // Enumerate the finite cartesian product of the binder typings.
  Binding extended = env.binding ? *env.binding : Binding{};
  size_t base = extended.size();
  for (const auto& b : p.binders) extended.emplace_back(b.name, Value::empty_set());

  std::function<bool(size_t)> go = [&](size_t i) -> bool {
    if (i == p.binders.size()) {
      Env inner = env;
      inner.binding = &extended;
      bool body = eval_predicate(*p.preds[0], inner);
      return universal ? body : !body;  // "all hold" vs "none hold" (for exists: negated)
    }
    Env inner = env;
    inner.binding = &extended;
    Value domain = eval(*p.binders[i].typing, inner);
    require_set(domain, "quantifier typing");
    for (const auto& v : domain.items) {
      extended[base + i].second = v;
      if (!go(i + 1)) return false;
    }
    return true;
  };
  bool all = go(0);
  return universal ? all : !all;
}

}  // namespace

bool eval_predicate(const Pred& p, const Env& env) {
  switch (p.kind) {
    case Pred::Kind::True:
      return true;
    case Pred::Kind::False:
      return false;
    case Pred::Kind::In: {
      Value x = eval(*p.exprs[0], env);
      Value s = eval(*p.exprs[1], env);
      require_set(s, "membership");
      return s.contains(x);
    }
    case Pred::Kind::NotIn: {
      Value x = eval(*p.exprs[0], env);
      Value s = eval(*p.exprs[1], env);
      require_set(s, "membership");
      return !s.contains(x);
    }
    case Pred::Kind::Subset: {
      Value a = eval(*p.exprs[0], env);
      Value b = eval(*p.exprs[1], env);
      require_set(a, "subset");
      require_set(b, "subset");
      return std::includes(b.items.begin(), b.items.end(), a.items.begin(), a.items.end());
    }
    case Pred::Kind::Eq:
      return eval(*p.exprs[0], env) == eval(*p.exprs[1], env);
    case Pred::Kind::And:
      return eval_predicate(*p.preds[0], env) && eval_predicate(*p.preds[1], env);
    case Pred::Kind::Or:
      return eval_predicate(*p.preds[0], env) || eval_predicate(*p.preds[1], env);
    case Pred::Kind::Implies:
      return !eval_predicate(*p.preds[0], env) || eval_predicate(*p.preds[1], env);
    case Pred::Kind::Not:
      return !eval_predicate(*p.preds[0], env);
    case Pred::Kind::Forall:
      return eval_quantifier(p, env, true);
    case Pred::Kind::Exists:
      return eval_quantifier(p, env, false);
    case Pred::Kind::RelAssert: {
      Value f = eval(*p.exprs[0], env);
      Value a = eval(*p.exprs[1], env);
      Value b = eval(*p.exprs[2], env);
      require_set(f, "relation assertion");
      require_set(a, "relation assertion");
      require_set(b, "relation assertion");
      std::vector<Value> firsts, seconds;
      for (const auto& pr : f.items) {
        require_pair(pr, "relation assertion");
        if (!a.contains(pr.items[0]) || !b.contains(pr.items[1])) return false;
        firsts.push_back(pr.items[0]);
        seconds.push_back(pr.items[1]);
      }
      if (p.rel.arrow == RelArrow::Relation) return true;
      std::sort(firsts.begin(), firsts.end());
      if (std::adjacent_find(firsts.begin(), firsts.end()) != firsts.end())
        return false;  // not functional
      if (p.rel.arrow == RelArrow::TotalFn && firsts.size() != a.items.size()) return false;
      if (p.rel.injective) {
        std::sort(seconds.begin(), seconds.end());
        if (std::adjacent_find(seconds.begin(), seconds.end()) != seconds.end()) return false;
      }
      return true;
    }
  }
  throw EvalError(EvalError::Kind::Unsupported, "unknown predicate kind");
}

State initial_state(const RMachine& m, bool with_ghosts) {
  State s(m.vars.size() + (with_ghosts ? m.ghosts.size() : 0), Value::empty_set());
  return s;
}

EnumerateResult enumerate_bindings(const ResolvedChain& chain, const RMachine& m,
                                   const REvent& ev, const State& state, const Scope& scope) {
  EnumerateResult result;

  // Enumeration proceeds in lexicographic parameter-name order.
  std::vector<size_t> order(ev.ev.params.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return ev.ev.params[a].name < ev.ev.params[b].name;
  });

  Binding binding;
  binding.reserve(order.size());
  for (size_t i : order) binding.emplace_back(ev.ev.params[i].name, Value::empty_set());

  Env env{&chain, &m, &state, &binding, &scope};

  std::function<void(size_t)> go = [&](size_t i) {
    if (i == order.size()) {
      for (const auto& g : ev.ev.guards)
        if (!eval_predicate(*g.pred, env)) return;
      result.bindings.push_back(binding);
      return;
    }
    Binding partial(binding.begin(), binding.begin() + i);
    Env penv{&chain, &m, &state, &partial, &scope};
    Value domain = eval(*ev.ev.params[order[i]].typing, penv);
    require_set(domain, "parameter typing");
    for (const auto& v : domain.items) {
      binding[i].second = v;
      go(i + 1);
    }
  };
  go(0);

  // Scope exhaustion: a constructor whose fresh-instance parameter has no
  // unused atom left is disabled, reported distinctly.
  if (result.bindings.empty() && ev.ev.kind == EventKind::Constructor && ev.fresh_param >= 0 &&
      ev.ev.class_owner) {
    int owner = m.find_var(*ev.ev.class_owner);
    if (owner >= 0 && owner < static_cast<int>(state.size())) {
      Binding none;
      Env penv{&chain, &m, &state, &none, &scope};
      try {
        Value dom = eval(*ev.ev.params[ev.fresh_param].typing, penv);
        const Value& current = state[owner];
        bool any_fresh = false;
        for (const auto& atom : dom.items)
          if (!current.contains(atom)) any_fresh = true;
        if (!any_fresh && !dom.items.empty()) result.scope_exhausted = true;
        if (dom.items.empty()) result.scope_exhausted = true;
      } catch (const EvalError&) {
        // typing depends on other parameters; no exhaustion verdict
      }
    }
  }
  return result;
}

State apply_event(const ResolvedChain& chain, const RMachine& m, const REvent& ev,
                  const Binding& binding, const State& state, const Scope& scope) {
  Env env{&chain, &m, &state, &binding, &scope};
  std::vector<std::pair<int, Value>> updates;
  updates.reserve(ev.ev.actions.size());
  for (const auto& a : ev.ev.actions) {
    int vi = m.find_var(a.target);
    if (vi < 0)
      throw EvalError(EvalError::Kind::Unsupported, "action target '" + a.target + "' unknown");
    updates.emplace_back(vi, eval(*a.value, env));
  }
  State post = state;
  std::vector<bool> assigned(post.size(), false);
  for (auto& [vi, v] : updates) {
    if (assigned[vi])
      throw EvalError(EvalError::Kind::Unsupported,
                      "ConflictingAssignment: two actions target one variable");
    assigned[vi] = true;
    post[vi] = std::move(v);
  }
  return post;
}

}  // namespace ubdb
