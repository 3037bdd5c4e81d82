#include <unordered_map>

#include "ubdb/resolve.hpp"

namespace ubdb {

namespace {

using TypeEnv = std::unordered_map<std::string, SetType>;

struct Typechecker {
  const ResolvedChain& chain;
  const RMachine& m;
  std::vector<Diagnostic>* diags;

  void error(const SourceSpan& span, const std::string& msg) {
    if (diags) diags->push_back({span, Severity::Error, msg});
  }

  bool known(const SetType& t) const { return t.kind != SetType::Kind::Unknown; }

  // Merge two types; Unknown yields to the other side. Reports a mismatch at
  // `span` when both are known and differ.
  SetType unify(const SetType& a, const SetType& b, const SourceSpan& span) {
    if (!known(a)) return b;
    if (!known(b)) return a;
    if (a.kind != b.kind) {
      error(span, "TypeMismatch: " + type_to_string(a) + " vs " + type_to_string(b));
      return a;
    }
    switch (a.kind) {
      case SetType::Kind::Atom:
        if (a.carrier != b.carrier)
          error(span, "TypeMismatch: " + type_to_string(a) + " vs " + type_to_string(b));
        return a;
      case SetType::Kind::Set:
        return SetType::set_of(unify(*a.elem, *b.elem, span));
      case SetType::Kind::Pair:
        return SetType::pair_of(unify(*a.left, *b.left, span),
                                unify(*a.right, *b.right, span));
      default:
        return a;
    }
  }

  SetType elem_of(const SetType& t, const SourceSpan& span, const char* what) {
    if (!known(t)) return SetType::unknown();
    if (t.kind != SetType::Kind::Set) {
      error(span, std::string("TypeMismatch: ") + what + " expects a set, got " +
                      type_to_string(t));
      return SetType::unknown();
    }
    return *t.elem;
  }

  std::pair<SetType, SetType> pair_parts(const SetType& t, const SourceSpan& span,
                                         const char* what) {
    SetType e = elem_of(t, span, what);
    if (!known(e)) return {SetType::unknown(), SetType::unknown()};
    if (e.kind != SetType::Kind::Pair) {
      error(span, std::string("TypeMismatch: ") + what + " expects a relation, got " +
                      type_to_string(t));
      return {SetType::unknown(), SetType::unknown()};
    }
    return {*e.left, *e.right};
  }

  SetType infer(Expr& e, TypeEnv& env) {
    SetType t = infer_raw(e, env);
    e.type = t;
    return t;
  }

  SetType infer_raw(Expr& e, TypeEnv& env) {
    switch (e.kind) {
      case Expr::Kind::Var: {
        size_t i = static_cast<size_t>(e.index);
        if (i < m.vars.size()) return m.vars[i].typing;
        i -= m.vars.size();
        if (i < m.ghosts.size()) return m.ghosts[i].typing;
        return SetType::unknown();
      }
      case Expr::Kind::Carrier:
        return SetType::set_of(SetType::atom(e.name));
      case Expr::Kind::ConstRef: {
        for (const auto& [n, c] : chain.constants)
          if (n == e.name) {
            TypeEnv empty;
            return infer(*c, empty);
          }
        return SetType::unknown();
      }
      case Expr::Kind::Bound: {
        auto it = env.find(e.name);
        return it == env.end() ? SetType::unknown() : it->second;
      }
      case Expr::Kind::Ident:
        return SetType::unknown();
      case Expr::Kind::EnumSet: {
        SetType elem = SetType::unknown();
        for (auto& k : e.kids) elem = unify(elem, infer(*k, env), e.span);
        return SetType::set_of(elem);
      }
      case Expr::Kind::Maplet:
        return SetType::pair_of(infer(*e.kids[0], env), infer(*e.kids[1], env));
      case Expr::Kind::Union:
      case Expr::Kind::Minus:
      case Expr::Kind::Inter: {
        SetType a = infer(*e.kids[0], env);
        SetType b = infer(*e.kids[1], env);
        elem_of(a, e.span, "set operator");
        elem_of(b, e.span, "set operator");
        return unify(a, b, e.span);
      }
      case Expr::Kind::Cross: {
        SetType a = elem_of(infer(*e.kids[0], env), e.span, "**");
        SetType b = elem_of(infer(*e.kids[1], env), e.span, "**");
        return SetType::set_of(SetType::pair_of(a, b));
      }
      case Expr::Kind::Dom: {
        auto [a, b] = pair_parts(infer(*e.kids[0], env), e.span, "dom");
        return SetType::set_of(a);
      }
      case Expr::Kind::Ran: {
        auto [a, b] = pair_parts(infer(*e.kids[0], env), e.span, "ran");
        return SetType::set_of(b);
      }
      case Expr::Kind::DomSub:
      case Expr::Kind::DomRes: {
        SetType s = infer(*e.kids[0], env);
        SetType r = infer(*e.kids[1], env);
        auto [a, b] = pair_parts(r, e.span, "domain restriction");
        unify(s, SetType::set_of(a), e.span);
        return r;
      }
      case Expr::Kind::Override:
        return unify(infer(*e.kids[0], env), infer(*e.kids[1], env), e.span);
      case Expr::Kind::Inverse: {
        auto [a, b] = pair_parts(infer(*e.kids[0], env), e.span, "~");
        return SetType::set_of(SetType::pair_of(b, a));
      }
      case Expr::Kind::Comp: {
        auto [a, b1] = pair_parts(infer(*e.kids[0], env), e.span, ";");
        auto [b2, c] = pair_parts(infer(*e.kids[1], env), e.span, ";");
        unify(b1, b2, e.span);
        return SetType::set_of(SetType::pair_of(a, c));
      }
      case Expr::Kind::Image: {
        auto [a, b] = pair_parts(infer(*e.kids[0], env), e.span, "image");
        unify(infer(*e.kids[1], env), SetType::set_of(a), e.span);
        return SetType::set_of(b);
      }
      case Expr::Kind::Apply: {
        auto [a, b] = pair_parts(infer(*e.kids[0], env), e.span, "application");
        unify(infer(*e.kids[1], env), a, e.span);
        return b;
      }
      case Expr::Kind::Pow:
        return SetType::set_of(infer(*e.kids[0], env));
    }
    return SetType::unknown();
  }

  void check_pred(Pred& p, TypeEnv& env) {
    switch (p.kind) {
      case Pred::Kind::True:
      case Pred::Kind::False:
        return;
      case Pred::Kind::In:
      case Pred::Kind::NotIn: {
        SetType x = infer(*p.exprs[0], env);
        SetType s = infer(*p.exprs[1], env);
        unify(SetType::set_of(x), s, p.span);
        return;
      }
      case Pred::Kind::Subset: {
        SetType a = infer(*p.exprs[0], env);
        SetType b = infer(*p.exprs[1], env);
        elem_of(a, p.span, "subset");
        elem_of(b, p.span, "subset");
        unify(a, b, p.span);
        return;
      }
      case Pred::Kind::Eq:
        unify(infer(*p.exprs[0], env), infer(*p.exprs[1], env), p.span);
        return;
      case Pred::Kind::And:
      case Pred::Kind::Or:
      case Pred::Kind::Implies:
      case Pred::Kind::Not:
        for (auto& q : p.preds) check_pred(*q, env);
        return;
      case Pred::Kind::Forall:
      case Pred::Kind::Exists: {
        std::vector<std::pair<std::string, bool>> shadowed;
        for (auto& b : p.binders) {
          SetType t = elem_of(infer(*b.typing, env), p.span, "quantifier typing");
          shadowed.emplace_back(b.name, env.count(b.name) > 0);
          env[b.name] = t;
        }
        check_pred(*p.preds[0], env);
        for (auto it = shadowed.rbegin(); it != shadowed.rend(); ++it)
          if (!it->second) env.erase(it->first);
        return;
      }
      case Pred::Kind::RelAssert: {
        auto [a, b] = pair_parts(infer(*p.exprs[0], env), p.span, "relation assertion");
        unify(SetType::set_of(a), infer(*p.exprs[1], env), p.span);
        unify(SetType::set_of(b), infer(*p.exprs[2], env), p.span);
        return;
      }
    }
  }
};

}  // namespace

SetType infer_type(const ResolvedChain& chain, const RMachine& m, const Expr& e,
                   std::vector<Diagnostic>* diags) {
  Typechecker tc{chain, m, diags};
  TypeEnv env;
  return tc.infer(const_cast<Expr&>(e), env);
}

std::vector<Diagnostic> typecheck(const ResolvedChain& chain) {
  std::vector<Diagnostic> diags;
  for (const auto& m : chain.machines) {
    Typechecker tc{chain, m, &diags};
    for (const auto& inv : m.invariants) {
      TypeEnv env;
      tc.check_pred(*inv.pred, env);
    }
    for (const auto& re : m.events) {
      TypeEnv env;
      for (const auto& prm : re.ev.params) {
        SetType t = tc.elem_of(tc.infer(*prm.typing, env), re.ev.span, "parameter typing");
        env[prm.name] = t;
      }
      for (const auto& g : re.ev.guards) tc.check_pred(*g.pred, env);
      for (const auto& a : re.ev.actions) {
        int vi = m.find_var(a.target);
        if (vi < 0) continue;
        SetType vt = static_cast<size_t>(vi) < m.vars.size()
                         ? m.vars[vi].typing
                         : SetType::unknown();
        tc.unify(vt, tc.infer(*a.value, env), a.span);
      }
    }
  }
  return diags;
}

}  // namespace ubdb
