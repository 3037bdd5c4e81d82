#include "ubdb/ast.hpp"

#include <algorithm>

namespace ubdb {

bool type_equal(const SetType& a, const SetType& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case SetType::Kind::Unknown:
    case SetType::Kind::Bool:
      return true;
    case SetType::Kind::Atom:
      return a.carrier == b.carrier;
    case SetType::Kind::Set:
      return type_equal(*a.elem, *b.elem);
    case SetType::Kind::Pair:
      return type_equal(*a.left, *b.left) && type_equal(*a.right, *b.right);
  }
  return false;
}

std::string type_to_string(const SetType& t) {
  switch (t.kind) {
    case SetType::Kind::Unknown:
      return "?";
    case SetType::Kind::Bool:
      return "BOOL";
    case SetType::Kind::Atom:
      return t.carrier;
    case SetType::Kind::Set:
      return "POW(" + type_to_string(*t.elem) + ")";
    case SetType::Kind::Pair:
      return "(" + type_to_string(*t.left) + " ** " + type_to_string(*t.right) + ")";
  }
  return "?";
}

const char* layer_name(Layer l) {
  switch (l) {
    case Layer::Structure: return "structure";
    case Layer::Attributes: return "attributes";
    case Layer::Secondary: return "secondary";
    case Layer::AttributeClasses: return "attribute-classes";
    case Layer::Historical: return "historical";
    case Layer::Queries: return "queries";
    case Layer::Other: return "other";
  }
  return "other";
}

int layer_rank(Layer l) {
  switch (l) {
    case Layer::Structure: return 0;
    case Layer::Attributes: return 1;
    case Layer::Secondary: return 2;
    case Layer::AttributeClasses: return 3;
    case Layer::Historical: return 4;
    case Layer::Queries: return 5;
    case Layer::Other: return 6;
  }
  return 6;
}

bool structural_equal(const Expr& a, const Expr& b) {
  // Ident and the resolved leaf kinds compare by name so that a chain
  // round-tripped before and after resolution still matches.
  auto leaf = [](Expr::Kind k) {
    return k == Expr::Kind::Ident || k == Expr::Kind::Var || k == Expr::Kind::Carrier ||
           k == Expr::Kind::ConstRef || k == Expr::Kind::Bound;
  };
  if (leaf(a.kind) != leaf(b.kind)) return false;
  if (leaf(a.kind)) return a.name == b.name;
  if (a.kind != b.kind) return false;
  if (a.kids.size() != b.kids.size()) return false;
  for (size_t i = 0; i < a.kids.size(); ++i)
    if (!structural_equal(*a.kids[i], *b.kids[i])) return false;
  return true;
}

bool structural_equal(const Pred& a, const Pred& b) {
  if (a.kind != b.kind) return false;
  if (a.exprs.size() != b.exprs.size() || a.preds.size() != b.preds.size() ||
      a.binders.size() != b.binders.size())
    return false;
  if (a.kind == Pred::Kind::RelAssert &&
      (a.rel.arrow != b.rel.arrow || a.rel.injective != b.rel.injective))
    return false;
  for (size_t i = 0; i < a.exprs.size(); ++i)
    if (!structural_equal(*a.exprs[i], *b.exprs[i])) return false;
  for (size_t i = 0; i < a.preds.size(); ++i)
    if (!structural_equal(*a.preds[i], *b.preds[i])) return false;
  for (size_t i = 0; i < a.binders.size(); ++i) {
    if (a.binders[i].name != b.binders[i].name) return false;
    if (!structural_equal(*a.binders[i].typing, *b.binders[i].typing)) return false;
  }
  return true;
}

namespace {

bool event_equal(const Event& a, const Event& b) {
  if (a.name != b.name || a.kind != b.kind || a.extends != b.extends ||
      a.class_owner != b.class_owner)
    return false;
  if (a.params.size() != b.params.size() || a.guards.size() != b.guards.size() ||
      a.actions.size() != b.actions.size())
    return false;
  for (size_t i = 0; i < a.params.size(); ++i) {
    if (a.params[i].name != b.params[i].name) return false;
    if (!structural_equal(*a.params[i].typing, *b.params[i].typing)) return false;
  }
  for (size_t i = 0; i < a.guards.size(); ++i) {
    if (a.guards[i].label != b.guards[i].label) return false;
    if (!structural_equal(*a.guards[i].pred, *b.guards[i].pred)) return false;
  }
  for (size_t i = 0; i < a.actions.size(); ++i) {
    if (a.actions[i].label != b.actions[i].label || a.actions[i].target != b.actions[i].target)
      return false;
    if (!structural_equal(*a.actions[i].value, *b.actions[i].value)) return false;
  }
  return true;
}

bool machine_equal(const Machine& a, const Machine& b) {
  if (a.name != b.name || a.refines != b.refines || a.sees != b.sees || a.layer != b.layer ||
      a.drops != b.drops)
    return false;
  if (a.variables.size() != b.variables.size() || a.classes.size() != b.classes.size() ||
      a.invariants.size() != b.invariants.size() || a.events.size() != b.events.size())
    return false;
  for (size_t i = 0; i < a.variables.size(); ++i) {
    const auto& x = a.variables[i];
    const auto& y = b.variables[i];
    if (x.name != y.name || x.role != y.role || x.source != y.source || x.target != y.target ||
        x.rel.arrow != y.rel.arrow || x.rel.injective != y.rel.injective)
      return false;
  }
  for (size_t i = 0; i < a.classes.size(); ++i) {
    const auto& x = a.classes[i];
    const auto& y = b.classes[i];
    if (x.class_name != y.class_name || x.kind != y.kind || x.carrier != y.carrier ||
        x.supertype != y.supertype)
      return false;
  }
  for (size_t i = 0; i < a.invariants.size(); ++i) {
    if (a.invariants[i].label != b.invariants[i].label) return false;
    if (!structural_equal(*a.invariants[i].pred, *b.invariants[i].pred)) return false;
  }
  for (size_t i = 0; i < a.events.size(); ++i)
    if (!event_equal(a.events[i], b.events[i])) return false;
  return true;
}

}  // namespace

bool structural_equal(const RefinementChain& a, const RefinementChain& b) {
  if (a.contexts.size() != b.contexts.size() || a.machines.size() != b.machines.size())
    return false;
  for (size_t i = 0; i < a.contexts.size(); ++i) {
    const auto& x = a.contexts[i];
    const auto& y = b.contexts[i];
    if (x.name != y.name || x.extends != y.extends || x.carrier_sets != y.carrier_sets)
      return false;
    if (x.constants.size() != y.constants.size() || x.axioms.size() != y.axioms.size())
      return false;
    for (size_t j = 0; j < x.constants.size(); ++j) {
      if (x.constants[j].first != y.constants[j].first) return false;
      if (!structural_equal(*x.constants[j].second, *y.constants[j].second)) return false;
    }
    for (size_t j = 0; j < x.axioms.size(); ++j) {
      if (x.axioms[j].label != y.axioms[j].label) return false;
      if (!structural_equal(*x.axioms[j].pred, *y.axioms[j].pred)) return false;
    }
  }
  for (size_t i = 0; i < a.machines.size(); ++i)
    if (!machine_equal(a.machines[i], b.machines[i])) return false;
  return true;
}

namespace {

void collect_free(const Expr& e, std::vector<std::string>& bound, std::vector<std::string>& out) {
  switch (e.kind) {
    case Expr::Kind::Ident:
    case Expr::Kind::Var:
    case Expr::Kind::Carrier:
    case Expr::Kind::ConstRef:
    case Expr::Kind::Bound:
      if (std::find(bound.begin(), bound.end(), e.name) == bound.end()) out.push_back(e.name);
      return;
    default:
      for (const auto& k : e.kids) collect_free(*k, bound, out);
  }
}

void collect_free(const Pred& p, std::vector<std::string>& bound, std::vector<std::string>& out) {
  if (p.kind == Pred::Kind::Forall || p.kind == Pred::Kind::Exists) {
    for (const auto& b : p.binders) collect_free(*b.typing, bound, out);
    size_t mark = bound.size();
    for (const auto& b : p.binders) bound.push_back(b.name);
    for (const auto& q : p.preds) collect_free(*q, bound, out);
    bound.resize(mark);
    return;
  }
  for (const auto& e : p.exprs) collect_free(*e, bound, out);
  for (const auto& q : p.preds) collect_free(*q, bound, out);
}

}  // namespace

void collect_idents(const Expr& e, std::vector<std::string>& out) {
  std::vector<std::string> bound;
  collect_free(e, bound, out);
}

void collect_idents(const Pred& p, std::vector<std::string>& out) {
  std::vector<std::string> bound;
  collect_free(p, bound, out);
}

}  // namespace ubdb
