#ifndef UBDB_AST_HPP
#define UBDB_AST_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ubdb {

struct SourceSpan {
  std::string file;
  int line = 1;
  int column = 1;
  int length = 0;
};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

// The type language: atoms of a carrier set, booleans, finite sets, pairs.
struct SetType {
  enum class Kind { Unknown, Atom, Bool, Set, Pair };
  Kind kind = Kind::Unknown;
  std::string carrier;              // Kind::Atom
  std::shared_ptr<SetType> elem;    // Kind::Set
  std::shared_ptr<SetType> left;    // Kind::Pair
  std::shared_ptr<SetType> right;   // Kind::Pair

  static SetType unknown() { return {}; }
  static SetType atom(std::string s) {
    SetType t;
    t.kind = Kind::Atom;
    t.carrier = std::move(s);
    return t;
  }
  static SetType boolean() {
    SetType t;
    t.kind = Kind::Bool;
    return t;
  }
  static SetType set_of(SetType e) {
    SetType t;
    t.kind = Kind::Set;
    t.elem = std::make_shared<SetType>(std::move(e));
    return t;
  }
  static SetType pair_of(SetType a, SetType b) {
    SetType t;
    t.kind = Kind::Pair;
    t.left = std::make_shared<SetType>(std::move(a));
    t.right = std::make_shared<SetType>(std::move(b));
    return t;
  }
  static SetType relation(const std::string& a, const std::string& b) {
    return set_of(pair_of(atom(a), atom(b)));
  }
};

bool type_equal(const SetType& a, const SetType& b);
std::string type_to_string(const SetType& t);

// ---------------------------------------------------------------------------
// Expressions and predicates (one recursive AST)
// ---------------------------------------------------------------------------

struct Expr;
struct Pred;
using ExprPtr = std::shared_ptr<Expr>;
using PredPtr = std::shared_ptr<Pred>;

struct Expr {
  enum class Kind {
    Ident,      // unresolved identifier (parser output)
    Var,        // machine variable, resolved index
    Carrier,    // carrier set, resolved id; denotes the full atom set
    ConstRef,   // context constant
    Bound,      // quantifier- or parameter-bound identifier
    EnumSet,    // {e1, ..., en}
    Maplet,     // a |-> b
    Union,
    Minus,
    Inter,
    Cross,      // cartesian product
    Dom,
    Ran,
    DomSub,     // s <-| r
    DomRes,     // s <| r
    Override,   // f <+ g
    Inverse,    // r~
    Comp,       // r1 ; r2  (forward composition)
    Image,      // r[s]
    Apply,      // f(x)
    Pow,        // POW(s)
  };
  Kind kind;
  std::string name;          // Ident/Var/Carrier/ConstRef/Bound
  int index = -1;            // Var: variable slot; Carrier: carrier id
  std::vector<ExprPtr> kids;
  SourceSpan span;
  SetType type;              // filled by typecheck

  static ExprPtr make(Kind k, std::vector<ExprPtr> kids = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->kids = std::move(kids);
    return e;
  }
  static ExprPtr ident(std::string n) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Ident;
    e->name = std::move(n);
    return e;
  }
};

// The relation-class arrows usable in declarations and membership assertions.
enum class RelArrow { Relation, TotalFn, PartialFn };

struct RelationKind {
  RelArrow arrow = RelArrow::Relation;
  bool injective = false;
};

struct Binder {
  std::string name;
  ExprPtr typing;  // finite typing expression, required
};

struct Pred {
  enum class Kind {
    True,
    False,
    In,        // e1 : e2
    NotIn,     // e1 /: e2
    Subset,    // e1 <: e2
    Eq,        // e1 = e2
    And,
    Or,
    Implies,
    Not,
    Forall,
    Exists,
    RelAssert,  // e1 : e2 <arrow> e3 [injective]
  };
  Kind kind;
  std::vector<ExprPtr> exprs;   // operands for In/NotIn/Subset/Eq/RelAssert
  std::vector<PredPtr> preds;   // operands for And/Or/Implies/Not
  std::vector<Binder> binders;  // Forall/Exists
  RelationKind rel;             // RelAssert
  SourceSpan span;

  static PredPtr make(Kind k) {
    auto p = std::make_shared<Pred>();
    p->kind = k;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Machines, contexts, events
// ---------------------------------------------------------------------------

enum class VarRole { ClassInstanceSet, Attribute, Association };

struct VariableDecl {
  std::string name;
  VarRole role = VarRole::ClassInstanceSet;
  SetType typing;
  // Attribute/Association only:
  std::string source;  // owning class
  std::string target;  // carrier set (attribute) or class (association)
  RelationKind rel;
  SourceSpan span;
};

enum class ClassKind { Primary, Secondary, Attribute, Historical };

struct ClassAnnotation {
  std::string class_name;
  ClassKind kind = ClassKind::Primary;
  std::string carrier;                 // carrier set the class draws atoms from
  std::optional<std::string> supertype;
  SourceSpan span;
};

enum class EventKind { Constructor, Destructor, Normal, Query };

struct Guard {
  std::string label;
  PredPtr pred;
};

struct Action {
  std::string label;
  std::string target;  // assigned variable
  ExprPtr value;
  SourceSpan span;
};

struct Param {
  std::string name;
  ExprPtr typing;  // set expression the parameter ranges over
};

struct Event {
  std::string name;
  EventKind kind = EventKind::Normal;
  std::optional<std::string> extends;      // abstract event whose parts are unioned in
  std::optional<std::string> class_owner;  // for constructor/destructor/normal-of-class
  std::vector<Param> params;
  std::vector<Guard> guards;
  std::vector<Action> actions;
  SourceSpan span;
};

struct LabeledPred {
  std::string label;
  PredPtr pred;
  SourceSpan span;
};

struct Context {
  std::string name;
  std::optional<std::string> extends;
  std::vector<std::string> carrier_sets;
  std::vector<std::pair<std::string, ExprPtr>> constants;
  std::vector<LabeledPred> axioms;
  SourceSpan span;
};

// Refinement-layer labels, in methodology order.
enum class Layer {
  Structure,
  Attributes,
  Secondary,
  AttributeClasses,
  Historical,
  Queries,
  Other
};

const char* layer_name(Layer l);
int layer_rank(Layer l);

struct Machine {
  std::string name;
  std::optional<std::string> refines;
  std::vector<std::string> sees;
  Layer layer = Layer::Other;
  std::vector<std::string> drops;  // abstract variables removed by data refinement
  std::vector<VariableDecl> variables;
  std::vector<ClassAnnotation> classes;
  std::vector<LabeledPred> invariants;
  std::vector<Event> events;
  SourceSpan span;
};

struct RefinementChain {
  std::vector<Context> contexts;
  std::vector<Machine> machines;
};

// Structural equality ignoring source spans and inferred types.
bool structural_equal(const RefinementChain& a, const RefinementChain& b);
bool structural_equal(const Expr& a, const Expr& b);
bool structural_equal(const Pred& a, const Pred& b);

// Free identifiers of an expression/predicate (excluding bound names).
void collect_idents(const Expr& e, std::vector<std::string>& out);
void collect_idents(const Pred& p, std::vector<std::string>& out);

}  // namespace ubdb

#endif
