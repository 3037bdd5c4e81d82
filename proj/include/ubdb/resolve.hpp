#ifndef UBDB_RESOLVE_HPP
#define UBDB_RESOLVE_HPP

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ubdb/ast.hpp"
#include "ubdb/diagnostics.hpp"

namespace ubdb {

// How an effective event came to be part of a machine.
enum class EventOrigin {
  New,         // introduced in this machine, refines skip
  Inherited,   // copied unchanged from the abstraction
  Extended,    // declared with `extends`; parts are the union with the abstract event
  Redeclared,  // same-named override; refines the abstract event with new parts
};

struct RInvariant {
  std::string label;
  PredPtr pred;          // resolved
  bool auto_typing = false;  // generated from a class/attribute/association declaration
  int origin_machine = -1;   // machine index that introduced it
  bool gluing = false;       // mentions a variable dropped by its origin machine
};

struct REvent {
  Event ev;  // fully resolved: params/guards/actions are the effective union
  EventOrigin origin = EventOrigin::New;
  int abstract_index = -1;  // index into abstraction's events, when refining one
  int fresh_param = -1;     // constructor: parameter designating the fresh instance
};

struct RMachine {
  std::string name;
  int index = -1;
  int refines = -1;  // index of the refined machine, or -1
  Layer layer = Layer::Other;

  // Effective concrete variables, inherited-first order. Ghost variables are
  // abstract variables dropped by this machine; they are addressable by
  // invariants (gluing) at indices [vars.size(), vars.size()+ghosts.size()).
  std::vector<VariableDecl> vars;
  std::vector<VariableDecl> ghosts;
  std::unordered_map<std::string, int> var_index;  // concrete and ghost

  std::vector<ClassAnnotation> classes;  // effective
  std::vector<RInvariant> invariants;    // effective: inherited + auto + declared
  std::vector<REvent> events;            // effective

  int find_var(const std::string& name) const {
    auto it = var_index.find(name);
    return it == var_index.end() ? -1 : it->second;
  }
  const ClassAnnotation* find_class(const std::string& name) const {
    for (const auto& c : classes)
      if (c.class_name == name) return &c;
    return nullptr;
  }
  int find_event(const std::string& name) const {
    for (size_t i = 0; i < events.size(); ++i)
      if (events[i].ev.name == name) return static_cast<int>(i);
    return -1;
  }
};

struct ResolvedChain {
  RefinementChain source;  // the parsed chain, kept for pretty-printing

  std::vector<std::string> carriers;
  std::unordered_map<std::string, int> carrier_id;
  std::vector<bool> carrier_is_value;  // true when no class draws atoms from it

  std::vector<std::pair<std::string, ExprPtr>> constants;
  std::vector<RMachine> machines;

  int find_carrier(const std::string& name) const {
    auto it = carrier_id.find(name);
    return it == carrier_id.end() ? -1 : it->second;
  }
  int find_machine(const std::string& name) const {
    for (size_t i = 0; i < machines.size(); ++i)
      if (machines[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

struct ResolveResult {
  std::optional<ResolvedChain> chain;
  std::vector<Diagnostic> diagnostics;
};

// Bind all names, expand event extension, synthesise typing invariants.
// Idempotent: resolving the source of a resolved chain yields a structurally
// identical result.
ResolveResult resolve(const RefinementChain& chain);

// Type discipline check over a resolved chain; diagnostics, empty = well-typed.
std::vector<Diagnostic> typecheck(const ResolvedChain& chain);

// Infer the type of a resolved expression in the context of a machine.
// Used by typecheck and by the SQL generator.
SetType infer_type(const ResolvedChain& chain, const RMachine& m, const Expr& e,
                   std::vector<Diagnostic>* diags);

}  // namespace ubdb

#endif
