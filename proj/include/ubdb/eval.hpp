#ifndef UBDB_EVAL_HPP
#define UBDB_EVAL_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ubdb/resolve.hpp"
#include "ubdb/value.hpp"

namespace ubdb {

// Parameter or quantifier binding, name -> value. Small, linear lookup.
using Binding = std::vector<std::pair<std::string, Value>>;

struct EvalError : std::runtime_error {
  enum class Kind {
    ApplyOutsideDomain,  // f(x) with x not in dom(f)
    NotAFunction,        // f(x) with several images
    Unsupported,         // value shape outside the operator's domain
  };
  Kind kind;
  EvalError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct Env {
  const ResolvedChain* chain = nullptr;
  const RMachine* machine = nullptr;
  const State* state = nullptr;     // slots for machine vars (+ ghosts, when present)
  const Binding* binding = nullptr; // may be null
  const Scope* scope = nullptr;
};

// Exact set-theoretic denotation over finite values. Pure; throws EvalError
// for well-definedness failures.
Value eval(const Expr& e, const Env& env);
bool eval_predicate(const Pred& p, const Env& env);

// All atoms of a carrier set under the scope, as a set value.
Value carrier_value(int carrier_id, const Scope& scope);

struct EnumerateResult {
  std::vector<Binding> bindings;   // guard-satisfying, deterministic order
  bool scope_exhausted = false;    // constructor with no fresh atom available
};

// Exactly the parameter bindings satisfying all guards, enumerated over each
// parameter's typing expression, ordered lexicographically by parameter name
// then candidate value.
EnumerateResult enumerate_bindings(const ResolvedChain& chain, const RMachine& m,
                                   const REvent& ev, const State& state, const Scope& scope);

// Simultaneous-assignment semantics: every action expression is evaluated
// against the pre-state, then all targets are assigned at once.
State apply_event(const ResolvedChain& chain, const RMachine& m, const REvent& ev,
                  const Binding& binding, const State& state, const Scope& scope);

// All-empty initial state (every variable the empty set).
State initial_state(const RMachine& m, bool with_ghosts = false);

}  // namespace ubdb

#endif
