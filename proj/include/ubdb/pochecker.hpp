#ifndef UBDB_POCHECKER_HPP
#define UBDB_POCHECKER_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ubdb/eval.hpp"
#include "ubdb/resolve.hpp"

namespace ubdb {

enum class POKind { INV, GRD, SIM, GLU, FEAS };
const char* po_kind_name(POKind k);

struct ProofObligation {
  POKind kind;
  std::string machine;          // machine under analysis (concrete one for refinement)
  std::string abstract_machine; // GRD/SIM/GLU only
  std::string event;
  std::string invariant_label;  // INV/GLU only
  std::string describe() const;
};

struct TraceStep {
  std::string event;
  Binding binding;
};

struct Trace {
  std::vector<TraceStep> steps;
};

enum class Verdict { Holds, HoldsByConstruction, Violated, ScopeExhausted };
const char* verdict_name(Verdict v);

struct CheckReport {
  ProofObligation obligation;
  Verdict verdict = Verdict::Holds;
  std::optional<Trace> counterexample;
  long long states_explored = 0;
  double elapsed_seconds = 0;
  std::string detail;
};

struct CheckOptions {
  Scope scope;
  long long budget = 1000000;  // reachable-state cap; exceeded -> scope-exhausted
};

// 2 instances per class carrier set, 3 per value carrier set.
Scope default_scope(const ResolvedChain& chain);

// The full obligation matrix: per machine one INV per (event, non-gluing
// invariant) and one FEAS per event; per refinement step one GRD and one SIM
// per refined event and one GLU per (event, gluing invariant).
std::vector<ProofObligation> generate_obligations(const ResolvedChain& chain);

// Discharge the INV and FEAS obligations of one machine by exhaustive
// breadth-first exploration from the all-empty state.
std::vector<CheckReport> check(const ResolvedChain& chain, const std::string& machine,
                               const CheckOptions& options);

// Discharge GRD/SIM/GLU for a direct refinement step by joint exploration of
// the concrete machine extended with ghost slots for dropped abstract
// variables.
std::vector<CheckReport> check_refinement(const ResolvedChain& chain,
                                          const std::string& abstract_machine,
                                          const std::string& concrete_machine,
                                          const CheckOptions& options);

// FEAS for every event of every machine; flags mutually blocked constructors.
std::vector<CheckReport> check_enabledness(const ResolvedChain& chain,
                                           const CheckOptions& options);

struct ReachResult {
  long long states = 0;
  bool exhausted = false;
};

// Exhaustive reachable-state exploration over the full variable vector.
ReachResult reachable_state_count(const ResolvedChain& chain, const std::string& machine,
                                  const CheckOptions& options);
std::vector<State> reachable_states(const ResolvedChain& chain, const std::string& machine,
                                    const CheckOptions& options, bool* exhausted = nullptr);

// Replay a trace through the full machine from the all-empty state. Returns
// the visited states (initial first); nullopt when a step is not enabled.
std::optional<std::vector<State>> replay_trace(const ResolvedChain& chain,
                                               const std::string& machine, const Trace& trace,
                                               const Scope& scope);

std::string report_to_text(const std::vector<CheckReport>& reports,
                           const ResolvedChain& chain);
nlohmann::json report_to_json(const std::vector<CheckReport>& reports,
                              const ResolvedChain& chain);
nlohmann::json trace_to_json(const Trace& trace, const ResolvedChain& chain);
std::optional<Trace> trace_from_json(const nlohmann::json& j, const ResolvedChain& chain);

std::optional<Value> value_from_string(const std::string& text, const ResolvedChain& chain);

}  // namespace ubdb

#endif
