#ifndef UBDB_PATTERNS_HPP
#define UBDB_PATTERNS_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "ubdb/resolve.hpp"

namespace ubdb {

enum class LintSeverity { Error, Warning, Info };

struct LintFinding {
  std::string rule;      // stable identifier, documented in the README
  LintSeverity severity = LintSeverity::Warning;
  std::string subject;
  std::string message;
};

// Declared class kinds checked against the structure that should justify them.
std::vector<LintFinding> classify_classes(const ResolvedChain& chain);

// Layer labels checked against the concepts each machine introduces.
std::vector<LintFinding> lint_layering(const ResolvedChain& chain);

// Historical classes must be populated only by atomic live-to-historical moves.
std::vector<LintFinding> check_historical_pattern(const ResolvedChain& chain);

struct SplitSpec {
  std::string relation;
  std::string new_class;
  std::string fn1_name;
  std::string fn2_name;
};

struct SplitResult {
  std::optional<RefinementChain> chain;
  std::vector<Diagnostic> diagnostics;
};

// Append a data-refinement machine replacing relation R: A<->B by a class C
// with total functions R1: C->A and R2: C->B, gluing invariant
// inv1 R = R1~;R2 and composite-uniqueness invariant inv2; events touching R
// are rewritten.
SplitResult split_association(const RefinementChain& chain, const SplitSpec& spec);

std::string findings_to_text(const std::vector<LintFinding>& findings);
nlohmann::json findings_to_json(const std::vector<LintFinding>& findings);

}  // namespace ubdb

#endif
