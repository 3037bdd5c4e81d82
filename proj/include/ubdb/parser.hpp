#ifndef UBDB_PARSER_HPP
#define UBDB_PARSER_HPP

#include <optional>
#include <string>
#include <vector>

#include "ubdb/ast.hpp"
#include "ubdb/diagnostics.hpp"

namespace ubdb {

struct ParseResult {
  std::optional<RefinementChain> chain;  // absent when any error was emitted
  std::vector<Diagnostic> diagnostics;
};

// Parse one .ubdb source. A file may contain a whole chain (contexts and
// machines in refinement order).
ParseResult parse_chain(const std::string& text, const std::string& filename = "<input>");

// Parse several files; declarations are joined in file order.
ParseResult parse_chain_files(const std::vector<std::string>& paths);

// Canonical formatting: LF line endings, 2-space indent. parse(pretty_print(c))
// is structurally identical to c.
std::string pretty_print(const RefinementChain& chain);
std::string pretty_print(const Expr& e);
std::string pretty_print(const Pred& p);

// Test helpers: parse a standalone expression / predicate.
ExprPtr parse_expression(const std::string& text, std::vector<Diagnostic>& diags);
PredPtr parse_predicate(const std::string& text, std::vector<Diagnostic>& diags);

}  // namespace ubdb

#endif
