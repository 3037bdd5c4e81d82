#ifndef UBDB_DIAGNOSTICS_HPP
#define UBDB_DIAGNOSTICS_HPP

#include <string>
#include <vector>

#include "ubdb/ast.hpp"

namespace ubdb {

enum class Severity { Error, Warning };

struct Diagnostic {
  SourceSpan span;
  Severity severity = Severity::Error;
  std::string message;
};

inline bool has_errors(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds)
    if (d.severity == Severity::Error) return true;
  return false;
}

std::string format_diagnostic(const Diagnostic& d);

}  // namespace ubdb

#endif
