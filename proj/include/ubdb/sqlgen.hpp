#ifndef UBDB_SQLGEN_HPP
#define UBDB_SQLGEN_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ubdb/resolve.hpp"

namespace ubdb {

struct ColumnDef {
  std::string name;
  std::string sql_type;
  bool nullable = true;
  bool unique = false;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  std::string primary_key;
  std::vector<std::pair<std::string, std::string>> foreign_keys;  // column -> table
  std::vector<std::vector<std::string>> unique_constraints;
  std::vector<std::string> checks;
};

struct GuardSql {
  std::string label;
  std::string sql;  // boolean condition over :params
  bool expect = true;
};

struct ProcedureDef {
  std::string name;
  EventKind kind = EventKind::Normal;
  std::string event;
  std::vector<std::pair<std::string, std::string>> params;  // name -> sql type
  std::optional<std::string> fresh_param;
  std::vector<GuardSql> guards;
  std::vector<std::string> statements;  // DML in execution order
  std::string select;                   // query events only
  std::vector<std::string> notes;
};

struct SqlGen {
  std::vector<TableDef> tables;  // dependency order, supertypes first
  std::vector<ProcedureDef> procedures;
  std::vector<std::pair<std::string, std::string>> value_sets;  // carrier -> sql type
  std::vector<std::string> invariant_notes;
  std::vector<Diagnostic> diagnostics;
};

// Code is generated from the most concrete machine; after resolve its events
// and invariants are already the effective unions.
const RMachine& flatten(const ResolvedChain& chain);

SqlGen generate_sql(const ResolvedChain& chain);

std::string table_ddl(const TableDef& t);
std::string procedure_text(const ProcedureDef& p);

// Full script: DDL then procedures. Byte-deterministic for identical input.
std::string emit_script(const SqlGen& g);
nlohmann::json build_manifest(const SqlGen& g, bool force);

}  // namespace ubdb

#endif
