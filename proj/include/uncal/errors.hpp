#pragma once

#include <stdexcept>
#include <string>

namespace uncal {

// Every diagnostic the library raises, grouped roughly by module.
enum class Err {
  // syntax
  SyntaxError,
  DuplicateClause,
  OverlappingPatterns,
  // typing
  UnboundMarker,
  DuplicateMarker,
  ContextMismatch,
  ArityError,
  UnknownFunction,
  DomainMismatch,
  LengthMismatch,
  // graph
  MarkerMismatch,
  ContextSplitError,
  InterfaceMismatch,
  NotClosed,
  // rewrite
  FuelExhausted,
  TypeNotSingleton,
  NotInN,
  // axioms
  SlotJudgmentMismatch,
  Unsatisfiable,
  // recursion
  DependsOnArgument,
  InconsistentK,
  ModeMismatch,
  MatchFailure,
  HypothesisFailed,
  // lambdag
  NotInImage,
  TypeError,
  StuckConditional,
  NonCanonicalClauseTable,
  // catch-all for broken internal invariants
  Internal,
};

const char* err_name(Err e);

struct Error : std::runtime_error {
  Err code;
  Error(Err c, const std::string& msg)
      : std::runtime_error(std::string(err_name(c)) + ": " + msg), code(c) {}
};

[[noreturn]] inline void raise(Err c, const std::string& msg) { throw Error(c, msg); }

}  // namespace uncal
