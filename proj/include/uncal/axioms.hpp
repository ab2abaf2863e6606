#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "uncal/typing.hpp"

namespace uncal {

// One metavariable of an equation schema together with the judgment
// `src |- ? : tgt` any filler must satisfy.
struct Slot {
  std::string name;
  Ctx src, tgt;
};

// A concrete equation `source |- lhs = rhs : target`; both sides always
// carry the same judgment.
struct Equation {
  Ctx source;
  Tc lhs, rhs;
  Ctx target;
};

using Assignment = std::map<std::string, Tc>;

// An equation schema at a fixed judgment shape: slot fillers of the recorded
// judgments produce one instance of the law.
struct AxiomSchema {
  std::string name;
  std::vector<Slot> slots;
  std::function<Equation(const Assignment&)> build;
};

// An instance shape for the commuting-identities law over Y = <y1..ym>:
// the slot judgment is `x+Y |- t : <&>`, and rho[i][j] (1-based, in 1..m)
// picks which bound marker feeds coordinate j+1 of the i-th tuple.
// Repetitions are allowed.
struct CIInstance {
  int m = 1;
  std::vector<std::vector<int>> rho;  // m maps, each of length m
  Ctx x;                              // ambient context, disjoint from y1..ym
};

// Core-law names acceptable to schema_by_name: sub, SP, eta_man, fix, nat,
// dinat, bekic, CI, c1, c2, unitL_man, unitR_man, assoc_man, com_man, degen.
std::vector<std::string> axg_names();
// Derived-law names: tmnl, fst, snd, dpair, fsi, bmul, bcomul, unR_at,
// unL_at, assoc_at, bunit, compa, comm_u, unitL_u, unitR_u, assoc_u, degen_u.
std::vector<std::string> derived_names();

// Builds the named schema. `shape` selects the judgment shape the law is
// stated at: 0 is a fixed minimal shape, other values draw context sizes
// (and, where the law has one, a tuple width) deterministically from the
// value. Unknown names raise Internal.
AxiomSchema schema_by_name(const std::string& name, std::uint64_t shape = 0);

// The commuting-identities schema at an explicit instance shape.
AxiomSchema ci_schema(const CIInstance& inst);

// Validates the assignment against schema.slots (SlotJudgmentMismatch on a
// missing, extraneous, or wrongly-judged filler) and builds the instance.
Equation instantiate(const AxiomSchema& schema, const Assignment& a);

// Deterministic well-typed term of the judgment `source |- _ : target`,
// using at most `size` AST nodes and labels drawn from {a,b,c}. Equal
// arguments give identical terms. Raises Unsatisfiable when `size` is below
// the smallest inhabitant of the judgment.
Tc random_term(const Ctx& source, const Ctx& target, int size,
               std::uint64_t seed);

struct Failure {
  Assignment assignment;
  Tc lhs, rhs;
};

// Outcome of a soundness run: every recorded failure is a fully-instantiated
// equation whose sides were not bisimilar in the graph model.
struct Report {
  std::string schema;
  int trials = 0;
  std::vector<Failure> failures;
  bool ok() const { return failures.empty(); }
};

// Runs `trials` independent random instantiations of the schema (slot sizes
// drawn in 1..max_size, clamped up to the judgment's minimum) and checks the
// two sides bisimilar. Failures are collected, never thrown. Trials may run
// concurrently; the report is merged in trial order regardless.
Report check_soundness(const AxiomSchema& schema, int trials, int max_size,
                       std::uint64_t seed);

// {"schema":…, "trials":…, "failures":[{"assignment":…, "lhs":…, "rhs":…}]}
std::string report_json(const Report& r);

}  // namespace uncal
