#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uncal/errors.hpp"

namespace uncal {

// Raw term AST. Pair is flattened: never 0 or 1 children (0 -> Emp, 1 -> the
// child itself). Def names a root; Call is a function application f(t).
enum class Kind { Mark, Edge, Compose, Pair, Cycle, Nil, Emp, Man, Def, Call };

struct Term;
using Rc = std::shared_ptr<const Term>;

struct Term {
  Kind kind;
  std::string name;        // Mark: marker; Edge: label; Def: marker; Call: fname
  bool label_var = false;  // Edge whose "label" is a clause label variable
  std::vector<Rc> kids;
};

Rc mk_mark(std::string name);
Rc mk_edge(std::string label, Rc child, bool label_var = false);
Rc mk_compose(Rc lhs, Rc rhs);
Rc mk_pair(std::vector<Rc> kids);  // flattens nested pairs, drops Emp, applies 0/1 conventions
Rc mk_cycle(Rc body);
Rc mk_nil();
Rc mk_emp();
Rc mk_man();
Rc mk_def(std::string marker, Rc child);
Rc mk_call(std::string fname, Rc arg);
Rc mk_union(Rc lhs, Rc rhs);  // ! @ (lhs (+) rhs)

bool term_eq(const Rc& a, const Rc& b);

// One clause of an sfun/bfun definition.
struct Clause {
  enum class Pat { Nil, Label, Var } pat = Pat::Label;
  std::string label;               // concrete label, or the label-variable name
  std::string argvar;              // the bound argument identifier (empty for Nil pattern)
  Rc body;
  std::set<std::string> where_excluded;  // labels listed in a `where v /= l` clause
};

struct Definition {
  std::string name;
  bool is_bfun = false;
  std::vector<Clause> clauses;
};

struct Program {
  std::vector<Definition> defs;  // in source order, names pairwise distinct
  std::optional<Rc> main;

  const Definition* find(const std::string& name) const;
};

Rc parse_term(const std::string& text);
Program parse_program(const std::string& text);

std::string print_term(const Rc& t);

}  // namespace uncal
