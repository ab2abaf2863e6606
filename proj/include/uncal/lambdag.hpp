#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "uncal/graph.hpp"
#include "uncal/recursion.hpp"

namespace uncal {

// Simply-typed lambda calculus over base types G (graphs), L (labels) and
// B (booleans). Products are kept flattened and unit-absorbed: 1 x t = t,
// (r x s) x t = r x s x t, so a type has a well-defined flat width.
struct LgType {
  enum class K { Unit, G, L, B, Prod, Arrow };
  K k = K::G;
  std::vector<LgType> kids;  // Prod: >= 2 components; Arrow: {dom, cod}
};

LgType lg_unit_t();
LgType lg_g_t();
LgType lg_l_t();
LgType lg_b_t();
LgType lg_gn(int n);  // G^n as a flat product; n == 0 gives the unit type
LgType lg_prod(std::vector<LgType> comps);  // flattening constructor
LgType lg_arrow(LgType dom, LgType cod);
bool lg_type_eq(const LgType& a, const LgType& b);
// Flat coordinate count of a value type; an arrow has none (TypeError).
int lg_width(const LgType& t);
std::string print_lg_type(const LgType& t);

enum class LgKind { Var, Lam, App, Tuple, Const };

// Constant selector. Proj carries its 1-based coordinate; Label and Prim
// carry a name. Prim is an opaque graph function supplied at evaluation
// time (the bridge for base functions a clause table may call).
enum class LgC {
  Unit, Nil, Union, Cons, Fix, Label, True, False, If, Eq, Proj, Srec, Prec,
  Prim,
};

struct LgTerm;
using Lc = std::shared_ptr<const LgTerm>;

// A lambda binds one argument; the binder list names its flat coordinates
// (each of scalar type), so every application is total and tuple-shaped.
struct LgTerm {
  LgKind kind;
  LgC c = LgC::Unit;
  std::string name;  // Var name; Label text; Prim function name
  int index = 0;     // Proj coordinate (1-based)
  std::vector<std::string> binders;
  std::vector<LgType> binder_types;  // parallel to binders
  std::vector<Lc> kids;  // Lam: {body}; App: {fn, arg}; Tuple: components
  std::shared_ptr<const LgType> ty;  // filled in by lg_elaborate
};

Lc lg_var(std::string name);
Lc lg_lam(std::vector<std::string> binders, Lc body,
          std::vector<LgType> binder_types = {});  // default: every binder G
Lc lg_app(Lc fn, Lc arg);
Lc lg_tuple(std::vector<Lc> comps);
Lc lg_const(LgC c);
Lc lg_label(std::string l);
Lc lg_proj(int index);
Lc lg_prim(std::string name);

// Sugared constructor applications.
Lc lg_cons(Lc label, Lc t);           // -:-  applied
Lc lg_union_of(Lc s, Lc t);           // U applied
Lc lg_fix_of(Lc fn);                  // fix applied
Lc lg_if(Lc c, Lc thn, Lc els);
Lc lg_eq_of(Lc a, Lc b);

bool lg_term_eq(const Lc& a, const Lc& b);  // structural, binder names count

// Checks the standard typing rules and returns the same tree with every
// node's type filled in. TypeError on any mismatch, on a free variable, and
// on a recursion operator constant (those must be eliminated first).
Lc lg_elaborate(const Lc& t);
const LgType& lg_type_of(const Lc& elaborated);

// The interpretation of a typed Call-free term `Y |- t : X` as a closed
// lambda term of type G^|Y| -> G^|X|, row by row: markers become
// projections (the identity when |Y| = 1), {} the bottom constant, ! the
// union, edges constructor applications, composition application, pairs
// tuples, and cycles fix. Over an empty source context the lambda wrapper
// is dropped (G^0 -> t is identified with t).
Lc translate(const Tc& t);

// Partial inverse on the image shape: closed terms whose subterms other
// than fix are of first-order type, built from the translation clauses.
// The result is renamed to the standard target <&> (k = 1) or <&$1..&$k>;
// source markers are named after the outer binders. NotInImage outside the
// clause grammar (conditionals, labels at graph type, recursion constants).
Tc inverse(const Lc& t);

// Opaque graph functions a Prim constant may name at evaluation time.
using LgPrims = std::map<std::string, std::function<Graph(const Graph&)>>;

// Call-by-need evaluation to a graph. The heap shares one cell per bound
// occurrence; fix ties the knot by allocating its components as cells whose
// thunks reference the component tuple itself, and a cell demanded while
// already under evaluation (the black hole) reads back as {}. Union cells
// become epsilon-branching vertices; the result is epsilon-eliminated.
// `args` supplies one closed single-rooted graph per function argument;
// `out` names the result roots (default & / &$1..&$n). TypeError on
// ill-typed input, StuckConditional on a non-boolean scrutinee.
Graph lg_eval(const Lc& t, const std::vector<Graph>& args = {},
              const Ctx& out = {}, const LgPrims& prims = {});

// One beta step at the root when the root is a redex, otherwise the term
// unchanged. Substitution is capture-avoiding; a multi-binder lambda
// substitutes per-coordinate projections of the argument.
Lc beta_root(const Lc& t);

// The clause table of an elaborated recursive definition as a lambda term:
//   structural  L -> G^k     -> G^k
//   primitive   L -> G^(k+1) -> G^k
// a label binder followed by nested if-then-else over the concrete-label
// clauses with the variable clause as the final branch. Base-function calls
// inside clause bodies become Prim constants. NonCanonicalClauseTable when
// there is no variable clause or an exclusion has no concrete clause.
Lc lg_table(const RecDef& def);

// Structural recursion as a rewrite on the translation image: srec e t is
// eliminated clause by clause (projections widen to coordinate blocks,
// edges apply the table, fix widens, union zips componentwise), leaving a
// plain term evaluable by lg_eval. The block layout matches dup_ctx: the k
// copies of a coordinate stay adjacent. NonCanonicalClauseTable on a bad
// table, NotInImage when t is outside the translation image.
Lc lg_srec(const Lc& e, const Lc& t);

// Primitive recursion via the paired table: the user table (over k result
// coordinates plus the raw-argument slot) is extended with the rebuilding
// column l:(last slot), srec-eliminated, and projected back onto the first
// k coordinates of every block. t must be closed (NotClosed).
Lc lg_prec(const Lc& e, const Lc& t);

// Graph-level implementations of every base function of a program, keyed by
// name, for use as lg_eval prims. Matching mirrors call resolution: the
// argument root is inspected after epsilon elimination, branches of equal
// label must be bisimilar to collapse, a reachable output marker or a
// genuinely mixed union is MatchFailure.
LgPrims lg_prims(const EvalEnv& env);

std::string print_lg(const Lc& t);
Lc parse_lg(const std::string& text);

}  // namespace uncal
