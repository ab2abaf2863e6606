#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "uncal/syntax.hpp"
#include "uncal/typing.hpp"

namespace uncal {

// Structural recursion rebuilds the result from the recursive images alone;
// primitive recursion may also consume the argument subtree itself.
enum class RecMode { Structural, Primitive };

// One elaborated clause. The body is the abstracted skeleton: every self-call
// f(t) is replaced by the identity tuple over w, and (primitive mode) every
// bare occurrence of the argument variable by the marker &. Var-pattern
// skeletons carry label_var edges for the pattern variable; they are
// instantiated per concrete label on application.
struct RecClause {
  Clause::Pat pat = Clause::Pat::Label;
  std::string label;               // concrete label, or the variable name (Var)
  std::set<std::string> excluded;  // labels a Var clause does not cover
  Tc body;
};

// One elaborated recursive definition with k = |w| result roots per input
// root. Skeleton judgments:
//   structural:  w |- body : w
//   primitive:   holes ++ <&> |- body : w
// where holes is w with any & renamed &$1 so the source stays well-formed;
// the final & slot stands for the unconsumed argument subtree.
struct RecDef {
  std::string name;
  RecMode mode = RecMode::Structural;
  int k = 1;
  Ctx w;
  std::vector<RecClause> clauses;  // concrete clauses first, variable clause last
  CallSigs sigs;                   // signatures for bfuns the skeletons may call
};

// Marker-major context duplication y -> y$1,...,y$copies per marker, matching
// the pair-target renaming convention; copies == 1 keeps the names unchanged.
Ctx dup_ctx(const Ctx& y, int copies);

// Abstracts one clause body into its skeleton (see RecClause). Self-call
// arguments must be exactly the bound variable; a bare argument variable in
// structural mode is DependsOnArgument; a call neither to fname nor to a
// name in sigs is UnknownFunction; a skeleton whose target is not w is
// InconsistentK.
Tc abstract_body(const Rc& e, const std::string& fname, const std::string& argvar,
                 RecMode mode, const Ctx& w, const CallSigs& sigs = {});

// Elaborates a parsed sfun definition: detects the mode (primitive iff some
// clause uses its argument variable outside a self-call), infers the common
// result context w across clauses (clauses whose target merely echoes the
// self-call signature are flexible; rigid clauses must agree, else
// InconsistentK), and abstracts every clause. sigs lists callable bfuns.
RecDef elaborate(const Definition& def, const CallSigs& sigs = {});

// The structural-recursion map on terms. For t with judgment Y |- t : X the
// result has judgment dup(Y,k) |- srec(t) : dup(X,k): markers are duplicated
// k-fold, every edge l:s becomes the l-skeleton applied to srec(s), ! becomes
// the componentwise union of the two duplicated source families, and {}
// becomes the k-fold tuple of {}. Requires mode Structural (ModeMismatch)
// and a call-free, concrete-label argument.
Tc srec(const RecDef& def, const Tc& t);

// The paired model map underlying primitive recursion: the same traversal
// over k+1 copies where the l-clause contributes <skeleton (+) l:&> — the
// final copy rebuilds the argument itself. Judgment: dup(Y,k+1) |- _ :
// dup(X,k+1). Requires mode Primitive (ModeMismatch).
Tc prec_psi(const RecDef& def, const Tc& t);

// Primitive recursion on a closed term: the projection of prec_psi onto the
// first k copies. For <&>-typed t the result is renamed to w, so
// `<> |- prec(def,t) : w`; otherwise the target is dup(X,k). NotClosed when
// t has a nonempty source context.
Tc prec(const RecDef& def, const Tc& t);

// A whole program, elaborated: sfuns become RecDefs and bfuns become match
// tables (their bodies may call other bfuns, acyclically). sigs covers every
// defined name, so expressions over the program can be typed directly.
struct EvalEnv {
  Program program;
  std::map<std::string, RecDef> recs;
  std::map<std::string, Definition> bfuns;
  CallSigs sigs;
};

EvalEnv make_env(const Program& p);

// Eliminates every Call node: rewrites to expose substitution redexes, then
// resolves the innermost call (srec / prec / bfun table lookup) and repeats.
// bfun arguments are matched on their rewrite normal form, unfolding cycle
// heads (bounded by the graph size) and collapsing the two one-marker cycle
// identities to expose a nil or label head; a union or free-marker head is
// MatchFailure. Primitive calls on open arguments are NotClosed.
Tc resolve_calls(const EvalEnv& env, const Tc& t, long fuel = 1'000'000);

// Types expr over src, resolves all calls, and returns the normal form.
Tc eval(const EvalEnv& env, const Rc& expr, const Ctx& src = {});

// One fusion counterexample: the stage that failed ("srec" for
// h(srec(e,t)) != srec(d,t), "prec" for the pointwise primitive shape) and
// the sampled closed term witnessing it.
struct FusionFailure {
  std::string stage;
  Rc witness;
};

struct FusionReport {
  int trials = 0;
  std::vector<FusionFailure> failures;
  bool ok() const { return failures.empty(); }
};

// Checks the fusion law for k=1 structural e, d, h: first the hypothesis
// h(e_l) ~ d_l for every label in the combined alphabet plus a fresh one
// (HypothesisFailed names the label otherwise), then on random closed terms
// both h(srec(e,t)) ~ srec(d,t) and the primitive-recursion fusion shape:
// the composition prec(d) . prec(e) agrees pointwise with the primitive
// definition whose l-clause is prec(d) applied to prec(e) applied to l:&.
FusionReport fusion_check(const RecDef& e, const RecDef& d, const RecDef& h,
                          int trials, int max_size, std::uint64_t seed);

}  // namespace uncal
