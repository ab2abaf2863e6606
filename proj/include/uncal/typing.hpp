#pragma once

#include <map>

#include "uncal/syntax.hpp"

namespace uncal {

// A context is an ordered sequence of pairwise-distinct markers.
using Ctx = std::vector<std::string>;

// Function-call signatures: name -> result context W. Calls type as
// `Y |- f(t) : W` with the argument required to be &-typed over Y.
using CallSigs = std::map<std::string, Ctx>;

// Term with the full judgment `src |- t : tgt` recorded at every node, so
// downstream passes (rewriting, structural recursion) never re-infer.
struct TTerm;
using Tc = std::shared_ptr<const TTerm>;

struct TTerm {
  Kind kind;
  std::string name;
  bool label_var = false;
  std::vector<Tc> kids;
  Ctx src, tgt;
};

bool ctx_contains(const Ctx& c, const std::string& m);
void check_ctx(const Ctx& c);                    // DuplicateMarker on repeats
Ctx ctx_concat(const Ctx& a, const Ctx& b);      // validity-checked concatenation

// Deterministic pair-target renaming: a marker appearing in more than one
// component is suffixed $i (1-based component index) in every component.
std::vector<Ctx> pair_rename(const std::vector<Ctx>& tgts);

// Target context of a raw term, computed bottom-up; needs no source context.
Ctx target_of(const Rc& t, const CallSigs& sigs = {});

Tc infer(const Rc& t, const Ctx& src, const CallSigs& sigs = {});
Rc to_raw(const Tc& t);

// View t at a renamed target context (same length). Singleton targets are
// renamed by (re)wrapping in a definition; pairs rename componentwise; other
// multi-rooted terms are composed with a marker-renaming tuple.
Tc rename_target(const Tc& t, const Ctx& new_tgt);

// Simultaneous substitution: dom(s) must equal src(t) as a set, every image
// shares one source context Z and has a singleton target. Result: Z |- _ : tgt(t).
using SubstMap = std::map<std::string, Tc>;
Tc substitute(const Tc& t, const SubstMap& s);

// Re-type t over a wider (or reordered) source context Z containing src(t).
Tc weaken(const Tc& t, const Ctx& Z);

// Typed-node builders used by the equational machinery.
Tc t_mark(const Ctx& src, const std::string& name);
Tc t_pair(std::vector<Tc> kids);  // shared source; applies pair_rename

// Abbreviations: projections, identity, diagonal, swap, product, union.
Tc proj(const Ctx& src, const Ctx& pick);        // src |- <pick> : pick
Tc proj_left(const Ctx& x, const Ctx& y);        // x+y -> x
Tc proj_right(const Ctx& x, const Ctx& y);       // x+y -> y
Tc identity_term(const Ctx& x);                  // x -> x
Tc diagonal(const Ctx& x);                       // x -> x$1..+x$2..
Tc swap_term(const Ctx& x, const Ctx& y);        // x+y -> y+x
Tc times(const Tc& t1, const Tc& t2);            // y1+y2 -> x1+x2
Tc union_term(const Tc& t1, const Tc& t2);       // ! @ (t1 (+) t2), both &-typed

}  // namespace uncal
