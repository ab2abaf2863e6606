#pragma once

#include <optional>

#include "uncal/typing.hpp"

namespace uncal {

// The two rules are oriented left-to-right:
//   (sub)  t @ (s1,...,sn)  ->  t[y1:=s1, ..., yn:=sn]
//   (peel) cycle over a tuple target X+Y splits off the last coordinate Y
// Composition of a spread onto a pair is kept as-is: ! @ (s, t) is a value.
enum class Strategy {
  LeftInner,   // leftmost-innermost, the default
  RightInner,  // rightmost-innermost, kept as a confluence cross-check
};

// One rewrite at the first redex under the strategy, or absent if normal.
// Preserves the judgment of t exactly.
std::optional<Tc> step(const Tc& t, Strategy strategy = Strategy::LeftInner);

// Iterates step to the unique normal form. The system is terminating, so the
// fuel bound firing signals a bug in the rewriter itself (FuelExhausted).
Tc normalize(const Tc& t, Strategy strategy = Strategy::LeftInner,
             long fuel = 1'000'000);

// Value grammar reached by normalize:
//   y | l:t | cycle(x := t) | {} | ! | ! @ (s, t) | x := t | (s, t) | ()
bool is_value_m(const Tc& t);
// Single-rooted values with every sole ! eta-expanded:
//   y | l:t | cycle(x := t) | {} | ! @ (s, t)
bool is_value_n(const Tc& t);

// Replaces each sole ! (not already applied to a pair) with ! @ (y1, y2).
// Requires a single-marker target (TypeNotSingleton otherwise).
Tc eta_man_expand(const Tc& t);

// Regular terms over labels, 0 and +, with binding mu.
struct MuTerm;
using Mc = std::shared_ptr<const MuTerm>;
enum class MuKind { Var, App, Mu, Zero, Plus };
struct MuTerm {
  MuKind kind;
  std::string name;  // variable name (Var, Mu binder) or edge label (App)
  std::vector<Mc> kids;
};

Mc mu_var(const std::string& x);
Mc mu_app(const std::string& label, Mc t);
Mc mu_mu(const std::string& x, Mc t);
Mc mu_zero();
Mc mu_plus(Mc s, Mc t);
bool mu_eq(const Mc& a, const Mc& b);

// The normal-form correspondence, clause by clause:
//   y <-> y,  l:t <-> l(t),  cycle(x := t) <-> mu x. t,  {} <-> 0,
//   ! @ (s, t) <-> s + t
// Root-renaming wrappers (x := ...) are transparent on the way out and are
// reintroduced canonically on the way back in.
Mc to_mu(const Tc& n);  // NotInN when the term is outside the grammar

// Free variables become source-context markers; `src` may pin extra markers.
// Shadowed binders are freshened, so the embedding is total.
Tc mu_to_term(const Mc& m, const Ctx& src = {});

std::string print_mu(const Mc& m);  // round-trip parseable, e.g. "mu x. a(x) + 0"
Mc parse_mu(const std::string& text);

}  // namespace uncal
