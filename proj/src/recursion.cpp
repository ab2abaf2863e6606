#include "uncal/recursion.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <sstream>

#include "uncal/axioms.hpp"
#include "uncal/graph.hpp"
#include "uncal/rewrite.hpp"

namespace uncal {
namespace {

const Ctx kAmpOnly{"&"};

std::string join(const Ctx& c) {
  std::ostringstream os;
  for (size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
  return os.str();
}

// Name of marker m's i-th copy (1-based). A single copy keeps the name, so
// duplication at k = 1 is the identity on contexts.
std::string dup_name(const std::string& m, int i, int copies) {
  return copies == 1 ? m : m + "$" + std::to_string(i);
}

// Run the small-step relation to a fixpoint. Unlike normalize() this makes no
// claim about the result grammar, so it is safe on terms that still contain
// calls.
Tc settle(Tc t, long fuel = 1'000'000) {
  while (auto s = step(t)) {
    if (--fuel < 0) raise(Err::FuelExhausted, "rewriting did not settle");
    t = *s;
  }
  return t;
}

}  // namespace

Ctx dup_ctx(const Ctx& y, int copies) {
  if (copies == 1) return y;
  Ctx out;
  out.reserve(y.size() * copies);
  for (const auto& m : y)
    for (int i = 1; i <= copies; ++i) out.push_back(dup_name(m, i, copies));
  return out;
}

// ---------------------------------------------------------------------------
// Clause abstraction
// ---------------------------------------------------------------------------

namespace {

// Identity tuple over w, with source marker names taken from `holes`
// positionally. This is what a self-call stands for inside a skeleton: the
// recursive images of the argument, one per output marker.
Rc ident_tuple(const Ctx& w, const Ctx& holes) {
  std::vector<Rc> comps;
  comps.reserve(w.size());
  for (size_t i = 0; i < w.size(); ++i)
    comps.push_back(w[i] == "&" ? mk_mark(holes[i])
                                : mk_def(w[i], mk_mark(holes[i])));
  return mk_pair(std::move(comps));
}

struct Abstractor {
  const std::string& fname;
  const std::string& argvar;
  RecMode mode;
  const Ctx& w;
  const Ctx& holes;
  const CallSigs& sigs;

  Rc go(const Rc& t) const {
    switch (t->kind) {
      case Kind::Mark:
        if (t->name == argvar) {
          if (mode == RecMode::Structural)
            raise(Err::DependsOnArgument,
                  fname + ": clause body uses the argument " + argvar +
                      " outside a self-call");
          return mk_mark("&");
        }
        return t;
      case Kind::Call: {
        if (t->name == fname) {
          const Rc& a = t->kids[0];
          if (!(a->kind == Kind::Mark && a->name == argvar))
            raise(Err::DependsOnArgument,
                  fname + ": self-call argument must be exactly the bound " +
                      "variable " + argvar);
          return ident_tuple(w, holes);
        }
        if (!sigs.count(t->name))
          raise(Err::UnknownFunction,
                fname + ": call to " + t->name +
                    " (only base functions may be called from a clause body)");
        return mk_call(t->name, go(t->kids[0]));
      }
      case Kind::Edge:
        return mk_edge(t->name, go(t->kids[0]), t->label_var);
      case Kind::Compose:
        return mk_compose(go(t->kids[0]), go(t->kids[1]));
      case Kind::Pair: {
        std::vector<Rc> kids;
        kids.reserve(t->kids.size());
        for (const auto& k : t->kids) kids.push_back(go(k));
        return mk_pair(std::move(kids));
      }
      case Kind::Cycle:
        return mk_cycle(go(t->kids[0]));
      case Kind::Def:
        return mk_def(t->name, go(t->kids[0]));
      case Kind::Nil:
      case Kind::Emp:
      case Kind::Man:
        return t;
    }
    raise(Err::Internal, "abstract: unknown node kind");
  }
};

// Source context of a skeleton: w itself for structural bodies; for primitive
// bodies the recursion slots get fresh hole names (any `&` in w is renamed so
// the final `&` slot can carry the original argument).
Ctx skeleton_source(RecMode mode, const Ctx& w, Ctx* holes_out) {
  Ctx holes = w;
  if (mode == RecMode::Primitive) {
    for (auto& h : holes) {
      if (h != "&") continue;
      int n = 1;
      std::string f = "&$1";
      while (std::find(w.begin(), w.end(), f) != w.end())
        f = "&$" + std::to_string(++n);
      h = f;
    }
  }
  if (holes_out) *holes_out = holes;
  if (mode == RecMode::Structural) return holes;
  Ctx src = holes;
  src.push_back("&");
  return src;
}

}  // namespace

Tc abstract_body(const Rc& e, const std::string& fname,
                 const std::string& argvar, RecMode mode, const Ctx& w,
                 const CallSigs& sigs) {
  Ctx holes;
  Ctx src = skeleton_source(mode, w, &holes);
  Rc skel = Abstractor{fname, argvar, mode, w, holes, sigs}.go(e);
  Tc typed = settle(infer(skel, src, sigs));
  if (typed->tgt != w)
    raise(Err::InconsistentK, fname + ": clause skeleton has target <" +
                                  join(typed->tgt) +
                                  "> but the definition requires <" + join(w) +
                                  ">");
  return typed;
}

// ---------------------------------------------------------------------------
// Elaboration
// ---------------------------------------------------------------------------

namespace {

bool uses_bare_arg(const Rc& t, const std::string& fname,
                   const std::string& argvar) {
  if (t->kind == Kind::Mark) return t->name == argvar;
  if (t->kind == Kind::Call && t->name == fname &&
      t->kids[0]->kind == Kind::Mark && t->kids[0]->name == argvar)
    return false;
  for (const auto& k : t->kids)
    if (uses_bare_arg(k, fname, argvar)) return true;
  return false;
}

// The parser leaves clause bodies undecorated; mark every edge whose label is
// the clause's pattern variable.
Rc mark_label_var(const Rc& t, const std::string& v) {
  switch (t->kind) {
    case Kind::Edge: {
      Rc kid = mark_label_var(t->kids[0], v);
      return mk_edge(t->name, std::move(kid), t->label_var || t->name == v);
    }
    case Kind::Compose:
      return mk_compose(mark_label_var(t->kids[0], v),
                        mark_label_var(t->kids[1], v));
    case Kind::Pair: {
      std::vector<Rc> kids;
      for (const auto& k : t->kids) kids.push_back(mark_label_var(k, v));
      return mk_pair(std::move(kids));
    }
    case Kind::Cycle:
      return mk_cycle(mark_label_var(t->kids[0], v));
    case Kind::Def:
      return mk_def(t->name, mark_label_var(t->kids[0], v));
    case Kind::Call:
      return mk_call(t->name, mark_label_var(t->kids[0], v));
    default:
      return t;
  }
}

void collect_calls(const Rc& t, std::set<std::string>& out) {
  if (t->kind == Kind::Call) out.insert(t->name);
  for (const auto& k : t->kids) collect_calls(k, out);
}

std::optional<Ctx> probe_target(const Rc& body, const CallSigs& sigs,
                                const std::string& fname, const Ctx& guess) {
  CallSigs s = sigs;
  s[fname] = guess;
  try {
    return target_of(body, s);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

RecDef elaborate(const Definition& def, const CallSigs& sigs) {
  if (def.is_bfun)
    raise(Err::ModeMismatch,
          def.name + " is a base function, not a recursion definition");
  if (def.clauses.empty())
    raise(Err::Internal, def.name + " has no clauses");

  RecDef out;
  out.name = def.name;
  out.sigs = sigs;

  // Reject nil patterns and unknown callees up front, and detect the mode:
  // any clause that uses the argument other than under a self-call makes the
  // whole definition primitive.
  out.mode = RecMode::Structural;
  for (const auto& c : def.clauses) {
    if (c.pat == Clause::Pat::Nil)
      raise(Err::OverlappingPatterns,
            def.name + ": nil patterns belong to base functions");
    std::set<std::string> calls;
    collect_calls(c.body, calls);
    for (const auto& g : calls)
      if (g != def.name && !sigs.count(g))
        raise(Err::UnknownFunction,
              def.name + ": call to " + g +
                  " (only base functions may be called from a clause body)");
    if (uses_bare_arg(c.body, def.name, c.argvar)) out.mode = RecMode::Primitive;
  }

  // Infer the output context w. Each clause is probed with two self-call
  // signature guesses: a clause whose target is unchanged by the guess pins w
  // (rigid), one that echoes the guess is satisfied by any w (flexible), and
  // anything else has no uniform reading.
  const Ctx g1{"&"};
  const Ctx g2{"zq$1", "zq$2"};
  std::optional<Ctx> rigid;
  for (const auto& c : def.clauses) {
    auto p1 = probe_target(c.body, sigs, def.name, g1);
    auto p2 = probe_target(c.body, sigs, def.name, g2);
    if (!p1 || !p2) {
      CallSigs s = sigs;
      s[def.name] = p1 ? g2 : g1;
      target_of(c.body, s);  // re-raise the underlying error
      raise(Err::InconsistentK,
            def.name + ": clause target depends on the self-call shape");
    }
    if (*p1 == *p2) {
      if (rigid && *rigid != *p1)
        raise(Err::InconsistentK, def.name + ": clauses target both <" +
                                      join(*rigid) + "> and <" + join(*p1) +
                                      ">");
      rigid = *p1;
    } else if (!(*p1 == g1 && *p2 == g2)) {
      raise(Err::InconsistentK,
            def.name + ": clause target depends on the self-call shape");
    }
  }
  out.w = rigid.value_or(g1);
  out.k = static_cast<int>(out.w.size());

  for (const auto& c : def.clauses) {
    RecClause rc;
    rc.pat = c.pat;
    rc.label = c.label;
    rc.excluded = c.where_excluded;
    Rc body = c.pat == Clause::Pat::Var ? mark_label_var(c.body, c.label)
                                        : c.body;
    rc.body = abstract_body(body, def.name, c.argvar, out.mode, out.w, sigs);
    out.clauses.push_back(std::move(rc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// The recursion transformations
// ---------------------------------------------------------------------------

namespace {

const RecClause* find_clause(const RecDef& def, const std::string& l,
                             bool label_var) {
  for (const auto& c : def.clauses) {
    if (label_var) {
      if (c.pat == Clause::Pat::Var) return &c;
      continue;
    }
    if (c.pat == Clause::Pat::Label && c.label == l) return &c;
    if (c.pat == Clause::Pat::Var && !c.excluded.count(l)) return &c;
  }
  return nullptr;
}

// Structural clone swapping every edge labelled by the pattern variable `v`
// to the concrete label `l` (or to another variable when keep_var is set).
// Judgments are unchanged, so the result stays well-typed as built.
Tc inst_label(const Tc& t, const std::string& v, const std::string& l,
              bool keep_var) {
  std::vector<Tc> kids;
  kids.reserve(t->kids.size());
  for (const auto& k : t->kids) kids.push_back(inst_label(k, v, l, keep_var));
  TTerm n{t->kind, t->name, t->label_var, std::move(kids), t->src, t->tgt};
  if (t->kind == Kind::Edge && t->label_var && t->name == v) {
    n.name = l;
    n.label_var = keep_var;
  }
  return std::make_shared<const TTerm>(std::move(n));
}

// Shared traversal behind srec and the primitive pre-pairing pass. For a
// definition with |w| = k, `copies` is k (structural) or k + 1 (primitive;
// the extra copy rebuilds the input so clause bodies can consume it). The
// output is raw but satisfies, by construction,
//   infer(go(t), dup_ctx(t->src, copies), sigs) : dup_ctx(t->tgt, copies).
struct PsiCore {
  const RecDef& def;
  int n;

  std::string amp(int i) const { return dup_name("&", i, n); }

  // The clause body for label `l`, viewed with its recursion slots renamed
  // onto the duplicated root context <&$1,..,&$n>. Primitive bodies are
  // paired with the edge-rebuilding component `&$n := l:&$n`.
  Rc clause_raw(const std::string& l, bool label_var) const {
    const RecClause* c = find_clause(def, l, label_var);
    if (!c)
      raise(Err::MatchFailure, def.name + " has no clause for label " + l);
    Tc b = c->body;
    if (c->pat == Clause::Pat::Var && !(label_var && c->label == l))
      b = inst_label(b, c->label, l, label_var);
    Ctx z = dup_ctx(kAmpOnly, n);
    SubstMap m;
    for (int i = 0; i < def.k; ++i)
      m[b->src[i]] = t_mark(z, amp(i + 1));
    if (def.mode == RecMode::Structural)
      return to_raw(rename_target(substitute(b, m), z));
    m["&"] = t_mark(z, amp(n));
    Ctx first(z.begin(), z.begin() + def.k);
    Rc skel = to_raw(rename_target(substitute(b, m), first));
    Rc edge = mk_def(amp(n), mk_edge(l, mk_mark(amp(n)), label_var));
    return mk_pair({std::move(skel), std::move(edge)});
  }

  Rc go(const Tc& t) const {
    switch (t->kind) {
      case Kind::Mark: {
        if (n == 1) return mk_mark(t->name);
        std::vector<Rc> c;
        for (int i = 1; i <= n; ++i) c.push_back(mk_mark(dup_name(t->name, i, n)));
        return mk_pair(std::move(c));
      }
      case Kind::Nil: {
        if (n == 1) return mk_nil();
        std::vector<Rc> c;
        for (int i = 0; i < n; ++i) c.push_back(mk_nil());
        return mk_pair(std::move(c));
      }
      case Kind::Emp:
        return mk_emp();
      case Kind::Man: {
        if (n == 1) return mk_man();
        std::vector<Rc> c;
        for (int i = 1; i <= n; ++i)
          c.push_back(mk_union(mk_mark(dup_name(t->src[0], i, n)),
                               mk_mark(dup_name(t->src[1], i, n))));
        return mk_pair(std::move(c));
      }
      case Kind::Edge:
        return mk_compose(clause_raw(t->name, t->label_var), go(t->kids[0]));
      case Kind::Compose:
        return mk_compose(go(t->kids[0]), go(t->kids[1]));
      case Kind::Pair: {
        std::vector<Rc> c;
        c.reserve(t->kids.size());
        for (const auto& k : t->kids) c.push_back(go(k));
        return mk_pair(std::move(c));
      }
      case Kind::Cycle:
        return mk_cycle(go(t->kids[0]));
      case Kind::Def: {
        if (n == 1) return mk_def(t->name, go(t->kids[0]));
        // the child names a single root, usually & but possibly another
        // marker (renamings store as definition nodes); duplicate that name
        const std::string& inner = t->kids[0]->tgt[0];
        std::vector<Rc> ren;
        for (int i = 1; i <= n; ++i)
          ren.push_back(mk_def(dup_name(t->name, i, n),
                               mk_mark(dup_name(inner, i, n))));
        return mk_compose(mk_pair(std::move(ren)), go(t->kids[0]));
      }
      case Kind::Call:
        raise(Err::ModeMismatch,
              "recursion argument contains an unresolved call " + t->name);
    }
    raise(Err::Internal, "recursion traversal: unknown node kind");
  }
};

Tc run_psi(const RecDef& def, const Tc& t, int copies) {
  PsiCore core{def, copies};
  Tc out = infer(core.go(t), dup_ctx(t->src, copies), def.sigs);
  if (out->tgt != dup_ctx(t->tgt, copies))
    raise(Err::Internal, def.name + ": traversal produced target <" +
                             join(out->tgt) + ">, expected the " +
                             std::to_string(copies) + "-fold copy of <" +
                             join(t->tgt) + ">");
  return out;
}

void ensure_concrete(const Tc& t, const std::string& who) {
  if (t->kind == Kind::Call)
    raise(Err::ModeMismatch,
          who + ": argument contains an unresolved call " + t->name);
  if (t->kind == Kind::Edge && t->label_var)
    raise(Err::MatchFailure,
          who + ": argument contains a label variable " + t->name);
  for (const auto& k : t->kids) ensure_concrete(k, who);
}

}  // namespace

Tc srec(const RecDef& def, const Tc& t) {
  if (def.mode != RecMode::Structural)
    raise(Err::ModeMismatch, def.name + " is primitive; use prec");
  ensure_concrete(t, "srec(" + def.name + ")");
  return run_psi(def, t, def.k);
}

Tc prec_psi(const RecDef& def, const Tc& t) {
  if (def.mode != RecMode::Primitive)
    raise(Err::ModeMismatch, def.name + " is structural; use srec");
  return run_psi(def, t, def.k + 1);
}

Tc prec(const RecDef& def, const Tc& t) {
  if (def.mode != RecMode::Primitive)
    raise(Err::ModeMismatch, def.name + " is structural; use srec");
  if (!t->src.empty())
    raise(Err::NotClosed,
          def.name + " needs a closed argument, got one over <" +
              join(t->src) + ">");
  ensure_concrete(t, "prec(" + def.name + ")");
  Tc psi = prec_psi(def, t);
  int n = def.k + 1;
  // Select the k result copies of each output marker, dropping the rebuilt
  // input copy.
  Ctx picks;
  for (const auto& x : t->tgt)
    for (int i = 1; i <= def.k; ++i) picks.push_back(dup_name(x, i, n));
  Tc out = picks == psi->tgt
               ? psi
               : infer(mk_compose(to_raw(proj(psi->tgt, picks)), to_raw(psi)),
                       Ctx{}, def.sigs);
  return rename_target(out, t->tgt == kAmpOnly ? def.w : dup_ctx(t->tgt, def.k));
}

// ---------------------------------------------------------------------------
// Whole-program evaluation
// ---------------------------------------------------------------------------

namespace {

void dfs_bfun_cycle(const std::string& v,
                    const std::map<std::string, std::set<std::string>>& deps,
                    std::map<std::string, int>& color) {
  color[v] = 1;
  auto it = deps.find(v);
  if (it != deps.end()) {
    for (const auto& w : it->second) {
      if (color[w] == 1)
        raise(Err::ModeMismatch,
              "base function " + w + " is recursive (via " + v + ")");
      if (color[w] == 0) dfs_bfun_cycle(w, deps, color);
    }
  }
  color[v] = 2;
}

}  // namespace

EvalEnv make_env(const Program& p) {
  EvalEnv env;
  env.program = p;

  CallSigs bsigs;
  for (const auto& d : p.defs)
    if (d.is_bfun) bsigs[d.name] = kAmpOnly;

  std::map<std::string, std::set<std::string>> deps;
  for (const auto& d : p.defs) {
    if (!d.is_bfun) continue;
    Definition marked = d;
    for (auto& c : marked.clauses) {
      if (c.pat == Clause::Pat::Var) c.body = mark_label_var(c.body, c.label);
      std::set<std::string> calls;
      collect_calls(c.body, calls);
      for (const auto& g : calls) {
        if (!bsigs.count(g)) {
          const Definition* gd = p.find(g);
          if (gd && !gd->is_bfun)
            raise(Err::ModeMismatch,
                  d.name + ": base functions may not call the recursion " + g);
          raise(Err::UnknownFunction, d.name + ": call to undefined " + g);
        }
        deps[d.name].insert(g);
      }
      infer(c.body, c.argvar.empty() ? Ctx{} : Ctx{c.argvar}, bsigs);
    }
    env.bfuns.emplace(d.name, std::move(marked));
  }

  std::map<std::string, int> color;
  for (const auto& [name, _] : env.bfuns)
    if (color[name] == 0) dfs_bfun_cycle(name, deps, color);

  env.sigs = bsigs;
  for (const auto& d : p.defs) {
    if (d.is_bfun) continue;
    RecDef rd = elaborate(d, bsigs);
    env.sigs[rd.name] = rd.w;
    env.recs.emplace(rd.name, std::move(rd));
  }
  return env;
}

namespace {

bool find_call(const Tc& t, std::vector<size_t>& path) {
  for (size_t i = 0; i < t->kids.size(); ++i) {
    path.push_back(i);
    if (find_call(t->kids[i], path)) return true;
    path.pop_back();
  }
  return t->kind == Kind::Call;
}

Tc get_at(const Tc& t, const std::vector<size_t>& path) {
  Tc cur = t;
  for (size_t i : path) cur = cur->kids[i];
  return cur;
}

// Replace the node at `path` with `r`, which must carry the same judgment.
// A call inside a pair may resolve to a tuple (or a unit): restore the flat
// pair form so compositions against the pair keep seeing single-root
// components.
Tc splice(const Tc& t, const std::vector<size_t>& path, size_t d, const Tc& r) {
  if (d == path.size()) return r;
  std::vector<Tc> kids = t->kids;
  kids[path[d]] = splice(kids[path[d]], path, d + 1, r);
  if (t->kind == Kind::Pair) {
    std::vector<Tc> flat;
    for (auto& k : kids) {
      if (k->kind == Kind::Emp) continue;
      if (k->kind == Kind::Pair)
        flat.insert(flat.end(), k->kids.begin(), k->kids.end());
      else
        flat.push_back(k);
    }
    if (flat.empty())
      return std::make_shared<const TTerm>(
          TTerm{Kind::Emp, "", false, {}, t->src, {}});
    if (flat.size() == 1) return flat[0];
    return std::make_shared<const TTerm>(
        TTerm{Kind::Pair, "", false, std::move(flat), t->src, t->tgt});
  }
  return std::make_shared<const TTerm>(
      TTerm{t->kind, t->name, t->label_var, std::move(kids), t->src, t->tgt});
}

// Swap pattern-variable edges to a concrete label in a raw clause body.
Rc swap_label_raw(const Rc& t, const std::string& v, const std::string& l) {
  switch (t->kind) {
    case Kind::Edge: {
      Rc kid = swap_label_raw(t->kids[0], v, l);
      if (t->label_var && t->name == v) return mk_edge(l, std::move(kid), false);
      return mk_edge(t->name, std::move(kid), t->label_var);
    }
    case Kind::Compose:
      return mk_compose(swap_label_raw(t->kids[0], v, l),
                        swap_label_raw(t->kids[1], v, l));
    case Kind::Pair: {
      std::vector<Rc> kids;
      for (const auto& k : t->kids) kids.push_back(swap_label_raw(k, v, l));
      return mk_pair(std::move(kids));
    }
    case Kind::Cycle:
      return mk_cycle(swap_label_raw(t->kids[0], v, l));
    case Kind::Def:
      return mk_def(t->name, swap_label_raw(t->kids[0], v, l));
    case Kind::Call:
      return mk_call(t->name, swap_label_raw(t->kids[0], v, l));
    default:
      return t;
  }
}

Rc subst_var_raw(const Rc& t, const std::string& v, const Rc& repl) {
  if (t->kind == Kind::Mark) return t->name == v ? repl : t;
  switch (t->kind) {
    case Kind::Edge:
      return mk_edge(t->name, subst_var_raw(t->kids[0], v, repl), t->label_var);
    case Kind::Compose:
      return mk_compose(subst_var_raw(t->kids[0], v, repl),
                        subst_var_raw(t->kids[1], v, repl));
    case Kind::Pair: {
      std::vector<Rc> kids;
      for (const auto& k : t->kids) kids.push_back(subst_var_raw(k, v, repl));
      return mk_pair(std::move(kids));
    }
    case Kind::Cycle:
      return mk_cycle(subst_var_raw(t->kids[0], v, repl));
    case Kind::Def:
      return mk_def(t->name, subst_var_raw(t->kids[0], v, repl));
    case Kind::Call:
      return mk_call(t->name, subst_var_raw(t->kids[0], v, repl));
    default:
      return t;
  }
}

// Apply a base function to a call-free &-typed argument. The argument is
// normalized and its head exposed: definition wrappers are stripped; a root
// cycle either collapses by the one-marker identities (cycle(&) ~ {},
// cycle(&y u &) ~ &y) or is unfolded, at most |V| + 1 times for the
// argument's |V|-vertex graph semantics, until a nil or edge head appears.
Tc bfun_apply(const EvalEnv& env, const Definition& d, const Tc& arg,
              long& fuel) {
  long unfolds = static_cast<long>(interpret(arg).nverts) + 1;
  Tc t = normalize(arg);
  const Ctx& y = arg->src;

  std::optional<std::string> label;
  bool label_is_var = false;
  Tc child;  // edge child for a label match; null for a nil match
  for (;;) {
    if (--fuel < 0) raise(Err::FuelExhausted, "evaluation did not settle");
    while (t->kind == Kind::Def) t = t->kids[0];
    if (t->kind == Kind::Edge) {
      label = t->name;
      label_is_var = t->label_var;
      child = t->kids[0];
      break;
    }
    if (t->kind == Kind::Nil) break;
    if (t->kind == Kind::Mark)
      raise(Err::MatchFailure,
            d.name + " applied to the free marker &" + t->name);
    if (t->kind == Kind::Compose || t->kind == Kind::Man) {
      // A union head matches a clause only when its branches collapse by
      // idempotence up to bisimulation; otherwise no clause applies.
      std::vector<Tc> leaves;
      std::vector<Tc> stack{t};
      while (!stack.empty()) {
        Tc c = stack.back();
        stack.pop_back();
        while (c->kind == Kind::Def) c = c->kids[0];
        if (c->kind == Kind::Man) {
          stack.push_back(t_mark(c->src, c->src[1]));
          stack.push_back(t_mark(c->src, c->src[0]));
        } else if (c->kind == Kind::Compose &&
                   c->kids[0]->kind == Kind::Man &&
                   c->kids[1]->kind == Kind::Pair) {
          const auto& ks = c->kids[1]->kids;
          for (auto it = ks.rbegin(); it != ks.rend(); ++it)
            stack.push_back(*it);
        } else {
          leaves.push_back(c);
        }
      }
      std::vector<Tc> reps;
      for (const auto& l : leaves) {
        bool seen = false;
        for (const auto& r : reps)
          if (bisimilar(interpret(l), interpret(r))) {
            seen = true;
            break;
          }
        if (!seen) reps.push_back(l);
      }
      if (reps.size() != 1)
        raise(Err::MatchFailure, d.name + " applied to a union");
      t = reps[0];
      continue;
    }
    if (t->kind != Kind::Cycle)
      raise(Err::Internal, d.name + ": unexpected head " + print_term(to_raw(t)));

    // Root cycle: tgt is <&>, hence the bound marker is & itself.
    Tc b = t->kids[0];
    Tc core = b;
    while (core->kind == Kind::Def) core = core->kids[0];
    if (core->kind == Kind::Mark && core->name == "&") {
      t = infer(mk_nil(), y, env.sigs);
      continue;
    }
    if (core->kind == Kind::Compose && core->kids[0]->kind == Kind::Man &&
        core->kids[1]->kind == Kind::Pair && core->kids[1]->kids.size() == 2) {
      Tc p = core->kids[1]->kids[0];
      Tc q = core->kids[1]->kids[1];
      while (p->kind == Kind::Def) p = p->kids[0];
      while (q->kind == Kind::Def) q = q->kids[0];
      if (p->kind == Kind::Mark && q->kind == Kind::Mark) {
        std::string other;
        if (p->name == "&" && q->name != "&") other = q->name;
        else if (q->name == "&" && p->name != "&") other = p->name;
        if (!other.empty()) {
          t = t_mark(y, other);
          continue;
        }
      }
    }
    if (unfolds-- <= 0)
      raise(Err::MatchFailure,
            d.name + ": no head reachable under the cycle " + print_term(to_raw(t)));
    SubstMap m;
    for (const auto& m0 : y) m[m0] = t_mark(y, m0);
    m[t->tgt[0]] = t;
    t = normalize(substitute(b, m));
  }

  const Clause* chosen = nullptr;
  for (const auto& c : d.clauses) {
    if (!label) {
      if (c.pat == Clause::Pat::Nil) { chosen = &c; break; }
      continue;
    }
    if (label_is_var) {
      if (c.pat == Clause::Pat::Var) { chosen = &c; break; }
      continue;
    }
    if (c.pat == Clause::Pat::Label && c.label == *label) { chosen = &c; break; }
    if (c.pat == Clause::Pat::Var && !c.where_excluded.count(*label)) {
      chosen = &c;
      break;
    }
  }
  if (!chosen)
    raise(Err::MatchFailure,
          d.name + " has no clause for " + (label ? *label : std::string("{}")));

  Rc body = chosen->body;
  if (label && chosen->pat == Clause::Pat::Var && !label_is_var)
    body = swap_label_raw(body, chosen->label, *label);
  if (child) body = subst_var_raw(body, chosen->argvar, to_raw(child));
  return infer(body, y, env.sigs);
}

// One call application. `call` is a Call node whose subtree below the
// argument is call-free; the result carries the same judgment as `call`.
Tc apply_fun(const EvalEnv& env, const Tc& call, long& fuel) {
  const std::string& f = call->name;
  const Tc& arg = call->kids[0];
  const Ctx& y = call->src;

  if (auto bi = env.bfuns.find(f); bi != env.bfuns.end())
    return bfun_apply(env, bi->second, arg, fuel);

  auto ri = env.recs.find(f);
  if (ri == env.recs.end()) raise(Err::UnknownFunction, f);
  const RecDef& def = ri->second;

  if (def.mode == RecMode::Structural) {
    Tc r = rename_target(srec(def, arg), def.w);
    if (def.k == 1 || y.empty()) return r;
    // Contract the duplicated input context back onto y with the diagonal
    // (y$1 := &y, .., y$k := &y, ..).
    std::vector<Rc> comps;
    for (const auto& m : y)
      for (int i = 1; i <= def.k; ++i)
        comps.push_back(mk_def(dup_name(m, i, def.k), mk_mark(m)));
    return infer(mk_compose(to_raw(r), mk_pair(std::move(comps))), y,
                 env.sigs);
  }

  Tc closed;
  try {
    closed = infer(to_raw(arg), Ctx{}, env.sigs);
  } catch (const Error&) {
    raise(Err::NotClosed,
          f + " is primitive and needs a closed argument, got " +
              print_term(to_raw(arg)) + " over <" + join(y) + ">");
  }
  Tc r = prec(def, closed);
  return y.empty() ? r : weaken(r, y);
}

}  // namespace

Tc resolve_calls(const EvalEnv& env, const Tc& t0, long fuel) {
  Tc t = t0;
  for (;;) {
    while (auto s = step(t)) {
      if (--fuel < 0) raise(Err::FuelExhausted, "evaluation did not settle");
      t = *s;
    }
    std::vector<size_t> path;
    if (!find_call(t, path)) return t;
    if (--fuel < 0) raise(Err::FuelExhausted, "evaluation did not settle");
    Tc r = apply_fun(env, get_at(t, path), fuel);
    t = splice(t, path, 0, r);
  }
}

Tc eval(const EvalEnv& env, const Rc& expr, const Ctx& src) {
  return normalize(resolve_calls(env, infer(expr, src, env.sigs)));
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

namespace {

// The clause skeleton for `l`, viewed at <&> |- <&> (k = 1 structural defs).
Tc view_unit(const RecDef& def, const std::string& l, bool label_var) {
  const RecClause* c = find_clause(def, l, label_var);
  if (!c) raise(Err::MatchFailure, def.name + " has no clause for label " + l);
  Tc b = c->body;
  if (c->pat == Clause::Pat::Var && !(label_var && c->label == l))
    b = inst_label(b, c->label, l, label_var);
  SubstMap m{{b->src[0], t_mark(kAmpOnly, "&")}};
  return rename_target(substitute(b, m), kAmpOnly);
}

// A k = 1 structural definition read as a primitive one: the recursion slot
// becomes the hole, and the (unused) argument slot & is appended.
RecDef as_primitive(const RecDef& s) {
  RecDef p = s;
  p.mode = RecMode::Primitive;
  Ctx holes;
  Ctx src = skeleton_source(RecMode::Primitive, s.w, &holes);
  for (auto& rc : p.clauses) {
    SubstMap m{{rc.body->src[0], t_mark(src, holes[0])}};
    rc.body = substitute(rc.body, m);
  }
  return p;
}

void gather_labels(const RecDef& r, std::set<std::string>& labels,
                   std::set<std::string>& avoid) {
  for (const auto& c : r.clauses) {
    if (c.pat == Clause::Pat::Label) labels.insert(c.label);
    avoid.insert(c.excluded.begin(), c.excluded.end());
  }
}

void require_unit_structural(const RecDef& r, const std::string& role) {
  if (r.mode != RecMode::Structural)
    raise(Err::ModeMismatch, "fusion check: " + role + " (" + r.name +
                                 ") must be structural");
  if (r.k != 1)
    raise(Err::InconsistentK, "fusion check: " + role + " (" + r.name +
                                  ") must have a single output marker");
  bool has_default = false;
  for (const auto& c : r.clauses) {
    std::set<std::string> calls;
    collect_calls(to_raw(c.body), calls);
    if (!calls.empty())
      raise(Err::ModeMismatch, "fusion check: " + role + " (" + r.name +
                                   ") calls " + *calls.begin() +
                                   "; fusion needs call-free clause bodies");
    has_default = has_default || c.pat == Clause::Pat::Var;
  }
  if (!has_default)
    raise(Err::MatchFailure, "fusion check: " + role + " (" + r.name +
                                 ") needs a default clause so every label is "
                                 "covered");
}

// The fused primitive definition F with w = <w1,w2,w3>, whose components
// compute (d-pass over the e-pass, the e-pass, the d-pass). Component 1 is
// the composed-pass law applied clause-wise: the d-pass of e's skeleton,
// with its two slots wired to (w1, w2).
RecDef fuse_prec(const RecDef& e, const RecDef& d) {
  RecDef f;
  f.name = e.name + "+" + d.name;
  f.mode = RecMode::Primitive;
  f.w = Ctx{"w1", "w2", "w3"};
  f.k = 3;
  f.sigs = e.sigs;
  f.sigs.insert(d.sigs.begin(), d.sigs.end());

  RecDef dp = as_primitive(d);
  Ctx dslots = dup_ctx(kAmpOnly, 2);  // <&$1, &$2>
  Ctx src{"w1", "w2", "w3", "&"};

  auto body_for = [&](const std::string& l, bool lv) -> Tc {
    Tc E = view_unit(e, l, lv);
    Tc D = view_unit(d, l, lv);
    Tc psi = prec_psi(dp, E);  // <&$1,&$2> |- <&$1,&$2>
    Tc phi = infer(mk_compose(to_raw(proj(psi->tgt, Ctx{psi->tgt[0]})),
                              to_raw(psi)),
                   psi->src, f.sigs);
    phi = rename_target(phi, kAmpOnly);
    Tc c1 = substitute(phi, SubstMap{{dslots[0], t_mark(src, "w1")},
                                     {dslots[1], t_mark(src, "w2")}});
    Tc c2 = substitute(E, SubstMap{{"&", t_mark(src, "w2")}});
    Tc c3 = substitute(D, SubstMap{{"&", t_mark(src, "w3")}});
    return rename_target(t_pair({c1, c2, c3}), f.w);
  };

  std::set<std::string> labels, avoid;
  gather_labels(e, labels, avoid);
  gather_labels(d, labels, avoid);
  avoid.insert(labels.begin(), labels.end());

  for (const auto& l : labels) {
    RecClause rc;
    rc.pat = Clause::Pat::Label;
    rc.label = l;
    rc.body = body_for(l, false);
    f.clauses.push_back(std::move(rc));
  }
  RecClause def_clause;
  def_clause.pat = Clause::Pat::Var;
  def_clause.label = "FL";
  def_clause.excluded = avoid;
  def_clause.body = body_for("FL", true);
  f.clauses.push_back(std::move(def_clause));
  return f;
}

}  // namespace

FusionReport fusion_check(const RecDef& e, const RecDef& d, const RecDef& h,
                          int trials, int max_size, std::uint64_t seed) {
  require_unit_structural(e, "the inner pass");
  require_unit_structural(d, "the fused pass");
  require_unit_structural(h, "the bridging pass");

  std::set<std::string> labels, avoid;
  gather_labels(e, labels, avoid);
  gather_labels(d, labels, avoid);
  gather_labels(h, labels, avoid);
  avoid.insert(labels.begin(), labels.end());
  std::string fresh = "l0";
  for (int i = 0; avoid.count(fresh); ++i) fresh = "l" + std::to_string(i);

  // Hypothesis: h maps each clause skeleton of e onto the matching clause of
  // d, including the default clauses (checked at a label neither mentions).
  auto check_label = [&](const std::string& l) {
    Tc he = rename_target(srec(h, view_unit(e, l, false)), kAmpOnly);
    Tc dl = view_unit(d, l, false);
    if (!bisimilar(interpret(he), interpret(dl)))
      raise(Err::HypothesisFailed,
            "h(e_" + l + ") is not bisimilar to d_" + l);
  };
  for (const auto& l : labels) check_label(l);
  check_label(fresh);

  FusionReport rep;
  rep.trials = trials;
  RecDef ep = as_primitive(e);
  RecDef dp = as_primitive(d);
  RecDef fp = fuse_prec(e, d);

  for (int i = 0; i < trials; ++i) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + i);
    int size = 1 + static_cast<int>(rng() % std::max(1, max_size));
    Tc t = random_term(Ctx{}, kAmpOnly, size, rng());
    Rc raw = to_raw(t);

    Tc lhs = rename_target(srec(h, rename_target(srec(e, t), kAmpOnly)),
                           kAmpOnly);
    Tc rhs = rename_target(srec(d, t), kAmpOnly);
    if (!bisimilar(interpret(lhs), interpret(rhs))) {
      rep.failures.push_back({"srec", raw});
      continue;
    }

    Tc pe = rename_target(prec(ep, t), kAmpOnly);
    Tc l2 = rename_target(prec(dp, pe), kAmpOnly);
    Tc pf = prec(fp, t);  // <> |- <w1,w2,w3>
    Tc r2 = rename_target(
        infer(mk_compose(to_raw(proj(fp.w, Ctx{"w1"})), to_raw(pf)), Ctx{},
              fp.sigs),
        kAmpOnly);
    if (!bisimilar(interpret(l2), interpret(r2)))
      rep.failures.push_back({"prec", raw});
  }
  return rep;
}

}  // namespace uncal
