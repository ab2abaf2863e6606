#include "uncal/lambdag.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

namespace uncal {

// ---------------------------------------------------------------------------
// Types

LgType lg_unit_t() { return LgType{LgType::K::Unit, {}}; }
LgType lg_g_t() { return LgType{LgType::K::G, {}}; }
LgType lg_l_t() { return LgType{LgType::K::L, {}}; }
LgType lg_b_t() { return LgType{LgType::K::B, {}}; }

LgType lg_prod(std::vector<LgType> comps) {
  std::vector<LgType> flat;
  for (auto& c : comps) {
    if (c.k == LgType::K::Unit) continue;
    if (c.k == LgType::K::Prod)
      flat.insert(flat.end(), c.kids.begin(), c.kids.end());
    else
      flat.push_back(std::move(c));
  }
  if (flat.empty()) return lg_unit_t();
  if (flat.size() == 1) return flat[0];
  return LgType{LgType::K::Prod, std::move(flat)};
}

LgType lg_gn(int n) { return lg_prod(std::vector<LgType>(n, lg_g_t())); }

LgType lg_arrow(LgType dom, LgType cod) {
  return LgType{LgType::K::Arrow, {std::move(dom), std::move(cod)}};
}

bool lg_type_eq(const LgType& a, const LgType& b) {
  if (a.k != b.k || a.kids.size() != b.kids.size()) return false;
  for (size_t i = 0; i < a.kids.size(); ++i)
    if (!lg_type_eq(a.kids[i], b.kids[i])) return false;
  return true;
}

int lg_width(const LgType& t) {
  switch (t.k) {
    case LgType::K::Unit: return 0;
    case LgType::K::G:
    case LgType::K::L:
    case LgType::K::B: return 1;
    case LgType::K::Prod: {
      int n = 0;
      for (auto& c : t.kids) n += lg_width(c);
      return n;
    }
    case LgType::K::Arrow:
      raise(Err::TypeError, "a function type has no coordinate width");
  }
  return 0;
}

std::string print_lg_type(const LgType& t) {
  switch (t.k) {
    case LgType::K::Unit: return "1";
    case LgType::K::G: return "G";
    case LgType::K::L: return "L";
    case LgType::K::B: return "B";
    case LgType::K::Prod: {
      std::string s;
      for (size_t i = 0; i < t.kids.size(); ++i) {
        if (i) s += " x ";
        bool wrap = t.kids[i].k == LgType::K::Arrow;
        s += wrap ? "(" + print_lg_type(t.kids[i]) + ")" : print_lg_type(t.kids[i]);
      }
      return s;
    }
    case LgType::K::Arrow: {
      bool wrap = t.kids[0].k == LgType::K::Arrow;
      std::string d = wrap ? "(" + print_lg_type(t.kids[0]) + ")" : print_lg_type(t.kids[0]);
      return d + " -> " + print_lg_type(t.kids[1]);
    }
  }
  return "?";
}

namespace {

// Scalar components of a flattened value type.
std::vector<LgType> flat_comps(const LgType& t) {
  switch (t.k) {
    case LgType::K::Unit: return {};
    case LgType::K::Prod: return t.kids;
    case LgType::K::Arrow:
      raise(Err::TypeError, "a function cannot be a tuple component");
    default: return {t};
  }
}

bool all_g(const std::vector<LgType>& ts) {
  for (auto& t : ts)
    if (t.k != LgType::K::G) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Term builders

namespace {

Lc node(LgTerm t) { return std::make_shared<const LgTerm>(std::move(t)); }

}  // namespace

Lc lg_var(std::string name) {
  LgTerm t{LgKind::Var};
  t.name = std::move(name);
  return node(std::move(t));
}

Lc lg_lam(std::vector<std::string> binders, Lc body,
          std::vector<LgType> binder_types) {
  if (binders.empty()) raise(Err::Internal, "a lambda needs at least one binder");
  binder_types.resize(binders.size(), lg_g_t());
  LgTerm t{LgKind::Lam};
  t.binders = std::move(binders);
  t.binder_types = std::move(binder_types);
  t.kids = {std::move(body)};
  return node(std::move(t));
}

Lc lg_app(Lc fn, Lc arg) {
  LgTerm t{LgKind::App};
  t.kids = {std::move(fn), std::move(arg)};
  return node(std::move(t));
}

Lc lg_tuple(std::vector<Lc> comps) {
  if (comps.empty()) return lg_const(LgC::Unit);
  if (comps.size() == 1) return comps[0];
  LgTerm t{LgKind::Tuple};
  t.kids = std::move(comps);
  return node(std::move(t));
}

Lc lg_const(LgC c) {
  LgTerm t{LgKind::Const};
  t.c = c;
  return node(std::move(t));
}

Lc lg_label(std::string l) {
  LgTerm t{LgKind::Const};
  t.c = LgC::Label;
  t.name = std::move(l);
  return node(std::move(t));
}

Lc lg_proj(int index) {
  LgTerm t{LgKind::Const};
  t.c = LgC::Proj;
  t.index = index;
  return node(std::move(t));
}

Lc lg_prim(std::string name) {
  LgTerm t{LgKind::Const};
  t.c = LgC::Prim;
  t.name = std::move(name);
  return node(std::move(t));
}

Lc lg_cons(Lc label, Lc t) {
  return lg_app(lg_const(LgC::Cons), lg_tuple({std::move(label), std::move(t)}));
}

Lc lg_union_of(Lc s, Lc t) {
  return lg_app(lg_const(LgC::Union), lg_tuple({std::move(s), std::move(t)}));
}

Lc lg_fix_of(Lc fn) { return lg_app(lg_const(LgC::Fix), std::move(fn)); }

Lc lg_if(Lc c, Lc thn, Lc els) {
  return lg_app(lg_const(LgC::If),
                lg_tuple({std::move(c), std::move(thn), std::move(els)}));
}

Lc lg_eq_of(Lc a, Lc b) {
  return lg_app(lg_const(LgC::Eq), lg_tuple({std::move(a), std::move(b)}));
}

bool lg_term_eq(const Lc& a, const Lc& b) {
  if (a->kind != b->kind || a->c != b->c || a->name != b->name ||
      a->index != b->index || a->binders != b->binders ||
      a->kids.size() != b->kids.size())
    return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!lg_term_eq(a->kids[i], b->kids[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Free variables, substitution, one root beta step

namespace {

void free_vars(const Lc& t, std::set<std::string>& bound,
               std::set<std::string>& out) {
  switch (t->kind) {
    case LgKind::Var:
      if (!bound.count(t->name)) out.insert(t->name);
      return;
    case LgKind::Lam: {
      std::vector<std::string> added;
      for (auto& b : t->binders)
        if (bound.insert(b).second) added.push_back(b);
      free_vars(t->kids[0], bound, out);
      for (auto& b : added) bound.erase(b);
      return;
    }
    default:
      for (auto& k : t->kids) free_vars(k, bound, out);
  }
}

std::set<std::string> free_vars(const Lc& t) {
  std::set<std::string> bound, out;
  free_vars(t, bound, out);
  return out;
}

std::string pick_fresh(const std::string& base, const std::set<std::string>& avoid) {
  if (!avoid.count(base)) return base;
  for (int i = 2;; ++i) {
    std::string c = base + std::to_string(i);
    if (!avoid.count(c)) return c;
  }
}

Lc subst(const Lc& t, std::map<std::string, Lc> m) {
  if (m.empty()) return t;
  switch (t->kind) {
    case LgKind::Var: {
      auto it = m.find(t->name);
      return it == m.end() ? t : it->second;
    }
    case LgKind::Lam: {
      std::set<std::string> avoid;
      for (auto& [v, img] : m) {
        avoid.insert(v);
        auto fv = free_vars(img);
        avoid.insert(fv.begin(), fv.end());
      }
      std::vector<std::string> bs = t->binders;
      std::map<std::string, Lc> inner = m;
      std::set<std::string> taken = avoid;
      {
        auto fv = free_vars(t->kids[0]);
        taken.insert(fv.begin(), fv.end());
      }
      taken.insert(bs.begin(), bs.end());
      for (auto& b : bs) {
        inner.erase(b);
        if (avoid.count(b)) {
          std::string nb = pick_fresh(b, taken);
          taken.insert(nb);
          inner[b] = lg_var(nb);
          b = nb;
        }
      }
      LgTerm n = *t;
      n.ty.reset();
      n.binders = std::move(bs);
      n.kids = {subst(t->kids[0], std::move(inner))};
      return node(std::move(n));
    }
    default: {
      LgTerm n = *t;
      n.ty.reset();
      n.kids.clear();
      for (auto& k : t->kids) n.kids.push_back(subst(k, m));
      return node(std::move(n));
    }
  }
}

}  // namespace

Lc beta_root(const Lc& t) {
  if (t->kind != LgKind::App || t->kids[0]->kind != LgKind::Lam) return t;
  const Lc& f = t->kids[0];
  const Lc& a = t->kids[1];
  std::map<std::string, Lc> m;
  if (f->binders.size() == 1) {
    m[f->binders[0]] = a;
  } else {
    for (size_t i = 0; i < f->binders.size(); ++i)
      m[f->binders[i]] = lg_app(lg_proj((int)i + 1), a);
  }
  return subst(f->kids[0], std::move(m));
}

// ---------------------------------------------------------------------------
// Elaboration (standard simply-typed rules, constants fixed above)

namespace {

struct TyEnv {
  std::vector<std::pair<std::string, LgType>> stack;
  const LgType* find(const std::string& n) const {
    for (auto it = stack.rbegin(); it != stack.rend(); ++it)
      if (it->first == n) return &it->second;
    return nullptr;
  }
};

Lc with_ty(const LgTerm& base, std::vector<Lc> kids, LgType ty) {
  LgTerm n = base;
  n.kids = std::move(kids);
  n.ty = std::make_shared<const LgType>(std::move(ty));
  return node(std::move(n));
}

Lc elab(const Lc& t, TyEnv& env);

LgType const_type(const Lc& t) {
  switch (t->c) {
    case LgC::Unit: return lg_unit_t();
    case LgC::Nil: return lg_g_t();
    case LgC::True:
    case LgC::False: return lg_b_t();
    case LgC::Label: return lg_l_t();
    case LgC::Union: return lg_arrow(lg_gn(2), lg_g_t());
    case LgC::Cons: return lg_arrow(lg_prod({lg_l_t(), lg_g_t()}), lg_g_t());
    case LgC::Eq: return lg_arrow(lg_prod({lg_l_t(), lg_l_t()}), lg_b_t());
    case LgC::Prim: return lg_arrow(lg_g_t(), lg_g_t());
    case LgC::Srec:
    case LgC::Prec:
      raise(Err::TypeError, "recursion operators must be eliminated before use");
    default:
      raise(Err::TypeError, "this constant only takes a type when applied");
  }
}

Lc elab_app(const Lc& t, TyEnv& env) {
  const Lc& f = t->kids[0];
  Lc ea = elab(t->kids[1], env);
  const LgType& at = *ea->ty;
  if (f->kind == LgKind::Const) {
    switch (f->c) {
      case LgC::Proj: {
        auto comps = flat_comps(at);
        if (f->index < 1 || f->index > (int)comps.size())
          raise(Err::TypeError, "projection index out of range");
        Lc ef = with_ty(*f, {}, lg_arrow(at, comps[f->index - 1]));
        return with_ty(*t, {ef, ea}, comps[f->index - 1]);
      }
      case LgC::Fix: {
        if (at.k != LgType::K::Arrow)
          raise(Err::TypeError, "fix needs a function");
        const LgType& d = at.kids[0];
        if (!lg_type_eq(d, at.kids[1]) || !all_g(flat_comps(d)) ||
            lg_width(d) < 1)
          raise(Err::TypeError, "fix needs an endofunction on graph tuples");
        Lc ef = with_ty(*f, {}, lg_arrow(at, d));
        return with_ty(*t, {ef, ea}, d);
      }
      case LgC::If: {
        auto comps = flat_comps(at);
        if (comps.size() < 3 || comps[0].k != LgType::K::B ||
            (comps.size() - 1) % 2 != 0)
          raise(Err::TypeError, "if-then-else takes a boolean and two branches");
        size_t k = (comps.size() - 1) / 2;
        for (size_t i = 1; i < comps.size(); ++i)
          if (comps[i].k != LgType::K::G)
            raise(Err::TypeError, "if-then-else branches must be graph tuples");
        Lc ef = with_ty(*f, {}, lg_arrow(at, lg_gn((int)k)));
        return with_ty(*t, {ef, ea}, lg_gn((int)k));
      }
      default: {
        LgType ft = const_type(f);
        if (ft.k != LgType::K::Arrow)
          raise(Err::TypeError, "application of a non-function");
        if (!lg_type_eq(at, ft.kids[0]))
          raise(Err::TypeError, "constant applied at " + print_lg_type(at) +
                                    ", expected " + print_lg_type(ft.kids[0]));
        Lc ef = with_ty(*f, {}, ft);
        return with_ty(*t, {ef, ea}, ft.kids[1]);
      }
    }
  }
  Lc ef = elab(f, env);
  if (ef->ty->k != LgType::K::Arrow)
    raise(Err::TypeError, "application of a non-function");
  if (!lg_type_eq(at, ef->ty->kids[0]))
    raise(Err::TypeError, "argument type " + print_lg_type(at) +
                              " does not match " + print_lg_type(ef->ty->kids[0]));
  return with_ty(*t, {ef, ea}, ef->ty->kids[1]);
}

Lc elab(const Lc& t, TyEnv& env) {
  switch (t->kind) {
    case LgKind::Var: {
      const LgType* ty = env.find(t->name);
      if (!ty) raise(Err::TypeError, "unbound variable " + t->name);
      return with_ty(*t, {}, *ty);
    }
    case LgKind::Lam: {
      if (t->binder_types.size() != t->binders.size())
        raise(Err::TypeError, "binder annotations out of step");
      for (auto& bt : t->binder_types)
        if (lg_width(bt) != 1)
          raise(Err::TypeError, "binders must name scalar coordinates");
      size_t mark = env.stack.size();
      for (size_t i = 0; i < t->binders.size(); ++i)
        env.stack.emplace_back(t->binders[i], t->binder_types[i]);
      Lc eb = elab(t->kids[0], env);
      env.stack.resize(mark);
      LgType dom = lg_prod(t->binder_types);
      return with_ty(*t, {eb}, lg_arrow(dom, *eb->ty));
    }
    case LgKind::Tuple: {
      std::vector<Lc> ek;
      std::vector<LgType> tys;
      for (auto& k : t->kids) {
        ek.push_back(elab(k, env));
        if (ek.back()->ty->k == LgType::K::Arrow)
          raise(Err::TypeError, "a function cannot be a tuple component");
        tys.push_back(*ek.back()->ty);
      }
      return with_ty(*t, std::move(ek), lg_prod(std::move(tys)));
    }
    case LgKind::Const:
      return with_ty(*t, {}, const_type(t));
    case LgKind::App:
      return elab_app(t, env);
  }
  raise(Err::Internal, "unreachable term kind");
}

}  // namespace

Lc lg_elaborate(const Lc& t) {
  TyEnv env;
  return elab(t, env);
}

const LgType& lg_type_of(const Lc& t) {
  if (!t->ty) raise(Err::Internal, "term was not elaborated");
  return *t->ty;
}

// ---------------------------------------------------------------------------
// Translation

namespace {

std::string sanitize(const std::string& marker) {
  std::string out;
  for (char c : marker) {
    if (c == '&') continue;
    out += c == '$' ? '_' : c;
  }
  if (out.empty()) out = "x";
  if (std::isdigit((unsigned char)out[0])) out = "x" + out;
  return out;
}

std::string fresh_in(std::set<std::string>& used, std::string base) {
  if (base.empty()) base = "x";
  if (used.insert(base).second) return base;
  for (int i = 2;; ++i) {
    std::string c = base + std::to_string(i);
    if (used.insert(c).second) return c;
  }
}

struct TrCtx {
  std::map<std::string, std::string> vars;  // source marker -> bound variable
  std::string lvar;                         // label-variable binder, "" outside tables
  bool allow_calls = false;
};

Lc tr_body(const Tc& t, const TrCtx& c, std::set<std::string> used) {
  switch (t->kind) {
    case Kind::Mark: {
      auto it = c.vars.find(t->name);
      if (it == c.vars.end()) raise(Err::Internal, "marker fell outside the map");
      return lg_var(it->second);
    }
    case Kind::Nil: return lg_const(LgC::Nil);
    case Kind::Emp: return lg_const(LgC::Unit);
    case Kind::Man:
      return lg_union_of(lg_var(c.vars.at(t->src[0])), lg_var(c.vars.at(t->src[1])));
    case Kind::Edge: {
      Lc lab;
      if (t->label_var) {
        if (c.lvar.empty())
          raise(Err::NotInImage, "label variable outside a clause table");
        lab = lg_var(c.lvar);
      } else {
        lab = lg_label(t->name);
      }
      return lg_cons(std::move(lab), tr_body(t->kids[0], c, used));
    }
    case Kind::Pair: {
      std::vector<Lc> comps;
      for (auto& k : t->kids) comps.push_back(tr_body(k, c, used));
      return lg_tuple(std::move(comps));
    }
    case Kind::Compose: {
      const Tc& l = t->kids[0];
      const Tc& r = t->kids[1];
      if (l->kind == Kind::Man && r->kind == Kind::Pair &&
          r->kids.size() == 2 && r->kids[0]->tgt.size() == 1 &&
          r->kids[1]->tgt.size() == 1)
        return lg_union_of(tr_body(r->kids[0], c, used),
                           tr_body(r->kids[1], c, used));
      if (r->tgt.empty()) {
        // the interface is empty: the right side contributes nothing
        TrCtx closed{{}, c.lvar, c.allow_calls};
        return tr_body(l, closed, {});
      }
      std::set<std::string> zused;
      TrCtx inner{{}, c.lvar, c.allow_calls};
      std::vector<std::string> zs;
      for (auto& m : r->tgt) {
        zs.push_back(fresh_in(zused, sanitize(m)));
        inner.vars[m] = zs.back();
      }
      Lc f = lg_lam(zs, tr_body(l, inner, zused));
      return lg_app(std::move(f), tr_body(r, c, used));
    }
    case Kind::Cycle: {
      TrCtx inner = c;
      auto used2 = used;
      std::vector<std::string> xs;
      for (auto& m : t->tgt) {
        xs.push_back(fresh_in(used2, sanitize(m)));
        inner.vars[m] = xs.back();
      }
      return lg_fix_of(lg_lam(xs, tr_body(t->kids[0], inner, used2)));
    }
    case Kind::Def:
      return tr_body(t->kids[0], c, used);
    case Kind::Call: {
      if (!c.allow_calls)
        raise(Err::NotInImage, "call " + t->name + " in a translation source");
      if (t->tgt.size() != 1)
        raise(Err::NonCanonicalClauseTable,
              "base call " + t->name + " must have a single-rooted result");
      return lg_app(lg_prim(t->name), tr_body(t->kids[0], c, used));
    }
  }
  raise(Err::Internal, "unreachable term kind");
}

}  // namespace

Lc translate(const Tc& t) {
  TrCtx c;
  std::set<std::string> used;
  if (t->src.empty()) return tr_body(t, c, used);
  std::vector<std::string> ys;
  for (auto& m : t->src) {
    ys.push_back(fresh_in(used, sanitize(m)));
    c.vars[m] = ys.back();
  }
  return lg_lam(std::move(ys), tr_body(t, c, used));
}

// ---------------------------------------------------------------------------
// Inverse translation

namespace {

Ctx std_target(int n) {
  if (n == 1) return Ctx{"&"};
  return dup_ctx(Ctx{"&"}, n);
}

Tc inv_body(const Lc& t, const Ctx& scope);

// A closed function-shaped subterm as a typed term over its binder names.
Tc inv_fn(const Lc& f) {
  if (f->kind == LgKind::Lam) {
    for (auto& bt : f->binder_types)
      if (bt.k != LgType::K::G)
        raise(Err::NotInImage, "non-graph binder in the image");
    Ctx zs(f->binders.begin(), f->binders.end());
    return inv_body(f->kids[0], zs);
  }
  if (f->kind == LgKind::Const && f->c == LgC::Union) {
    Rc raw = mk_compose(mk_man(), mk_pair({mk_mark("u"), mk_mark("v")}));
    return infer(raw, Ctx{"u", "v"});
  }
  if (f->kind == LgKind::Const && f->c == LgC::Proj) {
    auto comps = flat_comps(lg_type_of(f).kids[0]);
    Ctx zs;
    for (size_t i = 0; i < comps.size(); ++i)
      zs.push_back("u" + std::to_string(i + 1));
    return infer(mk_mark(zs[f->index - 1]), zs);
  }
  raise(Err::NotInImage, "function position outside the image grammar");
}

Tc inv_body(const Lc& t, const Ctx& scope) {
  switch (t->kind) {
    case LgKind::Var:
      return infer(mk_mark(t->name), scope);
    case LgKind::Tuple: {
      std::vector<Rc> comps;
      for (auto& k : t->kids) comps.push_back(to_raw(inv_body(k, scope)));
      return infer(mk_pair(std::move(comps)), scope);
    }
    case LgKind::Const:
      switch (t->c) {
        case LgC::Nil: return infer(mk_nil(), scope);
        case LgC::Unit: return infer(mk_emp(), scope);
        default: raise(Err::NotInImage, "constant outside the image grammar");
      }
    case LgKind::App: {
      const Lc& f = t->kids[0];
      const Lc& a = t->kids[1];
      if (f->kind == LgKind::Const && f->c == LgC::Cons) {
        if (a->kind != LgKind::Tuple || a->kids.size() != 2 ||
            a->kids[0]->kind != LgKind::Const || a->kids[0]->c != LgC::Label)
          raise(Err::NotInImage, "edge constructor needs a literal label");
        Rc sub = to_raw(inv_body(a->kids[1], scope));
        return infer(mk_edge(a->kids[0]->name, std::move(sub)), scope);
      }
      if (f->kind == LgKind::Const && f->c == LgC::Union &&
          a->kind == LgKind::Tuple && a->kids.size() == 2) {
        Rc l = to_raw(inv_body(a->kids[0], scope));
        Rc r = to_raw(inv_body(a->kids[1], scope));
        return infer(mk_union(std::move(l), std::move(r)), scope);
      }
      if (f->kind == LgKind::Const && f->c == LgC::Fix) {
        if (a->kind != LgKind::Lam)
          raise(Err::NotInImage, "fix of a non-lambda");
        for (auto& bt : a->binder_types)
          if (bt.k != LgType::K::G)
            raise(Err::NotInImage, "non-graph binder under fix");
        Ctx xs(a->binders.begin(), a->binders.end());
        Ctx inner_scope = ctx_concat(scope, xs);
        Tc body = inv_body(a->kids[0], inner_scope);
        Tc renamed = rename_target(body, xs);
        return infer(mk_cycle(to_raw(renamed)), scope);
      }
      Tc fn = inv_fn(f);
      Tc arg = inv_body(a, scope);
      Tc arg_r = rename_target(arg, fn->src);
      return infer(mk_compose(to_raw(fn), to_raw(arg_r)), scope);
    }
    case LgKind::Lam:
      raise(Err::NotInImage, "higher-order subterm in the image");
  }
  raise(Err::Internal, "unreachable term kind");
}

}  // namespace

Tc inverse(const Lc& t0) {
  Lc t = lg_elaborate(t0);
  Tc u;
  if (t->kind == LgKind::Lam ||
      (t->kind == LgKind::Const && (t->c == LgC::Union || t->c == LgC::Proj))) {
    u = inv_fn(t);
  } else {
    u = inv_body(t, Ctx{});
  }
  if (u->tgt.empty()) return u;
  Ctx want = std_target((int)u->tgt.size());
  if (u->tgt == want) return u;
  return rename_target(u, want);
}

// ---------------------------------------------------------------------------
// Call-by-need evaluation

namespace {

struct EnvNode;
using Env = std::shared_ptr<const EnvNode>;
struct EnvNode {
  std::string name;
  size_t addr;
  Env next;
};

Env env_bind(Env e, std::string n, size_t a) {
  return std::make_shared<EnvNode>(EnvNode{std::move(n), a, std::move(e)});
}

size_t env_get(const Env& e, const std::string& n) {
  for (const EnvNode* p = e.get(); p; p = p->next.get())
    if (p->name == n) return p->addr;
  raise(Err::Internal, "variable " + n + " escaped elaboration");
}

struct Value {
  enum class V { Unit, Bool, Label, Tuple, Closure, ConstFn, GNil, GCons, GUnion, GExt };
  V v = V::Unit;
  bool b = false;
  std::string s;              // Label text; GCons edge label
  std::vector<size_t> addrs;  // Tuple flat coordinates
  Env env;                    // Closure
  Lc t;                       // Closure: the lambda; ConstFn: the constant
  size_t a0 = 0, a1 = 0;      // GCons tail; GUnion branches; GExt root
  int ext = -1;               // GExt: index into the spliced-graph store
};

struct Cell {
  enum class S { Thunk, ProjT, FixComp, Hole, Val };
  S s = S::Thunk;
  Env env;
  Lc t;            // Thunk body
  size_t base = 0; // ProjT/FixComp: the cell projected from / the knot
  int idx = 0;     // ProjT: flat coordinate; FixComp: component
  int n = 0;       // FixComp: fix width
  Value fn;        // FixComp: the tied function value
  Value val;
};

struct Heap {
  std::vector<Cell> cells;
  std::vector<Graph> ext;
  const LgPrims* prims = nullptr;

  size_t alloc(Cell c) {
    cells.push_back(std::move(c));
    return cells.size() - 1;
  }
};

Value force(Heap& h, size_t addr);
Value evalw(Heap& h, const Env& env, const Lc& t);
Value applyv(Heap& h, const Value& fv, size_t arg);

size_t addr_of(Heap& h, const Env& env, const Lc& t) {
  if (t->kind == LgKind::Var) return env_get(env, t->name);
  Cell c;
  c.s = Cell::S::Thunk;
  c.env = env;
  c.t = t;
  return h.alloc(std::move(c));
}

VId readback(Heap& h, size_t addr, Graph& g, std::map<size_t, VId>& seen) {
  auto it = seen.find(addr);
  if (it != seen.end()) return it->second;
  VId v = g.nverts++;
  seen[addr] = v;
  Value val = force(h, addr);
  switch (val.v) {
    case Value::V::GNil: break;
    case Value::V::GCons:
      g.edges.emplace_back(v, val.s, readback(h, val.a0, g, seen));
      break;
    case Value::V::GUnion: {
      VId l = readback(h, val.a0, g, seen);
      VId r = readback(h, val.a1, g, seen);
      g.eps.emplace_back(v, l);
      g.eps.emplace_back(v, r);
      break;
    }
    case Value::V::GExt: {
      const Graph& x = h.ext[val.ext];
      int off = g.nverts;
      g.nverts += x.nverts;
      for (auto& [a, l, b] : x.edges) g.edges.emplace_back(a + off, l, b + off);
      for (auto& [a, b] : x.eps) g.eps.emplace_back(a + off, b + off);
      g.eps.emplace_back(v, (VId)val.a0 + off);
      break;
    }
    default:
      raise(Err::Internal, "graph readback met a non-graph value");
  }
  return v;
}

Graph readback_graph(Heap& h, const std::vector<size_t>& roots, const Ctx& names) {
  Graph g;
  std::map<size_t, VId> seen;
  for (size_t a : roots) g.roots.push_back(readback(h, a, g, seen));
  g.in_markers = names;
  return g;
}

Value applyv(Heap& h, const Value& fv, size_t arg) {
  if (fv.v == Value::V::Closure) {
    const Lc& lam = fv.t;
    Env e = fv.env;
    if (lam->binders.size() == 1) {
      e = env_bind(e, lam->binders[0], arg);
    } else {
      for (size_t i = 0; i < lam->binders.size(); ++i) {
        Cell c;
        c.s = Cell::S::ProjT;
        c.base = arg;
        c.idx = (int)i;
        e = env_bind(e, lam->binders[i], h.alloc(std::move(c)));
      }
    }
    return evalw(h, e, lam->kids[0]);
  }
  if (fv.v != Value::V::ConstFn) raise(Err::TypeError, "application of a non-function");
  switch (fv.t->c) {
    case LgC::Union: {
      Value a = force(h, arg);
      if (a.v != Value::V::Tuple || a.addrs.size() != 2)
        raise(Err::TypeError, "union takes a pair");
      Value r;
      r.v = Value::V::GUnion;
      r.a0 = a.addrs[0];
      r.a1 = a.addrs[1];
      return r;
    }
    case LgC::Cons: {
      Value a = force(h, arg);
      if (a.v != Value::V::Tuple || a.addrs.size() != 2)
        raise(Err::TypeError, "edge constructor takes a pair");
      Value l = force(h, a.addrs[0]);
      if (l.v != Value::V::Label)
        raise(Err::TypeError, "edge constructor needs a label");
      Value r;
      r.v = Value::V::GCons;
      r.s = l.s;
      r.a0 = a.addrs[1];
      return r;
    }
    case LgC::Eq: {
      Value a = force(h, arg);
      if (a.v != Value::V::Tuple || a.addrs.size() != 2)
        raise(Err::TypeError, "label equality takes a pair");
      Value l = force(h, a.addrs[0]);
      Value r = force(h, a.addrs[1]);
      if (l.v != Value::V::Label || r.v != Value::V::Label)
        raise(Err::TypeError, "label equality compares labels");
      Value out;
      out.v = Value::V::Bool;
      out.b = l.s == r.s;
      return out;
    }
    case LgC::If: {
      Value a = force(h, arg);
      if (a.v != Value::V::Tuple || a.addrs.size() < 3 ||
          (a.addrs.size() - 1) % 2 != 0)
        raise(Err::TypeError, "if-then-else takes a condition and two branches");
      Value c = force(h, a.addrs[0]);
      if (c.v != Value::V::Bool)
        raise(Err::StuckConditional, "scrutinee did not evaluate to a boolean");
      size_t k = (a.addrs.size() - 1) / 2;
      size_t off = c.b ? 1 : 1 + k;
      if (k == 1) return force(h, a.addrs[off]);
      Value out;
      out.v = Value::V::Tuple;
      out.addrs.assign(a.addrs.begin() + off, a.addrs.begin() + off + k);
      return out;
    }
    case LgC::Proj: {
      Value a = force(h, arg);
      if (a.v != Value::V::Tuple) {
        if (fv.t->index != 1) raise(Err::TypeError, "projection off a scalar");
        return a;
      }
      if (fv.t->index < 1 || fv.t->index > (int)a.addrs.size())
        raise(Err::TypeError, "projection index out of range");
      return force(h, a.addrs[fv.t->index - 1]);
    }
    case LgC::Fix: {
      Value f = force(h, arg);
      if (f.v != Value::V::Closure)
        raise(Err::TypeError, "fix needs a lambda");
      int n = (int)f.t->binders.size();
      if (n == 1) {
        size_t c = h.cells.size();
        Cell cell;
        cell.s = Cell::S::FixComp;
        cell.fn = f;
        cell.base = c;  // the knot is the cell itself
        cell.idx = 0;
        cell.n = 1;
        h.alloc(std::move(cell));
        return force(h, c);
      }
      size_t first = h.cells.size();
      size_t knot = first + n;
      for (int i = 0; i < n; ++i) {
        Cell cell;
        cell.s = Cell::S::FixComp;
        cell.fn = f;
        cell.base = knot;
        cell.idx = i;
        cell.n = n;
        h.alloc(std::move(cell));
      }
      Value kv;
      kv.v = Value::V::Tuple;
      for (int i = 0; i < n; ++i) kv.addrs.push_back(first + i);
      Cell kc;
      kc.s = Cell::S::Val;
      kc.val = kv;
      h.alloc(std::move(kc));
      return kv;  // components stay lazy
    }
    case LgC::Prim: {
      Graph g = readback_graph(h, {arg}, Ctx{"&"});
      if (!h.prims) raise(Err::UnknownFunction, fv.t->name);
      auto it = h.prims->find(fv.t->name);
      if (it == h.prims->end()) raise(Err::UnknownFunction, fv.t->name);
      Graph out = it->second(g);
      if (out.roots.size() != 1)
        raise(Err::Internal, "base function produced a non-single-rooted graph");
      Value r;
      r.v = Value::V::GExt;
      r.ext = (int)h.ext.size();
      r.a0 = (size_t)out.roots[0];
      h.ext.push_back(std::move(out));
      return r;
    }
    default:
      raise(Err::TypeError, "constant is not a function");
  }
}

Value evalw(Heap& h, const Env& env, const Lc& t) {
  switch (t->kind) {
    case LgKind::Var:
      return force(h, env_get(env, t->name));
    case LgKind::Lam: {
      Value v;
      v.v = Value::V::Closure;
      v.env = env;
      v.t = t;
      return v;
    }
    case LgKind::Const:
      switch (t->c) {
        case LgC::Unit: return Value{};
        case LgC::Nil: {
          Value v;
          v.v = Value::V::GNil;
          return v;
        }
        case LgC::True:
        case LgC::False: {
          Value v;
          v.v = Value::V::Bool;
          v.b = t->c == LgC::True;
          return v;
        }
        case LgC::Label: {
          Value v;
          v.v = Value::V::Label;
          v.s = t->name;
          return v;
        }
        case LgC::Srec:
        case LgC::Prec:
          raise(Err::TypeError, "recursion operators must be eliminated before use");
        default: {
          Value v;
          v.v = Value::V::ConstFn;
          v.t = t;
          return v;
        }
      }
    case LgKind::Tuple: {
      std::vector<size_t> as;
      for (auto& k : t->kids) {
        int w = lg_width(lg_type_of(k));
        if (w == 0) continue;
        if (w == 1) {
          as.push_back(addr_of(h, env, k));
        } else {
          Value v = evalw(h, env, k);
          if (v.v != Value::V::Tuple)
            raise(Err::Internal, "wide component did not evaluate to a tuple");
          as.insert(as.end(), v.addrs.begin(), v.addrs.end());
        }
      }
      if (as.empty()) return Value{};
      if (as.size() == 1) return force(h, as[0]);
      Value v;
      v.v = Value::V::Tuple;
      v.addrs = std::move(as);
      return v;
    }
    case LgKind::App: {
      Value fv = evalw(h, env, t->kids[0]);
      size_t a = addr_of(h, env, t->kids[1]);
      return applyv(h, fv, a);
    }
  }
  raise(Err::Internal, "unreachable term kind");
}

Value force(Heap& h, size_t addr) {
  Cell::S s = h.cells[addr].s;
  switch (s) {
    case Cell::S::Val:
      return h.cells[addr].val;
    case Cell::S::Hole: {
      // the black hole: a cell demanded during its own evaluation is {}
      Value v;
      v.v = Value::V::GNil;
      return v;
    }
    case Cell::S::Thunk: {
      Env env = h.cells[addr].env;
      Lc t = h.cells[addr].t;
      h.cells[addr].s = Cell::S::Hole;
      Value v = evalw(h, env, t);
      h.cells[addr].val = v;
      h.cells[addr].s = Cell::S::Val;
      return v;
    }
    case Cell::S::ProjT: {
      size_t base = h.cells[addr].base;
      int idx = h.cells[addr].idx;
      h.cells[addr].s = Cell::S::Hole;
      Value bv = force(h, base);
      Value v;
      if (bv.v == Value::V::Tuple) {
        if (idx >= (int)bv.addrs.size())
          raise(Err::Internal, "binder coordinate out of range");
        v = force(h, bv.addrs[idx]);
      } else {
        if (idx != 0) raise(Err::Internal, "binder coordinate out of range");
        v = bv;
      }
      h.cells[addr].val = v;
      h.cells[addr].s = Cell::S::Val;
      return v;
    }
    case Cell::S::FixComp: {
      Value fn = h.cells[addr].fn;
      size_t base = h.cells[addr].base;
      int idx = h.cells[addr].idx, n = h.cells[addr].n;
      h.cells[addr].s = Cell::S::Hole;
      Value v = applyv(h, fn, base);
      if (n > 1) {
        if (v.v != Value::V::Tuple || (int)v.addrs.size() != n)
          raise(Err::Internal, "fix body did not produce its tuple");
        v = force(h, v.addrs[idx]);
      }
      h.cells[addr].val = v;
      h.cells[addr].s = Cell::S::Val;
      return v;
    }
  }
  raise(Err::Internal, "unreachable cell state");
}

}  // namespace

Graph lg_eval(const Lc& t, const std::vector<Graph>& args, const Ctx& out,
              const LgPrims& prims) {
  Lc el = lg_elaborate(t);
  Heap h;
  h.prims = &prims;
  LgType ty = lg_type_of(el);
  Value res;
  if (ty.k == LgType::K::Arrow) {
    auto dom = flat_comps(ty.kids[0]);
    if (!all_g(dom)) raise(Err::TypeError, "arguments must be graphs");
    if (dom.size() != args.size())
      raise(Err::LengthMismatch, "expected " + std::to_string(dom.size()) +
                                     " arguments, got " + std::to_string(args.size()));
    std::vector<size_t> acells;
    for (auto& g : args) {
      if (g.in_markers.size() != 1)
        raise(Err::LengthMismatch, "arguments must be single-rooted");
      if (!g.outputs.empty())
        raise(Err::NotClosed, "arguments must be closed graphs");
      Value v;
      v.v = Value::V::GExt;
      v.ext = (int)h.ext.size();
      v.a0 = (size_t)g.roots[0];
      h.ext.push_back(g);
      Cell c;
      c.s = Cell::S::Val;
      c.val = v;
      acells.push_back(h.alloc(std::move(c)));
    }
    Value fv = evalw(h, {}, el);
    size_t aaddr;
    if (acells.size() == 1) {
      aaddr = acells[0];
    } else {
      Value v;
      v.v = acells.empty() ? Value::V::Unit : Value::V::Tuple;
      v.addrs = acells;
      Cell c;
      c.s = Cell::S::Val;
      c.val = v;
      aaddr = h.alloc(std::move(c));
    }
    res = applyv(h, fv, aaddr);
    ty = ty.kids[1];
  } else {
    if (!args.empty()) raise(Err::TypeError, "the term takes no arguments");
    res = evalw(h, {}, el);
  }
  int n = lg_width(ty);
  Ctx names = out;
  if (names.empty() && n > 0) names = n == 1 ? Ctx{"&"} : std_target(n);
  if ((int)names.size() != n)
    raise(Err::LengthMismatch, "result has " + std::to_string(n) +
                                   " roots, got " + std::to_string(names.size()) +
                                   " names");
  std::vector<size_t> roots;
  if (n == 1) {
    Cell c;
    c.s = Cell::S::Val;
    c.val = res;
    roots.push_back(h.alloc(std::move(c)));
  } else if (n > 1) {
    if (res.v != Value::V::Tuple || (int)res.addrs.size() != n)
      raise(Err::Internal, "result did not evaluate to its tuple");
    roots = {res.addrs.begin(), res.addrs.end()};
  }
  Graph g = readback_graph(h, roots, names);
  return eliminate_epsilon(g);
}

// ---------------------------------------------------------------------------
// Clause tables and the recursion operators

namespace {

// Accepts λ(l, slots...) whose body is a chain of if (l == label) over the
// first binder; returns the slot count.
int validate_table(const Lc& e) {
  if (!e || e->kind != LgKind::Lam || e->binders.size() < 2)
    raise(Err::NonCanonicalClauseTable, "a clause table is a lambda over a label and slots");
  if (e->binder_types[0].k != LgType::K::L)
    raise(Err::NonCanonicalClauseTable, "the first table binder must be a label");
  for (size_t i = 1; i < e->binder_types.size(); ++i)
    if (e->binder_types[i].k != LgType::K::G)
      raise(Err::NonCanonicalClauseTable, "table slots must be graphs");
  const std::string& l = e->binders[0];
  Lc b = e->kids[0];
  while (b->kind == LgKind::App && b->kids[0]->kind == LgKind::Const &&
         b->kids[0]->c == LgC::If && b->kids[1]->kind == LgKind::Tuple &&
         b->kids[1]->kids.size() == 3) {
    const Lc& c = b->kids[1]->kids[0];
    bool scrut_ok = c->kind == LgKind::App && c->kids[0]->kind == LgKind::Const &&
                    c->kids[0]->c == LgC::Eq && c->kids[1]->kind == LgKind::Tuple &&
                    c->kids[1]->kids.size() == 2 &&
                    c->kids[1]->kids[0]->kind == LgKind::Var &&
                    c->kids[1]->kids[0]->name == l &&
                    c->kids[1]->kids[1]->kind == LgKind::Const &&
                    c->kids[1]->kids[1]->c == LgC::Label;
    if (!scrut_ok)
      raise(Err::NonCanonicalClauseTable,
            "table branches must scrutinise the label binder against a literal");
    b = b->kids[1]->kids[2];
  }
  return (int)e->binders.size() - 1;
}

void collect_names(const Lc& t, std::set<std::string>& out) {
  if (t->kind == LgKind::Var) out.insert(t->name);
  for (auto& b : t->binders) out.insert(b);
  for (auto& k : t->kids) collect_names(k, out);
}

using Blocks = std::map<std::string, std::vector<std::string>>;

struct SrecCtx {
  Lc e;
  int k = 1;
  std::set<std::string> used;

  std::vector<std::string> block(const std::string& base) {
    std::vector<std::string> names;
    for (int j = 1; j <= k; ++j)
      names.push_back(fresh_in(used, base + "_" + std::to_string(j)));
    return names;
  }

  Lc tuple_of_vars(const std::vector<std::string>& ns) {
    std::vector<Lc> vs;
    for (auto& n : ns) vs.push_back(lg_var(n));
    return lg_tuple(std::move(vs));
  }

  // The componentwise-union operator on two coordinate blocks.
  Lc ziplam() {
    std::vector<std::string> us, vs;
    for (int j = 1; j <= k; ++j) us.push_back(fresh_in(used, "u" + std::to_string(j)));
    for (int j = 1; j <= k; ++j) vs.push_back(fresh_in(used, "v" + std::to_string(j)));
    std::vector<Lc> comps;
    for (int j = 0; j < k; ++j)
      comps.push_back(lg_union_of(lg_var(us[j]), lg_var(vs[j])));
    std::vector<std::string> all = us;
    all.insert(all.end(), vs.begin(), vs.end());
    return lg_lam(std::move(all), lg_tuple(std::move(comps)));
  }

  Lc fn(const Lc& f, const Blocks& m);

  Lc B(const Lc& t, const Blocks& m) {
    switch (t->kind) {
      case LgKind::Var: {
        auto it = m.find(t->name);
        if (it == m.end()) raise(Err::NotInImage, "free variable " + t->name);
        return tuple_of_vars(it->second);
      }
      case LgKind::Tuple: {
        std::vector<Lc> comps;
        for (auto& c : t->kids) comps.push_back(B(c, m));
        return lg_tuple(std::move(comps));
      }
      case LgKind::Const:
        if (t->c == LgC::Unit) return t;
        if (t->c == LgC::Nil)
          return lg_tuple(std::vector<Lc>(k, lg_const(LgC::Nil)));
        raise(Err::NotInImage, "constant outside the image grammar");
      case LgKind::App: {
        const Lc& f = t->kids[0];
        const Lc& a = t->kids[1];
        if (f->kind == LgKind::Const && f->c == LgC::Cons) {
          if (a->kind != LgKind::Tuple || a->kids.size() != 2)
            raise(Err::NotInImage, "edge constructor outside the image shape");
          const Lc& lab = a->kids[0];
          if (!(lab->kind == LgKind::Const && lab->c == LgC::Label) &&
              lab->kind != LgKind::Var)
            raise(Err::NotInImage, "edge label outside the image shape");
          return lg_app(e, lg_tuple({lab, B(a->kids[1], m)}));
        }
        if (f->kind == LgKind::Const && f->c == LgC::Union)
          return lg_app(ziplam(), B(a, m));
        if (f->kind == LgKind::Const && f->c == LgC::Fix) {
          if (a->kind != LgKind::Lam) raise(Err::NotInImage, "fix of a non-lambda");
          Blocks m2 = m;
          std::vector<std::string> flat;
          for (auto& x : a->binders) {
            auto blk = block(x);
            flat.insert(flat.end(), blk.begin(), blk.end());
            m2[x] = std::move(blk);
          }
          return lg_fix_of(lg_lam(std::move(flat), B(a->kids[0], m2)));
        }
        if (f->kind == LgKind::Lam) return lg_app(fn(f, m), B(a, m));
        raise(Err::NotInImage, "application outside the image grammar");
      }
      case LgKind::Lam:
        raise(Err::NotInImage, "stray lambda in the image");
    }
    raise(Err::Internal, "unreachable term kind");
  }
};

Lc SrecCtx::fn(const Lc& f, const Blocks&) {
  for (auto& bt : f->binder_types)
    if (bt.k != LgType::K::G) raise(Err::NotInImage, "non-graph binder in the image");
  Blocks m2;
  std::vector<std::string> flat;
  for (auto& z : f->binders) {
    auto blk = block(z);
    flat.insert(flat.end(), blk.begin(), blk.end());
    m2[z] = std::move(blk);
  }
  return lg_lam(std::move(flat), B(f->kids[0], m2));
}

}  // namespace

Lc lg_srec(const Lc& e, const Lc& t) {
  int k = validate_table(e);
  SrecCtx s;
  s.e = e;
  s.k = k;
  collect_names(e, s.used);
  collect_names(t, s.used);
  if (t->kind == LgKind::Lam) return s.fn(t, {});
  if (t->kind == LgKind::Const && t->c == LgC::Union) return s.ziplam();
  return s.B(t, {});
}

Lc lg_prec(const Lc& e, const Lc& t) {
  int slots = validate_table(e);
  if (slots < 2)
    raise(Err::NonCanonicalClauseTable,
          "a primitive table needs the recursion slots plus the argument slot");
  int k = slots - 1;
  Lc el = lg_elaborate(t);
  if (lg_type_of(el).k == LgType::K::Arrow)
    raise(Err::NotClosed, "primitive recursion needs a closed term");
  int m = lg_width(lg_type_of(el));

  std::set<std::string> used;
  collect_names(e, used);
  collect_names(t, used);
  std::string l = fresh_in(used, "l");
  std::vector<std::string> xs;
  for (int i = 1; i <= k + 1; ++i)
    xs.push_back(fresh_in(used, "x" + std::to_string(i)));
  std::vector<Lc> eargs{lg_var(l)};
  for (auto& x : xs) eargs.push_back(lg_var(x));
  Lc inner = lg_app(e, lg_tuple(std::move(eargs)));
  Lc recon = lg_cons(lg_var(l), lg_var(xs.back()));
  std::vector<std::string> ebinders{l};
  ebinders.insert(ebinders.end(), xs.begin(), xs.end());
  std::vector<LgType> btys{lg_l_t()};
  btys.resize(ebinders.size(), lg_g_t());
  Lc e2 = lg_lam(std::move(ebinders), lg_tuple({inner, recon}), std::move(btys));

  Lc srec_out = lg_srec(e2, t);
  if (m == 0) return srec_out;
  std::vector<std::string> us;
  for (int i = 1; i <= (k + 1) * m; ++i)
    us.push_back(fresh_in(used, "p" + std::to_string(i)));
  std::vector<Lc> picked;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < k; ++i) picked.push_back(lg_var(us[j * (k + 1) + i]));
  return lg_app(lg_lam(std::move(us), lg_tuple(std::move(picked))), srec_out);
}

Lc lg_table(const RecDef& def) {
  for (auto& c : def.clauses)
    if (c.pat == Clause::Pat::Nil)
      raise(Err::NonCanonicalClauseTable, "clause tables are label-indexed");
  const RecClause* var_clause = nullptr;
  std::set<std::string> concrete;
  for (auto& c : def.clauses) {
    if (c.pat == Clause::Pat::Var) {
      var_clause = &c;
    } else {
      concrete.insert(c.label);
    }
  }
  if (!var_clause)
    raise(Err::NonCanonicalClauseTable,
          def.name + " has no default clause to close the table");
  for (auto& ex : var_clause->excluded)
    if (!concrete.count(ex))
      raise(Err::NonCanonicalClauseTable,
            def.name + " excludes " + ex + " without a clause for it");

  std::set<std::string> used;
  std::string l = fresh_in(used, "l");
  const Ctx& slots = def.clauses.front().body->src;
  TrCtx tc;
  tc.lvar = l;
  tc.allow_calls = true;
  std::vector<std::string> binders{l};
  std::vector<LgType> btys{lg_l_t()};
  for (auto& m : slots) {
    binders.push_back(fresh_in(used, sanitize(m)));
    btys.push_back(lg_g_t());
    tc.vars[m] = binders.back();
  }

  Lc chain = tr_body(var_clause->body, tc, used);
  for (auto it = def.clauses.rbegin(); it != def.clauses.rend(); ++it) {
    if (it->pat != Clause::Pat::Label) continue;
    Lc branch = tr_body(it->body, tc, used);
    chain = lg_if(lg_eq_of(lg_var(l), lg_label(it->label)), std::move(branch),
                  std::move(chain));
  }
  return lg_lam(std::move(binders), std::move(chain), std::move(btys));
}

// ---------------------------------------------------------------------------
// Graph-level base functions

namespace {

Graph rooted_at(const Graph& g, VId v) {
  Graph s = g;
  s.in_markers = Ctx{"&"};
  s.roots = {v};
  return s;
}

Graph eval_bfun(const EvalEnv& env, const std::string& fname, const Graph& g0);

// Interprets a clause body over concrete graphs: calls are evaluated
// recursively and spliced back in through fresh source markers.
Graph body_graph(const EvalEnv& env, const Rc& body, const std::string& label,
                 const std::string& argvar, const std::optional<Graph>& argg) {
  std::vector<std::pair<std::string, Graph>> extra;
  std::function<Rc(const Rc&)> strip = [&](const Rc& t) -> Rc {
    if (t->kind == Kind::Call) {
      Graph ga = body_graph(env, t->kids[0], label, argvar, argg);
      Graph res = eval_bfun(env, t->name, ga);
      std::string m = "%c" + std::to_string(extra.size() + 1);
      extra.emplace_back(m, std::move(res));
      return mk_mark(m);
    }
    if (t->kind == Kind::Edge && t->label_var)
      return mk_edge(label, strip(t->kids[0]));
    switch (t->kind) {
      case Kind::Mark:
      case Kind::Nil:
      case Kind::Emp:
      case Kind::Man: return t;
      case Kind::Edge: return mk_edge(t->name, strip(t->kids[0]));
      case Kind::Compose: return mk_compose(strip(t->kids[0]), strip(t->kids[1]));
      case Kind::Pair: {
        std::vector<Rc> kids;
        for (auto& k : t->kids) kids.push_back(strip(k));
        return mk_pair(std::move(kids));
      }
      case Kind::Cycle: return mk_cycle(strip(t->kids[0]));
      case Kind::Def: return mk_def(t->name, strip(t->kids[0]));
      default: raise(Err::Internal, "unreachable term kind");
    }
  };
  Rc stripped = strip(body);
  Ctx ctx;
  if (!argvar.empty()) ctx.push_back(argvar);
  for (auto& [m, _] : extra) ctx.push_back(m);
  Graph gb = interpret(infer(stripped, ctx));
  if (ctx.empty()) return gb;
  std::optional<Graph> genv;
  auto add = [&](Graph g, const std::string& m) {
    g.in_markers = Ctx{m};
    genv = genv ? pair_graph(*genv, g) : std::move(g);
  };
  if (!argvar.empty()) add(*argg, argvar);
  for (auto& [m, g] : extra) add(g, m);
  return compose(gb, *genv);
}

Graph eval_bfun(const EvalEnv& env, const std::string& fname, const Graph& g0) {
  auto dit = env.bfuns.find(fname);
  if (dit == env.bfuns.end()) raise(Err::UnknownFunction, fname);
  const Definition& def = dit->second;
  Graph ge = eliminate_epsilon(g0);
  if (!ge.outputs.empty())
    raise(Err::MatchFailure, fname + " applied to an open graph");
  if (ge.roots.size() != 1)
    raise(Err::Internal, "base functions take single-rooted graphs");
  VId root = ge.roots[0];
  std::vector<std::pair<std::string, VId>> out;
  for (auto& [a, l, b] : ge.edges)
    if (a == root) out.emplace_back(l, b);

  if (out.empty()) {
    for (auto& c : def.clauses)
      if (c.pat == Clause::Pat::Nil)
        return body_graph(env, c.body, "", "", std::nullopt);
    raise(Err::MatchFailure, fname + " has no clause for {}");
  }
  const std::string& l = out[0].first;
  for (auto& [l2, _] : out)
    if (l2 != l) raise(Err::MatchFailure, fname + " applied to a union");
  Graph sub = rooted_at(ge, out[0].second);
  for (size_t i = 1; i < out.size(); ++i)
    if (!bisimilar(sub, rooted_at(ge, out[i].second)))
      raise(Err::MatchFailure, fname + " applied to a union");
  for (auto& c : def.clauses) {
    if (c.pat == Clause::Pat::Label && c.label == l)
      return body_graph(env, c.body, l, c.argvar, sub);
    if (c.pat == Clause::Pat::Var && !c.where_excluded.count(l))
      return body_graph(env, c.body, l, c.argvar, sub);
  }
  raise(Err::MatchFailure, fname + " has no clause for label " + l);
}

}  // namespace

LgPrims lg_prims(const EvalEnv& env) {
  auto shared = std::make_shared<EvalEnv>(env);
  LgPrims out;
  for (auto& [name, _] : env.bfuns)
    out[name] = [shared, name](const Graph& g) {
      return eval_bfun(*shared, name, g);
    };
  return out;
}

// ---------------------------------------------------------------------------
// Printer

namespace {

bool plain_ident(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha((unsigned char)s[0]) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum((unsigned char)c) && c != '_' && c != '?' && c != '\'' &&
        c != '$' && c != '-')
      return false;
  return true;
}

bool pi_shaped(const std::string& s) {
  if (s.size() < 3 || s.rfind("pi", 0) != 0) return false;
  return std::all_of(s.begin() + 2, s.end(),
                     [](char d) { return std::isdigit((unsigned char)d); });
}

std::string quote_label(const std::string& s) {
  if (plain_ident(s) && !pi_shaped(s) && s != "U" && s != "fix" && s != "if" &&
      s != "then" && s != "else" && s != "nil" && s != "true" && s != "false" &&
      s != "srec" && s != "prec")
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Precedence: 0 lambda/if, 1 ==, 2 U, 3 cons, 4 application, 5 atom.
void pp(const Lc& t, int prec, std::string& out);

void wrap(const Lc& t, int mine, int prec, std::string& out,
          const std::function<void()>& body) {
  (void)t;
  if (mine < prec) {
    out += "(";
    body();
    out += ")";
  } else {
    body();
  }
}

void pp(const Lc& t, int prec, std::string& out) {
  switch (t->kind) {
    case LgKind::Var:
      out += t->name;
      return;
    case LgKind::Const:
      switch (t->c) {
        case LgC::Unit: out += "()"; return;
        case LgC::Nil: out += "nil"; return;
        case LgC::True: out += "true"; return;
        case LgC::False: out += "false"; return;
        case LgC::Label: out += quote_label(t->name); return;
        case LgC::Union: out += "U"; return;
        case LgC::Cons: out += ":"; return;
        case LgC::Fix: out += "fix"; return;
        case LgC::If: out += "if"; return;
        case LgC::Eq: out += "=="; return;
        case LgC::Proj: out += "pi" + std::to_string(t->index); return;
        case LgC::Srec: out += "srec"; return;
        case LgC::Prec: out += "prec"; return;
        case LgC::Prim: out += t->name; return;
      }
      return;
    case LgKind::Tuple: {
      out += "(";
      for (size_t i = 0; i < t->kids.size(); ++i) {
        if (i) out += ", ";
        pp(t->kids[i], 0, out);
      }
      out += ")";
      return;
    }
    case LgKind::Lam:
      wrap(t, 0, prec, out, [&] {
        out += "\\";
        if (t->binders.size() == 1) {
          out += t->binders[0];
        } else {
          out += "(";
          for (size_t i = 0; i < t->binders.size(); ++i) {
            if (i) out += ", ";
            out += t->binders[i];
          }
          out += ")";
        }
        out += ". ";
        pp(t->kids[0], 0, out);
      });
      return;
    case LgKind::App: {
      const Lc& f = t->kids[0];
      const Lc& a = t->kids[1];
      if (f->kind == LgKind::Const && a->kind == LgKind::Tuple) {
        if (f->c == LgC::Cons && a->kids.size() == 2) {
          wrap(t, 3, prec, out, [&] {
            pp(a->kids[0], 5, out);
            out += ":";
            pp(a->kids[1], 3, out);
          });
          return;
        }
        if (f->c == LgC::Union && a->kids.size() == 2) {
          wrap(t, 2, prec, out, [&] {
            pp(a->kids[0], 4, out);
            out += " U ";
            pp(a->kids[1], 4, out);
          });
          return;
        }
        if (f->c == LgC::Eq && a->kids.size() == 2) {
          wrap(t, 1, prec, out, [&] {
            pp(a->kids[0], 2, out);
            out += " == ";
            pp(a->kids[1], 2, out);
          });
          return;
        }
        if (f->c == LgC::If && a->kids.size() == 3) {
          wrap(t, 0, prec, out, [&] {
            out += "if ";
            pp(a->kids[0], 1, out);
            out += " then ";
            pp(a->kids[1], 1, out);
            out += " else ";
            pp(a->kids[2], 0, out);
          });
          return;
        }
      }
      wrap(t, 4, prec, out, [&] {
        pp(f, 4, out);
        out += " ";
        pp(a, 5, out);
      });
      return;
    }
  }
}

}  // namespace

std::string print_lg(const Lc& t) {
  std::string out;
  pp(t, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct LgLexer {
  std::string src;
  size_t pos = 0;

  enum class T {
    End, Ident, Quoted, LParen, RParen, Comma, Dot, Colon, Lambda, EqEq,
    KwU, KwIf, KwThen, KwElse, KwFix, KwNil, KwTrue, KwFalse, KwSrec, KwPrec,
    Proj,
  };
  T kind = T::End;
  std::string text;
  int index = 0;

  explicit LgLexer(std::string s) : src(std::move(s)) { next(); }

  void next() {
    while (pos < src.size() && std::isspace((unsigned char)src[pos])) ++pos;
    text.clear();
    if (pos >= src.size()) {
      kind = T::End;
      return;
    }
    char c = src[pos];
    if (c == '(') { kind = T::LParen; ++pos; return; }
    if (c == ')') { kind = T::RParen; ++pos; return; }
    if (c == ',') { kind = T::Comma; ++pos; return; }
    if (c == '.') { kind = T::Dot; ++pos; return; }
    if (c == ':') { kind = T::Colon; ++pos; return; }
    if (c == '\\') { kind = T::Lambda; ++pos; return; }
    if (c == '=' && pos + 1 < src.size() && src[pos + 1] == '=') {
      kind = T::EqEq;
      pos += 2;
      return;
    }
    if (c == '"') {
      ++pos;
      while (pos < src.size() && src[pos] != '"') {
        if (src[pos] == '\\' && pos + 1 < src.size()) ++pos;
        text += src[pos++];
      }
      if (pos >= src.size()) raise(Err::SyntaxError, "unterminated label");
      ++pos;
      kind = T::Quoted;
      return;
    }
    if (std::isalpha((unsigned char)c) || c == '_') {
      while (pos < src.size() &&
             (std::isalnum((unsigned char)src[pos]) || src[pos] == '_' ||
              src[pos] == '?' || src[pos] == '\'' || src[pos] == '$' ||
              src[pos] == '-'))
        text += src[pos++];
      if (text == "U") kind = T::KwU;
      else if (text == "if") kind = T::KwIf;
      else if (text == "then") kind = T::KwThen;
      else if (text == "else") kind = T::KwElse;
      else if (text == "fix") kind = T::KwFix;
      else if (text == "nil") kind = T::KwNil;
      else if (text == "true") kind = T::KwTrue;
      else if (text == "false") kind = T::KwFalse;
      else if (text == "srec") kind = T::KwSrec;
      else if (text == "prec") kind = T::KwPrec;
      else if (text.size() > 2 && text.rfind("pi", 0) == 0 &&
               std::all_of(text.begin() + 2, text.end(),
                           [](char d) { return std::isdigit((unsigned char)d); })) {
        kind = T::Proj;
        index = std::stoi(text.substr(2));
      } else kind = T::Ident;
      return;
    }
    raise(Err::SyntaxError, std::string("unexpected character '") + c + "'");
  }

  bool at(T t) const { return kind == t; }
  void expect(T t, const char* what) {
    if (kind != t) raise(Err::SyntaxError, std::string("expected ") + what);
    next();
  }
};

struct LgParser {
  LgLexer lx;
  std::set<std::string> bound;

  explicit LgParser(std::string s) : lx(std::move(s)) {}

  bool starts_atom() const {
    using T = LgLexer::T;
    switch (lx.kind) {
      case T::LParen:
      case T::Ident:
      case T::Quoted:
      case T::KwFix:
      case T::KwNil:
      case T::KwTrue:
      case T::KwFalse:
      case T::KwSrec:
      case T::KwPrec:
      case T::Proj:
        return true;
      default:
        return false;
    }
  }

  Lc atom() {
    using T = LgLexer::T;
    switch (lx.kind) {
      case T::LParen: {
        lx.next();
        if (lx.at(T::RParen)) {
          lx.next();
          return lg_const(LgC::Unit);
        }
        std::vector<Lc> comps{term()};
        while (lx.at(T::Comma)) {
          lx.next();
          comps.push_back(term());
        }
        lx.expect(T::RParen, ")");
        return comps.size() == 1 ? comps[0] : lg_tuple(std::move(comps));
      }
      case T::Ident: {
        std::string n = lx.text;
        lx.next();
        return bound.count(n) ? lg_var(n) : lg_label(n);
      }
      case T::Quoted: {
        std::string n = lx.text;
        lx.next();
        return lg_label(n);
      }
      case T::KwFix: lx.next(); return lg_const(LgC::Fix);
      case T::KwNil: lx.next(); return lg_const(LgC::Nil);
      case T::KwTrue: lx.next(); return lg_const(LgC::True);
      case T::KwFalse: lx.next(); return lg_const(LgC::False);
      case T::KwSrec: lx.next(); return lg_const(LgC::Srec);
      case T::KwPrec: lx.next(); return lg_const(LgC::Prec);
      case T::Proj: {
        int i = lx.index;
        lx.next();
        return lg_proj(i);
      }
      default:
        raise(Err::SyntaxError, "expected a term");
    }
  }

  Lc app() {
    Lc f = atom();
    while (starts_atom()) {
      // A label is never a function; an applied bare name can only mean a
      // base-function constant, so tables reparse to themselves.
      if (f->kind == LgKind::Const && f->c == LgC::Label) f = lg_prim(f->name);
      f = lg_app(std::move(f), atom());
    }
    return f;
  }

  Lc cons() {
    Lc l = app();
    if (!lx.at(LgLexer::T::Colon)) return l;
    lx.next();
    bool label_ok = l->kind == LgKind::Var ||
                    (l->kind == LgKind::Const && l->c == LgC::Label);
    if (!label_ok) raise(Err::SyntaxError, "edge labels are names");
    return lg_cons(std::move(l), cons());
  }

  Lc union_() {
    Lc l = cons();
    while (lx.at(LgLexer::T::KwU)) {
      lx.next();
      l = lg_union_of(std::move(l), cons());
    }
    return l;
  }

  Lc eq() {
    Lc l = union_();
    if (!lx.at(LgLexer::T::EqEq)) return l;
    lx.next();
    return lg_eq_of(std::move(l), union_());
  }

  Lc term() {
    using T = LgLexer::T;
    if (lx.at(T::Lambda)) {
      lx.next();
      std::vector<std::string> bs;
      if (lx.at(T::LParen)) {
        lx.next();
        for (;;) {
          if (!lx.at(T::Ident)) raise(Err::SyntaxError, "expected a binder");
          bs.push_back(lx.text);
          lx.next();
          if (lx.at(T::Comma)) {
            lx.next();
            continue;
          }
          break;
        }
        lx.expect(T::RParen, ")");
      } else {
        if (!lx.at(T::Ident)) raise(Err::SyntaxError, "expected a binder");
        bs.push_back(lx.text);
        lx.next();
      }
      lx.expect(T::Dot, ".");
      std::vector<std::string> added;
      for (auto& b : bs)
        if (bound.insert(b).second) added.push_back(b);
      Lc body = term();
      for (auto& b : added) bound.erase(b);
      return lg_lam(std::move(bs), std::move(body));
    }
    if (lx.at(T::KwIf)) {
      lx.next();
      Lc c = term();
      lx.expect(T::KwThen, "then");
      Lc a = term();
      lx.expect(T::KwElse, "else");
      Lc b = term();
      return lg_if(std::move(c), std::move(a), std::move(b));
    }
    return eq();
  }
};

}  // namespace

Lc parse_lg(const std::string& text) {
  LgParser p(text);
  Lc t = p.term();
  if (!p.lx.at(LgLexer::T::End)) raise(Err::SyntaxError, "trailing input");
  return t;
}

}  // namespace uncal
