#include "uncal/rewrite.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace uncal {

namespace {

Tc node(Kind k, std::string name, bool lv, std::vector<Tc> kids, Ctx src, Ctx tgt) {
  return std::make_shared<TTerm>(
      TTerm{k, std::move(name), lv, std::move(kids), std::move(src), std::move(tgt)});
}

Tc tuple_of(const Ctx& src, const std::vector<Tc>& comps);

Tc with_kid(const Tc& t, size_t i, Tc nk) {
  std::vector<Tc> kids = t->kids;
  kids[i] = std::move(nk);
  // a component that reduced to a tuple (or a unit) re-enters the flat form,
  // otherwise compositions against the pair never see single-root components
  if (t->kind == Kind::Pair) return tuple_of(t->src, kids);
  return node(t->kind, t->name, t->label_var, std::move(kids), t->src, t->tgt);
}

Tc compose_t(const Tc& l, const Tc& r) {
  if (l->src != r->tgt) raise(Err::Internal, "rewrite built a mismatched composition");
  return node(Kind::Compose, "", false, {l, r}, r->src, l->tgt);
}

// cycle binding the trailing |tgt| coordinates of the body's source
Tc cycle_peel(const Tc& body) {
  size_t nb = body->tgt.size();
  if (body->src.size() < nb ||
      !std::equal(body->tgt.begin(), body->tgt.end(), body->src.end() - nb))
    raise(Err::Internal, "rewrite built a cycle whose bound context is not a source suffix");
  Ctx src(body->src.begin(), body->src.end() - nb);
  return node(Kind::Cycle, "", false, {body}, std::move(src), body->tgt);
}

// tuple with the flattening conventions: splice pair components, drop units
Tc tuple_of(const Ctx& src, const std::vector<Tc>& comps) {
  std::vector<Tc> kids;
  for (auto& c : comps) {
    if (c->kind == Kind::Emp) continue;
    if (c->kind == Kind::Pair)
      kids.insert(kids.end(), c->kids.begin(), c->kids.end());
    else
      kids.push_back(c);
  }
  if (kids.empty()) return node(Kind::Emp, "", false, {}, src, {});
  if (kids.size() == 1) return kids[0];
  Ctx tgt;
  for (auto& k : kids) tgt.insert(tgt.end(), k->tgt.begin(), k->tgt.end());
  check_ctx(tgt);
  return node(Kind::Pair, "", false, std::move(kids), src, std::move(tgt));
}

std::optional<Tc> try_redex(const Tc& t) {
  if (t->kind == Kind::Compose) {
    const Tc& l = t->kids[0];
    const Tc& r = t->kids[1];
    // a spread applied to a pair is a value, not a redex
    if (l->kind == Kind::Man && r->kind == Kind::Pair) return std::nullopt;
    if (r->kind == Kind::Emp) return weaken(l, r->src);
    if (r->kind == Kind::Pair) {
      SubstMap sub;
      for (auto& k : r->kids) {
        if (k->tgt.size() != 1) return std::nullopt;  // component not yet a single root
        sub.emplace(k->tgt[0], k);
      }
      return substitute(l, sub);
    }
    if (r->tgt.size() == 1) return substitute(l, SubstMap{{r->tgt[0], r}});
    return std::nullopt;
  }
  if (t->kind == Kind::Cycle && t->tgt.size() >= 2) {
    const Tc& body = t->kids[0];
    if (body->kind != Kind::Pair) return std::nullopt;
    const Tc& s = body->kids.back();
    if (s->tgt.size() != 1) return std::nullopt;  // peel exactly one coordinate
    // cycle over (t (+) s) binding X+Y unrolls to
    //   (proj, cycle(s)) @ (Id, cycle(t @ (Id, cycle(s))))
    std::vector<Tc> xs(body->kids.begin(), body->kids.end() - 1);
    Tc tX = tuple_of(body->src, xs);
    const Ctx& Z = t->src;
    Ctx ZX = ctx_concat(Z, tX->tgt);
    Tc cys = cycle_peel(s);                                      // ZX |- : Y
    Tc comp1 = compose_t(tX, tuple_of(ZX, {identity_term(ZX), cys}));
    Tc cyt = cycle_peel(comp1);                                  // Z |- : X
    Tc p2 = tuple_of(Z, {identity_term(Z), cyt});                // Z |- : Z+X
    Tc p3 = tuple_of(ZX, {proj(ZX, tX->tgt), cys});              // ZX |- : X+Y
    return compose_t(p3, p2);
  }
  return std::nullopt;
}

std::optional<Tc> step_in(const Tc& t, bool left) {
  size_t n = t->kids.size();
  for (size_t j = 0; j < n; ++j) {
    size_t i = left ? j : n - 1 - j;
    if (auto r = step_in(t->kids[i], left)) return with_kid(t, i, std::move(*r));
  }
  return try_redex(t);
}

}  // namespace

std::optional<Tc> step(const Tc& t, Strategy strategy) {
  return step_in(t, strategy == Strategy::LeftInner);
}

Tc normalize(const Tc& t, Strategy strategy, long fuel) {
  Tc cur = t;
  for (long i = 0;; ++i) {
    auto nx = step(cur, strategy);
    if (!nx) break;
    if (i >= fuel)
      raise(Err::FuelExhausted,
            "rewriting did not settle within the fuel bound; the system is "
            "terminating, so this is a rewriter bug");
    cur = std::move(*nx);
  }
  if (!is_value_m(cur)) raise(Err::Internal, "normal form escaped the value grammar");
  return cur;
}

bool is_value_m(const Tc& t) {
  switch (t->kind) {
    case Kind::Mark:
    case Kind::Nil:
    case Kind::Emp:
    case Kind::Man: return true;
    case Kind::Edge:
    case Kind::Def: return is_value_m(t->kids[0]);
    case Kind::Cycle: return t->tgt.size() == 1 && is_value_m(t->kids[0]);
    case Kind::Pair:
      for (auto& k : t->kids)
        if (!is_value_m(k)) return false;
      return true;
    case Kind::Compose:
      return t->kids[0]->kind == Kind::Man && t->kids[1]->kind == Kind::Pair &&
             is_value_m(t->kids[1]);
    case Kind::Call: return false;
  }
  return false;
}

namespace {

const Tc& strip_defs(const Tc& t) {
  const Tc* p = &t;
  while ((*p)->kind == Kind::Def) p = &(*p)->kids[0];
  return *p;
}

bool n_check(const Tc& t0) {
  const Tc& t = strip_defs(t0);
  switch (t->kind) {
    case Kind::Mark:
    case Kind::Nil: return true;
    case Kind::Edge: return n_check(t->kids[0]);
    case Kind::Cycle: return t->tgt.size() == 1 && n_check(t->kids[0]);
    case Kind::Compose: {
      const Tc& l = strip_defs(t->kids[0]);
      const Tc& r = t->kids[1];
      return l->kind == Kind::Man && r->kind == Kind::Pair && r->kids.size() == 2 &&
             n_check(r->kids[0]) && n_check(r->kids[1]);
    }
    default: return false;  // a sole !, tuples, () and calls are outside N
  }
}

}  // namespace

bool is_value_n(const Tc& t) { return t->tgt == Ctx{"&"} && n_check(t); }

namespace {

Tc ex_man(const Tc& t) {
  switch (t->kind) {
    case Kind::Mark:
    case Kind::Nil: return t;
    case Kind::Man: return compose_t(t, identity_term(t->src));
    case Kind::Edge:
    case Kind::Def:
    case Kind::Cycle: return with_kid(t, 0, ex_man(t->kids[0]));
    case Kind::Pair: {
      Tc out = t;
      for (size_t i = 0; i < t->kids.size(); ++i) out = with_kid(out, i, ex_man(out->kids[i]));
      return out;
    }
    case Kind::Compose:
      if (t->kids[0]->kind == Kind::Man) return with_kid(t, 1, ex_man(t->kids[1]));
      raise(Err::NotInN, "composition other than ! @ (s, t) is not a single-rooted value");
    default: raise(Err::NotInN, "term is outside the single-rooted value grammar");
  }
}

}  // namespace

Tc eta_man_expand(const Tc& t) {
  if (t->tgt != Ctx{"&"})
    raise(Err::TypeNotSingleton, "eta-expansion applies to single-marker targets only");
  return ex_man(t);
}

Mc mu_var(const std::string& x) { return std::make_shared<MuTerm>(MuTerm{MuKind::Var, x, {}}); }
Mc mu_app(const std::string& label, Mc t) {
  return std::make_shared<MuTerm>(MuTerm{MuKind::App, label, {std::move(t)}});
}
Mc mu_mu(const std::string& x, Mc t) {
  return std::make_shared<MuTerm>(MuTerm{MuKind::Mu, x, {std::move(t)}});
}
Mc mu_zero() { return std::make_shared<MuTerm>(MuTerm{MuKind::Zero, "", {}}); }
Mc mu_plus(Mc s, Mc t) {
  return std::make_shared<MuTerm>(MuTerm{MuKind::Plus, "", {std::move(s), std::move(t)}});
}

bool mu_eq(const Mc& a, const Mc& b) {
  if (a->kind != b->kind || a->name != b->name || a->kids.size() != b->kids.size())
    return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!mu_eq(a->kids[i], b->kids[i])) return false;
  return true;
}

Mc to_mu(const Tc& n0) {
  const Tc& t = strip_defs(n0);
  switch (t->kind) {
    case Kind::Mark: return mu_var(t->name);
    case Kind::Nil: return mu_zero();
    case Kind::Edge:
      if (t->label_var) raise(Err::NotInN, "label variables have no regular-term image");
      return mu_app(t->name, to_mu(t->kids[0]));
    case Kind::Cycle:
      if (t->tgt.size() != 1) raise(Err::NotInN, "only single-marker cycles are normal");
      return mu_mu(t->tgt[0], to_mu(t->kids[0]));
    case Kind::Compose: {
      const Tc& l = strip_defs(t->kids[0]);
      const Tc& r = t->kids[1];
      if (l->kind != Kind::Man || r->kind != Kind::Pair || r->kids.size() != 2)
        raise(Err::NotInN, "composition must be ! applied to a pair");
      return mu_plus(to_mu(r->kids[0]), to_mu(r->kids[1]));
    }
    case Kind::Man: raise(Err::NotInN, "a sole ! must be eta-expanded first");
    default: raise(Err::NotInN, "term is outside the normal-form grammar");
  }
}

namespace {

void mu_free(const Mc& m, std::set<std::string> bound, std::set<std::string>& out) {
  switch (m->kind) {
    case MuKind::Var:
      if (!bound.count(m->name)) out.insert(m->name);
      return;
    case MuKind::Mu: bound.insert(m->name); [[fallthrough]];
    default:
      for (auto& k : m->kids) mu_free(k, bound, out);
  }
}

Tc mu_go(const Mc& m, const Ctx& y, std::map<std::string, std::string>& ren) {
  switch (m->kind) {
    case MuKind::Var: {
      auto it = ren.find(m->name);
      return t_mark(y, it != ren.end() ? it->second : m->name);
    }
    case MuKind::Zero: return node(Kind::Nil, "", false, {}, y, {"&"});
    case MuKind::App:
      return node(Kind::Edge, m->name, false, {mu_go(m->kids[0], y, ren)}, y, {"&"});
    case MuKind::Plus:
      return union_term(mu_go(m->kids[0], y, ren), mu_go(m->kids[1], y, ren));
    case MuKind::Mu: {
      std::string x = m->name;
      while (std::find(y.begin(), y.end(), x) != y.end()) x += "'";
      auto old = ren.find(m->name);
      std::optional<std::string> saved;
      if (old != ren.end()) saved = old->second;
      ren[m->name] = x;
      Ctx y2 = y;
      y2.push_back(x);
      Tc body = mu_go(m->kids[0], y2, ren);
      if (saved) ren[m->name] = *saved;
      else ren.erase(m->name);
      Tc cyc = cycle_peel(rename_target(body, Ctx{x}));
      return rename_target(cyc, Ctx{"&"});
    }
  }
  raise(Err::Internal, "mu embedding: unhandled kind");
}

}  // namespace

Tc mu_to_term(const Mc& m, const Ctx& src) {
  std::set<std::string> free;
  mu_free(m, {}, free);
  Ctx y = src;
  for (auto& v : free)
    if (std::find(y.begin(), y.end(), v) == y.end()) y.push_back(v);
  check_ctx(y);
  std::map<std::string, std::string> ren;
  return mu_go(m, y, ren);
}

namespace {

bool plain_mu_name(const std::string& s) {
  if (s.empty() || s == "mu" || s == "0") return false;
  for (char c : s)
    if (!std::isalnum((unsigned char)c) && c != '_' && c != '&' && c != '$' &&
        c != '\'' && c != '/' && c != '-')
      return false;
  return true;
}

void pr_mu(const Mc& m, int minp, std::ostream& os) {
  switch (m->kind) {
    case MuKind::Var: os << m->name; return;
    case MuKind::Zero: os << "0"; return;
    case MuKind::App:
      if (plain_mu_name(m->name)) os << m->name;
      else os << '"' << m->name << '"';
      os << "(";
      pr_mu(m->kids[0], 0, os);
      os << ")";
      return;
    case MuKind::Plus:
      if (minp > 1) os << "(";
      pr_mu(m->kids[0], 1, os);
      os << " + ";
      pr_mu(m->kids[1], 2, os);
      if (minp > 1) os << ")";
      return;
    case MuKind::Mu:
      if (minp > 0) os << "(";
      os << "mu " << m->name << ". ";
      pr_mu(m->kids[0], 0, os);
      if (minp > 0) os << ")";
      return;
  }
}

struct MuParser {
  enum class Tok { Ident, Str, LP, RP, Dot, Plus, End };
  std::string text;
  size_t pos = 0;
  Tok tok = Tok::End;
  std::string tok_text;

  explicit MuParser(std::string s) : text(std::move(s)) { next(); }

  [[noreturn]] void fail(const std::string& msg) {
    raise(Err::SyntaxError, msg + " at offset " + std::to_string(pos));
  }

  static bool ident_char(char c) {
    return std::isalnum((unsigned char)c) || c == '_' || c == '&' || c == '$' ||
           c == '\'' || c == '/' || c == '-';
  }

  void next() {
    while (pos < text.size() && std::isspace((unsigned char)text[pos])) ++pos;
    if (pos >= text.size()) {
      tok = Tok::End;
      return;
    }
    char c = text[pos];
    if (c == '(') { ++pos; tok = Tok::LP; return; }
    if (c == ')') { ++pos; tok = Tok::RP; return; }
    if (c == '.') { ++pos; tok = Tok::Dot; return; }
    if (c == '+') { ++pos; tok = Tok::Plus; return; }
    if (c == '"') {
      size_t end = text.find('"', pos + 1);
      if (end == std::string::npos) fail("unterminated string");
      tok_text = text.substr(pos + 1, end - pos - 1);
      pos = end + 1;
      tok = Tok::Str;
      return;
    }
    if (ident_char(c)) {
      size_t start = pos;
      while (pos < text.size() && ident_char(text[pos])) ++pos;
      tok_text = text.substr(start, pos - start);
      tok = Tok::Ident;
      return;
    }
    fail("unexpected character");
  }

  void expect(Tok t, const char* what) {
    if (tok != t) fail(std::string("expected ") + what);
    next();
  }

  Mc term() {
    if (tok == Tok::Ident && tok_text == "mu") {
      next();
      if (tok != Tok::Ident || tok_text == "mu" || tok_text == "0")
        fail("expected a binder name after mu");
      std::string x = tok_text;
      next();
      expect(Tok::Dot, "'.' after the binder");
      return mu_mu(x, term());
    }
    return plus();
  }

  Mc plus() {
    Mc l = atom();
    while (tok == Tok::Plus) {
      next();
      l = mu_plus(std::move(l), atom());
    }
    return l;
  }

  Mc atom() {
    if (tok == Tok::LP) {
      next();
      Mc t = term();
      expect(Tok::RP, "')'");
      return t;
    }
    if (tok == Tok::Str) {
      std::string label = tok_text;
      next();
      expect(Tok::LP, "'(' after a label");
      Mc arg = term();
      expect(Tok::RP, "')'");
      return mu_app(label, std::move(arg));
    }
    if (tok == Tok::Ident) {
      std::string name = tok_text;
      if (name == "mu") fail("mu must start a term or be parenthesized");
      next();
      if (name == "0") return mu_zero();
      if (tok == Tok::LP) {
        next();
        Mc arg = term();
        expect(Tok::RP, "')'");
        return mu_app(name, std::move(arg));
      }
      return mu_var(name);
    }
    fail("expected a term");
  }
};

}  // namespace

std::string print_mu(const Mc& m) {
  std::ostringstream os;
  pr_mu(m, 0, os);
  return os.str();
}

Mc parse_mu(const std::string& text) {
  MuParser p(text);
  Mc m = p.term();
  if (p.tok != MuParser::Tok::End) p.fail("trailing input");
  return m;
}

}  // namespace uncal
