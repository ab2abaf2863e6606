#include "uncal/syntax.hpp"

#include <cctype>
#include <sstream>

namespace uncal {

const char* err_name(Err e) {
  switch (e) {
    case Err::SyntaxError: return "SyntaxError";
    case Err::DuplicateClause: return "DuplicateClause";
    case Err::OverlappingPatterns: return "OverlappingPatterns";
    case Err::UnboundMarker: return "UnboundMarker";
    case Err::DuplicateMarker: return "DuplicateMarker";
    case Err::ContextMismatch: return "ContextMismatch";
    case Err::ArityError: return "ArityError";
    case Err::UnknownFunction: return "UnknownFunction";
    case Err::DomainMismatch: return "DomainMismatch";
    case Err::LengthMismatch: return "LengthMismatch";
    case Err::MarkerMismatch: return "MarkerMismatch";
    case Err::ContextSplitError: return "ContextSplitError";
    case Err::InterfaceMismatch: return "InterfaceMismatch";
    case Err::NotClosed: return "NotClosed";
    case Err::FuelExhausted: return "FuelExhausted";
    case Err::TypeNotSingleton: return "TypeNotSingleton";
    case Err::NotInN: return "NotInN";
    case Err::SlotJudgmentMismatch: return "SlotJudgmentMismatch";
    case Err::Unsatisfiable: return "Unsatisfiable";
    case Err::DependsOnArgument: return "DependsOnArgument";
    case Err::InconsistentK: return "InconsistentK";
    case Err::ModeMismatch: return "ModeMismatch";
    case Err::MatchFailure: return "MatchFailure";
    case Err::HypothesisFailed: return "HypothesisFailed";
    case Err::NotInImage: return "NotInImage";
    case Err::TypeError: return "TypeError";
    case Err::StuckConditional: return "StuckConditional";
    case Err::NonCanonicalClauseTable: return "NonCanonicalClauseTable";
    case Err::Internal: return "Internal";
  }
  return "Error";
}

Rc mk_mark(std::string name) {
  return std::make_shared<Term>(Term{Kind::Mark, std::move(name), false, {}});
}
Rc mk_edge(std::string label, Rc child, bool label_var) {
  return std::make_shared<Term>(Term{Kind::Edge, std::move(label), label_var, {std::move(child)}});
}
Rc mk_compose(Rc lhs, Rc rhs) {
  return std::make_shared<Term>(Term{Kind::Compose, "", false, {std::move(lhs), std::move(rhs)}});
}
Rc mk_pair(std::vector<Rc> kids) {
  std::vector<Rc> flat;
  for (auto& k : kids) {
    if (k->kind == Kind::Emp) continue;  // <t,()> = <(),t> = t
    if (k->kind == Kind::Pair) {
      for (auto& g : k->kids) flat.push_back(g);
    } else {
      flat.push_back(std::move(k));
    }
  }
  if (flat.empty()) return mk_emp();
  if (flat.size() == 1) return flat[0];
  return std::make_shared<Term>(Term{Kind::Pair, "", false, std::move(flat)});
}
Rc mk_cycle(Rc body) {
  return std::make_shared<Term>(Term{Kind::Cycle, "", false, {std::move(body)}});
}
Rc mk_nil() { return std::make_shared<Term>(Term{Kind::Nil, "", false, {}}); }
Rc mk_emp() { return std::make_shared<Term>(Term{Kind::Emp, "", false, {}}); }
Rc mk_man() { return std::make_shared<Term>(Term{Kind::Man, "", false, {}}); }
Rc mk_def(std::string marker, Rc child) {
  return std::make_shared<Term>(Term{Kind::Def, std::move(marker), false, {std::move(child)}});
}
Rc mk_call(std::string fname, Rc arg) {
  return std::make_shared<Term>(Term{Kind::Call, std::move(fname), false, {std::move(arg)}});
}
Rc mk_union(Rc lhs, Rc rhs) {
  std::vector<Rc> kids;
  kids.push_back(std::move(lhs));
  kids.push_back(std::move(rhs));
  return mk_compose(mk_man(), std::make_shared<Term>(Term{Kind::Pair, "", false, std::move(kids)}));
}

bool term_eq(const Rc& a, const Rc& b) {
  if (a.get() == b.get()) return true;
  if (a->kind != b->kind || a->name != b->name || a->label_var != b->label_var ||
      a->kids.size() != b->kids.size())
    return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!term_eq(a->kids[i], b->kids[i])) return false;
  return true;
}

const Definition* Program::find(const std::string& name) const {
  for (auto& d : defs)
    if (d.name == name) return &d;
  return nullptr;
}

namespace {

enum class Tok {
  LParen, RParen, LBrace, RBrace, Comma, OPlus, At, Union, Bang,
  Colon, ColonEq, Eq, SlashEq, Marker, Ident, String,
  KwCycle, KwSfun, KwBfun, KwMain, KwWhere, End
};

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

bool ident_start(char c) { return std::isalnum((unsigned char)c) || c == '_'; }
bool ident_cont(char c) {
  return std::isalnum((unsigned char)c) || c == '_' || c == '\'' || c == '?';
}

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit Lexer(const std::string& s) : src(s) {}

  [[noreturn]] void fail(const std::string& msg) const {
    raise(Err::SyntaxError, msg + " at line " + std::to_string(line) + ", column " +
                                std::to_string(col));
  }

  char peek(size_t ahead = 0) const {
    return pos + ahead < src.size() ? src[pos + ahead] : '\0';
  }
  char take() {
    char c = src[pos++];
    if (c == '\n') { line++; col = 1; } else { col++; }
    return c;
  }

  void skip_ws() {
    for (;;) {
      while (pos < src.size() && std::isspace((unsigned char)peek())) take();
      if (peek() == '-' && peek(1) == '-') {
        while (pos < src.size() && peek() != '\n') take();
        continue;
      }
      break;
    }
  }

  std::string lex_ident() {
    std::string s;
    s += take();
    for (;;) {
      char c = peek();
      if (ident_cont(c)) { s += take(); continue; }
      // a single dash stays inside an identifier (head-a?); "--" opens a comment
      if (c == '-' && ident_start(peek(1))) { s += take(); continue; }
      break;
    }
    return s;
  }

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      int l = line, c = col;
      if (pos >= src.size()) { out.push_back({Tok::End, "", l, c}); return out; }
      char ch = peek();
      if (ch == '(') {
        if (peek(1) == '+' && peek(2) == ')') {
          take(); take(); take();
          out.push_back({Tok::OPlus, "(+)", l, c});
        } else {
          take();
          out.push_back({Tok::LParen, "(", l, c});
        }
      } else if (ch == ')') { take(); out.push_back({Tok::RParen, ")", l, c}); }
      else if (ch == '{') { take(); out.push_back({Tok::LBrace, "{", l, c}); }
      else if (ch == '}') { take(); out.push_back({Tok::RBrace, "}", l, c}); }
      else if (ch == ',') { take(); out.push_back({Tok::Comma, ",", l, c}); }
      else if (ch == '@') { take(); out.push_back({Tok::At, "@", l, c}); }
      else if (ch == '!') { take(); out.push_back({Tok::Bang, "!", l, c}); }
      else if (ch == '=') { take(); out.push_back({Tok::Eq, "=", l, c}); }
      else if (ch == '/') {
        take();
        if (peek() != '=') fail("expected '=' after '/'");
        take();
        out.push_back({Tok::SlashEq, "/=", l, c});
      } else if (ch == ':') {
        take();
        if (peek() == '=') { take(); out.push_back({Tok::ColonEq, ":=", l, c}); }
        else out.push_back({Tok::Colon, ":", l, c});
      } else if (ch == '&') {
        take();
        std::string name = "&";
        if (ident_start(peek())) name = lex_ident();
        out.push_back({Tok::Marker, name, l, c});
      } else if (ch == '"') {
        take();
        std::string s;
        while (pos < src.size() && peek() != '"' && peek() != '\n') s += take();
        if (peek() != '"') fail("unterminated string");
        take();
        out.push_back({Tok::String, s, l, c});
      } else if (ident_start(ch)) {
        std::string s = lex_ident();
        if (s == "U") out.push_back({Tok::Union, s, l, c});
        else if (s == "cycle") out.push_back({Tok::KwCycle, s, l, c});
        else if (s == "sfun") out.push_back({Tok::KwSfun, s, l, c});
        else if (s == "bfun") out.push_back({Tok::KwBfun, s, l, c});
        else if (s == "main") out.push_back({Tok::KwMain, s, l, c});
        else if (s == "where") out.push_back({Tok::KwWhere, s, l, c});
        else out.push_back({Tok::Ident, s, l, c});
      } else {
        fail(std::string("unexpected character '") + ch + "'");
      }
    }
  }
};

struct Parser {
  std::vector<Token> toks;
  size_t at = 0;

  const Token& cur() const { return toks[at]; }
  const Token& ahead(size_t n = 1) const { return toks[std::min(at + n, toks.size() - 1)]; }
  Token take() { return toks[at++]; }

  [[noreturn]] void fail(const std::string& msg) const {
    raise(Err::SyntaxError, msg + " at line " + std::to_string(cur().line) + ", column " +
                                std::to_string(cur().col));
  }

  Token expect(Tok k, const std::string& what) {
    if (cur().kind != k) fail("expected " + what);
    return take();
  }

  Rc term() {
    Rc t = union_();
    while (cur().kind == Tok::At) {
      take();
      t = mk_compose(std::move(t), union_());
    }
    return t;
  }

  // right-nested, matching the {t1,...,tn} sugar
  Rc union_() {
    Rc t = atom();
    if (cur().kind != Tok::Union) return t;
    take();
    return mk_union(std::move(t), union_());
  }

  Rc atom() {
    switch (cur().kind) {
      case Tok::Marker: {
        Token m = take();
        if (cur().kind == Tok::ColonEq) { take(); return mk_def(m.text, atom()); }
        return mk_mark(m.text);
      }
      case Tok::Bang: take(); return mk_man();
      case Tok::KwCycle: {
        take();
        expect(Tok::LParen, "'(' after cycle");
        Rc b = term();
        expect(Tok::RParen, "')'");
        return mk_cycle(std::move(b));
      }
      case Tok::LBrace: {
        take();
        if (cur().kind == Tok::RBrace) { take(); return mk_nil(); }
        std::vector<Rc> elems;
        elems.push_back(term());
        while (cur().kind == Tok::Comma) { take(); elems.push_back(term()); }
        expect(Tok::RBrace, "'}'");
        Rc t = elems.back();
        for (size_t i = elems.size() - 1; i-- > 0;) t = mk_union(elems[i], std::move(t));
        return t;
      }
      case Tok::LParen: {
        take();
        if (cur().kind == Tok::RParen) { take(); return mk_emp(); }
        std::vector<Rc> elems;
        elems.push_back(term());
        bool is_pair = false;
        while (cur().kind == Tok::Comma || cur().kind == Tok::OPlus) {
          take();
          is_pair = true;
          elems.push_back(term());
        }
        expect(Tok::RParen, "')'");
        if (!is_pair) return elems[0];
        return mk_pair(std::move(elems));
      }
      case Tok::String: {
        Token s = take();
        if (cur().kind == Tok::Colon) { take(); return mk_edge(s.text, atom()); }
        return mk_edge(s.text, mk_nil());  // atomic data: label with nil child
      }
      case Tok::Ident: {
        Token id = take();
        if (cur().kind == Tok::LParen) {
          take();
          Rc a = term();
          expect(Tok::RParen, "')'");
          return mk_call(id.text, std::move(a));
        }
        if (cur().kind == Tok::Colon) { take(); return mk_edge(id.text, atom()); }
        if (cur().kind == Tok::ColonEq) { take(); return mk_def(id.text, atom()); }
        return mk_mark(id.text);  // bare identifier marker
      }
      default: fail("expected a term");
    }
  }

  Clause clause() {
    std::string fname = expect(Tok::Ident, "function name").text;
    expect(Tok::LParen, "'('");
    Clause cl;
    if (cur().kind == Tok::LBrace) {
      take();
      expect(Tok::RBrace, "'}'");
      cl.pat = Clause::Pat::Nil;
    } else if (cur().kind == Tok::String) {
      cl.pat = Clause::Pat::Label;
      cl.label = take().text;
      expect(Tok::Colon, "':'");
      cl.argvar = expect(Tok::Ident, "argument variable").text;
    } else {
      Token head = expect(Tok::Ident, "pattern");
      // uppercase-initial identifier = label variable (the paper's l / L convention)
      cl.pat = std::isupper((unsigned char)head.text[0]) ? Clause::Pat::Var : Clause::Pat::Label;
      cl.label = head.text;
      expect(Tok::Colon, "':'");
      cl.argvar = expect(Tok::Ident, "argument variable").text;
    }
    expect(Tok::RParen, "')'");
    expect(Tok::Eq, "'='");
    cl.body = term();
    (void)fname;
    if (cur().kind == Tok::KwWhere) {
      take();
      for (;;) {
        if (cur().kind == Tok::Ident && ahead().kind == Tok::SlashEq) {
          std::string v = take().text;
          take();
          if (cl.pat != Clause::Pat::Var || v != cl.label)
            fail("where-clause variable does not match the pattern variable");
        }
        if (cur().kind != Tok::Ident && cur().kind != Tok::String) fail("expected a label");
        cl.where_excluded.insert(take().text);
        if (cur().kind == Tok::Comma) { take(); continue; }
        break;
      }
    }
    return cl;
  }

  std::string clause_fname() {
    // the clause() helper consumes the name; peek it here to group definitions
    return cur().text;
  }

  Program program() {
    Program p;
    std::map<std::string, size_t> index;
    while (cur().kind != Tok::End) {
      if (cur().kind == Tok::KwMain) {
        take();
        expect(Tok::Eq, "'='");
        if (p.main) fail("duplicate main");
        p.main = term();
      } else if (cur().kind == Tok::KwSfun || cur().kind == Tok::KwBfun) {
        bool is_bfun = take().kind == Tok::KwBfun;
        if (cur().kind != Tok::Ident || ahead().kind != Tok::LParen)
          fail("expected a clause after sfun/bfun");
        while (cur().kind == Tok::Ident && ahead().kind == Tok::LParen) {
          std::string fname = clause_fname();
          Clause cl = clause();
          auto it = index.find(fname);
          if (it == index.end()) {
            index[fname] = p.defs.size();
            p.defs.push_back({fname, is_bfun, {}});
          } else if (p.defs[it->second].is_bfun != is_bfun) {
            raise(Err::DuplicateClause, fname + " defined as both sfun and bfun");
          }
          p.defs[index[fname]].clauses.push_back(std::move(cl));
        }
      } else {
        fail("expected sfun, bfun, or main");
      }
    }
    validate(p);
    return p;
  }

  static void validate(const Program& p) {
    for (auto& d : p.defs) {
      std::set<std::string> seen;
      bool saw_var = false, saw_nil = false;
      for (auto& c : d.clauses) {
        if (saw_var) raise(Err::OverlappingPatterns, d.name + ": the label-variable clause must be last");
        switch (c.pat) {
          case Clause::Pat::Nil:
            if (!d.is_bfun) raise(Err::OverlappingPatterns, d.name + ": nil pattern only in bfun");
            if (saw_nil) raise(Err::DuplicateClause, d.name + ": duplicate {} clause");
            saw_nil = true;
            break;
          case Clause::Pat::Label:
            if (!seen.insert(c.label).second)
              raise(Err::DuplicateClause, d.name + ": duplicate clause for label " + c.label);
            break;
          case Clause::Pat::Var: {
            saw_var = true;
            for (auto& l : c.where_excluded)
              if (!seen.count(l))
                raise(Err::OverlappingPatterns,
                      d.name + ": excluded label " + l + " has no handling clause");
            break;
          }
        }
      }
    }
  }
};

bool plain_label(const std::string& s) {
  if (s.empty()) return false;
  if (!ident_start(s[0])) return false;
  for (size_t i = 1; i < s.size(); ++i) {
    if (s[i] == '-') {
      if (i + 1 >= s.size() || !ident_start(s[i + 1])) return false;
      continue;
    }
    if (!ident_cont(s[i])) return false;
  }
  return s != "U" && s != "cycle" && s != "sfun" && s != "bfun" && s != "main" && s != "where";
}

enum Prec { P_COMPOSE = 0, P_UNION = 1, P_ATOM = 2 };

bool is_union(const Rc& t) {
  return t->kind == Kind::Compose && t->kids[0]->kind == Kind::Man &&
         t->kids[1]->kind == Kind::Pair && t->kids[1]->kids.size() == 2;
}

void print_at(const Rc& t, int min_prec, std::ostream& os) {
  switch (t->kind) {
    case Kind::Mark:
      os << "&";
      if (t->name != "&") os << t->name;
      return;
    case Kind::Nil: os << "{}"; return;
    case Kind::Emp: os << "()"; return;
    case Kind::Man: os << "!"; return;
    case Kind::Cycle:
      os << "cycle(";
      print_at(t->kids[0], P_COMPOSE, os);
      os << ")";
      return;
    case Kind::Call:
      os << t->name << "(";
      print_at(t->kids[0], P_COMPOSE, os);
      os << ")";
      return;
    case Kind::Pair: {
      os << "(";
      for (size_t i = 0; i < t->kids.size(); ++i) {
        if (i) os << ", ";
        print_at(t->kids[i], P_COMPOSE, os);
      }
      os << ")";
      return;
    }
    case Kind::Edge: {
      if (t->label_var || plain_label(t->name)) os << t->name;
      else os << '"' << t->name << '"';
      os << ":";
      print_at(t->kids[0], P_ATOM, os);
      return;
    }
    case Kind::Def: {
      if (min_prec > P_UNION) os << "(";
      os << "&";
      if (t->name != "&") os << t->name;
      os << " := ";
      print_at(t->kids[0], P_ATOM, os);
      if (min_prec > P_UNION) os << ")";
      return;
    }
    case Kind::Compose: {
      if (is_union(t)) {
        // collect the right-nested union spine and print it as {e1, ..., en}
        std::vector<Rc> elems;
        Rc cur = t;
        while (is_union(cur)) {
          elems.push_back(cur->kids[1]->kids[0]);
          cur = cur->kids[1]->kids[1];
        }
        elems.push_back(cur);
        os << "{";
        for (size_t i = 0; i < elems.size(); ++i) {
          if (i) os << ", ";
          print_at(elems[i], P_COMPOSE, os);
        }
        os << "}";
        return;
      }
      if (min_prec > P_COMPOSE) {
        os << "(";
        print_at(t, P_COMPOSE, os);
        os << ")";
        return;
      }
      print_at(t->kids[0], P_COMPOSE, os);  // composition chains are left-associative
      os << " @ ";
      print_at(t->kids[1], P_UNION, os);
      return;
    }
  }
}

}  // namespace

Rc parse_term(const std::string& text) {
  Parser p{Lexer(text).run()};
  Rc t = p.term();
  if (p.cur().kind != Tok::End) p.fail("trailing input after term");
  return t;
}

Program parse_program(const std::string& text) {
  Parser p{Lexer(text).run()};
  return p.program();
}

std::string print_term(const Rc& t) {
  std::ostringstream os;
  print_at(t, P_COMPOSE, os);
  return os.str();
}

}  // namespace uncal
