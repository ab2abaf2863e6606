#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "uncal/syntax.hpp"

using namespace uncal;

TEST_CASE("atoms parse to the expected constructors") {
  CHECK(parse_term("{}")->kind == Kind::Nil);
  CHECK(parse_term("()")->kind == Kind::Emp);
  CHECK(parse_term("!")->kind == Kind::Man);
  CHECK(term_eq(parse_term("&"), mk_mark("&")));
  CHECK(term_eq(parse_term("&y1"), mk_mark("y1")));
  CHECK(term_eq(parse_term("x"), mk_mark("x")));  // bare identifier is a marker
}

TEST_CASE("cycle with a default-marker definition") {
  Rc t = parse_term("cycle(&:=a:&)");
  Rc want = mk_cycle(mk_def("&", mk_edge("a", mk_mark("&"))));
  CHECK(term_eq(t, want));
}

TEST_CASE("edges right-nest and quoted labels carry arbitrary text") {
  CHECK(term_eq(parse_term("a:b:{}"), mk_edge("a", mk_edge("b", mk_nil()))));
  CHECK(term_eq(parse_term("\"49 45N\":{}"), mk_edge("49 45N", mk_nil())));
  // a quoted string alone is atomic data: a labelled edge to nil
  CHECK(term_eq(parse_term("\"Luxembourg\""), mk_edge("Luxembourg", mk_nil())));
}

TEST_CASE("brace sugar builds right-nested unions") {
  Rc t = parse_term("{a:{}, b:{}, c:{}}");
  Rc want = mk_union(mk_edge("a", mk_nil()),
                     mk_union(mk_edge("b", mk_nil()), mk_edge("c", mk_nil())));
  CHECK(term_eq(t, want));
  CHECK(term_eq(parse_term("{a:{}}"), mk_edge("a", mk_nil())));  // singleton is the element itself
  // the U operator builds the same shape
  CHECK(term_eq(parse_term("a:{} U b:{} U c:{}"), want));
}

TEST_CASE("union desugars to ! over a pair") {
  Rc t = parse_term("{a:{}, b:{}}");
  REQUIRE(t->kind == Kind::Compose);
  CHECK(t->kids[0]->kind == Kind::Man);
  REQUIRE(t->kids[1]->kind == Kind::Pair);
  CHECK(t->kids[1]->kids.size() == 2);
}

TEST_CASE("composition is left-associative and binds looser than union") {
  Rc t = parse_term("a:& @ b:& @ c:&");
  REQUIRE(t->kind == Kind::Compose);
  CHECK(t->kids[0]->kind == Kind::Compose);
  Rc u = parse_term("x U y @ z");
  REQUIRE(u->kind == Kind::Compose);  // (x U y) @ z
  CHECK(term_eq(u->kids[0], mk_union(mk_mark("x"), mk_mark("y"))));
}

TEST_CASE("pair conventions: flattening and unit dropping") {
  CHECK(term_eq(parse_term("(a:&, ())"), parse_term("a:&")));
  CHECK(term_eq(parse_term("((), ())"), mk_emp()));
  Rc t = parse_term("(x, (y, z))");
  REQUIRE(t->kind == Kind::Pair);
  CHECK(t->kids.size() == 3);
  // (+) and comma are the same separator
  CHECK(term_eq(parse_term("(x (+) y)"), parse_term("(x, y)")));
}

TEST_CASE("parenthesized term is not a pair") {
  CHECK(term_eq(parse_term("(a:{})"), mk_edge("a", mk_nil())));
}

TEST_CASE("the shared-input example term") {
  Rc t = parse_term("a:(b:&x U c:&x) @ cycle(x := d:(p:&y1 U q:&y2 U r:&x))");
  REQUIRE(t->kind == Kind::Compose);
  Rc lhs = t->kids[0];
  CHECK(term_eq(lhs, mk_edge("a", mk_union(mk_edge("b", mk_mark("x")),
                                           mk_edge("c", mk_mark("x"))))));
  Rc rhs = t->kids[1];
  REQUIRE(rhs->kind == Kind::Cycle);
  Rc body = rhs->kids[0];
  REQUIRE(body->kind == Kind::Def);
  CHECK(body->name == "x");
  Rc d = body->kids[0];
  REQUIRE(d->kind == Kind::Edge);
  CHECK(d->name == "d");
  Rc u = d->kids[0];
  CHECK(term_eq(u, mk_union(mk_edge("p", mk_mark("y1")),
                            mk_union(mk_edge("q", mk_mark("y2")), mk_edge("r", mk_mark("x"))))));
}

TEST_CASE("definitions inside pairs") {
  Rc t = parse_term("(z1 := a:&z2, z2 := b:&z1)");
  REQUIRE(t->kind == Kind::Pair);
  CHECK(term_eq(t->kids[0], mk_def("z1", mk_edge("a", mk_mark("z2")))));
  CHECK(term_eq(t->kids[1], mk_def("z2", mk_edge("b", mk_mark("z1")))));
}

TEST_CASE("comments and whitespace are skipped") {
  Rc t = parse_term("-- leading note\n a: -- mid\n {}\n");
  CHECK(term_eq(t, mk_edge("a", mk_nil())));
  // a single dash stays within an identifier
  CHECK(term_eq(parse_term("head-a?({})"), mk_call("head-a?", mk_nil())));
}

TEST_CASE("syntax errors carry positions") {
  CHECK_THROWS_AS(parse_term("a:"), Error);
  CHECK_THROWS_AS(parse_term("(a,"), Error);
  CHECK_THROWS_AS(parse_term("a:{} b"), Error);  // trailing input
  CHECK_THROWS_AS(parse_term("\"unterminated"), Error);
  try {
    parse_term("a @ @");
  } catch (const Error& e) {
    CHECK(e.code == Err::SyntaxError);
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

static const char* kAaProgram = R"(
sfun aa?(a:t) = head-a?(t)
     aa?(L:t) = aa?(t) where L /= a

bfun head-a?({}) = {}
     head-a?(a:t) = true:{}
     head-a?(L:t) = {} where L /= a

main = aa?(a:a:{})
)";

TEST_CASE("program parsing groups clauses by name and mode") {
  Program p = parse_program(kAaProgram);
  REQUIRE(p.defs.size() == 2);
  const Definition* aa = p.find("aa?");
  REQUIRE(aa != nullptr);
  CHECK(!aa->is_bfun);
  REQUIRE(aa->clauses.size() == 2);
  CHECK(aa->clauses[0].pat == Clause::Pat::Label);
  CHECK(aa->clauses[0].label == "a");
  CHECK(aa->clauses[0].argvar == "t");
  CHECK(term_eq(aa->clauses[0].body, mk_call("head-a?", mk_mark("t"))));
  CHECK(aa->clauses[1].pat == Clause::Pat::Var);
  CHECK(aa->clauses[1].label == "L");
  CHECK(aa->clauses[1].where_excluded == std::set<std::string>{"a"});

  const Definition* ha = p.find("head-a?");
  REQUIRE(ha != nullptr);
  CHECK(ha->is_bfun);
  REQUIRE(ha->clauses.size() == 3);
  CHECK(ha->clauses[0].pat == Clause::Pat::Nil);
  CHECK(ha->clauses[1].label == "a");

  REQUIRE(p.main.has_value());
  CHECK(term_eq(*p.main, mk_call("aa?", mk_edge("a", mk_edge("a", mk_nil())))));
}

TEST_CASE("clause validation") {
  // duplicate concrete label
  CHECK_THROWS_AS(parse_program("sfun f(a:t) = {} f(a:t) = {}"), Error);
  // label-variable clause must come last
  CHECK_THROWS_AS(parse_program("sfun f(L:t) = {} f(a:t) = {}"), Error);
  // excluded label without a handling clause
  CHECK_THROWS_AS(parse_program("sfun f(L:t) = {} where L /= b"), Error);
  // nil pattern is a bfun-only form
  CHECK_THROWS_AS(parse_program("sfun f({}) = {}"), Error);
  // a name cannot be both sfun and bfun
  CHECK_THROWS_AS(parse_program("sfun f(a:t) = {} bfun f({}) = {}"), Error);
  try {
    parse_program("sfun f(a:t) = {} f(a:t) = {}");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code == Err::DuplicateClause);
  }
}

TEST_CASE("uppercase pattern heads are label variables, lowercase are labels") {
  Program p = parse_program("sfun g(ethnicGroup:t) = result:t g(L:t) = g(t) where L /= ethnicGroup");
  const Definition* g = p.find("g");
  REQUIRE(g != nullptr);
  CHECK(g->clauses[0].pat == Clause::Pat::Label);
  CHECK(g->clauses[1].pat == Clause::Pat::Var);
}

namespace {

Rc random_raw(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 4 : 10);
  switch (pick(rng)) {
    case 0: return mk_nil();
    case 1: return mk_mark("x");
    case 2: return mk_mark("&");
    case 3: return mk_man();
    case 4: return mk_edge("lab-el?", mk_nil());
    case 5: return mk_edge("a", random_raw(rng, depth - 1));
    case 6: return mk_edge("odd label", random_raw(rng, depth - 1));
    case 7: return mk_compose(random_raw(rng, depth - 1), random_raw(rng, depth - 1));
    case 8: return mk_pair({random_raw(rng, depth - 1), random_raw(rng, depth - 1)});
    case 9: return mk_cycle(mk_def("z", random_raw(rng, depth - 1)));
    default: return mk_union(random_raw(rng, depth - 1), random_raw(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("print/parse round trip on random terms") {
  std::mt19937 rng(7);
  for (int i = 0; i < 500; ++i) {
    Rc t = random_raw(rng, 5);
    Rc back = parse_term(print_term(t));
    CHECK(term_eq(t, back));
  }
}

TEST_CASE("printer output for the common forms") {
  CHECK(print_term(parse_term("{a:{}, b:{}}")) == "{a:{}, b:{}}");
  CHECK(print_term(parse_term("a:b:{}")) == "a:b:{}");
  CHECK(print_term(parse_term("cycle(&:=a:&)")) == "cycle(& := a:&)");
  CHECK(print_term(mk_edge("two words", mk_nil())) == "\"two words\":{}");
  CHECK(print_term(parse_term("(x, y)")) == "(&x, &y)");
  CHECK(print_term(parse_term("a:& @ b:&")) == "a:& @ b:&");
}
