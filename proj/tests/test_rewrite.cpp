#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <random>

#include "uncal/graph.hpp"
#include "uncal/rewrite.hpp"

using namespace uncal;

namespace {

Tc tc(const std::string& s, const Ctx& y = {}) { return infer(parse_term(s), y); }

bool teq(const Tc& a, const Tc& b) {
  return a->src == b->src && a->tgt == b->tgt && term_eq(to_raw(a), to_raw(b));
}

Err code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code;
  }
  FAIL("expected an Error");
  return Err::Internal;
}

// Well-typed by construction; every redex shape is reachable: compositions
// with unit, single and paired definitions, and one- and two-marker cycles.
Rc gen_raw(std::mt19937& rng, const Ctx& y, int depth, int& fresh) {
  static const char* kLabels[] = {"a", "b", "c"};
  int pick = (int)(rng() % 100);
  if (depth <= 0 || pick < 18) {
    if (!y.empty() && pick % 2) return mk_mark(y[rng() % y.size()]);
    return mk_nil();
  }
  if (pick < 40) return mk_edge(kLabels[rng() % 3], gen_raw(rng, y, depth - 1, fresh));
  if (pick < 55)
    return mk_union(gen_raw(rng, y, depth - 1, fresh), gen_raw(rng, y, depth - 1, fresh));
  if (pick < 68) {
    std::string x = "x" + std::to_string(fresh++);
    Ctx y2 = y;
    y2.push_back(x);
    Rc cyc = mk_cycle(mk_def(x, gen_raw(rng, y2, depth - 1, fresh)));
    return mk_compose(mk_mark(x), cyc);  // re-root the bound marker at &
  }
  if (pick < 78) {
    std::string x1 = "x" + std::to_string(fresh++);
    std::string x2 = "x" + std::to_string(fresh++);
    Ctx y2 = y;
    y2.push_back(x1);
    y2.push_back(x2);
    Rc cyc = mk_cycle(mk_pair({mk_def(x1, gen_raw(rng, y2, depth - 1, fresh)),
                               mk_def(x2, gen_raw(rng, y2, depth - 1, fresh))}));
    return mk_compose(gen_raw(rng, {x1, x2}, depth - 1, fresh), cyc);
  }
  if (pick < 88) {
    std::string z = "z" + std::to_string(fresh++);
    return mk_compose(gen_raw(rng, {z}, depth - 1, fresh),
                      mk_def(z, gen_raw(rng, y, depth - 1, fresh)));
  }
  if (pick < 96) {
    std::string z1 = "z" + std::to_string(fresh++);
    std::string z2 = "z" + std::to_string(fresh++);
    return mk_compose(gen_raw(rng, {z1, z2}, depth - 1, fresh),
                      mk_pair({mk_def(z1, gen_raw(rng, y, depth - 1, fresh)),
                               mk_def(z2, gen_raw(rng, y, depth - 1, fresh))}));
  }
  return mk_compose(gen_raw(rng, {}, depth - 1, fresh), mk_emp());
}

Tc gen_term(std::mt19937& rng, const Ctx& y, int depth = 4) {
  int fresh = 0;
  return infer(gen_raw(rng, y, depth, fresh), y);
}

Mc gen_mu(std::mt19937& rng, const std::vector<std::string>& scope, int depth, int& fresh) {
  int pick = (int)(rng() % 100);
  if (depth <= 0 || pick < 20) {
    if (!scope.empty() && pick % 2) return mu_var(scope[rng() % scope.size()]);
    return mu_zero();
  }
  static const char* kLabels[] = {"a", "b", "c"};
  if (pick < 50) return mu_app(kLabels[rng() % 3], gen_mu(rng, scope, depth - 1, fresh));
  if (pick < 75)
    return mu_plus(gen_mu(rng, scope, depth - 1, fresh), gen_mu(rng, scope, depth - 1, fresh));
  std::string x = "v" + std::to_string(fresh++);
  auto scope2 = scope;
  scope2.push_back(x);
  return mu_mu(x, gen_mu(rng, scope2, depth - 1, fresh));
}

}  // namespace

TEST_CASE("substitution redexes") {
  CHECK(teq(*step(tc("(a:&x) @ (&x := b:{})")), tc("a:b:{}")));
  CHECK(teq(*step(tc("(a:&) @ b:&", {"&"})), tc("a:b:&", {"&"})));
  CHECK_FALSE(step(tc("a:{}")).has_value());
  CHECK_FALSE(step(tc("cycle(& := a:&)")).has_value());

  // composing with the unit tuple only widens the source context
  Tc unit = infer(mk_compose(parse_term("a:{}"), mk_emp()), {"y"});
  Tc stepped = *step(unit);
  CHECK(stepped->src == Ctx{"y"});
  CHECK(term_eq(to_raw(stepped), parse_term("a:{}")));
}

TEST_CASE("a spread applied to a pair is a value") {
  Tc u = tc("{a:{}, b:{}}");
  CHECK_FALSE(step(u).has_value());
  CHECK(is_value_m(u));
  CHECK(teq(normalize(u), u));
}

TEST_CASE("peeling a two-marker cycle") {
  Tc t = tc("cycle((&x := a:&y, &y := b:&x))");
  REQUIRE(t->tgt == Ctx({"x", "y"}));
  auto s = step(t);
  REQUIRE(s.has_value());
  CHECK((*s)->kind == Kind::Compose);
  CHECK((*s)->src == t->src);
  CHECK((*s)->tgt == t->tgt);
  CHECK(bisimilar(interpret(t), interpret(*s)));

  Tc nf = normalize(t);
  REQUIRE(nf->kind == Kind::Pair);
  REQUIRE(nf->kids.size() == 2);
  CHECK(nf->tgt == t->tgt);
  CHECK(is_value_m(nf));
  // the components alternate labels starting from their own marker
  CHECK(bisimilar(interpret(rename_target(nf->kids[0], {"&"})), interpret(tc("cycle(& := a:b:&)"))));
  CHECK(bisimilar(interpret(rename_target(nf->kids[1], {"&"})), interpret(tc("cycle(& := b:a:&)"))));
}

TEST_CASE("each step preserves the judgment and the graph") {
  std::mt19937 rng(42);
  for (int i = 0; i < 120; ++i) {
    Ctx y = (i % 3 == 0) ? Ctx{"y1", "y2"} : Ctx{};
    Tc t = gen_term(rng, y);
    int guard = 0;
    while (auto n = step(t)) {
      REQUIRE((*n)->src == t->src);
      REQUIRE((*n)->tgt == t->tgt);
      if (i % 7 == 0)  // graph comparison is the slow part; sample it
        CHECK(bisimilar(interpret(t), interpret(*n)));
      t = *n;
      REQUIRE(++guard < 100000);
    }
    CHECK(is_value_m(t));
  }
}

TEST_CASE("both innermost strategies reach the same normal form") {
  std::mt19937 rng(7);
  for (int i = 0; i < 500; ++i) {
    Ctx y = (i % 4 == 0) ? Ctx{"y1"} : Ctx{};
    Tc t = gen_term(rng, y);
    Tc li = normalize(t, Strategy::LeftInner);
    Tc ri = normalize(t, Strategy::RightInner);
    CHECK(teq(li, ri));
    CHECK(is_value_m(li));
    CHECK(teq(normalize(li), li));  // normal forms are fixpoints
  }
}

TEST_CASE("normalization preserves bisimilarity") {
  std::mt19937 rng(2718);
  for (int i = 0; i < 60; ++i) {
    Ctx y = (i % 2 == 0) ? Ctx{"y1"} : Ctx{};
    Tc t = gen_term(rng, y);
    CHECK(bisimilar(interpret(t), interpret(normalize(t))));
  }
}

TEST_CASE("eta-expansion of sole spreads") {
  Tc bare = tc("!", {"y1", "y2"});
  Tc ex = eta_man_expand(bare);
  CHECK(is_value_n(ex));
  CHECK_FALSE(is_value_n(bare));
  CHECK(mu_eq(to_mu(ex), mu_plus(mu_var("y1"), mu_var("y2"))));
  CHECK(code_of([&] { to_mu(bare); }) == Err::NotInN);

  Tc plain = tc("a:{}");
  CHECK(teq(eta_man_expand(plain), plain));

  Tc nested = tc("a:!", {"y1", "y2"});
  Tc nex = eta_man_expand(nested);
  CHECK(is_value_n(nex));
  CHECK(mu_eq(to_mu(nex), mu_app("a", mu_plus(mu_var("y1"), mu_var("y2")))));

  CHECK(code_of([] { eta_man_expand(tc("(a:{}, b:{})")); }) == Err::TypeNotSingleton);

  std::mt19937 rng(11);
  for (int i = 0; i < 40; ++i) {
    Tc nf = normalize(gen_term(rng, {"y1", "y2"}));
    if (nf->tgt != Ctx{"&"}) continue;
    Tc e = eta_man_expand(nf);
    CHECK(is_value_n(e));
    CHECK(bisimilar(interpret(e), interpret(nf)));
  }
}

TEST_CASE("normal forms satisfy the value grammars") {
  std::mt19937 rng(5);
  for (int i = 0; i < 200; ++i) {
    Ctx y = (i % 3 == 0) ? Ctx{"y1", "y2"} : Ctx{};
    Tc nf = normalize(gen_term(rng, y));
    CHECK(is_value_m(nf));
    if (nf->tgt == Ctx{"&"}) CHECK(is_value_n(eta_man_expand(nf)));
  }
}

TEST_CASE("mu images of normal forms") {
  CHECK(mu_eq(to_mu(tc("cycle(&x := a:&x)")), mu_mu("x", mu_app("a", mu_var("x")))));
  CHECK(mu_eq(to_mu(tc("{}")), mu_zero()));
  CHECK(mu_eq(to_mu(tc("{a:{}, b:{}}")),
              mu_plus(mu_app("a", mu_zero()), mu_app("b", mu_zero()))));
  CHECK(code_of([] { to_mu(tc("(a:{}, b:{})")); }) == Err::NotInN);
}

TEST_CASE("mu embedding realizes charts") {
  Tc loop = mu_to_term(parse_mu("mu x. a(x)"));
  CHECK(loop->tgt == Ctx{"&"});
  CHECK(bisimilar(interpret(loop), interpret(tc("cycle(& := a:&)"))));
  CHECK(bisimilar(interpret(loop), interpret(mu_to_term(parse_mu("a(mu x. a(x))")))));
  CHECK_FALSE(bisimilar(interpret(loop), interpret(mu_to_term(parse_mu("mu x. b(x)")))));

  Tc open = mu_to_term(parse_mu("a(y) + b(z)"));
  CHECK(open->src == Ctx({"y", "z"}));  // free variables, sorted
}

TEST_CASE("mu round-trips") {
  std::mt19937 rng(99);
  for (int i = 0; i < 300; ++i) {
    int fresh = 0;
    Mc m = gen_mu(rng, {}, 4, fresh);
    CHECK(mu_eq(parse_mu(print_mu(m)), m));
    Tc t = mu_to_term(m);
    CHECK(is_value_n(t));
    CHECK(mu_eq(to_mu(t), m));
    CHECK(teq(mu_to_term(to_mu(t)), t));
  }
}

TEST_CASE("shadowed binders are freshened") {
  Mc shadowed = mu_mu("x", mu_app("a", mu_mu("x", mu_app("b", mu_var("x")))));
  Tc t = mu_to_term(shadowed);  // must not raise
  Mc canon = to_mu(t);
  CHECK(mu_eq(to_mu(mu_to_term(canon)), canon));
  // the outer binder is shadowed away, so only the inner loop survives
  CHECK(bisimilar(interpret(t), interpret(tc("a:cycle(& := b:&)"))));
}

TEST_CASE("mu printing") {
  Mc m = mu_mu("x", mu_plus(mu_app("a", mu_var("x")), mu_zero()));
  CHECK(print_mu(m) == "mu x. a(x) + 0");
  CHECK(mu_eq(parse_mu("mu x. a(x) + 0"), m));

  Mc guarded = mu_plus(mu_mu("x", mu_var("x")), mu_zero());
  CHECK(print_mu(guarded) == "(mu x. x) + 0");
  CHECK(mu_eq(parse_mu(print_mu(guarded)), guarded));

  CHECK(print_mu(mu_plus(mu_zero(), mu_plus(mu_zero(), mu_zero()))) == "0 + (0 + 0)");
  CHECK(print_mu(mu_app("two words", mu_zero())) == "\"two words\"(0)");
  CHECK(mu_eq(parse_mu("\"two words\"(0)"), mu_app("two words", mu_zero())));

  CHECK(code_of([] { parse_mu("mu . x"); }) == Err::SyntaxError);
  CHECK(code_of([] { parse_mu("a(x"); }) == Err::SyntaxError);
  CHECK(code_of([] { parse_mu("x y"); }) == Err::SyntaxError);
}

TEST_CASE("graph comparison factors through mu charts") {
  std::mt19937 rng(31415);
  Ctx y = {"y1"};
  int agree_true = 0, agree_false = 0;
  for (int i = 0; i < 60; ++i) {
    Tc s = gen_term(rng, y);
    Tc t = (i % 5 == 0) ? s : gen_term(rng, y);
    bool direct = bisimilar(interpret(s), interpret(t));
    Tc ms = mu_to_term(to_mu(eta_man_expand(normalize(s))), y);
    Tc mt = mu_to_term(to_mu(eta_man_expand(normalize(t))), y);
    bool through_mu = bisimilar(interpret(ms), interpret(mt));
    CHECK(direct == through_mu);
    (direct ? agree_true : agree_false)++;
  }
  CHECK(agree_true > 5);
  CHECK(agree_false > 5);
}

TEST_CASE("fuel exhaustion is reported, never silently truncated") {
  Tc chain = tc("(a:&x) @ (&x := (c:&z) @ (&z := b:{}))");
  CHECK(code_of([&] { normalize(chain, Strategy::LeftInner, 1); }) == Err::FuelExhausted);
  CHECK(teq(normalize(chain), tc("a:c:b:{}")));
}
