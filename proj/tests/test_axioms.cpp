#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <random>
#include <set>

#include "json.hpp"
#include "uncal/axioms.hpp"
#include "uncal/graph.hpp"

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

// Fill every slot of the schema with a random term and instantiate.
Equation random_instance(const AxiomSchema& schema, int max_size,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Assignment a;
  for (const auto& s : schema.slots) {
    int sz = std::max(1 + (int)(rng() % (std::uint64_t)max_size), 5);
    for (;;) {
      try {
        a.emplace(s.name, random_term(s.src, s.tgt, sz, rng()));
        break;
      } catch (const Error& e) {
        REQUIRE(e.code == Err::Unsatisfiable);
        ++sz;
      }
    }
  }
  return instantiate(schema, a);
}

std::vector<std::string> all_names() {
  auto names = axg_names();
  for (const auto& n : derived_names()) names.push_back(n);
  return names;
}

void edge_labels(const Rc& t, std::set<std::string>& out) {
  if (t->kind == Kind::Edge) out.insert(t->name);
  for (const auto& k : t->kids) edge_labels(k, out);
}

}  // namespace

TEST_CASE("the registry names both rule books and builds every schema") {
  CHECK(axg_names().size() == 15);
  CHECK(derived_names().size() == 17);
  for (const auto& name : all_names()) {
    CAPTURE(name);
    for (std::uint64_t shape : {0ull, 1ull, 2ull, 3ull}) {
      AxiomSchema schema = schema_by_name(name, shape);
      CHECK(schema.name == name);
      for (const auto& slot : schema.slots) {
        CHECK_NOTHROW(check_ctx(slot.src));
        CHECK_NOTHROW(check_ctx(slot.tgt));
      }
      // equal shape values must reproduce the same judgment shape
      AxiomSchema again = schema_by_name(name, shape);
      REQUIRE(again.slots.size() == schema.slots.size());
      for (size_t i = 0; i < schema.slots.size(); ++i) {
        CHECK(again.slots[i].name == schema.slots[i].name);
        CHECK(again.slots[i].src == schema.slots[i].src);
        CHECK(again.slots[i].tgt == schema.slots[i].tgt);
      }
    }
  }
  CHECK(code_of([] { schema_by_name("no-such-law"); }) == Err::Internal);
}

TEST_CASE("slot-free schemas instantiate to their fixed equations") {
  Equation c1 = instantiate(schema_by_name("c1"), {});
  CHECK(c1.source == Ctx{});
  CHECK(c1.target == Ctx{"&"});
  CHECK(term_eq(to_raw(c1.lhs), mk_cycle(mk_mark("&"))));
  CHECK(term_eq(to_raw(c1.rhs), mk_nil()));

  Equation c2 = instantiate(schema_by_name("c2"), {});
  CHECK(c2.source == Ctx{"y"});
  CHECK(term_eq(to_raw(c2.lhs), mk_cycle(mk_man())));
  CHECK(term_eq(to_raw(c2.rhs), mk_mark("y")));

  Equation eta = instantiate(schema_by_name("eta_man"), {});
  CHECK(eta.source == Ctx{"x", "y"});
  CHECK(teq(eta.lhs, infer(mk_union(mk_mark("x"), mk_mark("y")), {"x", "y"})));
  CHECK(term_eq(to_raw(eta.rhs), mk_man()));

  Equation dg = instantiate(schema_by_name("degen"), {});
  CHECK(teq(dg.lhs, infer(mk_union(mk_mark("x"), mk_mark("x")), {"x"})));
  CHECK(term_eq(to_raw(dg.rhs), mk_mark("x")));
}

TEST_CASE("the loop-unfolding law at its minimal shape") {
  AxiomSchema fix = schema_by_name("fix");  // shape 0: <> and <&>
  REQUIRE(fix.slots.size() == 1);
  CHECK(fix.slots[0].src == Ctx{"&"});
  CHECK(fix.slots[0].tgt == Ctx{"&"});
  Tc t = tc("a:&", {"&"});
  Equation eq = instantiate(fix, {{"t", t}});
  CHECK(term_eq(to_raw(eq.lhs), mk_cycle(parse_term("a:&"))));
  CHECK(term_eq(to_raw(eq.rhs),
                mk_compose(parse_term("a:&"), mk_cycle(parse_term("a:&")))));
  CHECK(bisimilar(interpret(eq.lhs), interpret(eq.rhs)));
}

TEST_CASE("the pairing-projection law reproduces its two-root example") {
  AxiomSchema sp = schema_by_name("SP");
  REQUIRE(sp.slots.size() == 1);
  Tc t = infer(mk_pair({parse_term("a:{}"), parse_term("b:{}")}), {});
  REQUIRE(t->tgt == sp.slots[0].tgt);
  Equation eq = instantiate(sp, {{"t", t}});
  CHECK(teq(eq.rhs, t));
  CHECK(eq.lhs->kind == Kind::Pair);
  CHECK(bisimilar(interpret(eq.lhs), interpret(eq.rhs)));
}

TEST_CASE("substitution instances agree with the substitution operation") {
  AxiomSchema sub = schema_by_name("sub");  // shape 0: one definition
  REQUIRE(sub.slots.size() == 2);
  Tc t = tc("a:&y1", {"y1"});
  Tc s1 = tc("b:{}");
  Equation eq = instantiate(sub, {{"t", t}, {"s1", s1}});
  CHECK(eq.lhs->kind == Kind::Compose);
  SubstMap sm{{"y1", infer(mk_def("y1", parse_term("b:{}")), {})}};
  CHECK(teq(eq.rhs, substitute(t, sm)));
  CHECK(bisimilar(interpret(eq.lhs), interpret(eq.rhs)));
}

TEST_CASE("instantiation rejects missing, extraneous, and mistyped fillers") {
  AxiomSchema fix = schema_by_name("fix");
  CHECK(code_of([&] { instantiate(fix, {}); }) == Err::SlotJudgmentMismatch);
  CHECK(code_of([&] {
          instantiate(fix, {{"t", tc("a:&", {"&"})}, {"extra", tc("{}")}});
        }) == Err::SlotJudgmentMismatch);
  // wrong source context
  CHECK(code_of([&] { instantiate(fix, {{"t", tc("a:{}")}}); }) ==
        Err::SlotJudgmentMismatch);
  // wrong target context
  AxiomSchema tm = schema_by_name("tmnl");
  CHECK(code_of([&] {
          instantiate(tm, {{"t", tc("a:{}", tm.slots[0].src)}});
        }) == Err::SlotJudgmentMismatch);
}

TEST_CASE("random terms inhabit the requested judgment deterministically") {
  std::vector<std::pair<Ctx, Ctx>> judgments = {
      {{}, {"&"}},          {{"y"}, {"&"}},
      {{"y", "z"}, {"&"}},  {{"y"}, {}},
      {{}, {"u"}},          {{"y"}, {"u", "v"}},
      {{"y", "z"}, {"u", "&"}}, {{"&"}, {"&"}},
  };
  for (size_t j = 0; j < judgments.size(); ++j) {
    const auto& [src, tgt] = judgments[j];
    CAPTURE(j);
    for (int size = 1; size <= 12; ++size) {
      for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Tc t;
        try {
          t = random_term(src, tgt, size, seed ^ (j << 8) ^ ((size_t)size << 16));
        } catch (const Error& e) {
          CHECK(e.code == Err::Unsatisfiable);
          continue;
        }
        REQUIRE(t);
        CHECK(t->src == src);
        CHECK(t->tgt == tgt);
        CHECK(teq(t, infer(to_raw(t), src)));
        std::set<std::string> labels;
        edge_labels(to_raw(t), labels);
        for (const auto& l : labels)
          CHECK((l == "a" || l == "b" || l == "c"));
      }
    }
  }
  // determinism: equal arguments, equal results
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tc t1 = random_term({"y"}, {"&"}, 9, seed);
    Tc t2 = random_term({"y"}, {"&"}, 9, seed);
    CHECK(teq(t1, t2));
  }
}

TEST_CASE("the only size-1 closed term is the leaf graph") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Tc t = random_term({}, {"&"}, 1, seed);
    CHECK(term_eq(to_raw(t), mk_nil()));
  }
}

TEST_CASE("sizes below the smallest inhabitant are unsatisfiable") {
  CHECK(code_of([] { random_term({}, {"&"}, 0, 1); }) == Err::Unsatisfiable);
  CHECK(code_of([] { random_term({}, {"u"}, 1, 1); }) == Err::Unsatisfiable);
  CHECK(code_of([] { random_term({}, {"u", "v"}, 4, 1); }) == Err::Unsatisfiable);
  CHECK_NOTHROW(random_term({}, {"u", "v"}, 5, 1));
}

TEST_CASE("every law of both rule books is sound in the graph model") {
  for (const auto& name : all_names()) {
    CAPTURE(name);
    for (std::uint64_t shape : {0ull, 1ull, 2ull}) {
      CAPTURE(shape);
      AxiomSchema schema = schema_by_name(name, shape);
      Report rep = check_soundness(schema, 100, 6, 0xace0 + shape);
      CHECK(rep.trials == 100);
      if (!rep.ok()) {
        CAPTURE(report_json(rep));
        CHECK(rep.ok());
      } else {
        CHECK(rep.ok());
      }
    }
  }
}

TEST_CASE("instances carry one judgment on both sides") {
  std::mt19937_64 rng(77);
  for (const auto& name : all_names()) {
    CAPTURE(name);
    for (std::uint64_t shape : {0ull, 4ull}) {
      AxiomSchema schema = schema_by_name(name, shape);
      for (int i = 0; i < 3; ++i) {
        Equation eq = random_instance(schema, 6, rng());
        CHECK(eq.lhs->src == eq.source);
        CHECK(eq.rhs->src == eq.source);
        CHECK(eq.lhs->tgt == eq.target);
        CHECK(eq.rhs->tgt == eq.target);
        // both sides re-infer to themselves: the builders emit real terms
        CHECK(teq(eq.lhs, infer(to_raw(eq.lhs), eq.source)));
        CHECK(teq(eq.rhs, infer(to_raw(eq.rhs), eq.source)));
      }
    }
  }
}

TEST_CASE("commuting identities hold for every small instance shape") {
  // m = 1: the single index map
  Report r1 = check_soundness(ci_schema({1, {{1}}, {}}), 30, 5, 11);
  CHECK(r1.ok());
  // m = 2: all 4x4 pairs of index maps, with and without an ambient context
  std::vector<std::vector<int>> maps2 = {{1, 1}, {1, 2}, {2, 1}, {2, 2}};
  int checked = 0;
  for (const auto& r1m : maps2)
    for (const auto& r2m : maps2) {
      CIInstance inst{2, {r1m, r2m}, (checked % 2) ? Ctx{"x1"} : Ctx{}};
      Report rep = check_soundness(ci_schema(inst), 30, 5, 101 + checked);
      CAPTURE(checked);
      CHECK(rep.ok());
      ++checked;
    }
  CHECK(checked == 16);
  // m = 3: sampled index maps
  std::mt19937_64 rng(4242);
  for (int k = 0; k < 5; ++k) {
    CIInstance inst;
    inst.m = 3;
    for (int i = 0; i < 3; ++i) {
      std::vector<int> r;
      for (int j = 0; j < 3; ++j) r.push_back(1 + (int)(rng() % 3));
      inst.rho.push_back(std::move(r));
    }
    inst.x = (k % 2) ? Ctx{"x1"} : Ctx{};
    Report rep = check_soundness(ci_schema(inst), 30, 5, 900 + k);
    CAPTURE(k);
    CHECK(rep.ok());
  }
}

TEST_CASE("malformed commuting-identity instances are rejected") {
  CHECK(code_of([] { ci_schema({0, {}, {}}); }) == Err::SlotJudgmentMismatch);
  CHECK(code_of([] { ci_schema({2, {{1, 2}}, {}}); }) ==
        Err::SlotJudgmentMismatch);
  CHECK(code_of([] { ci_schema({2, {{1, 2}, {1}}, {}}); }) ==
        Err::SlotJudgmentMismatch);
  CHECK(code_of([] { ci_schema({2, {{1, 2}, {0, 2}}, {}}); }) ==
        Err::SlotJudgmentMismatch);
  CHECK(code_of([] { ci_schema({2, {{1, 2}, {1, 3}}, {}}); }) ==
        Err::SlotJudgmentMismatch);
  // ambient context may not shadow the bound markers
  CHECK(code_of([] { ci_schema({1, {{1}}, {"y1"}}); }) == Err::DuplicateMarker);
}

TEST_CASE("the two laws noted as redundant still pass the harness") {
  CHECK(check_soundness(schema_by_name("c1"), 100, 6, 5).ok());
  CHECK(check_soundness(schema_by_name("unitR_man"), 100, 6, 5).ok());
}

TEST_CASE("a corrupted law is caught with a concrete witness") {
  AxiomSchema broken = schema_by_name("c2");
  broken.build = [](const Assignment&) {
    Tc lhs = infer(mk_cycle(mk_man()), {"y"});
    Tc rhs = infer(mk_nil(), {"y"});
    return Equation{{"y"}, lhs, rhs, {"&"}};
  };
  Report rep = check_soundness(broken, 100, 6, 7);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.failures.size() == 100);  // slotless: every trial is the same lie
  CHECK(rep.failures[0].assignment.empty());
  CHECK_FALSE(bisimilar(interpret(rep.failures[0].lhs),
                        interpret(rep.failures[0].rhs)));

  // a slotted corruption: dropping one side of a union is unsound
  AxiomSchema drop = schema_by_name("comm_u", 3);
  const AxiomSchema good = schema_by_name("comm_u", 3);
  drop.build = [good](const Assignment& a) {
    Equation eq = good.build(a);
    return Equation{eq.source, eq.lhs, a.at("s"), eq.target};
  };
  Report rep2 = check_soundness(drop, 100, 6, 8);
  CHECK_FALSE(rep2.ok());
  for (const auto& f : rep2.failures) {
    CHECK(f.assignment.count("s") == 1);
    CHECK(f.assignment.count("t") == 1);
    CHECK_FALSE(bisimilar(interpret(f.lhs), interpret(f.rhs)));
  }
}

TEST_CASE("reports serialize to the documented shape") {
  Report ok = check_soundness(schema_by_name("degen_u"), 100, 6, 3);
  REQUIRE(ok.ok());
  auto j = nlohmann::json::parse(report_json(ok));
  CHECK(j["schema"] == "degen_u");
  CHECK(j["trials"] == 100);
  CHECK(j["failures"].is_array());
  CHECK(j["failures"].empty());

  AxiomSchema broken = schema_by_name("degen_u");
  const AxiomSchema good = schema_by_name("degen_u");
  broken.build = [good](const Assignment& a) {
    Equation eq = good.build(a);
    Tc nil = infer(mk_nil(), eq.source);
    return Equation{eq.source, eq.lhs, nil, eq.target};
  };
  Report bad = check_soundness(broken, 50, 6, 3);
  REQUIRE_FALSE(bad.ok());
  auto jb = nlohmann::json::parse(report_json(bad));
  REQUIRE(jb["failures"].is_array());
  REQUIRE_FALSE(jb["failures"].empty());
  const auto& f0 = jb["failures"][0];
  CHECK(f0.contains("assignment"));
  CHECK(f0.contains("lhs"));
  CHECK(f0.contains("rhs"));
  CHECK(f0["assignment"].is_object());
  CHECK(f0["assignment"].contains("t"));
  CHECK(f0["lhs"].is_string());
  CHECK(f0["rhs"] == "{}");
}

TEST_CASE("soundness runs are reproducible regardless of scheduling") {
  AxiomSchema schema = schema_by_name("bekic", 1);
  std::string a = report_json(check_soundness(schema, 60, 6, 99));
  std::string b = report_json(check_soundness(schema, 60, 6, 99));
  CHECK(a == b);
}
