#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <random>

#include "json.hpp"
#include "uncal/graph.hpp"

using namespace uncal;

namespace {

Tc tc(const std::string& s, const Ctx& y = {}) { return infer(parse_term(s), y); }
Graph gr(const std::string& s, const Ctx& y = {}) { return interpret(tc(s, y)); }

Err code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code;
  }
  FAIL("expected an Error");
  return Err::Internal;
}

// Arbitrary graph over a fixed interface; edges/roots/outputs drawn freely so
// the generated shapes are not limited to term images.
Graph rand_graph(std::mt19937& rng, const Ctx& in, const Ctx& out, bool with_eps = true) {
  Graph g;
  g.nverts = 1 + (int)(rng() % 5);
  auto rv = [&] { return (VId)(rng() % g.nverts); };
  static const std::string labels[] = {"a", "b", "c"};
  int ne = (int)(rng() % 8);
  for (int i = 0; i < ne; ++i) {
    VId v = rv(), u = rv();
    g.edges.emplace_back(v, labels[rng() % 3], u);
  }
  if (with_eps) {
    int k = (int)(rng() % 4);
    for (int i = 0; i < k; ++i) {
      VId v = rv(), u = rv();
      g.eps.emplace_back(v, u);
    }
  }
  g.in_markers = in;
  for (size_t i = 0; i < in.size(); ++i) g.roots.push_back(rv());
  g.out_markers = out;
  for (VId v = 0; v < g.nverts; ++v)
    for (auto& m : out)
      if (rng() % 3 == 0) g.outputs.emplace_back(v, m);
  return g;
}

bool agree_all(const Graph& g1, const Graph& g2) {
  bool s = bisimilar_with(g1, g2, BisimAlgo::NaiveSerial);
  bool p = bisimilar_with(g1, g2, BisimAlgo::NaiveParallel);
  bool q = bisimilar_with(g1, g2, BisimAlgo::Partition);
  CHECK(s == p);
  CHECK(s == q);
  return s;
}

// Validates that a reported witness really is a bisimulation relating roots.
void check_witness(const BisimWitness& w) {
  std::set<std::pair<VId, VId>> rel(w.relation.begin(), w.relation.end());
  auto outs_of = [](const Graph& g) {
    std::vector<std::set<std::string>> o(g.nverts);
    for (auto& [v, m] : g.outputs) o[v].insert(m);
    return o;
  };
  auto next_of = [](const Graph& g) {
    std::vector<std::map<std::string, std::vector<VId>>> n(g.nverts);
    for (auto& [v, l, u] : g.edges) n[v][l].push_back(u);
    return n;
  };
  auto o1 = outs_of(w.g1), o2 = outs_of(w.g2);
  auto n1 = next_of(w.g1), n2 = next_of(w.g2);
  REQUIRE(w.g1.eps.empty());
  REQUIRE(w.g2.eps.empty());
  for (auto& [u, v] : rel) {
    CHECK(o1[u] == o2[v]);
    for (auto& [l, us] : n1[u])
      for (VId un : us) {
        bool matched = false;
        auto it = n2[v].find(l);
        if (it != n2[v].end())
          for (VId vn : it->second)
            if (rel.count({un, vn})) matched = true;
        CHECK(matched);
      }
    for (auto& [l, vs] : n2[v])
      for (VId vn : vs) {
        bool matched = false;
        auto it = n1[u].find(l);
        if (it != n1[u].end())
          for (VId un : it->second)
            if (rel.count({un, vn})) matched = true;
        CHECK(matched);
      }
  }
  for (size_t i = 0; i < w.g1.in_markers.size(); ++i) {
    VId r1 = w.g1.roots[i];
    VId r2 = -1;
    for (size_t j = 0; j < w.g2.in_markers.size(); ++j)
      if (w.g2.in_markers[j] == w.g1.in_markers[i]) r2 = w.g2.roots[j];
    REQUIRE(r2 >= 0);
    CHECK(rel.count({r1, r2}));
  }
}

// Independent trace oracle: transitive ε-reachability by iteration, then a
// subset walk over the raw edges. Shares no code with traces().
std::set<Trace> oracle_traces(const Graph& g, int depth) {
  int n = g.nverts;
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (int v = 0; v < n; ++v) reach[v][v] = 1;
  for (auto& [v, u] : g.eps) reach[v][u] = 1;
  for (bool changed = true; changed;) {
    changed = false;
    for (int v = 0; v < n; ++v)
      for (int u = 0; u < n; ++u)
        if (reach[v][u])
          for (int w = 0; w < n; ++w)
            if (reach[u][w] && !reach[v][w]) {
              reach[v][w] = 1;
              changed = true;
            }
  }
  auto close = [&](const std::set<VId>& vs) {
    std::set<VId> c;
    for (VId v : vs)
      for (int u = 0; u < n; ++u)
        if (reach[v][u]) c.insert(u);
    return c;
  };
  std::set<Trace> out;
  Trace tr;
  std::function<void(const std::set<VId>&, int)> go = [&](const std::set<VId>& vs, int left) {
    out.insert(tr);
    if (!left) return;
    std::map<std::string, std::set<VId>> step;
    for (auto& [v, l, u] : g.edges)
      if (vs.count(v)) step[l].insert(u);
    for (auto& [l, us] : step) {
      tr.push_back(l);
      go(close(us), left - 1);
      tr.pop_back();
    }
  };
  go(close({g.roots.at(0)}), depth);
  return out;
}

Trace mkt(std::initializer_list<const char*> ls) {
  Trace t;
  for (auto* l : ls) t.emplace_back(l);
  return t;
}

}  // namespace

TEST_CASE("atomic graphs have the documented shapes") {
  Graph l = label_graph("a");
  CHECK(l.nverts == 2);
  REQUIRE(l.edges.size() == 1);
  CHECK(l.edges[0] == std::tuple<VId, std::string, VId>{0, "a", 1});
  CHECK(l.in_markers == Ctx{"&"});
  CHECK(l.roots == std::vector<VId>{0});
  CHECK(l.outputs == std::vector<std::pair<VId, std::string>>{{1, "&"}});

  Graph nil = nil_graph({"y", "z"});
  CHECK(nil.nverts == 1);
  CHECK(nil.edges.empty());
  CHECK(nil.outputs.empty());
  CHECK(nil.out_markers == Ctx{"y", "z"});

  Graph e = emp_graph({"y"});
  CHECK(e.nverts == 0);
  CHECK(e.in_markers.empty());
  CHECK(e.roots.empty());

  Graph m = man_graph({"y", "z"});
  CHECK(m.nverts == 1);
  CHECK(m.outputs == std::vector<std::pair<VId, std::string>>{{0, "y"}, {0, "z"}});

  Graph mk = marker_graph("y", {"y", "z"});
  CHECK(mk.outputs == std::vector<std::pair<VId, std::string>>{{0, "y"}});
  CHECK(mk.in_markers == Ctx{"&"});
}

TEST_CASE("interpretation orients roots at the target and outputs at the source") {
  Graph g = gr("a:&y", {"y"});
  CHECK(g.in_markers == Ctx{"&"});
  CHECK(g.out_markers == Ctx{"y"});

  Graph chain = eliminate_epsilon(gr("a:b:{}"));
  CHECK(chain.nverts == 3);
  CHECK(chain.edges.size() == 2);
  CHECK(chain.outputs.empty());
}

TEST_CASE("compose splices outputs onto roots") {
  Graph g = compose(gr("a:&y", {"y"}), gr("&y := b:{}"));
  CHECK(agree_all(g, gr("a:b:{}")));
  CHECK(code_of([] { compose(gr("a:&y", {"y"}), gr("b:{}")); }) == Err::MarkerMismatch);
  // marker order may differ as long as the sets agree
  Graph g2 = compose(gr("(a:&y U b:&z)", {"y", "z"}), gr("(&z := {}, &y := c:{})"));
  CHECK(agree_all(g2, gr("(a:c:{} U b:{})")));
}

TEST_CASE("pair graphs concatenate interfaces and reject root clashes") {
  Graph p = pair_graph(gr("&x := a:{}"), gr("&y := b:{}"));
  CHECK(p.in_markers == Ctx{"x", "y"});
  CHECK(p.nverts == 6);  // each side: label edge, its endpoint, the spliced {}
  CHECK(code_of([] { pair_graph(label_graph("a"), label_graph("b")); }) ==
        Err::DuplicateMarker);
}

TEST_CASE("feedback identities") {
  // feeding a bare root output back yields the single-node graph
  CHECK(agree_all(gr("cycle(&)"), gr("{}")));
  // feeding one leg of a two-way output leaves the other leg
  CHECK(agree_all(gr("cycle(!)", {"y"}), gr("&y", {"y"})));
  CHECK(code_of([] { dagger(man_graph({"y", "z"})); }) == Err::ContextSplitError);
}

TEST_CASE("loop goldens") {
  Graph loop = gr("cycle(& := a:&)");
  CHECK(agree_all(loop, gr("a:cycle(& := a:&)")));
  CHECK_FALSE(agree_all(loop, gr("cycle(& := b:&)")));
  CHECK_FALSE(agree_all(gr("a:{}"), gr("b:{}")));
  CHECK(agree_all(gr("{a:{}, a:{}}"), gr("a:{}")));

  Graph tight;  // one vertex with an a-self-loop, built by hand
  tight.nverts = 1;
  tight.edges = {{0, "a", 0}};
  tight.in_markers = {"&"};
  tight.roots = {0};
  CHECK(agree_all(loop, tight));
}

TEST_CASE("epsilon elimination") {
  SUBCASE("result is epsilon-free, bisimilar, and idempotent") {
    std::mt19937 rng(71);
    for (int i = 0; i < 60; ++i) {
      Graph g = rand_graph(rng, {"&"}, {"y"});
      Graph e = eliminate_epsilon(g);
      CHECK(e.eps.empty());
      CHECK(agree_all(g, e));
      CHECK(to_json(eliminate_epsilon(e)) == to_json(e));
    }
  }
  SUBCASE("a pure epsilon cycle collapses to a bare root") {
    Graph g;
    g.nverts = 2;
    g.eps = {{0, 1}, {1, 0}};
    g.in_markers = {"&"};
    g.roots = {0};
    Graph e = eliminate_epsilon(g);
    CHECK(e.nverts == 1);
    CHECK(e.edges.empty());
    CHECK(e.outputs.empty());
  }
  SUBCASE("outputs reachable through epsilons are kept") {
    Graph g;
    g.nverts = 2;
    g.eps = {{0, 1}};
    g.in_markers = {"&"};
    g.roots = {0};
    g.out_markers = {"y"};
    g.outputs = {{1, "y"}};
    Graph e = eliminate_epsilon(g);
    CHECK(e.nverts == 1);
    CHECK(e.outputs == std::vector<std::pair<VId, std::string>>{{0, "y"}});
  }
}

TEST_CASE("the three deciders agree and witnesses are checkable") {
  std::mt19937 rng(1234);
  int yes = 0, no = 0;
  for (int i = 0; i < 120; ++i) {
    Graph g1 = rand_graph(rng, {"&"}, {"y"});
    Graph g2 = (i % 3 == 0) ? eliminate_epsilon(g1) : rand_graph(rng, {"&"}, {"y"});
    bool r = agree_all(g1, g2);
    (r ? yes : no)++;
    if (r) {
      for (BisimAlgo a : {BisimAlgo::NaiveSerial, BisimAlgo::NaiveParallel, BisimAlgo::Partition}) {
        BisimWitness w;
        REQUIRE(bisimilar_with(g1, g2, a, &w));
        check_witness(w);
      }
    }
  }
  // the sample must exercise both outcomes to mean anything
  CHECK(yes > 10);
  CHECK(no > 10);
}

TEST_CASE("bisimilarity is an equivalence") {
  std::mt19937 rng(99);
  for (int i = 0; i < 40; ++i) {
    Graph g = rand_graph(rng, {"&"}, {});
    CHECK(agree_all(g, g));
    Graph e = eliminate_epsilon(g);
    Graph padded = g;  // unreachable junk must not matter
    padded.nverts += 2;
    padded.edges.emplace_back(padded.nverts - 2, "c", padded.nverts - 1);
    CHECK(agree_all(g, e));
    CHECK(agree_all(e, padded));
    CHECK(agree_all(g, padded));  // transitivity instance
    Graph h = rand_graph(rng, {"&"}, {});
    CHECK(bisimilar(g, h) == bisimilar(h, g));
  }
}

TEST_CASE("root marker order is irrelevant to comparison") {
  Graph g = gr("(&x := a:{}, &y := b:{})");
  Graph swapped = g;
  std::swap(swapped.in_markers[0], swapped.in_markers[1]);
  std::swap(swapped.roots[0], swapped.roots[1]);
  CHECK(g.in_markers != swapped.in_markers);
  CHECK(agree_all(g, swapped));
}

TEST_CASE("comparison requires matching interfaces") {
  CHECK(code_of([] { bisimilar(gr("a:{}"), gr("a:&y", {"y"})); }) == Err::InterfaceMismatch);
  CHECK(code_of([] {
          bisimilar(gr("a:{}"), gr("(&x := a:{}, &y := a:{})"));
        }) == Err::InterfaceMismatch);
}

TEST_CASE("composition laws hold up to bisimilarity") {
  std::mt19937 rng(2024);
  Ctx X = {"&"}, Z = {"z1", "z2"}, Y = {"y"};
  for (int i = 0; i < 25; ++i) {
    Graph g1 = rand_graph(rng, X, Z);
    Graph g2 = rand_graph(rng, Z, Y);
    Graph g3 = rand_graph(rng, Y, {});
    CHECK(agree_all(compose(compose(g1, g2), g3), compose(g1, compose(g2, g3))));
    CHECK(agree_all(compose(g1, identity_graph(Z)), g1));
    CHECK(agree_all(compose(identity_graph(X), g1), g1));
  }
}

TEST_CASE("projections select pair components") {
  std::mt19937 rng(7);
  Ctx X1 = {"x"}, X2 = {"y", "z"}, W = {"w"};
  for (int i = 0; i < 25; ++i) {
    Graph ga = rand_graph(rng, X1, W);
    Graph gb = rand_graph(rng, X2, W);
    Graph paired = pair_graph(ga, gb);
    CHECK(agree_all(compose(interpret(proj_left(X1, X2)), paired), ga));
    CHECK(agree_all(compose(interpret(proj_right(X1, X2)), paired), gb));
  }
}

TEST_CASE("feedback satisfies the fixpoint law") {
  std::mt19937 rng(31337);
  Ctx X = {"&"}, Y = {"y1", "y2"};
  Ctx YX = Y;
  YX.push_back("&");
  for (int i = 0; i < 25; ++i) {
    Graph g = rand_graph(rng, X, YX);
    Graph fed = dagger(g);
    Graph unrolled = compose(g, pair_graph(identity_graph(Y), fed));
    CHECK(agree_all(fed, unrolled));
  }
}

TEST_CASE("substitution corresponds to composition with a payload tuple") {
  struct Case {
    std::string t;
    Ctx src;
    std::vector<std::pair<std::string, std::string>> payloads;  // marker -> closed term
  };
  std::vector<Case> cases = {
      {"a:&y", {"y"}, {{"y", "c:{}"}}},
      {"(a:&y1 U b:&y2)", {"y1", "y2"}, {{"y1", "c:{}"}, {"y2", "cycle(& := d:&)"}}},
      {"cycle(& := (a:& U b:&y))", {"y"}, {{"y", "c:{}"}}},
      {"(&y1 U &y2)", {"y1", "y2"}, {{"y1", "a:{}"}, {"y2", "a:{}"}}},
      {"a:(b:&y U &y)", {"y"}, {{"y", "cycle(& := c:&)"}}},
  };
  for (auto& c : cases) {
    CAPTURE(c.t);
    Tc t = tc(c.t, c.src);
    SubstMap sub;
    std::vector<Tc> tuple;
    for (auto& [m, s] : c.payloads) {
      Tc img = tc(s);
      sub[m] = img;
      tuple.push_back(rename_target(img, {m}));
    }
    Graph lhs = interpret(substitute(t, sub));
    Graph rhs = compose(interpret(t), interpret(t_pair(tuple)));
    CHECK(agree_all(lhs, rhs));
  }
}

TEST_CASE("trace goldens") {
  CHECK(traces(gr("cycle(& := a:&)"), 3) ==
        std::set<Trace>{mkt({}), mkt({"a"}), mkt({"a", "a"}), mkt({"a", "a", "a"})});
  CHECK(traces(gr("{}"), 5) == std::set<Trace>{mkt({})});
  CHECK(traces(gr("(a:b:{} U a:c:{})"), 2) ==
        std::set<Trace>{mkt({}), mkt({"a"}), mkt({"a", "b"}), mkt({"a", "c"})});
  CHECK(traces(gr("a:b:{}"), 1) == std::set<Trace>{mkt({}), mkt({"a"})});
  CHECK(code_of([] { traces(gr("a:&y", {"y"}), 3); }) == Err::NotClosed);
  CHECK(code_of([] { traces(gr("(&x := {}, &y := {})"), 3); }) == Err::NotClosed);
}

TEST_CASE("traces match an independent oracle on random closed graphs") {
  std::mt19937 rng(5150);
  for (int i = 0; i < 60; ++i) {
    Graph g = rand_graph(rng, {"&"}, {});
    CHECK(traces(g, 4) == oracle_traces(g, 4));
  }
}

TEST_CASE("bisimilar graphs have equal trace sets") {
  std::vector<std::pair<Graph, Graph>> pairs;
  pairs.emplace_back(gr("cycle(& := a:&)"), gr("a:cycle(& := a:&)"));
  pairs.emplace_back(gr("{a:{}, a:{}}"), gr("a:{}"));
  std::mt19937 rng(404);
  for (int i = 0; i < 10; ++i) {
    Graph g = rand_graph(rng, {"&"}, {});
    pairs.emplace_back(g, eliminate_epsilon(g));
  }
  for (auto& [g1, g2] : pairs) {
    REQUIRE(bisimilar(g1, g2));
    CHECK(traces(g1, 8) == traces(g2, 8));
  }
}

TEST_CASE("dot rendering golden") {
  CHECK(to_dot(label_graph("a")) ==
        "digraph G {\n"
        "  rankdir=LR;\n"
        "  node [shape=circle];\n"
        "  v0 [label=\"0\"];\n"
        "  v1 [label=\"1\"];\n"
        "  v0 -> v1 [label=\"a\"];\n"
        "  in0 [shape=none, label=\"&\"];\n"
        "  in0 -> v0;\n"
        "  out0 [shape=none, label=\"&\"];\n"
        "  v1 -> out0 [style=dotted];\n"
        "}\n");
}

TEST_CASE("json rendering golden") {
  auto j = nlohmann::json::parse(to_json(gr("a:&y", {"y"})));
  nlohmann::json want = {
      {"vertices", {0, 1, 2}},
      {"edges", {{0, "a", 1}}},
      {"eps", {{1, 2}}},
      {"roots", {{"&", 0}}},
      {"outputs", {{2, "y"}}},
  };
  CHECK(j == want);
  CHECK(to_json(marker_graph("y", {"y"})) ==
        "{\n"
        "  \"edges\": [],\n"
        "  \"eps\": [],\n"
        "  \"outputs\": [\n"
        "    [\n"
        "      0,\n"
        "      \"y\"\n"
        "    ]\n"
        "  ],\n"
        "  \"roots\": {\n"
        "    \"&\": 0\n"
        "  },\n"
        "  \"vertices\": [\n"
        "    0\n"
        "  ]\n"
        "}");
}

TEST_CASE("shared example interprets and loops where expected") {
  Tc t = tc("a:(b:&x U c:&x) @ cycle(&x := d:(p:&y1 U q:&y2 U r:&x))", {"y1", "y2"});
  Graph g = interpret(t);
  CHECK(g.in_markers == Ctx{"&"});
  CHECK(g.out_markers == Ctx{"y1", "y2"});
  // closing the outputs with empty graphs gives a graph whose traces show the
  // d-loop entered through either branch
  Graph closed = compose(g, gr("(&y1 := {}, &y2 := {})"));
  auto ts = traces(closed, 4);
  CHECK(ts.count(mkt({"a", "b", "d", "p"})));
  CHECK(ts.count(mkt({"a", "c", "d", "r"})));
  CHECK_FALSE(ts.count(mkt({"a", "d"})));
}
