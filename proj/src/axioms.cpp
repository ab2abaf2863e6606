#include "uncal/axioms.hpp"

#include <algorithm>
#include <exception>
#include <memory>
#include <random>

#include "json.hpp"
#include "uncal/graph.hpp"

namespace uncal {

namespace {

std::string ctx_str(const Ctx& c) {
  std::string s = "<";
  for (size_t i = 0; i < c.size(); ++i) {
    if (i) s += ",";
    s += c[i];
  }
  return s + ">";
}

Rc R(const Tc& t) { return to_raw(t); }

// Typed definition `y := t` for substitution images.
Tc def_t(const std::string& y, const Tc& t) {
  return infer(mk_def(y, to_raw(t)), t->src);
}

Equation eq_typed(const Tc& lhs, const Tc& rhs) {
  if (lhs->src != rhs->src || lhs->tgt != rhs->tgt)
    raise(Err::Internal, "schema built a mismatched equation: " +
                             ctx_str(lhs->src) + "|-" + ctx_str(lhs->tgt) +
                             " vs " + ctx_str(rhs->src) + "|-" +
                             ctx_str(rhs->tgt));
  return Equation{lhs->src, lhs, rhs, lhs->tgt};
}

Equation eq_raw(const Ctx& src, const Rc& lhs, const Rc& rhs) {
  return eq_typed(infer(lhs, src), infer(rhs, src));
}

// ---------------------------------------------------------------------------
// Random term generation.

// Smallest node count inhabiting a judgment with the given target: a leaf for
// <&>, () for <>, a definition per named root, plus the surrounding tuple.
int min_for(const Ctx& tgt) {
  if (tgt.empty()) return 1;
  if (tgt.size() == 1) return tgt[0] == "&" ? 1 : 2;
  int s = 1;
  for (const auto& m : tgt) s += (m == "&") ? 1 : 2;
  return s;
}

struct Gen {
  std::mt19937_64 rng;
  std::vector<std::string> forbidden;  // marker names the caller already uses
  int fresh = 0;

  int u(int lo, int hi) { return lo + (int)(rng() % (std::uint64_t)(hi - lo + 1)); }

  std::string fresh_marker() {
    for (;;) {
      std::string m = "g" + std::to_string(++fresh);
      if (std::find(forbidden.begin(), forbidden.end(), m) == forbidden.end())
        return m;
    }
  }

  std::string label() { return std::string(1, "abc"[(size_t)u(0, 2)]); }

  // &-typed term over `src` within `budget` nodes (budget >= 1).
  Rc amp(const Ctx& src, int budget) {
    struct Opt { int tag, w; };
    std::vector<Opt> opts;
    opts.push_back({0, budget <= 2 ? 4 : 1});  // leaf
    if (budget >= 2) opts.push_back({1, 5});   // label edge
    if (budget >= 5) opts.push_back({2, 3});   // union
    if (budget >= 5) opts.push_back({3, 2});   // one-marker cycle
    if (budget >= 4) opts.push_back({4, 2});   // composition through a definition
    if (budget >= 9) opts.push_back({5, 1});   // two-marker cycle
    int total = 0;
    for (const auto& o : opts) total += o.w;
    int pick = u(1, total), tag = 0;
    for (const auto& o : opts) {
      pick -= o.w;
      if (pick <= 0) { tag = o.tag; break; }
    }
    switch (tag) {
      case 0:
        if (src.empty() || u(0, 1) == 0) return mk_nil();
        return mk_mark(src[(size_t)u(0, (int)src.size() - 1)]);
      case 1:
        return mk_edge(label(), amp(src, budget - 1));
      case 2: {
        int rest = budget - 3, b1 = u(1, rest - 1);
        return mk_union(amp(src, b1), amp(src, rest - b1));
      }
      case 3: {
        std::string x = fresh_marker();
        Ctx inner = src;
        inner.push_back(x);
        return mk_compose(mk_mark(x), mk_cycle(mk_def(x, amp(inner, budget - 4))));
      }
      case 4: {
        std::string w = fresh_marker();
        int rest = budget - 2, b1 = u(1, rest - 1);
        return mk_compose(amp(Ctx{w}, b1), mk_def(w, amp(src, rest - b1)));
      }
      default: {
        std::string x1 = fresh_marker(), x2 = fresh_marker();
        Ctx inner = src;
        inner.push_back(x1);
        inner.push_back(x2);
        int rest = budget - 5;
        int bh = u(1, rest - 2), r2 = rest - bh, b1 = u(1, r2 - 1);
        return mk_compose(amp(Ctx{x1, x2}, bh),
                          mk_cycle(mk_pair({mk_def(x1, amp(inner, b1)),
                                            mk_def(x2, amp(inner, r2 - b1))})));
      }
    }
  }

  // Term with no roots: () itself or () over a discarded &-typed term.
  Rc zero(const Ctx& src, int budget) {
    if (budget >= 3 && u(0, 1) == 1)
      return mk_compose(mk_emp(), amp(src, budget - 2));
    return mk_emp();
  }

  Rc any(const Ctx& src, const Ctx& tgt, int budget) {
    if (tgt.empty()) return zero(src, budget);
    if (tgt.size() == 1) {
      if (tgt[0] == "&") return amp(src, budget);
      return mk_def(tgt[0], amp(src, budget - 1));
    }
    int k = (int)tgt.size();
    std::vector<int> bs(static_cast<size_t>(k));
    int spare = budget - 1;
    for (int i = 0; i < k; ++i) {
      bs[(size_t)i] = tgt[(size_t)i] == "&" ? 1 : 2;
      spare -= bs[(size_t)i];
    }
    while (spare > 0) {
      bs[(size_t)u(0, k - 1)] += 1;
      --spare;
    }
    std::vector<Rc> kids;
    for (int i = 0; i < k; ++i)
      kids.push_back(any(src, Ctx{tgt[(size_t)i]}, bs[(size_t)i]));
    return mk_pair(std::move(kids));
  }
};

// ---------------------------------------------------------------------------
// Schema builders. Each fixes a judgment shape and returns the law at it.

AxiomSchema sub_schema(const Ctx& y, const Ctx& x, const Ctx& z) {
  std::vector<Slot> slots{{"t", y, x}};
  for (size_t i = 0; i < y.size(); ++i)
    slots.push_back({"s" + std::to_string(i + 1), z, {"&"}});
  auto build = [y, z](const Assignment& a) {
    const Tc& t = a.at("t");
    std::vector<Rc> defs;
    SubstMap sub;
    for (size_t i = 0; i < y.size(); ++i) {
      const Tc& si = a.at("s" + std::to_string(i + 1));
      defs.push_back(mk_def(y[i], R(si)));
      sub.emplace(y[i], def_t(y[i], si));
    }
    Tc lhs = infer(mk_compose(R(t), mk_pair(std::move(defs))), z);
    Tc rhs = y.empty() ? weaken(t, z) : substitute(t, sub);
    return eq_typed(lhs, rhs);
  };
  return {"sub", std::move(slots), std::move(build)};
}

AxiomSchema sp_schema(const Ctx& x, const Ctx& y, const Ctx& z) {
  Ctx xy = ctx_concat(x, y);
  std::vector<Slot> slots{{"t", z, xy}};
  auto build = [x, y, xy, z](const Assignment& a) {
    const Tc& t = a.at("t");
    Rc lhs = mk_pair({mk_compose(R(proj(xy, x)), R(t)),
                      mk_compose(R(proj(xy, y)), R(t))});
    return eq_raw(z, lhs, R(t));
  };
  return {"SP", std::move(slots), std::move(build)};
}

AxiomSchema eta_man_schema() {
  auto build = [](const Assignment&) {
    return eq_raw({"x", "y"}, mk_union(mk_mark("x"), mk_mark("y")), mk_man());
  };
  return {"eta_man", {}, std::move(build)};
}

AxiomSchema fix_schema(const Ctx& y, const Ctx& x) {
  std::vector<Slot> slots{{"t", ctx_concat(y, x), x}};
  auto build = [y](const Assignment& a) {
    const Tc& t = a.at("t");
    Rc rhs = mk_compose(R(t), mk_pair({R(identity_term(y)), mk_cycle(R(t))}));
    return eq_raw(y, mk_cycle(R(t)), rhs);
  };
  return {"fix", std::move(slots), std::move(build)};
}

AxiomSchema nat_schema(const Ctx& y, const Ctx& x, const Ctx& z) {
  std::vector<Slot> slots{{"t", ctx_concat(y, x), x}, {"s", z, y}};
  auto build = [x, z](const Assignment& a) {
    const Tc& t = a.at("t");
    const Tc& s = a.at("s");
    Rc lhs = mk_compose(mk_cycle(R(t)), R(s));
    Rc rhs = mk_cycle(mk_compose(R(t), R(times(s, identity_term(x)))));
    return eq_raw(z, lhs, rhs);
  };
  return {"nat", std::move(slots), std::move(build)};
}

AxiomSchema dinat_schema(const Ctx& x, const Ctx& y, const Ctx& z) {
  std::vector<Slot> slots{{"s", z, x}, {"t", ctx_concat(y, x), z}};
  auto build = [y](const Assignment& a) {
    const Tc& s = a.at("s");
    const Tc& t = a.at("t");
    Rc lhs = mk_cycle(mk_compose(R(s), R(t)));
    Rc rhs = mk_compose(
        R(s), mk_cycle(mk_compose(R(t), R(times(identity_term(y), s)))));
    return eq_raw(y, lhs, rhs);
  };
  return {"dinat", std::move(slots), std::move(build)};
}

AxiomSchema bekic_schema(const Ctx& z, const Ctx& x, const Ctx& y) {
  Ctx zxy = ctx_concat(ctx_concat(z, x), y);
  std::vector<Slot> slots{{"t", zxy, x}, {"s", zxy, y}};
  auto build = [z, x](const Assignment& a) {
    const Tc& t = a.at("t");
    const Tc& s = a.at("s");
    Ctx zx = ctx_concat(z, x);
    Rc lhs = mk_cycle(mk_pair({R(t), R(s)}));
    Rc inner = mk_pair({R(identity_term(zx)), mk_cycle(R(s))});
    Rc cyt = mk_cycle(mk_compose(R(t), inner));
    Rc rhs = mk_compose(mk_pair({R(proj(zx, x)), mk_cycle(R(s))}),
                        mk_pair({R(identity_term(z)), cyt}));
    return eq_raw(z, lhs, rhs);
  };
  return {"bekic", std::move(slots), std::move(build)};
}

AxiomSchema c1_schema() {
  auto build = [](const Assignment&) {
    return eq_raw({}, mk_cycle(mk_mark("&")), mk_nil());
  };
  return {"c1", {}, std::move(build)};
}

AxiomSchema c2_schema() {
  auto build = [](const Assignment&) {
    return eq_raw({"y"}, mk_cycle(mk_man()), mk_mark("y"));
  };
  return {"c2", {}, std::move(build)};
}

AxiomSchema unitL_man_schema() {
  auto build = [](const Assignment&) {
    Tc nil0 = infer(mk_nil(), {});
    Rc lhs = mk_compose(mk_man(), R(times(nil0, identity_term({"x"}))));
    return eq_raw({"x"}, lhs, mk_mark("x"));
  };
  return {"unitL_man", {}, std::move(build)};
}

AxiomSchema unitR_man_schema() {
  auto build = [](const Assignment&) {
    Tc nil0 = infer(mk_nil(), {});
    Rc lhs = mk_compose(mk_man(), R(times(identity_term({"x"}), nil0)));
    return eq_raw({"x"}, lhs, mk_mark("x"));
  };
  return {"unitR_man", {}, std::move(build)};
}

AxiomSchema assoc_man_schema() {
  auto build = [](const Assignment&) {
    Tc m_yz = infer(mk_man(), {"y", "z"});
    Tc m_xy = infer(mk_man(), {"x", "y"});
    Rc lhs = mk_compose(mk_man(), R(times(identity_term({"x"}), m_yz)));
    Rc rhs = mk_compose(mk_man(), R(times(m_xy, identity_term({"z"}))));
    return eq_raw({"x", "y", "z"}, lhs, rhs);
  };
  return {"assoc_man", {}, std::move(build)};
}

AxiomSchema com_man_schema() {
  auto build = [](const Assignment&) {
    Rc lhs = mk_compose(mk_man(), R(swap_term({"x"}, {"y"})));
    return eq_raw({"x", "y"}, lhs, mk_man());
  };
  return {"com_man", {}, std::move(build)};
}

AxiomSchema degen_schema() {
  auto build = [](const Assignment&) {
    return eq_raw({"x"}, mk_union(mk_mark("x"), mk_mark("x")), mk_mark("x"));
  };
  return {"degen", {}, std::move(build)};
}

AxiomSchema tmnl_schema(const Ctx& y) {
  std::vector<Slot> slots{{"t", y, {}}};
  auto build = [y](const Assignment& a) {
    return eq_raw(y, R(a.at("t")), mk_emp());
  };
  return {"tmnl", std::move(slots), std::move(build)};
}

AxiomSchema fst_schema(const Ctx& x, const Ctx& y, const Ctx& z) {
  Ctx xy = ctx_concat(x, y);
  std::vector<Slot> slots{{"s", z, x}, {"t", z, y}};
  auto build = [x, xy, z](const Assignment& a) {
    Rc lhs = mk_compose(R(proj(xy, x)),
                        mk_pair({R(a.at("s")), R(a.at("t"))}));
    return eq_raw(z, lhs, R(a.at("s")));
  };
  return {"fst", std::move(slots), std::move(build)};
}

AxiomSchema snd_schema(const Ctx& x, const Ctx& y, const Ctx& z) {
  Ctx xy = ctx_concat(x, y);
  std::vector<Slot> slots{{"s", z, x}, {"t", z, y}};
  auto build = [y, xy, z](const Assignment& a) {
    Rc lhs = mk_compose(R(proj(xy, y)),
                        mk_pair({R(a.at("s")), R(a.at("t"))}));
    return eq_raw(z, lhs, R(a.at("t")));
  };
  return {"snd", std::move(slots), std::move(build)};
}

AxiomSchema dpair_schema(const Ctx& x1, const Ctx& x2, const Ctx& y,
                         const Ctx& z) {
  std::vector<Slot> slots{{"t1", y, x1}, {"t2", y, x2}, {"s", z, y}};
  auto build = [z](const Assignment& a) {
    Rc lhs = mk_compose(mk_pair({R(a.at("t1")), R(a.at("t2"))}), R(a.at("s")));
    Rc rhs = mk_pair({mk_compose(R(a.at("t1")), R(a.at("s"))),
                      mk_compose(R(a.at("t2")), R(a.at("s")))});
    return eq_raw(z, lhs, rhs);
  };
  return {"dpair", std::move(slots), std::move(build)};
}

AxiomSchema fsi_schema(const Ctx& x, const Ctx& y) {
  auto build = [x, y](const Assignment&) {
    Ctx xy = ctx_concat(x, y);
    Rc lhs = mk_pair({R(proj(xy, x)), R(proj(xy, y))});
    return eq_raw(xy, lhs, R(identity_term(xy)));
  };
  return {"fsi", {}, std::move(build)};
}

AxiomSchema bmul_schema() {
  auto build = [](const Assignment&) {
    Tc empx = infer(mk_emp(), {"x"});
    Tc empy = infer(mk_emp(), {"y"});
    Rc rhs = mk_compose(mk_emp(), mk_man());
    return eq_raw({"x", "y"}, R(times(empx, empy)), rhs);
  };
  return {"bmul", {}, std::move(build)};
}

AxiomSchema bcomul_schema() {
  auto build = [](const Assignment&) {
    Tc nil0 = infer(mk_nil(), {});
    Rc lhs = mk_compose(R(diagonal({"&"})), mk_nil());
    return eq_raw({}, lhs, R(times(nil0, nil0)));
  };
  return {"bcomul", {}, std::move(build)};
}

AxiomSchema unR_at_schema(const Ctx& y, const Ctx& x) {
  std::vector<Slot> slots{{"t", y, x}};
  auto build = [y](const Assignment& a) {
    Rc lhs = mk_compose(R(a.at("t")), R(identity_term(y)));
    return eq_raw(y, lhs, R(a.at("t")));
  };
  return {"unR_at", std::move(slots), std::move(build)};
}

AxiomSchema unL_at_schema(const Ctx& y, const Ctx& x) {
  std::vector<Slot> slots{{"t", y, x}};
  auto build = [y, x](const Assignment& a) {
    Rc lhs = mk_compose(R(identity_term(x)), R(a.at("t")));
    return eq_raw(y, lhs, R(a.at("t")));
  };
  return {"unL_at", std::move(slots), std::move(build)};
}

AxiomSchema assoc_at_schema(const Ctx& x, const Ctx& z2, const Ctx& z1,
                            const Ctx& y) {
  std::vector<Slot> slots{{"s", z2, x}, {"t", z1, z2}, {"u", y, z1}};
  auto build = [y](const Assignment& a) {
    Rc lhs = mk_compose(mk_compose(R(a.at("s")), R(a.at("t"))), R(a.at("u")));
    Rc rhs = mk_compose(R(a.at("s")), mk_compose(R(a.at("t")), R(a.at("u"))));
    return eq_raw(y, lhs, rhs);
  };
  return {"assoc_at", std::move(slots), std::move(build)};
}

AxiomSchema bunit_schema() {
  auto build = [](const Assignment&) {
    return eq_raw({}, mk_compose(mk_emp(), mk_nil()), R(identity_term({})));
  };
  return {"bunit", {}, std::move(build)};
}

AxiomSchema compa_schema() {
  auto build = [](const Assignment&) {
    Tc dd = times(diagonal({"x"}), diagonal({"y"}));
    Tc mid = times(times(identity_term({"x$1"}), swap_term({"x$2"}, {"y$1"})),
                   identity_term({"y$2"}));
    Tc mm = times(infer(mk_man(), {"x$1", "y$1"}),
                  infer(mk_man(), {"x$2", "y$2"}));
    Rc lhs = mk_compose(R(diagonal({"&"})), mk_man());
    Rc rhs = mk_compose(R(mm), mk_compose(R(mid), R(dd)));
    return eq_raw({"x", "y"}, lhs, rhs);
  };
  return {"compa", {}, std::move(build)};
}

AxiomSchema comm_u_schema(const Ctx& y) {
  std::vector<Slot> slots{{"s", y, {"&"}}, {"t", y, {"&"}}};
  auto build = [y](const Assignment& a) {
    return eq_raw(y, mk_union(R(a.at("s")), R(a.at("t"))),
                  mk_union(R(a.at("t")), R(a.at("s"))));
  };
  return {"comm_u", std::move(slots), std::move(build)};
}

AxiomSchema unitL_u_schema(const Ctx& y) {
  std::vector<Slot> slots{{"t", y, {"&"}}};
  auto build = [y](const Assignment& a) {
    return eq_raw(y, mk_union(mk_nil(), R(a.at("t"))), R(a.at("t")));
  };
  return {"unitL_u", std::move(slots), std::move(build)};
}

AxiomSchema unitR_u_schema(const Ctx& y) {
  std::vector<Slot> slots{{"t", y, {"&"}}};
  auto build = [y](const Assignment& a) {
    return eq_raw(y, mk_union(R(a.at("t")), mk_nil()), R(a.at("t")));
  };
  return {"unitR_u", std::move(slots), std::move(build)};
}

AxiomSchema assoc_u_schema(const Ctx& y) {
  std::vector<Slot> slots{{"s", y, {"&"}}, {"t", y, {"&"}}, {"u", y, {"&"}}};
  auto build = [y](const Assignment& a) {
    Rc lhs = mk_union(mk_union(R(a.at("s")), R(a.at("t"))), R(a.at("u")));
    Rc rhs = mk_union(R(a.at("s")), mk_union(R(a.at("t")), R(a.at("u"))));
    return eq_raw(y, lhs, rhs);
  };
  return {"assoc_u", std::move(slots), std::move(build)};
}

AxiomSchema degen_u_schema(const Ctx& y) {
  std::vector<Slot> slots{{"t", y, {"&"}}};
  auto build = [y](const Assignment& a) {
    return eq_raw(y, mk_union(R(a.at("t")), R(a.at("t"))), R(a.at("t")));
  };
  return {"degen_u", std::move(slots), std::move(build)};
}

}  // namespace

std::vector<std::string> axg_names() {
  return {"sub",  "SP",    "eta_man",   "fix",       "nat",
          "dinat", "bekic", "CI",        "c1",        "c2",
          "unitL_man", "unitR_man", "assoc_man", "com_man", "degen"};
}

std::vector<std::string> derived_names() {
  return {"tmnl",  "fst",    "snd",     "dpair",  "fsi",    "bmul",
          "bcomul", "unR_at", "unL_at",  "assoc_at", "bunit", "compa",
          "comm_u", "unitL_u", "unitR_u", "assoc_u", "degen_u"};
}

AxiomSchema ci_schema(const CIInstance& inst) {
  int m = inst.m;
  if (m < 1 || (int)inst.rho.size() != m)
    raise(Err::SlotJudgmentMismatch,
          "CI instance needs m >= 1 and exactly m index-maps");
  for (const auto& r : inst.rho) {
    if ((int)r.size() != m)
      raise(Err::SlotJudgmentMismatch, "CI index-map must have length m");
    for (int e : r)
      if (e < 1 || e > m)
        raise(Err::SlotJudgmentMismatch,
              "CI index-map entries must lie in 1.." + std::to_string(m));
  }
  Ctx y;
  for (int j = 1; j <= m; ++j) y.push_back("y" + std::to_string(j));
  Ctx x = inst.x;
  Ctx xy = ctx_concat(x, y);  // also rejects x markers clashing with y1..ym
  std::vector<Slot> slots{{"t", xy, {"&"}}};
  auto rho = inst.rho;
  auto build = [m, x, y, rho](const Assignment& a) {
    const Tc& t = a.at("t");
    std::vector<Rc> delta_kids;
    for (int j = 0; j < m; ++j)
      delta_kids.push_back(mk_def(y[(size_t)j], mk_mark("&")));
    Rc delta = mk_pair(delta_kids);
    Tc delta_t = infer(delta, {"&"});
    std::vector<Rc> comps;
    for (int i = 0; i < m; ++i) {
      std::vector<Rc> rho_kids;
      for (int j = 0; j < m; ++j)
        rho_kids.push_back(
            mk_def(y[(size_t)j], mk_mark(y[(size_t)(rho[(size_t)i][(size_t)j] - 1)])));
      Tc rho_t = infer(mk_pair(std::move(rho_kids)), y);
      comps.push_back(mk_def(
          y[(size_t)i], mk_compose(R(t), R(times(identity_term(x), rho_t)))));
    }
    Rc lhs = mk_cycle(mk_pair(std::move(comps)));
    Rc rhs = mk_compose(
        delta,
        mk_cycle(mk_compose(R(t), R(times(identity_term(x), delta_t)))));
    return eq_raw(x, lhs, rhs);
  };
  return {"CI", std::move(slots), std::move(build)};
}

AxiomSchema schema_by_name(const std::string& name, std::uint64_t shape) {
  std::mt19937_64 rng(0x1234abcdULL ^ (shape * 0x9e3779b97f4a7c15ULL + 0x51ULL));
  bool canon = shape == 0;
  auto u = [&rng](int lo, int hi) {
    return lo + (int)(rng() % (std::uint64_t)(hi - lo + 1));
  };
  auto pool = [](const char* p, int n) {
    Ctx c;
    for (int i = 1; i <= n; ++i) c.push_back(std::string(p) + std::to_string(i));
    return c;
  };
  // possibly-empty plain context
  auto opt_ctx = [&](const char* p, int canon_n) {
    return pool(p, canon ? canon_n : u(0, 2));
  };
  // nonempty plain context
  auto pos_ctx = [&](const char* p, int canon_n) {
    return pool(p, canon ? canon_n : u(1, 2));
  };
  // nonempty context a cycle binds: <&>, <p1>, or <p1,p2>
  auto cyc_ctx = [&](const char* p, bool canon_amp) {
    if (canon) return canon_amp ? Ctx{"&"} : pool(p, 1);
    int k = u(1, 2);
    if (k == 1 && u(0, 1) == 1) return Ctx{"&"};
    return pool(p, k);
  };
  // general target context, possibly empty or mentioning &
  auto tgt_ctx = [&](const char* p, const Ctx& canon_v) {
    if (canon) return canon_v;
    switch (u(0, 4)) {
      case 0: return Ctx{};
      case 1: return Ctx{"&"};
      case 2: return pool(p, 1);
      case 3: return pool(p, 2);
      default: {
        Ctx c = pool(p, 1);
        c.push_back("&");
        return c;
      }
    }
  };

  if (name == "sub") {
    int n = canon ? 1 : u(0, 3);
    return sub_schema(pool("y", n), tgt_ctx("x", {"&"}), opt_ctx("z", 0));
  }
  if (name == "SP") {
    Ctx x = canon ? Ctx{"&$1"} : pos_ctx("x", 1);
    Ctx y = canon ? Ctx{"&$2"} : opt_ctx("y", 0);
    return sp_schema(x, y, opt_ctx("z", 0));
  }
  if (name == "eta_man") return eta_man_schema();
  if (name == "fix") return fix_schema(opt_ctx("y", 0), cyc_ctx("x", true));
  if (name == "nat")
    return nat_schema(opt_ctx("y", 1), cyc_ctx("x", true), opt_ctx("z", 1));
  if (name == "dinat")
    return dinat_schema(cyc_ctx("x", true), opt_ctx("y", 1), cyc_ctx("z", false));
  if (name == "bekic")
    return bekic_schema(opt_ctx("z", 0), cyc_ctx("x", false), pos_ctx("y", 1));
  if (name == "CI") {
    CIInstance inst;
    inst.m = canon ? 1 : u(1, 3);
    for (int i = 0; i < inst.m; ++i) {
      std::vector<int> r;
      for (int j = 0; j < inst.m; ++j) r.push_back(canon ? 1 : u(1, inst.m));
      inst.rho.push_back(std::move(r));
    }
    inst.x = opt_ctx("x", 0);
    return ci_schema(inst);
  }
  if (name == "c1") return c1_schema();
  if (name == "c2") return c2_schema();
  if (name == "unitL_man") return unitL_man_schema();
  if (name == "unitR_man") return unitR_man_schema();
  if (name == "assoc_man") return assoc_man_schema();
  if (name == "com_man") return com_man_schema();
  if (name == "degen") return degen_schema();
  if (name == "tmnl") return tmnl_schema(opt_ctx("y", 1));
  if (name == "fst")
    return fst_schema(tgt_ctx("x", {"&"}), opt_ctx("y", 1), opt_ctx("z", 0));
  if (name == "snd")
    return snd_schema(opt_ctx("x", 1), tgt_ctx("y", {"&"}), opt_ctx("z", 0));
  if (name == "dpair")
    return dpair_schema(tgt_ctx("x", {"&"}), opt_ctx("v", 1), opt_ctx("y", 1),
                        opt_ctx("z", 0));
  if (name == "fsi") return fsi_schema(pos_ctx("x", 1), pos_ctx("y", 1));
  if (name == "bmul") return bmul_schema();
  if (name == "bcomul") return bcomul_schema();
  if (name == "unR_at")
    return unR_at_schema(opt_ctx("y", 1), tgt_ctx("x", {"&"}));
  if (name == "unL_at")
    return unL_at_schema(opt_ctx("y", 1), tgt_ctx("x", {"&"}));
  if (name == "assoc_at")
    return assoc_at_schema(tgt_ctx("x", {"&"}), pos_ctx("z", 1),
                           pos_ctx("v", 1), opt_ctx("y", 1));
  if (name == "bunit") return bunit_schema();
  if (name == "compa") return compa_schema();
  if (name == "comm_u") return comm_u_schema(opt_ctx("y", 1));
  if (name == "unitL_u") return unitL_u_schema(opt_ctx("y", 1));
  if (name == "unitR_u") return unitR_u_schema(opt_ctx("y", 1));
  if (name == "assoc_u") return assoc_u_schema(opt_ctx("y", 1));
  if (name == "degen_u") return degen_u_schema(opt_ctx("y", 1));
  raise(Err::Internal, "unknown schema name: " + name);
}

Equation instantiate(const AxiomSchema& schema, const Assignment& a) {
  for (const auto& s : schema.slots) {
    auto it = a.find(s.name);
    if (it == a.end())
      raise(Err::SlotJudgmentMismatch,
            "schema " + schema.name + ": missing filler for slot " + s.name);
    const Tc& t = it->second;
    if (!t) raise(Err::SlotJudgmentMismatch,
                  "schema " + schema.name + ": null filler for slot " + s.name);
    if (t->src != s.src || t->tgt != s.tgt)
      raise(Err::SlotJudgmentMismatch,
            "schema " + schema.name + ": slot " + s.name + " expects " +
                ctx_str(s.src) + " |- _ : " + ctx_str(s.tgt) + ", got " +
                ctx_str(t->src) + " |- _ : " + ctx_str(t->tgt));
  }
  if (a.size() != schema.slots.size())
    raise(Err::SlotJudgmentMismatch,
          "schema " + schema.name + ": assignment names a slot the schema lacks");
  return schema.build(a);
}

Tc random_term(const Ctx& source, const Ctx& target, int size,
               std::uint64_t seed) {
  check_ctx(source);
  check_ctx(target);
  if (size < 1) raise(Err::Unsatisfiable, "size must be at least 1");
  if (size < min_for(target))
    raise(Err::Unsatisfiable, "no term of target " + ctx_str(target) +
                                  " fits in " + std::to_string(size) +
                                  " nodes");
  std::vector<std::string> taken = source;
  taken.insert(taken.end(), target.begin(), target.end());
  Gen g{std::mt19937_64(seed), std::move(taken), 0};
  Rc raw = g.any(source, target, size);
  Tc t = infer(raw, source);
  if (t->tgt != target) raise(Err::Internal, "generator produced wrong target");
  return t;
}

Report check_soundness(const AxiomSchema& schema, int trials, int max_size,
                       std::uint64_t seed) {
  Report rep{schema.name, trials, {}};
  if (trials <= 0) return rep;
  std::vector<std::unique_ptr<Failure>> hits((size_t)trials);
  std::vector<std::exception_ptr> errs((size_t)trials);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < trials; ++i) {
    try {
      std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + (std::uint64_t)i * 2 + 1);
      Assignment a;
      for (const auto& s : schema.slots) {
        int sz = 1 + (int)(rng() % (std::uint64_t)std::max(1, max_size));
        sz = std::max(sz, min_for(s.tgt));
        a.emplace(s.name, random_term(s.src, s.tgt, sz, rng()));
      }
      Equation eq = instantiate(schema, a);
      if (!bisimilar(interpret(eq.lhs), interpret(eq.rhs)))
        hits[(size_t)i] =
            std::make_unique<Failure>(Failure{std::move(a), eq.lhs, eq.rhs});
    } catch (...) {
      errs[(size_t)i] = std::current_exception();
    }
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  for (auto& h : hits)
    if (h) rep.failures.push_back(std::move(*h));
  return rep;
}

std::string report_json(const Report& r) {
  nlohmann::json j;
  j["schema"] = r.schema;
  j["trials"] = r.trials;
  j["failures"] = nlohmann::json::array();
  for (const auto& f : r.failures) {
    nlohmann::json a = nlohmann::json::object();
    for (const auto& [k, v] : f.assignment) a[k] = print_term(to_raw(v));
    j["failures"].push_back({{"assignment", std::move(a)},
                             {"lhs", print_term(to_raw(f.lhs))},
                             {"rhs", print_term(to_raw(f.rhs))}});
  }
  return j.dump(2);
}

}  // namespace uncal
