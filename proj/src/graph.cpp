#include "uncal/graph.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "json.hpp"

namespace uncal {

namespace {

std::string join(const Ctx& c) {
  std::string s;
  for (size_t i = 0; i < c.size(); ++i) {
    if (i) s += ",";
    s += c[i];
  }
  return s;
}

VId root_of(const Graph& g, const std::string& m) {
  for (size_t i = 0; i < g.in_markers.size(); ++i)
    if (g.in_markers[i] == m) return g.roots[i];
  raise(Err::Internal, "no root for marker " + m);
}

// appends g's vertices after an offset-sized prefix
void append_shifted(Graph& out, const Graph& g, int off) {
  for (auto& [v, l, u] : g.edges) out.edges.emplace_back(v + off, l, u + off);
  for (auto& [v, u] : g.eps) out.eps.emplace_back(v + off, u + off);
  for (auto& [v, m] : g.outputs) out.outputs.emplace_back(v + off, m);
}

}  // namespace

Graph nil_graph(const Ctx& y) {
  Graph g;
  g.nverts = 1;
  g.in_markers = {"&"};
  g.roots = {0};
  g.out_markers = y;
  return g;
}

Graph emp_graph(const Ctx& y) {
  Graph g;
  g.out_markers = y;
  return g;
}

Graph man_graph(const Ctx& y) {
  if (y.size() != 2) raise(Err::Internal, "man graph needs two out-markers");
  Graph g;
  g.nverts = 1;
  g.in_markers = {"&"};
  g.roots = {0};
  g.out_markers = y;
  g.outputs = {{0, y[0]}, {0, y[1]}};
  return g;
}

Graph marker_graph(const std::string& m, const Ctx& y) {
  Graph g;
  g.nverts = 1;
  g.in_markers = {"&"};
  g.roots = {0};
  g.out_markers = y;
  g.outputs = {{0, m}};
  return g;
}

Graph label_graph(const std::string& l) {
  Graph g;
  g.nverts = 2;
  g.edges = {{0, l, 1}};
  g.in_markers = {"&"};
  g.roots = {0};
  g.out_markers = {"&"};
  g.outputs = {{1, "&"}};
  return g;
}

Graph compose(const Graph& g1, const Graph& g2) {
  std::set<std::string> o1(g1.out_markers.begin(), g1.out_markers.end());
  std::set<std::string> i2(g2.in_markers.begin(), g2.in_markers.end());
  if (o1 != i2)
    raise(Err::MarkerMismatch, "compose needs out <" + join(g1.out_markers) +
                                   "> to match in <" + join(g2.in_markers) + ">");
  Graph g;
  g.nverts = g1.nverts + g2.nverts;
  append_shifted(g, g1, 0);
  g.outputs.clear();  // g1's outputs become ε-edges below
  append_shifted(g, g2, g1.nverts);
  for (auto& [v, m] : g1.outputs) g.eps.emplace_back(v, root_of(g2, m) + g1.nverts);
  g.in_markers = g1.in_markers;
  g.roots = g1.roots;
  g.out_markers = g2.out_markers;
  return g;
}

Graph pair_graph(const Graph& g1, const Graph& g2) {
  Graph g;
  g.nverts = g1.nverts + g2.nverts;
  append_shifted(g, g1, 0);
  append_shifted(g, g2, g1.nverts);
  g.in_markers = ctx_concat(g1.in_markers, g2.in_markers);
  g.roots = g1.roots;
  for (VId r : g2.roots) g.roots.push_back(r + g1.nverts);
  g.out_markers = g1.out_markers;
  g.outputs = g1.outputs;
  for (auto& [v, m] : g2.outputs) g.outputs.emplace_back(v + g1.nverts, m);
  return g;
}

Graph dagger(const Graph& g) {
  size_t nx = g.in_markers.size();
  if (g.out_markers.size() < nx ||
      !std::equal(g.in_markers.begin(), g.in_markers.end(),
                  g.out_markers.end() - nx))
    raise(Err::ContextSplitError, "feedback block <" + join(g.in_markers) +
                                      "> is not a suffix of <" + join(g.out_markers) + ">");
  std::set<std::string> fed(g.in_markers.begin(), g.in_markers.end());
  Graph out = g;
  out.out_markers.assign(g.out_markers.begin(), g.out_markers.end() - nx);
  out.outputs.clear();
  for (auto& [v, m] : g.outputs) {
    if (fed.count(m)) out.eps.emplace_back(v, root_of(g, m));
    else out.outputs.emplace_back(v, m);
  }
  return out;
}

Graph identity_graph(const Ctx& y) { return interpret(identity_term(y)); }

Graph interpret(const Tc& t) {
  switch (t->kind) {
    case Kind::Mark: return marker_graph(t->name, t->src);
    case Kind::Nil: return nil_graph(t->src);
    case Kind::Emp: return emp_graph(t->src);
    case Kind::Man: return man_graph(t->src);
    case Kind::Edge: return compose(label_graph(t->name), interpret(t->kids[0]));
    case Kind::Compose: return compose(interpret(t->kids[0]), interpret(t->kids[1]));
    case Kind::Cycle: return dagger(interpret(t->kids[0]));
    case Kind::Def: {
      Graph g = interpret(t->kids[0]);
      g.in_markers = t->tgt;
      return g;
    }
    case Kind::Pair: {
      Graph g = interpret(t->kids[0]);
      for (size_t i = 1; i < t->kids.size(); ++i) g = pair_graph(g, interpret(t->kids[i]));
      return g;
    }
    case Kind::Call: raise(Err::Internal, "interpret reached an unresolved call " + t->name);
  }
  raise(Err::Internal, "interpret: unhandled kind");
}

namespace {

std::vector<std::vector<VId>> eps_closures(const Graph& g) {
  std::vector<std::vector<VId>> succ(g.nverts);
  for (auto& [v, u] : g.eps) succ[v].push_back(u);
  std::vector<std::vector<VId>> clos(g.nverts);
  for (VId s = 0; s < g.nverts; ++s) {
    std::vector<char> seen(g.nverts, 0);
    std::vector<VId> stack = {s};
    seen[s] = 1;
    while (!stack.empty()) {
      VId v = stack.back();
      stack.pop_back();
      clos[s].push_back(v);
      for (VId u : succ[v])
        if (!seen[u]) {
          seen[u] = 1;
          stack.push_back(u);
        }
    }
  }
  return clos;
}

}  // namespace

Graph eliminate_epsilon(const Graph& g) {
  auto clos = eps_closures(g);
  std::vector<std::vector<std::pair<std::string, VId>>> lab(g.nverts);
  for (auto& [v, l, u] : g.edges) lab[v].emplace_back(l, u);

  std::vector<std::set<std::pair<std::string, VId>>> new_edges(g.nverts);
  std::vector<std::set<std::string>> new_outs(g.nverts);
  std::vector<std::set<std::string>> out_of(g.nverts);
  for (auto& [v, m] : g.outputs) out_of[v].insert(m);
  for (VId v = 0; v < g.nverts; ++v)
    for (VId w : clos[v]) {
      for (auto& e : lab[w]) new_edges[v].insert(e);
      for (auto& m : out_of[w]) new_outs[v].insert(m);
    }

  // reachability over the shortcut edges
  std::vector<char> keep(g.nverts, 0);
  std::vector<VId> stack;
  for (VId r : g.roots)
    if (!keep[r]) {
      keep[r] = 1;
      stack.push_back(r);
    }
  while (!stack.empty()) {
    VId v = stack.back();
    stack.pop_back();
    for (auto& [l, u] : new_edges[v])
      if (!keep[u]) {
        keep[u] = 1;
        stack.push_back(u);
      }
  }

  std::vector<VId> remap(g.nverts, -1);
  Graph out;
  for (VId v = 0; v < g.nverts; ++v)
    if (keep[v]) remap[v] = out.nverts++;
  for (VId v = 0; v < g.nverts; ++v) {
    if (!keep[v]) continue;
    for (auto& [l, u] : new_edges[v])
      if (keep[u]) out.edges.emplace_back(remap[v], l, remap[u]);
    for (auto& m : new_outs[v]) out.outputs.emplace_back(remap[v], m);
  }
  out.in_markers = g.in_markers;
  for (VId r : g.roots) out.roots.push_back(remap[r]);
  out.out_markers = g.out_markers;
  return out;
}

namespace {

struct Obs {
  std::vector<std::set<std::string>> outs;                       // per vertex
  std::vector<std::map<std::string, std::vector<VId>>> next;     // per vertex, by label
  explicit Obs(const Graph& g) : outs(g.nverts), next(g.nverts) {
    for (auto& [v, m] : g.outputs) outs[v].insert(m);
    for (auto& [v, l, u] : g.edges) next[v][l].push_back(u);
  }
};

void check_interfaces(const Graph& g1, const Graph& g2) {
  std::set<std::string> i1(g1.in_markers.begin(), g1.in_markers.end());
  std::set<std::string> i2(g2.in_markers.begin(), g2.in_markers.end());
  std::set<std::string> o1(g1.out_markers.begin(), g1.out_markers.end());
  std::set<std::string> o2(g2.out_markers.begin(), g2.out_markers.end());
  if (i1 != i2 || o1 != o2)
    raise(Err::InterfaceMismatch, "cannot compare <" + join(g1.in_markers) + ">/<" +
                                      join(g1.out_markers) + "> with <" +
                                      join(g2.in_markers) + ">/<" + join(g2.out_markers) + ">");
}

// one refinement sweep; returns true if any pair was killed
bool sweep(const Obs& a, const Obs& b, std::vector<char>& rel, int n2, bool parallel) {
  int n1 = (int)a.outs.size();
  std::vector<char> kill(rel.size(), 0);
  auto body = [&](int idx) {
    if (!rel[idx]) return;
    int u = idx / n2, v = idx % n2;
    if (a.outs[u] != b.outs[v]) {
      kill[idx] = 1;
      return;
    }
    for (auto& [l, us] : a.next[u]) {
      auto it = b.next[v].find(l);
      for (VId un : us) {
        bool ok = false;
        if (it != b.next[v].end())
          for (VId vn : it->second)
            if (rel[un * n2 + vn]) {
              ok = true;
              break;
            }
        if (!ok) {
          kill[idx] = 1;
          return;
        }
      }
    }
    for (auto& [l, vs] : b.next[v]) {
      auto it = a.next[u].find(l);
      for (VId vn : vs) {
        bool ok = false;
        if (it != a.next[u].end())
          for (VId un : it->second)
            if (rel[un * n2 + vn]) {
              ok = true;
              break;
            }
        if (!ok) {
          kill[idx] = 1;
          return;
        }
      }
    }
  };
  int total = n1 * n2;
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (int idx = 0; idx < total; ++idx) body(idx);
  } else {
    for (int idx = 0; idx < total; ++idx) body(idx);
  }
  bool changed = false;
  for (int idx = 0; idx < total; ++idx)
    if (kill[idx]) {
      rel[idx] = 0;
      changed = true;
    }
  return changed;
}

bool naive_bisim(const Graph& e1, const Graph& e2, bool parallel, BisimWitness* w) {
  Obs a(e1), b(e2);
  int n1 = e1.nverts, n2 = e2.nverts;
  std::vector<char> rel((size_t)n1 * n2, 1);
  while (sweep(a, b, rel, n2, parallel)) {
  }
  if (w) {
    w->g1 = e1;
    w->g2 = e2;
    w->relation.clear();
    for (int u = 0; u < n1; ++u)
      for (int v = 0; v < n2; ++v)
        if (rel[u * n2 + v]) w->relation.emplace_back(u, v);
  }
  for (size_t i = 0; i < e1.in_markers.size(); ++i) {
    VId r1 = e1.roots[i];
    VId r2 = root_of(e2, e1.in_markers[i]);
    if (!rel[r1 * n2 + r2]) return false;
  }
  return true;
}

bool partition_bisim(const Graph& e1, const Graph& e2, BisimWitness* w) {
  int n1 = e1.nverts, n = n1 + e2.nverts;
  std::vector<std::set<std::string>> outs(n);
  std::vector<std::map<std::string, std::vector<VId>>> next(n);
  for (auto& [v, m] : e1.outputs) outs[v].insert(m);
  for (auto& [v, l, u] : e1.edges) next[v][l].push_back(u);
  for (auto& [v, m] : e2.outputs) outs[v + n1].insert(m);
  for (auto& [v, l, u] : e2.edges) next[v + n1][l].push_back(u + n1);

  std::vector<int> block(n);
  int nblocks = 0;
  {
    std::map<std::set<std::string>, int> ids;
    for (int v = 0; v < n; ++v) {
      auto [it, fresh] = ids.emplace(outs[v], (int)ids.size());
      block[v] = it->second;
    }
    nblocks = (int)ids.size();
  }
  for (;;) {
    // refinement only ever splits blocks, so an unchanged count means stable
    std::map<std::pair<int, std::set<std::pair<std::string, int>>>, int> ids;
    std::vector<int> nb(n);
    for (int v = 0; v < n; ++v) {
      std::set<std::pair<std::string, int>> sig;
      for (auto& [l, us] : next[v])
        for (VId u : us) sig.emplace(l, block[u]);
      auto [it, fresh] = ids.emplace(std::make_pair(block[v], std::move(sig)), (int)ids.size());
      nb[v] = it->second;
    }
    block = nb;
    if ((int)ids.size() == nblocks) break;
    nblocks = (int)ids.size();
  }
  if (w) {
    w->g1 = e1;
    w->g2 = e2;
    w->relation.clear();
    for (int u = 0; u < n1; ++u)
      for (int v = 0; v < n - n1; ++v)
        if (block[u] == block[v + n1]) w->relation.emplace_back(u, v);
  }
  for (size_t i = 0; i < e1.in_markers.size(); ++i) {
    VId r1 = e1.roots[i];
    VId r2 = root_of(e2, e1.in_markers[i]);
    if (block[r1] != block[r2 + n1]) return false;
  }
  return true;
}

}  // namespace

bool bisimilar_with(const Graph& g1, const Graph& g2, BisimAlgo algo, BisimWitness* w) {
  check_interfaces(g1, g2);
  Graph e1 = eliminate_epsilon(g1);
  Graph e2 = eliminate_epsilon(g2);
  switch (algo) {
    case BisimAlgo::NaiveSerial: return naive_bisim(e1, e2, false, w);
    case BisimAlgo::NaiveParallel: return naive_bisim(e1, e2, true, w);
    case BisimAlgo::Partition: return partition_bisim(e1, e2, w);
  }
  raise(Err::Internal, "unknown bisimulation algorithm");
}

bool bisimilar(const Graph& g1, const Graph& g2, BisimWitness* w) {
  return bisimilar_with(g1, g2, BisimAlgo::Partition, w);
}

std::set<Trace> traces(const Graph& g, int depth) {
  if (!g.out_markers.empty())
    raise(Err::NotClosed, "trace enumeration needs a closed graph, outputs <" +
                              join(g.out_markers) + "> remain");
  if (g.roots.size() != 1)
    raise(Err::NotClosed, "trace enumeration needs a single root");
  depth = std::min(depth, 32);
  Graph e = eliminate_epsilon(g);
  std::vector<std::map<std::string, std::set<VId>>> next(e.nverts);
  for (auto& [v, l, u] : e.edges) next[v][l].insert(u);

  std::set<Trace> out;
  std::map<Trace, std::set<VId>> frontier{{Trace{}, {e.roots[0]}}};
  out.insert(Trace{});
  for (int d = 0; d < depth && !frontier.empty(); ++d) {
    std::map<Trace, std::set<VId>> grown;
    for (auto& [tr, vs] : frontier)
      for (VId v : vs)
        for (auto& [l, us] : next[v]) {
          Trace t2 = tr;
          t2.push_back(l);
          grown[t2].insert(us.begin(), us.end());
        }
    for (auto& [tr, vs] : grown) out.insert(tr);
    frontier = std::move(grown);
  }
  return out;
}

std::string to_dot(const Graph& g) {
  std::ostringstream os;
  os << "digraph G {\n  rankdir=LR;\n  node [shape=circle];\n";
  for (VId v = 0; v < g.nverts; ++v) os << "  v" << v << " [label=\"" << v << "\"];\n";
  for (auto& [v, l, u] : g.edges)
    os << "  v" << v << " -> v" << u << " [label=\"" << l << "\"];\n";
  for (auto& [v, u] : g.eps)
    os << "  v" << v << " -> v" << u << " [style=dashed, label=\"eps\"];\n";
  for (size_t i = 0; i < g.in_markers.size(); ++i) {
    os << "  in" << i << " [shape=none, label=\"" << g.in_markers[i] << "\"];\n";
    os << "  in" << i << " -> v" << g.roots[i] << ";\n";
  }
  for (size_t i = 0; i < g.outputs.size(); ++i) {
    os << "  out" << i << " [shape=none, label=\"" << g.outputs[i].second << "\"];\n";
    os << "  v" << g.outputs[i].first << " -> out" << i << " [style=dotted];\n";
  }
  os << "}\n";
  return os.str();
}

std::string to_json(const Graph& g) {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (VId v = 0; v < g.nverts; ++v) j["vertices"].push_back(v);
  j["edges"] = nlohmann::json::array();
  for (auto& [v, l, u] : g.edges) j["edges"].push_back({v, l, u});
  j["eps"] = nlohmann::json::array();
  for (auto& [v, u] : g.eps) j["eps"].push_back({v, u});
  j["roots"] = nlohmann::json::object();
  for (size_t i = 0; i < g.in_markers.size(); ++i) j["roots"][g.in_markers[i]] = g.roots[i];
  j["outputs"] = nlohmann::json::array();
  for (auto& [v, m] : g.outputs) j["outputs"].push_back({v, m});
  return j.dump(2);
}

}  // namespace uncal
