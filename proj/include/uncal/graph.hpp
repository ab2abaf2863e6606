#pragma once

#include <set>
#include <tuple>

#include "uncal/typing.hpp"

namespace uncal {

using VId = int;

// Rooted ε-labelled graph: roots I (total on in_markers, parallel vectors),
// outputs O (a relation into out_markers). Vertices are 0..nverts-1.
struct Graph {
  int nverts = 0;
  std::vector<std::tuple<VId, std::string, VId>> edges;  // labelled edges
  std::vector<std::pair<VId, VId>> eps;                  // ε-edges
  Ctx in_markers;
  std::vector<VId> roots;  // roots[i] is the vertex for in_markers[i]
  Ctx out_markers;
  std::vector<std::pair<VId, std::string>> outputs;
};

Graph nil_graph(const Ctx& y);
Graph emp_graph(const Ctx& y);
Graph man_graph(const Ctx& y);  // |y| = 2
Graph marker_graph(const std::string& m, const Ctx& y);
Graph label_graph(const std::string& l);
Graph identity_graph(const Ctx& y);

Graph compose(const Graph& g1, const Graph& g2);      // MarkerMismatch
Graph pair_graph(const Graph& g1, const Graph& g2);   // disjoint roots required
Graph dagger(const Graph& g);                         // ContextSplitError

Graph interpret(const Tc& t);

// ε-free view: shortcut ε*-then-label edges and ε*-to-output outputs, then
// restrict to vertices reachable from the roots. Bisimilar to the input.
Graph eliminate_epsilon(const Graph& g);

struct BisimWitness {
  Graph g1, g2;  // the ε-eliminated graphs the relation speaks about
  std::vector<std::pair<VId, VId>> relation;
};

enum class BisimAlgo {
  NaiveSerial,    // greatest-fixpoint pair refinement, reference oracle
  NaiveParallel,  // same refinement with a parallel kill sweep
  Partition,      // partition refinement fast path
};

bool bisimilar_with(const Graph& g1, const Graph& g2, BisimAlgo algo,
                    BisimWitness* w = nullptr);
bool bisimilar(const Graph& g1, const Graph& g2, BisimWitness* w = nullptr);

// Label strings of length <= depth readable from the root; always contains
// the empty trace. Defined for closed single-rooted graphs; depth caps at 32.
using Trace = std::vector<std::string>;
std::set<Trace> traces(const Graph& g, int depth);  // NotClosed

std::string to_dot(const Graph& g);
std::string to_json(const Graph& g);

}  // namespace uncal
