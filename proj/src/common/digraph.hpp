#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <queue>
#include <vector>

namespace tessellate {

// Minimal index-based directed graph helpers. Node ids are 0..n-1; an edge
// u -> v in `adj[u]`.
using Adjacency = std::vector<std::vector<std::size_t>>;

// Tarjan's algorithm. Returns, per node, true when it lies on a cycle
// (a non-trivial SCC or a self loop).
inline std::vector<bool> nodes_on_cycles(const Adjacency& adj) {
  const std::size_t n = adj.size();
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false), cyclic(n, false);
  std::vector<std::size_t> stack;
  int counter = 0;

  std::function<void(std::size_t)> strong = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w : adj[v]) {
      if (w == v) cyclic[v] = true;
      if (index[w] < 0) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> component;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        component.push_back(w);
      } while (w != v);
      if (component.size() > 1)
        for (std::size_t c : component) cyclic[c] = true;
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (index[v] < 0) strong(v);
  return cyclic;
}

// Kahn's algorithm over `deps` where deps[u] lists the nodes u depends on.
// Ready nodes are emitted smallest index first, so ties resolve by index.
// Nodes that never become ready (cycles) are returned in `leftover`.
struct TopoResult {
  std::vector<std::size_t> order;
  std::vector<std::size_t> leftover;
};

inline TopoResult topological_order(const Adjacency& deps) {
  const std::size_t n = deps.size();
  Adjacency dependents(n);
  std::vector<std::size_t> pending(n, 0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t d : deps[u]) {
      dependents[d].push_back(u);
      ++pending[u];
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t u = 0; u < n; ++u)
    if (pending[u] == 0) ready.push(u);
  TopoResult out;
  std::vector<bool> done(n, false);
  while (!ready.empty()) {
    std::size_t u = ready.top();
    ready.pop();
    out.order.push_back(u);
    done[u] = true;
    for (std::size_t v : dependents[u])
      if (--pending[v] == 0) ready.push(v);
  }
  for (std::size_t u = 0; u < n; ++u)
    if (!done[u]) out.leftover.push_back(u);
  return out;
}

}  // namespace tessellate
