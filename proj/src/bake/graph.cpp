#include <algorithm>
#include <set>

#include "bake/orbit.hpp"

namespace tessellate {

std::optional<std::size_t> DependencyGraph::index_of(const ElementId& e) const {
  auto it = std::find(nodes.begin(), nodes.end(), e);
  if (it == nodes.end()) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

std::vector<ElementId> DependencyGraph::dependencies_of(const ElementId& e) const {
  std::vector<ElementId> out;
  if (auto i = index_of(e))
    for (std::size_t d : deps[*i]) out.push_back(nodes[d]);
  return out;
}

DependencyGraph build_dependency_graph(const ScenarioDescription& d) {
  DependencyGraph g;
  std::map<ElementId, std::size_t> index;
  auto add_node = [&](ElementKind kind, const std::string& id) {
    ElementId e{kind, id};
    if (index.count(e)) return;
    index.emplace(e, g.nodes.size());
    g.nodes.push_back(std::move(e));
  };
  for (const auto& s : d.simulators) add_node(ElementKind::Simulator, s.id);
  for (const auto& t : d.tesserae) add_node(ElementKind::Tessera, t.id);
  for (const auto& c : d.connections) add_node(ElementKind::Connection, c.id);
  g.deps.resize(g.nodes.size());

  auto edge = [&](ElementId from, ElementKind kind, const std::string& to) {
    auto a = index.find(from);
    auto b = index.find(ElementId{kind, to});
    if (a == index.end() || b == index.end() || a->second == b->second) return;
    g.deps[a->second].push_back(b->second);
  };

  // Only the first occurrence of a duplicated id contributes edges.
  std::set<ElementId> seen;
  for (const auto& t : d.tesserae) {
    ElementId self{ElementKind::Tessera, t.id};
    if (!seen.insert(self).second) continue;
    edge(self, ElementKind::Simulator, t.simulator_id);
    bool selects = false;
    for (const auto& src : t.sources) {
      if (const auto* m = std::get_if<CreateMatching>(&src)) edge(self, ElementKind::Tessera, m->size_of);
      if (std::holds_alternative<Select>(src)) selects = true;
    }
    if (selects) {
      std::set<std::string> creators;
      for (const auto& other : d.tesserae)
        if (other.id != t.id && other.simulator_id == t.simulator_id &&
            std::any_of(other.sources.begin(), other.sources.end(), is_create_source))
          creators.insert(other.id);
      for (const auto& c : creators) edge(self, ElementKind::Tessera, c);
    }
  }
  for (const auto& c : d.connections) {
    ElementId self{ElementKind::Connection, c.id};
    if (!seen.insert(self).second) continue;
    edge(self, ElementKind::Tessera, c.source);
    edge(self, ElementKind::Tessera, c.target);
    if (const auto* comp = std::get_if<CompositionRelation>(&c.relation))
      for (const auto& step : comp->path) edge(self, ElementKind::Connection, step.connection);
  }
  for (auto& deps : g.deps) {
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
  }
  return g;
}

}  // namespace tessellate
