#include <map>
#include <set>

#include "common/digraph.hpp"
#include "scenario/scenario.hpp"

namespace tessellate {

namespace {

template <class T>
void check_ids(const std::vector<T>& items, ElementKind kind, std::vector<ValidationIssue>& issues) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string& id = items[i].id;
    if (id.empty()) {
      issues.push_back({ElementId{kind, id}, "empty_id",
                        std::string(to_string(kind)) + " #" + std::to_string(i) + " has an empty id"});
      continue;
    }
    if (!seen.insert(id).second)
      issues.push_back({ElementId{kind, id}, "duplicate_id",
                        std::string("duplicate ") + to_string(kind) + " id '" + id + "'"});
  }
}

void dangling(std::vector<ValidationIssue>& issues, ElementId who, const std::string& what,
              const std::string& target) {
  issues.push_back({std::move(who), "dangling_reference",
                    what + " references undeclared '" + target + "'"});
}

}  // namespace

std::vector<ValidationIssue> validate_description(const ScenarioDescription& d) {
  std::vector<ValidationIssue> issues;

  check_ids(d.simulators, ElementKind::Simulator, issues);
  check_ids(d.tesserae, ElementKind::Tessera, issues);
  check_ids(d.connections, ElementKind::Connection, issues);

  for (const auto& s : d.simulators)
    if (s.registry_key.empty())
      issues.push_back({ElementId{ElementKind::Simulator, s.id}, "empty_registry_key",
                        "simulator '" + s.id + "' has no registry key"});

  // Tesserae: references and the size_of / select-after-create cycles.
  std::map<std::string, std::size_t> tindex;
  for (std::size_t i = 0; i < d.tesserae.size(); ++i) tindex.emplace(d.tesserae[i].id, i);

  Adjacency size_edges(d.tesserae.size()), all_edges(d.tesserae.size());
  for (std::size_t i = 0; i < d.tesserae.size(); ++i) {
    const auto& t = d.tesserae[i];
    ElementId who{ElementKind::Tessera, t.id};
    if (!d.find_simulator(t.simulator_id)) dangling(issues, who, "tessera '" + t.id + "'", t.simulator_id);
    if (t.model.empty())
      issues.push_back({who, "empty_model", "tessera '" + t.id + "' declares no model"});
    bool selects = false;
    for (const auto& src : t.sources) {
      if (const auto* m = std::get_if<CreateMatching>(&src)) {
        auto it = tindex.find(m->size_of);
        if (it == tindex.end()) {
          dangling(issues, who, "size_of of tessera '" + t.id + "'", m->size_of);
        } else {
          size_edges[i].push_back(it->second);
          all_edges[i].push_back(it->second);
        }
      }
      if (std::holds_alternative<Select>(src)) selects = true;
    }
    if (selects) {
      for (std::size_t j = 0; j < d.tesserae.size(); ++j) {
        const auto& other = d.tesserae[j];
        if (j == i || other.simulator_id != t.simulator_id) continue;
        if (std::any_of(other.sources.begin(), other.sources.end(), is_create_source))
          all_edges[i].push_back(j);
      }
    }
  }
  auto size_cycles = nodes_on_cycles(size_edges);
  auto any_cycles = nodes_on_cycles(all_edges);
  for (std::size_t i = 0; i < d.tesserae.size(); ++i) {
    const auto& id = d.tesserae[i].id;
    if (size_cycles[i])
      issues.push_back({ElementId{ElementKind::Tessera, id}, "size_of_cycle", "size_of cycle at " + id});
    else if (any_cycles[i])
      issues.push_back({ElementId{ElementKind::Tessera, id}, "dependency_cycle",
                        "selection/creation dependency cycle at " + id});
  }

  // Connections.
  std::map<std::string, std::size_t> cindex;
  for (std::size_t i = 0; i < d.connections.size(); ++i) cindex.emplace(d.connections[i].id, i);
  Adjacency comp_edges(d.connections.size());
  for (std::size_t i = 0; i < d.connections.size(); ++i) {
    const auto& c = d.connections[i];
    ElementId who{ElementKind::Connection, c.id};
    std::string label = "connection '" + c.id + "'";
    if (!d.find_tessera(c.source)) dangling(issues, who, label + " source", c.source);
    if (!d.find_tessera(c.target)) dangling(issues, who, label + " target", c.target);
    if (c.attr_pairs.empty() && !std::holds_alternative<EmptyRelation>(c.relation))
      issues.push_back({who, "empty_attr_pairs", label + " connects no attributes"});
    if (!c.delayed && !c.initial_values.empty())
      issues.push_back({who, "initial_values_without_delay",
                        label + " has initial values but is not delayed"});
    if (const auto* comp = std::get_if<CompositionRelation>(&c.relation)) {
      if (comp->path.empty())
        issues.push_back({who, "empty_composition", label + " has an empty composition path"});
      for (const auto& step : comp->path) {
        auto it = cindex.find(step.connection);
        if (it == cindex.end()) dangling(issues, who, label + " composition", step.connection);
        else comp_edges[i].push_back(it->second);
      }
    }
  }
  auto comp_cycles = nodes_on_cycles(comp_edges);
  for (std::size_t i = 0; i < d.connections.size(); ++i)
    if (comp_cycles[i])
      issues.push_back({ElementId{ElementKind::Connection, d.connections[i].id}, "composition_cycle",
                        "composition cycle at " + d.connections[i].id});

  for (const auto& [id, _] : d.layout)
    if (!tindex.count(id))
      issues.push_back({std::nullopt, "dangling_reference", "layout entry for undeclared tessera '" + id + "'"});

  if (d.params.end_time < 1)
    issues.push_back({std::nullopt, "invalid_end_time", "end_time must be at least 1"});
  if (d.params.real_time_factor && !(*d.params.real_time_factor > 0.0))
    issues.push_back({std::nullopt, "invalid_real_time_factor", "real_time_factor must be positive"});

  return issues;
}

Json issues_to_json(const std::vector<ValidationIssue>& issues) {
  Json out = Json::array();
  for (const auto& i : issues) {
    Json j = {{"code", i.code}, {"message", i.message}};
    if (i.element) j["element"] = {{"kind", to_string(i.element->kind)}, {"id", i.element->id}};
    else j["element"] = nullptr;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace tessellate
