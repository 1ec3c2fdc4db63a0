#include "bake/orbit.hpp"

namespace tessellate {

namespace {

Json element_json(const ElementId& e) { return {{"kind", to_string(e.kind)}, {"id", e.id}}; }

Json state_json(const Orbit& o, const ElementId& e, Json entry) {
  const ElementState* s = o.state_of(e);
  entry["state"] = s ? to_string(s->kind) : "unknown";
  if (s && s->blocked_on) entry["blocked_on"] = element_json(*s->blocked_on);
  return entry;
}

}  // namespace

Json pairs_to_json(const PairSet& p) {
  Json out = Json::array();
  for (const auto& [a, b] : p.pairs())
    out.push_back({{"source", {{"simulator", a.simulator_id}, {"entity_id", a.entity_id}}},
                   {"target", {{"simulator", b.simulator_id}, {"entity_id", b.entity_id}}}});
  return out;
}

Json orbit_report(const Orbit& o, bool include_pairs) {
  const auto graph = build_dependency_graph(o.description);
  Json sims = Json::array(), tess = Json::array(), conns = Json::array();
  for (const auto& e : graph.nodes) {
    switch (e.kind) {
      case ElementKind::Simulator: {
        Json j = {{"id", e.id}};
        auto it = o.simulators.find(e.id);
        j["meta"] = it == o.simulators.end() ? Json() : to_json(it->second.meta);
        sims.push_back(state_json(o, e, std::move(j)));
        break;
      }
      case ElementKind::Tessera: {
        Json j = {{"id", e.id}};
        Json entities = Json::array();
        if (auto it = o.tesserae.find(e.id); it != o.tesserae.end())
          for (const auto& ent : it->second)
            entities.push_back({{"simulator", ent.ref.simulator_id},
                                {"entity_id", ent.ref.entity_id},
                                {"model", ent.record.model},
                                {"extra_info", ent.record.extra_info}});
        j["size"] = entities.size();
        j["entities"] = std::move(entities);
        tess.push_back(state_json(o, e, std::move(j)));
        break;
      }
      case ElementKind::Connection: {
        Json j = {{"id", e.id}};
        if (auto it = o.connections.find(e.id); it != o.connections.end()) {
          j["pair_count"] = it->second.pairs.size();
          j["dropped"] = it->second.dropped;
          if (include_pairs) j["pairs"] = pairs_to_json(it->second.pairs);
        } else {
          j["pair_count"] = 0;
          j["dropped"] = 0;
        }
        conns.push_back(state_json(o, e, std::move(j)));
        break;
      }
    }
  }
  Json problems = Json::array();
  for (const auto& p : o.problems) {
    Json blocked = Json::array();
    for (const auto& b : p.blocked_dependents) blocked.push_back(element_json(b));
    problems.push_back({{"element", element_json(p.element)},
                        {"phase", to_string(p.phase)},
                        {"code", p.code},
                        {"message", p.message},
                        {"blocked_dependents", blocked}});
  }
  return {{"simulators", sims}, {"tesserae", tess}, {"connections", conns}, {"problems", problems}};
}

}  // namespace tessellate
