#include <doctest.h>

#include <set>

#include "bake/orbit.hpp"
#include "support.hpp"

using namespace tessellate;
using testing::Scratch;

namespace {

ElementId sim(const std::string& id) { return {ElementKind::Simulator, id}; }
ElementId tes(const std::string& id) { return {ElementKind::Tessera, id}; }
ElementId con(const std::string& id) { return {ElementKind::Connection, id}; }

std::set<ElementId> with_state(const Orbit& o, ElementState::Kind kind) {
  std::set<ElementId> out;
  for (const auto& [e, s] : o.states)
    if (s.kind == kind) out.insert(e);
  return out;
}

template <class Call>
std::size_t count_calls(const std::vector<WorldCall>& log, std::size_t from = 0) {
  std::size_t n = 0;
  for (std::size_t i = from; i < log.size(); ++i) n += std::holds_alternative<Call>(log[i]);
  return n;
}

EntityPair pair(const std::string& a_sim, const std::string& a, const std::string& b_sim, const std::string& b) {
  return {EntityRef{a_sim, a}, EntityRef{b_sim, b}};
}

}  // namespace

TEST_CASE("glob matching") {
  CHECK(glob_match("*", ""));
  CHECK(glob_match("*", "bus_1"));
  CHECK(glob_match("bus_?", "bus_1"));
  CHECK_FALSE(glob_match("bus_?", "bus_10"));
  CHECK(glob_match("b*_1*", "bus_10"));
  CHECK(glob_match("*mv*", "bus_mv_2"));
  CHECK_FALSE(glob_match("bus", "bus_1"));
  CHECK(glob_match("a*b*c", "aXbYbZc"));
  CHECK_FALSE(glob_match("a*b*c", "aXbYbZ"));
}

TEST_CASE("predicates compare extra info") {
  Json info = {{"voltage_level", "LV"}, {"rated_kw", 10}};
  CHECK(predicate_holds({"voltage_level", CompareOp::Eq, "LV"}, info));
  CHECK_FALSE(predicate_holds({"voltage_level", CompareOp::Eq, "MV"}, info));
  CHECK(predicate_holds({"voltage_level", CompareOp::Ne, "MV"}, info));
  CHECK(predicate_holds({"rated_kw", CompareOp::Ge, 10}, info));
  CHECK(predicate_holds({"rated_kw", CompareOp::Lt, 10.5}, info));
  CHECK_FALSE(predicate_holds({"rated_kw", CompareOp::Gt, 10}, info));
  // Ordering against a string never holds; a missing key never holds.
  CHECK_FALSE(predicate_holds({"voltage_level", CompareOp::Lt, 3}, info));
  CHECK_FALSE(predicate_holds({"absent", CompareOp::Ne, 1}, info));
}

TEST_CASE("select sorts by entity id and filters") {
  std::vector<EntityRecord> records = {
      {"b3", "Bus", {{"voltage_level", "LV"}}, true},
      {"b1", "Bus", {{"voltage_level", "LV"}}, true},
      {"m1", "Bus", {{"voltage_level", "MV"}}, true},
      {"b2", "Bus", {{"voltage_level", "LV"}}, true},
  };
  Select s{"*", {{"voltage_level", CompareOp::Eq, "LV"}}};
  auto picked = resolve_select(s, records);
  REQUIRE(picked.size() == 3);
  CHECK(picked[0].entity_id == "b1");
  CHECK(picked[1].entity_id == "b2");
  CHECK(picked[2].entity_id == "b3");
  CHECK(resolve_select(Select{"m*", {}}, records).size() == 1);
}

TEST_CASE("dependency graph of the triangle") {
  auto d = testing::load_fixture("triangle.json");
  auto g = build_dependency_graph(d);
  CHECK(g.nodes.size() == 4 + 5 + 4);
  auto deps = [&](const ElementId& e) {
    auto v = g.dependencies_of(e);
    return std::set<ElementId>(v.begin(), v.end());
  };
  CHECK(deps(tes("grid")) == std::set<ElementId>{sim("grid")});
  CHECK(deps(tes("lv_buses")) == std::set<ElementId>{sim("grid"), tes("grid")});
  CHECK(deps(tes("pv")) == std::set<ElementId>{sim("pvsim"), tes("lv_buses")});
  CHECK(deps(con("pv_bus")) == std::set<ElementId>{tes("pv"), tes("lv_buses"), con("ctl_pv"), con("bus_ctl")});
  CHECK(deps(sim("grid")).empty());
}

TEST_CASE("triangle bakes cleanly") {
  Scratch scratch;
  auto d = testing::load_fixture("triangle.json");
  Orbit o = bake(d, testing::reference_context(scratch.dir()));
  CHECK(o.problems.empty());
  CHECK(with_state(o, ElementState::Kind::Ok).size() == 13);
  CHECK(o.tesserae.at("lv_buses").size() == 3);
  CHECK(o.tesserae.at("pv").size() == 3);
  CHECK(o.tesserae.at("ctl").size() == 3);
  CHECK(o.tesserae.at("collector").size() == 1);
  CHECK(o.tesserae.at("lv_buses")[0].record.extra_info["voltage_level"] == "LV");

  PairSet expected({pair("pvsim", "pv.0.0", "grid", "bus_1"), pair("pvsim", "pv.0.1", "grid", "bus_2"),
                    pair("pvsim", "pv.0.2", "grid", "bus_3")});
  CHECK(o.connections.at("pv_bus").pairs == expected);
  CHECK(o.connections.at("pv_db").pairs.size() == 3);

  // One launch, init per simulator; one create per requested entity.
  CHECK(count_calls<LaunchCall>(o.world_log) == 4);
  CHECK(count_calls<InitCall>(o.world_log) == 4);
  CHECK(count_calls<CreateCall>(o.world_log) == 1 + 3 + 3 + 1);
  CHECK(count_calls<ConnectCall>(o.world_log) == 4);
  o.shutdown();
}

TEST_CASE("missing topology fails the grid and blocks its dependents") {
  Scratch scratch;
  auto d = testing::load_fixture("broken.json");
  Orbit o = bake(d, testing::reference_context(scratch.dir()));
  REQUIRE(o.problems.size() == 1);
  const auto& p = o.problems[0];
  CHECK(p.element == sim("grid"));
  CHECK(p.phase == BakePhase::Init);
  CHECK(p.code == "topology_not_found");
  std::set<ElementId> blocked = {tes("grid"),     tes("lv_buses"), tes("pv"),     tes("ctl"),
                                 con("bus_ctl"), con("ctl_pv"),   con("pv_bus"), con("pv_db")};
  CHECK(with_state(o, ElementState::Kind::Blocked) == blocked);
  CHECK(std::set<ElementId>(p.blocked_dependents.begin(), p.blocked_dependents.end()) == blocked);
  CHECK(with_state(o, ElementState::Kind::Ok) ==
        std::set<ElementId>{sim("pvsim"), sim("ctlsim"), sim("db"), tes("collector")});
  CHECK(o.state_of(tes("pv"))->blocked_on == tes("lv_buses"));
  o.shutdown();
}

TEST_CASE("element level failures") {
  Scratch scratch;
  auto ctx = testing::reference_context(scratch.dir());

  SUBCASE("unknown registry key") {
    auto d = testing::load_fixture("triangle.json");
    testing::simulator(d, "db").registry_key = "no-such-sim";
    Orbit o = bake(d, ctx);
    REQUIRE(o.problems.size() == 1);
    CHECK(o.problems[0].code == "unknown_registry_key");
    CHECK(o.problems[0].phase == BakePhase::Launch);
    CHECK(o.states.at(tes("collector")).kind == ElementState::Kind::Blocked);
    CHECK(o.states.at(con("pv_db")).kind == ElementState::Kind::Blocked);
    o.shutdown();
  }
  SUBCASE("unknown attribute") {
    auto d = testing::load_fixture("triangle.json");
    testing::connection(d, "ctl_pv").attr_pairs = {{"curtailment", "voltage"}};
    Orbit o = bake(d, ctx);
    REQUIRE(o.problems.size() == 1);
    CHECK(o.problems[0].element == con("ctl_pv"));
    CHECK(o.problems[0].phase == BakePhase::Connect);
    CHECK(o.problems[0].code == "unknown_attr");
    CHECK(o.problems[0].blocked_dependents == std::vector<ElementId>{con("pv_bus")});
    o.shutdown();
  }
  SUBCASE("size mismatch") {
    auto d = testing::load_fixture("triangle.json");
    testing::connection(d, "pv_db").relation = OneToOne{};
    Orbit o = bake(d, ctx);
    REQUIRE(o.problems.size() == 1);
    CHECK(o.problems[0].code == "SizeMismatch");
    CHECK(o.problems[0].phase == BakePhase::ResolveRelation);
    o.shutdown();
  }
  SUBCASE("validation issues fail the element") {
    auto d = testing::load_fixture("triangle.json");
    testing::connection(d, "ctl_pv").initial_values = {{"curtailment", 1.0}};
    Orbit o = bake(d, ctx);
    REQUIRE(o.problems.size() == 1);
    CHECK(o.problems[0].code == "initial_values_without_delay");
    o.shutdown();
  }
  SUBCASE("select of a different model") {
    auto d = testing::load_fixture("triangle.json");
    d.tesserae[1].sources = {Select{"*", {}}};  // also picks up the Grid entity
    Orbit o = bake(d, ctx);
    REQUIRE(o.problems.size() == 1);
    CHECK(o.problems[0].code == "model_mismatch");
    o.shutdown();
  }
}

TEST_CASE("orbit report shape") {
  Scratch scratch;
  Orbit o = bake(testing::load_fixture("broken.json"), testing::reference_context(scratch.dir()));
  Json r = orbit_report(o);
  CHECK(r["simulators"].size() == 4);
  CHECK(r["simulators"][0]["state"] == "failed");
  CHECK(r["simulators"][0]["meta"].is_null());
  CHECK(r["simulators"][1]["meta"]["step_size"] == 60);
  CHECK(r["tesserae"][2]["state"] == "blocked");
  CHECK(r["tesserae"][2]["blocked_on"] == Json{{"kind", "tessera"}, {"id", "lv_buses"}});
  CHECK(r["tesserae"][4]["size"] == 1);
  CHECK(r["problems"][0]["phase"] == "init");
  CHECK(r["problems"][0]["blocked_dependents"].size() == 8);
  CHECK_FALSE(r["connections"][0].contains("pairs"));
  // Pairs are only reported for resolved connections.
  CHECK_FALSE(orbit_report(o, true)["connections"][0].contains("pairs"));
  o.shutdown();
}

TEST_CASE("rebake reuses the live world for additive edits") {
  Scratch scratch;
  auto ctx = testing::reference_context(scratch.dir());
  auto d = testing::load_fixture("grow.json");
  Orbit o = bake(d, ctx);
  REQUIRE(o.problems.empty());
  const std::size_t before = o.world_log.size();
  auto first_five = o.tesserae.at("pv");

  std::get<CreateFixed>(d.tesserae[0].sources[0]).count = 8;
  Orbit grown = rebake(std::move(o), d, ctx);
  CHECK(grown.mode == BakeMode::Incremental);
  CHECK(grown.problems.empty());
  CHECK(count_calls<CreateCall>(grown.world_log, before) == 6);
  CHECK(count_calls<LaunchCall>(grown.world_log, before) == 0);
  REQUIRE(count_calls<ConnectCall>(grown.world_log, before) == 1);
  CHECK(std::get<ConnectCall>(grown.world_log.back()).pairs.size() == 3);
  for (std::size_t i = 0; i < 5; ++i) CHECK(grown.tesserae.at("pv")[i].ref == first_five[i].ref);

  std::get<CreateFixed>(d.tesserae[0].sources[0]).count = 5;
  Orbit shrunk = rebake(std::move(grown), d, ctx);
  CHECK(shrunk.mode == BakeMode::FullReset);
  CHECK_FALSE(shrunk.reset_reason.empty());
  CHECK(count_calls<CreateCall>(shrunk.world_log) == 10);
  shrunk.shutdown();
}

TEST_CASE("rebake resets when launch parameters change") {
  Scratch scratch;
  auto ctx = testing::reference_context(scratch.dir());
  auto d = testing::load_fixture("triangle.json");
  Orbit o = bake(d, ctx);
  testing::simulator(d, "grid").init_params = {{"topology", "missing.json"}};
  Orbit next = rebake(std::move(o), d, ctx);
  CHECK(next.mode == BakeMode::FullReset);
  REQUIRE(next.problems.size() == 1);
  CHECK(next.problems[0].code == "topology_not_found");
  next.shutdown();
}

TEST_CASE("a simulator that fails init leaves no trace in the world log") {
  Scratch scratch;
  auto ctx = testing::reference_context(scratch.dir());
  auto d = testing::load_fixture("broken.json");
  Orbit o = bake(d, ctx);
  for (const auto& call : o.world_log) {
    if (const auto* l = std::get_if<LaunchCall>(&call)) CHECK(l->simulator_id != "grid");
  }
  // Fixing the parameters launches it exactly once.
  testing::simulator(d, "grid").init_params = {{"topology", "grid5.json"}};
  Orbit next = rebake(std::move(o), d, ctx);
  CHECK(next.mode == BakeMode::Incremental);
  std::size_t grid_launches = 0;
  for (const auto& call : next.world_log)
    if (const auto* l = std::get_if<LaunchCall>(&call)) grid_launches += l->simulator_id == "grid";
  CHECK(grid_launches == 1);
  CHECK(count_calls<LaunchCall>(next.world_log) == 4);
  next.shutdown();
}

TEST_CASE("rebake report equals a fresh bake") {
  Scratch a, b;
  auto d = testing::load_fixture("triangle.json");
  Orbit o = bake(d, testing::reference_context(a.dir()));
  testing::connection(d, "bus_ctl").relation = RandomRelation{false, 42};
  Orbit chained = rebake(std::move(o), d, testing::reference_context(a.dir()));
  Orbit fresh = bake(d, testing::reference_context(b.dir()));
  CHECK(orbit_report(chained, true).dump() == orbit_report(fresh, true).dump());
  chained.shutdown();
  fresh.shutdown();
}
