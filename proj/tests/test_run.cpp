#include <doctest.h>

#include <set>

#include "run/kernel.hpp"
#include "support.hpp"

using namespace tessellate;
using testing::Scratch;

namespace {

struct Recorder {
  std::vector<RunEvent> events;
  EventSink sink() {
    return [this](const RunEvent& e) { events.push_back(e); };
  }
  template <class T>
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& e : events) n += std::holds_alternative<T>(e);
    return n;
  }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("value cache keeps the previous generation") {
  ValueCache c;
  EntityRef e{"s", "x"};
  CHECK(c.latest(e, "p") == nullptr);
  c.record(e, "p", 0, 1.0);
  CHECK(*c.latest(e, "p") == 1.0);
  CHECK(c.before(e, "p", 0) == nullptr);
  CHECK(*c.before(e, "p", 60) == 1.0);
  c.record(e, "p", 60, 2.0);
  CHECK(*c.latest(e, "p") == 2.0);
  CHECK(*c.before(e, "p", 60) == 1.0);
  CHECK(*c.before(e, "p", 61) == 2.0);
}

TEST_CASE("route_inputs") {
  ValueCache cache;
  EntityRef pv1{"pvsim", "pv1"}, pv2{"pvsim", "pv2"}, pv3{"pvsim", "pv3"};
  EntityRef bus1{"grid", "bus1"}, db{"db", "c"};

  SUBCASE("single pair") {
    ResolvedConnection conn{"pvsim", "grid", PairSet({{pv1, bus1}}), 0, {{"p", "p_in"}}, false, {}};
    cache.record(pv1, "p", 0, 2.5);
    StepInputs in;
    CHECK(route_inputs("c", conn, cache, 0, in) == 1);
    REQUIRE(in["bus1"]["p_in"].size() == 1);
    CHECK(in["bus1"]["p_in"][0] == SenderValue{pv1, 2.5});
  }
  SUBCASE("many to one") {
    ResolvedConnection conn{"pvsim", "db", PairSet({{pv1, db}, {pv2, db}, {pv3, db}}), 0, {{"p", "p"}}, false, {}};
    for (auto* e : {&pv1, &pv2, &pv3}) cache.record(*e, "p", 0, 1.0);
    StepInputs in;
    CHECK(route_inputs("c", conn, cache, 0, in) == 3);
    CHECK(in["c"]["p"].size() == 3);
  }
  SUBCASE("delayed uses initial values, then the previous step") {
    ResolvedConnection conn{"grid", "ctlsim", PairSet({{bus1, EntityRef{"ctlsim", "c1"}}}), 0, {{"v_pu", "v_pu"}},
                            true, {{"v_pu", 1.0}}};
    cache.record(bus1, "v_pu", 0, 0.97);
    StepInputs at0, at60;
    route_inputs("c", conn, cache, 0, at0);
    CHECK(at0["c1"]["v_pu"][0].value == 1.0);
    route_inputs("c", conn, cache, 60, at60);
    CHECK(at60["c1"]["v_pu"][0].value == 0.97);
  }
  SUBCASE("missing non-delayed value") {
    ResolvedConnection conn{"pvsim", "grid", PairSet({{pv1, bus1}}), 0, {{"p", "p_in"}}, false, {}};
    StepInputs in;
    CHECK_THROWS_AS(route_inputs("c", conn, cache, 0, in), MissingValue);
  }
}

TEST_CASE("dataflow check") {
  Scratch scratch;
  auto ctx = testing::reference_context(scratch.dir());
  auto d = testing::load_fixture("triangle.json");

  SUBCASE("delayed edge breaks the triangle") {
    Orbit o = bake(d, ctx);
    CHECK_NOTHROW(check_dataflow(o));
    CHECK(dataflow_order(o) == std::vector<std::string>{"ctlsim", "pvsim", "grid", "db"});
    o.shutdown();
  }
  SUBCASE("all non-delayed is a cycle") {
    auto& c = testing::connection(d, "bus_ctl");
    c.delayed = false;
    c.initial_values.clear();
    Orbit o = bake(d, ctx);
    REQUIRE(o.problems.empty());
    try {
      check_dataflow(o);
      FAIL("expected a cycle");
    } catch (const CycleError& e) {
      auto cyc = e.cycle();
      REQUIRE(cyc.size() == 4);
      CHECK(cyc.front() == cyc.back());
      std::set<std::string> members(cyc.begin(), cyc.end());
      CHECK(members == std::set<std::string>{"grid", "pvsim", "ctlsim"});
    }
    o.shutdown();
  }
  SUBCASE("no connections") {
    d.connections.clear();
    Orbit o = bake(d, ctx);
    CHECK_NOTHROW(check_dataflow(o));
    o.shutdown();
  }
}

TEST_CASE("triangle run") {
  Scratch scratch;
  auto d = testing::load_fixture("triangle.json");
  Orbit o = bake(d, testing::reference_context(scratch.dir()));
  REQUIRE(o.problems.empty());
  Recorder rec;
  auto summary = run(o, d.params, rec.sink());
  CHECK(summary.outcome == RunSummary::Outcome::Completed);
  CHECK(summary.final_time == 180);
  for (const auto& id : {"grid", "pvsim", "ctlsim", "db"})
    CHECK(summary.step_times.at(id) == std::vector<std::int64_t>{0, 60, 120});
  CHECK(rec.count<ProgressEvent>() == 3);
  CHECK(rec.count<DoneEvent>() == 1);
  CHECK(rec.count<RunErrorEvent>() == 0);
  CHECK(std::get<DoneEvent>(rec.events.back()).final_time == 180);

  auto lines = lines_of(testing::read_file(scratch / "collector.jsonl"));
  REQUIRE(lines.size() == 1 + 9);
  std::set<std::int64_t> times;
  for (std::size_t i = 1; i < lines.size(); ++i) times.insert(Json::parse(lines[i])["time"].get<std::int64_t>());
  CHECK(times == std::set<std::int64_t>{0, 60, 120});
  o.shutdown();
}

TEST_CASE("end time is exclusive") {
  Scratch scratch;
  auto d = testing::load_fixture("triangle.json");
  Orbit o = bake(d, testing::reference_context(scratch.dir()));
  ScenarioParams p = d.params;
  p.end_time = 60;
  Recorder rec;
  auto summary = run(o, p, rec.sink());
  for (const auto& [id, times] : summary.step_times) CHECK(times == std::vector<std::int64_t>{0});
  CHECK(summary.final_time == 60);
  o.shutdown();
}

TEST_CASE("stop after the first step") {
  Scratch scratch;
  auto d = testing::load_fixture("triangle.json");
  Orbit o = bake(d, testing::reference_context(scratch.dir()));
  std::atomic<bool> stop{false};
  std::vector<RunEvent> events;
  auto summary = run(
      o, d.params,
      [&](const RunEvent& e) {
        events.push_back(e);
        if (std::holds_alternative<ProgressEvent>(e)) stop = true;
      },
      &stop);
  CHECK(summary.outcome == RunSummary::Outcome::Stopped);
  REQUIRE(std::holds_alternative<DoneEvent>(events.back()));
  CHECK(std::get<DoneEvent>(events.back()).final_time == 60);
  o.shutdown();
}

TEST_CASE("partial orbit runs with warnings") {
  Scratch scratch;
  auto d = testing::load_fixture("broken.json");
  Orbit o = bake(d, testing::reference_context(scratch.dir()));
  Recorder rec;
  auto summary = run(o, d.params, rec.sink());
  CHECK(summary.outcome == RunSummary::Outcome::Completed);
  CHECK(rec.count<LogEvent>() == 1 + 4);
  CHECK_FALSE(summary.step_times.count("grid"));
  CHECK(summary.step_times.at("db").size() == 3);
  o.shutdown();
}

TEST_CASE("run event encoding") {
  CHECK(to_json(RunEvent{ProgressEvent{60, 180}}) == Json{{"type", "progress"}, {"time", 60}, {"end_time", 180}});
  CHECK(to_json(RunEvent{DoneEvent{180}}) == Json{{"type", "done"}, {"final_time", 180}});
  CHECK(to_json(RunEvent{RunErrorEvent{"grid", "boom"}})["type"] == "error");
  CHECK(to_json(RunEvent{LogEvent{"warning", "x", "m"}})["level"] == "warning");
}
