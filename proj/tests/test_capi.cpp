// Exercises the shared library through its C header only, plus the CLI
// binary built on top of it.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <tessellate/tessellate.h>

extern char** environ;

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::trunc) << text; }

struct Dir {
  fs::path path;
  Dir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("tessellate-capi-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
    for (const auto& e : fs::directory_iterator(TESSELLATE_FIXTURES)) fs::copy_file(e.path(), path / e.path().filename());
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Engine {
  tsl_engine* e = nullptr;
  explicit Engine(const char* registry = nullptr) { REQUIRE(tsl_engine_create(registry, &e) == TSL_OK); }
  ~Engine() { tsl_engine_destroy(e); }
};

struct Scenario {
  tsl_scenario* s = nullptr;
  Scenario(tsl_engine* e, const std::string& path) { REQUIRE(tsl_scenario_load(e, path.c_str(), &s) == TSL_OK); }
  ~Scenario() { tsl_scenario_destroy(s); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  tsl_string_free(s);
  return out;
}

Json report(tsl_scenario* s, bool pairs = false) {
  char* json = nullptr;
  REQUIRE(tsl_scenario_report(s, pairs ? 1 : 0, &json) == TSL_OK);
  return Json::parse(take(json));
}

void collect(const char* event, void* user) { static_cast<std::vector<Json>*>(user)->push_back(Json::parse(event)); }

std::size_t count_type(const std::vector<Json>& events, const std::string& type) {
  std::size_t n = 0;
  for (const auto& e : events) n += e["type"] == type;
  return n;
}

struct Proc {
  int status = -1;
  std::string out;
  std::string err;
};

// Runs the CLI to completion, capturing stdout and stderr.
Proc run_cli(std::vector<std::string> args, const fs::path& cwd) {
  fs::path out = cwd / "cli.out", err = cwd / "cli.err";
  args.insert(args.begin(), TESSELLATE_CLI_EXE);
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&fa, 2, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addchdir_np(&fa, cwd.c_str());
  pid_t pid = 0;
  REQUIRE(posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ) == 0);
  posix_spawn_file_actions_destroy(&fa);
  int ws = 0;
  waitpid(pid, &ws, 0);
  Proc p;
  p.status = WIFEXITED(ws) ? WEXITSTATUS(ws) : -1;
  p.out = read_file(out);
  p.err = read_file(err);
  return p;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("status strings and version") {
  CHECK(std::string(tsl_version()) == "0.1.0");
  for (int s = TSL_OK; s <= TSL_ERR_INTERNAL; ++s)
    CHECK(std::string(tsl_status_string(static_cast<tsl_status>(s))) != "unknown status");
  CHECK(std::string(tsl_status_string(static_cast<tsl_status>(99))) == "unknown status");
  CHECK(std::string(tsl_status_string(TSL_ERR_CYCLE)) == "dataflow cycle");
}

TEST_CASE("engine creation and registry lookup order") {
  Dir d;
  tsl_engine* e = nullptr;
  CHECK(tsl_engine_create("/nonexistent/registry.json", &e) == TSL_ERR_REGISTRY);
  CHECK(e == nullptr);
  CHECK(std::string(tsl_last_error()).find("cannot read registry") != std::string::npos);
  CHECK(tsl_engine_create(nullptr, nullptr) == TSL_ERR_INVALID_ARGUMENT);

  write_file(d.path / "one.json", R"([{"key":"only","launch":{"builtin":"pv-sim"}}])");
  setenv("TESSELLATE_REGISTRY", (d / "one.json").c_str(), 1);
  {
    Engine env;
    char* json = nullptr;
    REQUIRE(tsl_engine_registry_json(env.e, &json) == TSL_OK);
    CHECK(Json::parse(take(json)).size() == 1);
  }
  unsetenv("TESSELLATE_REGISTRY");
  Engine builtin;
  char* json = nullptr;
  REQUIRE(tsl_engine_registry_json(builtin.e, &json) == TSL_OK);
  Json reg = Json::parse(take(json));
  REQUIRE(reg.size() == 4);
  CHECK(reg[0]["key"] == "grid-sim");
}

TEST_CASE("scenario load errors") {
  Dir d;
  Engine eng;
  tsl_scenario* s = nullptr;
  CHECK(tsl_scenario_load(eng.e, (d / "absent.json").c_str(), &s) == TSL_ERR_IO);
  write_file(d.path / "bad.json", "{\n\"format_version\": 1,,\n}");
  CHECK(tsl_scenario_load(eng.e, (d / "bad.json").c_str(), &s) == TSL_ERR_PARSE);
  CHECK(std::string(tsl_last_error()).rfind("line 2", 0) == 0);
  CHECK(s == nullptr);
  CHECK(tsl_scenario_load(nullptr, "x", &s) == TSL_ERR_INVALID_ARGUMENT);
}

TEST_CASE("bake and report") {
  Dir d;
  Engine eng;
  Scenario sc(eng.e, d / "triangle.json");
  char* json = nullptr;
  CHECK(tsl_scenario_report(sc.s, 0, &json) == TSL_ERR_STATE);
  size_t problems = 99;
  REQUIRE(tsl_scenario_bake(sc.s, &problems) == TSL_OK);
  CHECK(problems == 0);
  Json r = report(sc.s, true);
  CHECK(r["problems"].empty());
  CHECK(r["connections"][0]["pairs"].size() == 3);
  CHECK_FALSE(report(sc.s, false)["connections"][0].contains("pairs"));
  // Baking again starts from scratch and yields the same report.
  REQUIRE(tsl_scenario_bake(sc.s, nullptr) == TSL_OK);
  CHECK(report(sc.s, true) == r);
}

TEST_CASE("bake problems") {
  Dir d;
  Engine eng;
  Scenario sc(eng.e, d / "broken.json");
  size_t problems = 0;
  CHECK(tsl_scenario_bake(sc.s, &problems) == TSL_ERR_BAKE_PROBLEMS);
  CHECK(problems == 1);
  CHECK(std::string(tsl_last_error()).find("missing_topology.json") != std::string::npos);
  Json r = report(sc.s);
  REQUIRE(r["problems"].size() == 1);
  CHECK(r["problems"][0]["code"] == "topology_not_found");
  CHECK(r["problems"][0]["blocked_dependents"].size() == 8);
}

TEST_CASE("headless runs") {
  Dir d;
  Engine eng;
  Scenario sc(eng.e, d / "triangle.json");
  std::vector<Json> events;
  REQUIRE(tsl_scenario_run(sc.s, 0, 0, collect, &events) == TSL_OK);
  CHECK(count_type(events, "progress") == 3);
  REQUIRE(count_type(events, "done") == 1);
  CHECK(events.back() == Json{{"type", "done"}, {"final_time", 180}});
  CHECK(lines(read_file(d.path / "collector.jsonl")).size() == 10);

  SUBCASE("a second run starts from a fresh world") {
    events.clear();
    REQUIRE(tsl_scenario_run(sc.s, 60, 0, collect, &events) == TSL_OK);
    CHECK(events.back()["final_time"] == 60);
    CHECK(lines(read_file(d.path / "collector.jsonl")).size() == 4);
  }
  SUBCASE("a null callback is allowed") { CHECK(tsl_scenario_run(sc.s, 120, 0, nullptr, nullptr) == TSL_OK); }
}

TEST_CASE("partial orbits run with warnings") {
  Dir d;
  Engine eng;
  Scenario sc(eng.e, d / "broken.json");
  std::vector<Json> events;
  REQUIRE(tsl_scenario_run(sc.s, 0, 0, collect, &events) == TSL_OK);
  CHECK(count_type(events, "log") == 5);
  CHECK(events.back()["type"] == "done");
}

TEST_CASE("cycles are refused") {
  Dir d;
  Json doc = Json::parse(read_file(d.path / "triangle.json"));
  doc["connections"][0]["delayed"] = false;
  doc["connections"][0]["initial_values"] = Json::object();
  write_file(d.path / "cycle.json", doc.dump());
  Engine eng;
  Scenario sc(eng.e, d / "cycle.json");
  std::vector<Json> events;
  CHECK(tsl_scenario_run(sc.s, 0, 0, collect, &events) == TSL_ERR_CYCLE);
  CHECK(std::string(tsl_last_error()).find("cycle") != std::string::npos);
  CHECK(events.empty());
}

TEST_CASE("gateway lifecycle") {
  Dir d;
  Engine eng;
  tsl_gateway* gw = nullptr;
  REQUIRE(tsl_gateway_start(eng.e, "127.0.0.1", 0, (d / "triangle.json").c_str(), &gw) == TSL_OK);
  uint16_t port = tsl_gateway_port(gw);
  CHECK(port != 0);

  tsl_gateway* clash = nullptr;
  CHECK(tsl_gateway_start(eng.e, "127.0.0.1", port, nullptr, &clash) == TSL_ERR_SERVE);
  CHECK(clash == nullptr);
  CHECK(tsl_gateway_start(eng.e, "127.0.0.1", 0, (d / "absent.json").c_str(), &clash) == TSL_ERR_IO);
  write_file(d.path / "bad.json", "[]");
  CHECK(tsl_gateway_start(eng.e, "127.0.0.1", 0, (d / "bad.json").c_str(), &clash) == TSL_ERR_PARSE);

  tsl_gateway_stop(gw);
  tsl_gateway_wait(gw);
  tsl_gateway_destroy(gw);
  CHECK(tsl_gateway_port(nullptr) == 0);
}

TEST_CASE("cli bake") {
  Dir d;
  auto ok = run_cli({"bake", "triangle.json", "--pairs"}, d.path);
  CHECK(ok.status == 0);
  Json r = Json::parse(ok.out);
  CHECK(r["problems"].empty());
  CHECK(r["connections"][0].contains("pairs"));

  auto broken = run_cli({"bake", "broken.json"}, d.path);
  CHECK(broken.status == 1);
  CHECK(Json::parse(broken.out)["problems"].size() == 1);
  CHECK(broken.err.find("1 baking problem(s)") != std::string::npos);

  CHECK(run_cli({"bake", "absent.json"}, d.path).status == 2);
  CHECK(run_cli({"--registry", "absent.json", "bake", "triangle.json"}, d.path).status == 2);
  CHECK(run_cli({"bake", "triangle.json", "--registry", "registry.json"}, d.path).status == 0);
  CHECK(run_cli({"frobnicate"}, d.path).status != 0);
}

TEST_CASE("cli run") {
  Dir d;
  auto p = run_cli({"run", "triangle.json", "--end", "180", "--report", "final.json"}, d.path);
  CHECK(p.status == 0);
  auto ls = lines(p.out);
  REQUIRE(ls.size() == 4);
  CHECK(Json::parse(ls.back()) == Json{{"type", "done"}, {"final_time", 180}});
  CHECK(Json::parse(read_file(d.path / "final.json"))["connections"].size() == 4);
  CHECK(run_cli({"run", "triangle.json"}, d.path).status != 0);
}

TEST_CASE("cli serve stops on SIGTERM") {
  Dir d;
  fs::path out = d.path / "serve.out";
  std::vector<std::string> args = {TESSELLATE_CLI_EXE, "serve", "--port", "0", "--scenario", "triangle.json"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addchdir_np(&fa, d.path.c_str());
  pid_t pid = 0;
  REQUIRE(posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ) == 0);
  posix_spawn_file_actions_destroy(&fa);

  std::string text;
  for (int i = 0; i < 500 && text.find('\n') == std::string::npos; ++i) {
    usleep(10000);
    text = read_file(out);
  }
  CHECK(text.rfind("listening on ws://127.0.0.1:", 0) == 0);
  kill(pid, SIGTERM);
  int ws = 0;
  waitpid(pid, &ws, 0);
  CHECK(WIFEXITED(ws));
  CHECK(WEXITSTATUS(ws) == 0);
}
