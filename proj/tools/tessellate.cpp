// Headless front end: bake, run and serve scenarios through the C interface.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include <tessellate/tessellate.h>

namespace {

struct EngineDeleter {
  void operator()(tsl_engine* e) const { tsl_engine_destroy(e); }
};
struct ScenarioDeleter {
  void operator()(tsl_scenario* s) const { tsl_scenario_destroy(s); }
};
using EnginePtr = std::unique_ptr<tsl_engine, EngineDeleter>;
using ScenarioPtr = std::unique_ptr<tsl_scenario, ScenarioDeleter>;

int report_error(const char* what, tsl_status st) {
  std::cerr << "tessellate: " << what << ": " << tsl_status_string(st);
  if (*tsl_last_error()) std::cerr << ": " << tsl_last_error();
  std::cerr << "\n";
  return st == TSL_ERR_BAKE_PROBLEMS ? 1 : 2;
}

EnginePtr open_engine(const std::string& registry, int& exit_code) {
  tsl_engine* e = nullptr;
  tsl_status st = tsl_engine_create(registry.empty() ? nullptr : registry.c_str(), &e);
  if (st != TSL_OK) exit_code = report_error("registry", st);
  return EnginePtr(e);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  tsl_string_free(s);
  return out;
}

int cmd_bake(const std::string& file, const std::string& registry, bool pairs) {
  int code = 0;
  EnginePtr engine = open_engine(registry, code);
  if (!engine) return code;
  tsl_scenario* raw = nullptr;
  if (tsl_status st = tsl_scenario_load(engine.get(), file.c_str(), &raw); st != TSL_OK)
    return report_error(file.c_str(), st);
  ScenarioPtr scenario(raw);
  size_t problems = 0;
  tsl_status baked = tsl_scenario_bake(scenario.get(), &problems);
  std::string bake_message = tsl_last_error();
  char* json = nullptr;
  if (tsl_status st = tsl_scenario_report(scenario.get(), pairs ? 1 : 0, &json); st != TSL_OK)
    return report_error("report", st);
  std::cout << take(json) << "\n";
  if (baked != TSL_OK) {
    std::cerr << "tessellate: bake: " << bake_message << "\n";
    return baked == TSL_ERR_BAKE_PROBLEMS ? 1 : 2;
  }
  return 0;
}

void print_event(const char* event_json, void*) {
  std::cout << event_json << std::endl;
}

int cmd_run(const std::string& file, const std::string& registry, long long end, double rt, const std::string& report) {
  int code = 0;
  EnginePtr engine = open_engine(registry, code);
  if (!engine) return code;
  tsl_scenario* raw = nullptr;
  if (tsl_status st = tsl_scenario_load(engine.get(), file.c_str(), &raw); st != TSL_OK)
    return report_error(file.c_str(), st);
  ScenarioPtr scenario(raw);
  tsl_status st = tsl_scenario_run(scenario.get(), end, rt, print_event, nullptr);
  if (!report.empty()) {
    char* json = nullptr;
    if (tsl_scenario_report(scenario.get(), 1, &json) == TSL_OK) {
      std::ofstream out(report, std::ios::trunc);
      out << take(json) << "\n";
      if (!out) std::cerr << "tessellate: cannot write report to " << report << "\n";
    }
  }
  if (st != TSL_OK) return report_error("run", st);
  return 0;
}

int cmd_serve(const std::string& host, int port, const std::string& registry, const std::string& scenario) {
  // Block the signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  int code = 0;
  EnginePtr engine = open_engine(registry, code);
  if (!engine) return code;
  tsl_gateway* gw = nullptr;
  tsl_status st = tsl_gateway_start(engine.get(), host.c_str(), static_cast<uint16_t>(port),
                                    scenario.empty() ? nullptr : scenario.c_str(), &gw);
  if (st != TSL_OK) return report_error("serve", st);
  std::cout << "listening on ws://" << host << ":" << tsl_gateway_port(gw) << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  tsl_gateway_stop(gw);
  tsl_gateway_destroy(gw);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tessellate co-simulation orchestrator"};
  app.require_subcommand(1);
  std::string registry;
  app.add_option("--registry", registry, "simulator registry file (default: $TESSELLATE_REGISTRY or built-ins)");

  std::string file;
  bool pairs = false;
  auto* bake = app.add_subcommand("bake", "validate and bake a scenario, print the report");
  bake->add_option("file", file, "scenario file")->required();
  bake->add_option("--registry", registry, "simulator registry file");
  bake->add_flag("--pairs", pairs, "include resolved pairs in the report");

  long long end = 0;
  double rt = -1;
  std::string report;
  auto* run = app.add_subcommand("run", "bake and run a scenario headless");
  run->add_option("file", file, "scenario file")->required();
  run->add_option("--registry", registry, "simulator registry file");
  run->add_option("--end", end, "end time in simulated seconds")->required()->check(CLI::PositiveNumber);
  run->add_option("--rt", rt, "real-time factor (wall seconds per simulated second)")->check(CLI::PositiveNumber);
  run->add_option("--report", report, "write the final orbit report here");

  std::string host = "127.0.0.1";
  int port = 8765;
  std::string scenario;
  auto* serve = app.add_subcommand("serve", "run the websocket gateway");
  serve->add_option("--port", port, "listen port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "listen address");
  serve->add_option("--registry", registry, "simulator registry file");
  serve->add_option("--scenario", scenario, "scenario to open at startup");

  CLI11_PARSE(app, argc, argv);

  if (*bake) return cmd_bake(file, registry, pairs);
  if (*run) return cmd_run(file, registry, end, rt, report);
  return cmd_serve(host, port, registry, scenario);
}
