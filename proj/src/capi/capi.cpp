#include <tessellate/tessellate.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "bake/orbit.hpp"
#include "gateway/session.hpp"
#include "gateway/ws_server.hpp"
#include "run/kernel.hpp"
#include "sims/reference.hpp"

using namespace tessellate;
namespace fs = std::filesystem;

struct tsl_engine {
  Registry registry;
  BuiltinCatalog catalog;
};

struct tsl_scenario {
  tsl_engine* engine = nullptr;
  fs::path path;
  ScenarioDescription description;
  std::optional<Orbit> orbit;

  BakeContext context() const {
    BakeContext ctx{engine->registry, engine->catalog, {}};
    ctx.launch.working_dir = path.parent_path();
    return ctx;
  }

  ~tsl_scenario() {
    if (orbit) orbit->shutdown();
  }
};

struct tsl_gateway {
  std::unique_ptr<Session> session;
  std::unique_ptr<GatewayServer> server;

  ~tsl_gateway() {
    server.reset();
    session.reset();
  }
};

namespace {

thread_local std::string last_error;

tsl_status fail(tsl_status status, const std::string& message) {
  last_error = message;
  return status;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Catches everything so no exception crosses the C boundary.
template <class F>
tsl_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const std::bad_alloc&) {
    return fail(TSL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TSL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TSL_ERR_INTERNAL, "unknown error");
  }
}

tsl_status bake_scenario(tsl_scenario* s) {
  if (s->orbit) s->orbit->shutdown();
  s->orbit.reset();
  s->orbit.emplace(bake(s->description, s->context()));
  if (!s->orbit->problems.empty()) {
    const auto& p = s->orbit->problems.front();
    return fail(TSL_ERR_BAKE_PROBLEMS, std::to_string(s->orbit->problems.size()) + " baking problem(s); first: " +
                                           to_string(p.element) + ": " + p.message);
  }
  return TSL_OK;
}

}  // namespace

extern "C" {

const char* tsl_version(void) { return "0.1.0"; }

const char* tsl_status_string(tsl_status status) {
  switch (status) {
    case TSL_OK: return "ok";
    case TSL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TSL_ERR_IO: return "i/o error";
    case TSL_ERR_PARSE: return "parse error";
    case TSL_ERR_REGISTRY: return "registry error";
    case TSL_ERR_BAKE_PROBLEMS: return "baking problems";
    case TSL_ERR_CYCLE: return "dataflow cycle";
    case TSL_ERR_RUN: return "run failed";
    case TSL_ERR_SERVE: return "serve failed";
    case TSL_ERR_STATE: return "invalid state";
    case TSL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tsl_last_error(void) { return last_error.c_str(); }

void tsl_string_free(char* s) { std::free(s); }

tsl_status tsl_engine_create(const char* registry_path, tsl_engine** out) {
  if (!out) return fail(TSL_ERR_INVALID_ARGUMENT, "out is null");
  *out = nullptr;
  return guarded([&] {
    auto engine = std::make_unique<tsl_engine>();
    engine->catalog = sims::reference_catalog();
    std::string path = registry_path ? registry_path : "";
    if (path.empty())
      if (const char* env = std::getenv("TESSELLATE_REGISTRY")) path = env;
    try {
      engine->registry = path.empty() ? default_registry() : load_registry(path);
    } catch (const RegistryError& e) {
      return fail(TSL_ERR_REGISTRY, e.what());
    }
    *out = engine.release();
    return TSL_OK;
  });
}

void tsl_engine_destroy(tsl_engine* engine) { delete engine; }

tsl_status tsl_engine_registry_json(const tsl_engine* engine, char** out_json) {
  if (!engine || !out_json) return fail(TSL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out_json = dup_string(registry_to_json(engine->registry).dump(2));
    return TSL_OK;
  });
}

tsl_status tsl_scenario_load(tsl_engine* engine, const char* path, tsl_scenario** out) {
  if (!engine || !path || !out) return fail(TSL_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fail(TSL_ERR_IO, std::string("cannot read '") + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    ParseOutcome parsed = parse_description(text.str());
    if (!parsed.ok()) return fail(TSL_ERR_PARSE, format_parse_errors(parsed.errors));
    auto s = std::make_unique<tsl_scenario>();
    s->engine = engine;
    s->path = fs::absolute(path);
    s->description = std::move(*parsed.description);
    *out = s.release();
    return TSL_OK;
  });
}

void tsl_scenario_destroy(tsl_scenario* scenario) { delete scenario; }

tsl_status tsl_scenario_bake(tsl_scenario* scenario, size_t* problem_count) {
  if (!scenario) return fail(TSL_ERR_INVALID_ARGUMENT, "scenario is null");
  return guarded([&] {
    tsl_status st = bake_scenario(scenario);
    if (problem_count) *problem_count = scenario->orbit->problems.size();
    return st;
  });
}

tsl_status tsl_scenario_report(const tsl_scenario* scenario, int include_pairs, char** out_json) {
  if (!scenario || !out_json) return fail(TSL_ERR_INVALID_ARGUMENT, "null argument");
  if (!scenario->orbit) return fail(TSL_ERR_STATE, "scenario has not been baked");
  return guarded([&] {
    *out_json = dup_string(orbit_report(*scenario->orbit, include_pairs != 0).dump(2));
    return TSL_OK;
  });
}

tsl_status tsl_scenario_run(tsl_scenario* scenario, int64_t end_time, double real_time_factor, tsl_event_fn on_event,
                            void* user) {
  if (!scenario) return fail(TSL_ERR_INVALID_ARGUMENT, "scenario is null");
  return guarded([&] {
    if (!scenario->orbit || scenario->orbit->ran) {
      bake_scenario(scenario);  // partial orbits run with warnings
      last_error.clear();
    }
    ScenarioParams params = scenario->description.params;
    if (end_time > 0) params.end_time = end_time;
    if (real_time_factor == 0) params.real_time_factor.reset();
    else if (real_time_factor > 0) params.real_time_factor = real_time_factor;
    try {
      check_dataflow(*scenario->orbit);
    } catch (const CycleError& e) {
      return fail(TSL_ERR_CYCLE, e.what());
    }
    auto sink = [&](const RunEvent& e) {
      if (on_event) on_event(to_json(e).dump().c_str(), user);
    };
    RunSummary summary = run(*scenario->orbit, params, sink);
    if (summary.outcome == RunSummary::Outcome::Failed) return fail(TSL_ERR_RUN, summary.error);
    return TSL_OK;
  });
}

tsl_status tsl_gateway_start(tsl_engine* engine, const char* host, uint16_t port, const char* scenario_path,
                             tsl_gateway** out) {
  if (!engine || !out) return fail(TSL_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto gw = std::make_unique<tsl_gateway>();
    SessionOptions options;
    options.context.registry = engine->registry;
    options.context.catalog = engine->catalog;
    gw->session = std::make_unique<Session>(std::move(options));
    if (scenario_path && *scenario_path) {
      if (!fs::exists(scenario_path)) return fail(TSL_ERR_IO, std::string("cannot read '") + scenario_path + "'");
      try {
        gw->session->open(fs::absolute(scenario_path));
      } catch (const std::runtime_error& e) {
        return fail(TSL_ERR_PARSE, e.what());
      }
    }
    try {
      gw->server = std::make_unique<GatewayServer>(*gw->session, host ? host : "127.0.0.1", port);
    } catch (const std::runtime_error& e) {
      return fail(TSL_ERR_SERVE, e.what());
    }
    *out = gw.release();
    return TSL_OK;
  });
}

uint16_t tsl_gateway_port(const tsl_gateway* gateway) { return gateway ? gateway->server->port() : 0; }

void tsl_gateway_wait(tsl_gateway* gateway) {
  if (gateway) gateway->server->wait();
}

void tsl_gateway_stop(tsl_gateway* gateway) {
  if (gateway) gateway->server->stop();
}

void tsl_gateway_destroy(tsl_gateway* gateway) { delete gateway; }

}  // extern "C"
