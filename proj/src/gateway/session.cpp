#include "gateway/session.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>

namespace tessellate {

namespace fs = std::filesystem;

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Idle: return "idle";
    case RunStatus::Running: return "running";
    case RunStatus::Stopping: return "stopping";
  }
  return "?";
}

void write_file_atomically(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("short write to '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot replace '" + path.string() + "': " + ec.message());
  }
}

namespace {

template <class T>
T element_or_throw(std::optional<T> parsed, const std::vector<ParseError>& errors) {
  if (!parsed) throw RequestError("InvalidPayload", format_parse_errors(errors));
  return std::move(*parsed);
}

const Json& require(const Json& payload, const char* key) {
  if (!payload.is_object() || !payload.contains(key))
    throw RequestError("InvalidPayload", std::string("payload needs '") + key + "'");
  return payload.at(key);
}

std::string require_string(const Json& payload, const char* key) {
  const Json& v = require(payload, key);
  if (!v.is_string()) throw RequestError("InvalidPayload", std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

template <class T>
typename std::vector<T>::iterator find_by_id(std::vector<T>& items, const std::string& id) {
  return std::find_if(items.begin(), items.end(), [&](const T& x) { return x.id == id; });
}

}  // namespace

Session::Session(SessionOptions options) : options_(std::move(options)) {
  options_.context.launch.working_dir = options_.base_dir;
  orbit_ = bake(description_, options_.context);
  actor_ = std::thread([this] { loop(); });
}

Session::~Session() {
  stop_run_ = true;
  std::promise<void> done;
  post([&] {
    if (run_thread_.joinable()) run_thread_.join();
    orbit_.shutdown();
    done.set_value();
  });
  done.get_future().wait();
  {
    std::lock_guard lk(mu_);
    quit_ = true;
  }
  cv_.notify_all();
  actor_.join();
}

void Session::post(std::function<void()> fn) {
  {
    std::lock_guard lk(mu_);
    tasks_.push_back({std::move(fn)});
  }
  cv_.notify_all();
}

void Session::loop() {
  for (;;) {
    std::optional<Task> task;
    {
      std::unique_lock lk(mu_);
      auto ready = [&] { return quit_ || !tasks_.empty(); };
      if (rebake_due_) cv_.wait_until(lk, *rebake_due_, ready);
      else cv_.wait(lk, ready);
      if (quit_) return;
      if (!tasks_.empty()) {
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
    }
    if (task) task->fn();
    if (rebake_due_ && std::chrono::steady_clock::now() >= *rebake_due_) rebake_now();
  }
}

void Session::open(const fs::path& scenario) {
  std::promise<void> done;
  post([&] {
    try {
      load(Json{{"path", scenario.string()}});
      done.set_value();
    } catch (const RequestError& e) {
      done.set_exception(std::make_exception_ptr(std::runtime_error(e.what())));
    } catch (...) {
      done.set_exception(std::current_exception());
    }
  });
  done.get_future().get();
}

std::uint64_t Session::subscribe(Listener listener) {
  std::promise<std::uint64_t> token;
  post([&] {
    std::uint64_t id = next_listener_++;
    Json welcome = {{"notify", "welcome"}, {"seq", seq_}, {"payload", state_json()}};
    listener(welcome.dump());
    listeners_.emplace(id, std::move(listener));
    token.set_value(id);
  });
  return token.get_future().get();
}

void Session::unsubscribe(std::uint64_t token) {
  std::promise<void> done;
  post([&] {
    listeners_.erase(token);
    done.set_value();
  });
  done.get_future().wait();
}

void Session::submit(Json request, Reply reply) {
  post([this, request = std::move(request), reply = std::move(reply)] {
    Json req_id = request.is_object() ? request.value("req_id", Json()) : Json();
    try {
      if (!request.is_object() || !request.contains("method") || !request["method"].is_string())
        throw RequestError("InvalidRequest", "request needs a string 'method'");
      Json payload = request.value("payload", Json::object());
      Json result = dispatch(request["method"].get<std::string>(), payload);
      reply({{"req_id", req_id}, {"ok", true}, {"result", std::move(result)}});
    } catch (const RequestError& e) {
      Json r = {{"req_id", req_id}, {"ok", false}, {"error", e.code()}, {"message", e.what()}};
      if (!e.detail().is_null()) r["detail"] = e.detail();
      reply(std::move(r));
    } catch (const Json::exception& e) {
      reply({{"req_id", req_id}, {"ok", false}, {"error", "InvalidPayload"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      reply({{"req_id", req_id}, {"ok", false}, {"error", "Internal"}, {"message", e.what()}});
    }
  });
}

Json Session::call(Json request) {
  std::promise<Json> p;
  submit(std::move(request), [&](Json reply) { p.set_value(std::move(reply)); });
  return p.get_future().get();
}

void Session::flush() {
  std::promise<void> done;
  post([&] {
    if (rebake_due_) rebake_now();
    done.set_value();
  });
  done.get_future().wait();
}

Json Session::report() {
  std::promise<Json> p;
  post([&] { p.set_value(orbit_report(orbit_)); });
  return p.get_future().get();
}

RunStatus Session::status() {
  std::promise<RunStatus> p;
  post([&] { p.set_value(status_); });
  return p.get_future().get();
}

// --- actor side -----------------------------------------------------------

Json Session::state_json() const {
  return {{"scenario", description_to_json(description_)},
          {"validation", issues_to_json(validate_description(description_))},
          {"report", orbit_report(orbit_)},
          {"registry", registry_to_json(options_.context.registry)},
          {"run_status", to_string(status_)},
          {"dirty", dirty_},
          {"scenario_path", scenario_path_ ? Json(scenario_path_->string()) : Json()}};
}

void Session::broadcast(const std::string& kind, Json payload) {
  Json msg = {{"notify", kind}, {"seq", ++seq_}, {"payload", std::move(payload)}};
  const std::string text = msg.dump();
  for (auto& [id, listener] : listeners_) listener(text);
}

void Session::touch_description(bool rebake_needed) {
  dirty_ = true;
  broadcast("scenario_changed", {{"scenario", description_to_json(description_)},
                                 {"validation", issues_to_json(validate_description(description_))},
                                 {"dirty", dirty_}});
  if (rebake_needed) rebake_due_ = std::chrono::steady_clock::now() + options_.debounce;
}

void Session::rebake_now() {
  rebake_due_.reset();
  orbit_ = rebake(std::move(orbit_), description_, options_.context);
  broadcast("baking_state", orbit_report(orbit_));
}

void Session::require_idle() const {
  if (status_ != RunStatus::Idle) throw RequestError("EditWhileRunning", "the scenario cannot change during a run");
}

Json Session::dispatch(const std::string& method, const Json& payload) {
  if (method == "get_state") return state_json();
  if (method == "list_registry") return registry_to_json(options_.context.registry);
  if (method == "get_pairs") return get_pairs(payload);
  if (method == "save_scenario") return save(payload);
  if (method == "start_run") return start_run(payload);
  if (method == "stop_run") return stop_run();
  if (method == "add_simulator" || method == "add_tessera" || method == "add_connection") {
    require_idle();
    return add_element(method, payload);
  }
  if (method == "update_simulator" || method == "update_tessera" || method == "update_connection") {
    require_idle();
    return update_element(method, payload);
  }
  if (method == "remove_simulator" || method == "remove_tessera" || method == "remove_connection") {
    require_idle();
    return remove_element(method, payload);
  }
  if (method == "set_scenario_params") {
    require_idle();
    return set_params(payload);
  }
  if (method == "set_position") {
    require_idle();
    return set_position(payload);
  }
  if (method == "load_scenario") {
    require_idle();
    return load(payload);
  }
  throw RequestError("UnknownMethod", "unknown method '" + method + "'");
}

Json Session::add_element(const std::string& method, const Json& payload) {
  std::vector<ParseError> errors;
  std::string id;
  if (method == "add_simulator") {
    std::string key = require_string(payload, "registry_key");
    if (payload.contains("id")) {
      id = require_string(payload, "id");
    } else {
      for (int n = 1;; ++n) {
        id = key + "_" + std::to_string(n);
        if (!description_.find_simulator(id)) break;
      }
    }
    if (description_.find_simulator(id)) throw RequestError("DuplicateId", "simulator '" + id + "' exists");
    SimulatorSpec s;
    s.id = id;
    s.registry_key = key;
    const RegistryEntry* entry = options_.context.registry.find(key);
    s.display_name = payload.value("display_name", entry ? entry->display_name : key);
    s.init_params = payload.value("init_params", Json::object());
    if (!s.init_params.is_object()) throw RequestError("InvalidPayload", "'init_params' must be an object");
    description_.simulators.push_back(std::move(s));
  } else if (method == "add_tessera") {
    auto t = element_or_throw(tessera_from_json(require(payload, "tessera"), errors), errors);
    id = t.id;
    if (description_.find_tessera(id)) throw RequestError("DuplicateId", "tessera '" + id + "' exists");
    description_.tesserae.push_back(std::move(t));
  } else {
    auto c = element_or_throw(connection_from_json(require(payload, "connection"), errors), errors);
    id = c.id;
    if (description_.find_connection(id)) throw RequestError("DuplicateId", "connection '" + id + "' exists");
    description_.connections.push_back(std::move(c));
  }
  touch_description(true);
  return {{"id", id}, {"validation", issues_to_json(validate_description(description_))}};
}

Json Session::update_element(const std::string& method, const Json& payload) {
  std::vector<ParseError> errors;
  std::string id;
  auto replace = [&](auto& items, auto element, const char* what) {
    id = element.id;
    auto it = find_by_id(items, id);
    if (it == items.end()) throw RequestError("UnknownElement", std::string("no ") + what + " '" + id + "'");
    *it = std::move(element);
  };
  if (method == "update_simulator")
    replace(description_.simulators, element_or_throw(simulator_from_json(require(payload, "simulator"), errors), errors),
            "simulator");
  else if (method == "update_tessera")
    replace(description_.tesserae, element_or_throw(tessera_from_json(require(payload, "tessera"), errors), errors),
            "tessera");
  else
    replace(description_.connections,
            element_or_throw(connection_from_json(require(payload, "connection"), errors), errors), "connection");
  touch_description(true);
  return {{"id", id}, {"validation", issues_to_json(validate_description(description_))}};
}

Json Session::remove_element(const std::string& method, const Json& payload) {
  std::string id = require_string(payload, "id");
  auto erase = [&](auto& items, const char* what) {
    auto it = find_by_id(items, id);
    if (it == items.end()) throw RequestError("UnknownElement", std::string("no ") + what + " '" + id + "'");
    items.erase(it);
  };
  if (method == "remove_simulator") {
    erase(description_.simulators, "simulator");
  } else if (method == "remove_tessera") {
    erase(description_.tesserae, "tessera");
    description_.layout.erase(id);
  } else {
    erase(description_.connections, "connection");
  }
  touch_description(true);
  return {{"id", id}, {"validation", issues_to_json(validate_description(description_))}};
}

Json Session::set_params(const Json& payload) {
  const Json& patch = require(payload, "params");
  if (!patch.is_object()) throw RequestError("InvalidPayload", "'params' must be an object");
  Json merged = params_to_json(description_.params);
  for (auto& [k, v] : patch.items()) {
    if (v.is_null()) merged.erase(k);
    else merged[k] = v;
  }
  std::vector<ParseError> errors;
  description_.params = element_or_throw(params_from_json(merged, errors), errors);
  touch_description(true);
  return {{"params", params_to_json(description_.params)},
          {"validation", issues_to_json(validate_description(description_))}};
}

Json Session::set_position(const Json& payload) {
  std::string id = require_string(payload, "tessera");
  if (!description_.find_tessera(id)) throw RequestError("UnknownElement", "no tessera '" + id + "'");
  const Json& x = require(payload, "x");
  const Json& y = require(payload, "y");
  if (!x.is_number() || !y.is_number()) throw RequestError("InvalidPayload", "'x' and 'y' must be numbers");
  description_.layout[id] = NodePosition{x.get<double>(), y.get<double>()};
  touch_description(false);
  return {{"tessera", id}};
}

Json Session::save(const Json& payload) {
  fs::path path;
  if (payload.is_object() && payload.contains("path")) {
    path = require_string(payload, "path");
    if (path.is_relative()) path = options_.base_dir / path;
  } else if (scenario_path_) {
    path = *scenario_path_;
  } else {
    throw RequestError("NoPath", "the scenario has no file yet; pass 'path'");
  }
  try {
    write_file_atomically(path, serialize_description(description_));
  } catch (const std::exception& e) {
    throw RequestError("IoError", e.what());
  }
  scenario_path_ = path;
  dirty_ = false;
  return {{"path", path.string()}};
}

Json Session::load(const Json& payload) {
  fs::path path = require_string(payload, "path");
  if (path.is_relative()) path = options_.base_dir / path;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RequestError("IoError", "cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  ParseOutcome parsed = parse_description(text.str());
  if (!parsed.ok()) {
    Json detail = Json::array();
    for (const auto& e : parsed.errors)
      detail.push_back({{"path", e.path}, {"line", e.line}, {"column", e.column}, {"message", e.message}});
    throw RequestError("ParseError", format_parse_errors(parsed.errors), detail);
  }

  orbit_.shutdown();
  description_ = std::move(*parsed.description);
  scenario_path_ = path;
  dirty_ = false;
  rebake_due_.reset();
  options_.context.launch.working_dir = path.parent_path();
  orbit_ = bake(description_, options_.context);
  broadcast("scenario_changed", {{"scenario", description_to_json(description_)},
                                 {"validation", issues_to_json(validate_description(description_))},
                                 {"dirty", dirty_}});
  broadcast("baking_state", orbit_report(orbit_));
  return {{"path", path.string()}, {"problems", orbit_.problems.size()}};
}

Json Session::start_run(const Json& payload) {
  if (status_ != RunStatus::Idle) throw RequestError("AlreadyRunning", "a run is in progress");
  ScenarioParams params = description_.params;
  if (payload.is_object()) {
    if (auto it = payload.find("end_time"); it != payload.end()) {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 1)
        throw RequestError("InvalidPayload", "'end_time' must be a positive integer");
      params.end_time = it->get<std::int64_t>();
    }
    if (auto it = payload.find("real_time_factor"); it != payload.end()) {
      if (it->is_null()) params.real_time_factor.reset();
      else if (it->is_number() && it->get<double>() > 0) params.real_time_factor = it->get<double>();
      else throw RequestError("InvalidPayload", "'real_time_factor' must be positive or null");
    }
  }
  if (rebake_due_ || orbit_.ran) rebake_now();
  try {
    check_dataflow(orbit_);
  } catch (const CycleError& e) {
    throw RequestError("DataflowCycle", e.what(), Json{{"cycle", e.cycle()}});
  }
  if (run_thread_.joinable()) run_thread_.join();
  status_ = RunStatus::Running;
  stop_run_ = false;
  orbit_.ran = true;
  run_thread_ = std::thread([this, params] {
    auto sink = [this](const RunEvent& e) { post([this, e] { on_run_event(e); }); };
    try {
      run(orbit_, params, sink, &stop_run_);
    } catch (const std::exception& e) {
      sink(RunErrorEvent{"run", e.what()});
    }
  });
  return {{"status", to_string(status_)}, {"end_time", params.end_time}};
}

Json Session::stop_run() {
  if (status_ == RunStatus::Idle) throw RequestError("NotRunning", "no run is in progress");
  stop_run_ = true;
  status_ = RunStatus::Stopping;
  return {{"status", to_string(status_)}};
}

void Session::on_run_event(const RunEvent& e) {
  broadcast("run_event", to_json(e));
  if (std::holds_alternative<DoneEvent>(e) || std::holds_alternative<RunErrorEvent>(e)) {
    if (run_thread_.joinable()) run_thread_.join();
    status_ = RunStatus::Idle;
  }
}

Json Session::get_pairs(const Json& payload) const {
  std::string id = require_string(payload, "connection_id");
  if (!description_.find_connection(id)) throw RequestError("UnknownElement", "no connection '" + id + "'");
  Json out = {{"connection_id", id}};
  const ElementState* s = orbit_.state_of(ElementId{ElementKind::Connection, id});
  out["state"] = s ? to_string(s->kind) : "unknown";
  if (auto it = orbit_.connections.find(id); it != orbit_.connections.end()) {
    out["pairs"] = pairs_to_json(it->second.pairs);
    out["dropped"] = it->second.dropped;
  } else {
    out["pairs"] = Json::array();
    out["dropped"] = 0;
  }
  return out;
}

}  // namespace tessellate
