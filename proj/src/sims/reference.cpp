#include "sims/reference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace tessellate::sims {

double pv_profile(std::int64_t time) {
  double day_fraction = static_cast<double>(time % 86400) / 86400.0;
  return std::max(0.0, std::sin(std::numbers::pi * day_fraction));
}

double controller_curtailment(double v_pu) {
  if (v_pu >= 0.99) return 1.0;
  return std::clamp((v_pu - 0.95) / 0.04, 0.0, 1.0);
}

double bus_voltage(double p_net) { return 1.0 - 0.001 * p_net; }

namespace {

ParamDescriptor param(std::string name, std::string type, std::string doc,
                      std::optional<std::string> unit = std::nullopt,
                      std::optional<std::vector<Json>> allowed = std::nullopt) {
  return {std::move(name), std::move(type), std::move(allowed), std::move(unit), std::move(doc)};
}

void reject_unknown_params(const Json& params, std::initializer_list<const char*> known) {
  for (const auto& [k, _] : params.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
      throw SimFault("bad_params", "unknown create parameter '" + k + "'");
}

double number_param(const Json& params, const char* key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (!it->is_number()) throw SimFault("bad_params", std::string("'") + key + "' must be a number");
  return it->get<double>();
}

double numeric_input(const SenderValue& sv, const std::string& attr) {
  if (!sv.value.is_number()) throw SimFault("bad_input", "input '" + attr + "' must be numeric");
  return sv.value.get<double>();
}

// Entities keyed by id with per-entity state `S`.
template <class S>
class Table {
 public:
  void check_fresh(const std::vector<std::string>& ids) const {
    std::set<std::string> seen;
    for (const auto& id : ids)
      if (items_.count(id) || !seen.insert(id).second)
        throw SimFault("duplicate_entity_id", "entity id '" + id + "' already exists");
  }
  S& add(const std::string& id, S s) { return items_.emplace(id, std::move(s)).first->second; }
  S& at(const std::string& id) {
    auto it = items_.find(id);
    if (it == items_.end()) throw SimFault("unknown_entity", "unknown entity '" + id + "'");
    return it->second;
  }
  std::map<std::string, S>& items() { return items_; }

 private:
  std::map<std::string, S> items_;
};

[[noreturn]] void unknown_attr(const std::string& eid, const std::string& attr) {
  throw SimFault("unknown_attr", "entity '" + eid + "' has no attribute '" + attr + "'");
}

std::filesystem::path resolve(const SimulatorContext& ctx, const std::string& file) {
  std::filesystem::path p(file);
  if (p.is_relative() && !ctx.working_dir.empty()) p = ctx.working_dir / p;
  return p;
}

// --------------------------------------------------------------------------
// grid-sim

struct BusDef {
  std::string id;
  std::string voltage_level;
};

std::vector<BusDef> load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SimFault("topology_not_found", "topology file '" + path.filename().string() + "' not found");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("buses") || !doc["buses"].is_array())
    throw SimFault("bad_topology", "topology file '" + path.filename().string() + "' is malformed");
  std::vector<BusDef> buses;
  std::set<std::string> ids;
  for (const auto& b : doc["buses"]) {
    if (!b.is_object() || !b.contains("id") || !b["id"].is_string())
      throw SimFault("bad_topology", "bus entries need a string 'id'");
    BusDef def{b["id"].get<std::string>(), b.value("voltage_level", "LV")};
    if (def.voltage_level != "LV" && def.voltage_level != "MV")
      throw SimFault("bad_topology", "bus '" + def.id + "' has invalid voltage_level");
    if (!ids.insert(def.id).second) throw SimFault("bad_topology", "duplicate bus id '" + def.id + "'");
    buses.push_back(std::move(def));
  }
  return buses;
}

class GridSim final : public Simulator {
 public:
  explicit GridSim(SimulatorContext ctx) : ctx_(std::move(ctx)) {}

  SimulatorMeta init(const Json& params) override {
    reject_unknown_init(params);
    if (auto it = params.find("topology"); it != params.end()) {
      if (!it->is_string()) throw SimFault("bad_params", "'topology' must be a file name");
      topology_file_ = it->get<std::string>();
      default_topology_ = load_topology(resolve(ctx_, *topology_file_));
    }
    SimulatorMeta meta;
    meta.step_size = kStepSize;
    meta.models["Grid"] = ModelMeta{{param("file", "string", "topology file; defaults to the init topology")}, {}, {}};
    meta.models["Bus"] = ModelMeta{
        {param("voltage_level", "string", "voltage band of the bus", std::nullopt, std::vector<Json>{"LV", "MV"})},
        {"p_in"},
        {"p_net", "v_pu"}};
    return meta;
  }

  std::vector<EntityRecord> create(const std::string& model, const std::vector<std::string>& ids,
                                   const Json& params) override {
    std::vector<EntityRecord> out;
    if (model == "Bus") {
      reject_unknown_params(params, {"voltage_level"});
      std::string level = params.value("voltage_level", "LV");
      if (level != "LV" && level != "MV") throw SimFault("bad_params", "voltage_level must be LV or MV");
      buses_.check_fresh(ids);
      check_not_grid(ids);
      for (const auto& id : ids) {
        buses_.add(id, Bus{level});
        out.push_back({id, "Bus", {{"voltage_level", level}}, false});
      }
      return out;
    }
    // Grid
    reject_unknown_params(params, {"file"});
    std::vector<BusDef> topology;
    if (auto it = params.find("file"); it != params.end()) {
      if (!it->is_string()) throw SimFault("bad_params", "'file' must be a file name");
      topology = load_topology(resolve(ctx_, it->get<std::string>()));
    } else if (topology_file_) {
      topology = default_topology_;
    } else {
      throw SimFault("bad_params", "Grid needs a 'file' parameter or an init topology");
    }
    std::vector<std::string> all = ids;
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (const auto& b : topology) all.push_back(b.id);
    buses_.check_fresh(all);
    check_not_grid(all);
    for (const auto& id : ids) {
      grids_.insert(id);
      out.push_back({id, "Grid", {{"bus_count", topology.size()}}, false});
    }
    for (const auto& b : topology) {
      buses_.add(b.id, Bus{b.voltage_level});
      out.push_back({b.id, "Bus", {{"voltage_level", b.voltage_level}}, true});
    }
    return out;
  }

  void step(std::int64_t, const StepInputs& inputs) override {
    for (const auto& [eid, attrs] : inputs) {
      if (grids_.count(eid)) {
        if (!attrs.empty()) unknown_attr(eid, attrs.begin()->first);
        continue;
      }
      Bus& bus = buses_.at(eid);
      for (const auto& [attr, values] : attrs) {
        if (attr != "p_in") unknown_attr(eid, attr);
        double sum = 0.0;
        for (const auto& sv : values) sum += numeric_input(sv, attr);
        bus.p_in = sum;
      }
    }
    for (auto& [_, bus] : buses_.items()) bus.p_net = bus.p_in;
  }

  OutputData get_data(const OutputRequest& wanted) override {
    OutputData out;
    for (const auto& [eid, attrs] : wanted) {
      if (grids_.count(eid)) {
        if (!attrs.empty()) unknown_attr(eid, attrs.front());
        out[eid];
        continue;
      }
      Bus& bus = buses_.at(eid);
      auto& slot = out[eid];
      for (const auto& attr : attrs) {
        if (attr == "p_net") slot[attr] = bus.p_net;
        else if (attr == "v_pu") slot[attr] = bus_voltage(bus.p_net);
        else unknown_attr(eid, attr);
      }
    }
    return out;
  }

 private:
  struct Bus {
    std::string voltage_level;
    double p_in = 0.0;   // last received
    double p_net = 0.0;  // as of the last step
  };

  static void reject_unknown_init(const Json& params) {
    for (const auto& [k, _] : params.items())
      if (k != "topology") throw SimFault("bad_params", "unknown init parameter '" + k + "'");
  }

  void check_not_grid(const std::vector<std::string>& ids) const {
    for (const auto& id : ids)
      if (grids_.count(id)) throw SimFault("duplicate_entity_id", "entity id '" + id + "' already exists");
  }

  SimulatorContext ctx_;
  std::optional<std::string> topology_file_;
  std::vector<BusDef> default_topology_;
  std::set<std::string> grids_;
  Table<Bus> buses_;
};

// --------------------------------------------------------------------------
// pv-sim

class PvSim final : public Simulator {
 public:
  SimulatorMeta init(const Json& params) override {
    if (!params.empty()) throw SimFault("bad_params", "pv-sim takes no init parameters");
    ModelMeta gen{{param("peak_kw", "number", "rated peak output", "kW")}, {"curtailment"}, {"p"}};
    SimulatorMeta meta;
    meta.step_size = kStepSize;
    meta.models["PV"] = gen;
    meta.models["WT"] = gen;
    return meta;
  }

  std::vector<EntityRecord> create(const std::string& model, const std::vector<std::string>& ids,
                                   const Json& params) override {
    reject_unknown_params(params, {"peak_kw"});
    double peak = number_param(params, "peak_kw", 1.0);
    if (peak < 0) throw SimFault("bad_params", "peak_kw must be non-negative");
    units_.check_fresh(ids);
    std::vector<EntityRecord> out;
    for (const auto& id : ids) {
      units_.add(id, Unit{model == "WT", peak});
      out.push_back({id, model, {{"peak_kw", peak}}, false});
    }
    return out;
  }

  void step(std::int64_t time, const StepInputs& inputs) override {
    for (auto& [_, u] : units_.items()) u.curtailment = 1.0;
    for (const auto& [eid, attrs] : inputs) {
      Unit& u = units_.at(eid);
      for (const auto& [attr, values] : attrs) {
        if (attr != "curtailment") unknown_attr(eid, attr);
        // Several controllers: the most restrictive signal wins.
        for (const auto& sv : values) u.curtailment = std::min(u.curtailment, numeric_input(sv, attr));
        u.curtailment = std::clamp(u.curtailment, 0.0, 1.0);
      }
    }
    for (auto& [_, u] : units_.items())
      u.p = u.peak_kw * (u.wind ? 0.6 : pv_profile(time)) * u.curtailment;
  }

  OutputData get_data(const OutputRequest& wanted) override {
    OutputData out;
    for (const auto& [eid, attrs] : wanted) {
      Unit& u = units_.at(eid);
      auto& slot = out[eid];
      for (const auto& attr : attrs) {
        if (attr != "p") unknown_attr(eid, attr);
        slot[attr] = u.p;
      }
    }
    return out;
  }

 private:
  struct Unit {
    bool wind = false;
    double peak_kw = 1.0;
    double curtailment = 1.0;
    double p = 0.0;
  };
  Table<Unit> units_;
};

// --------------------------------------------------------------------------
// controller-sim

class ControllerSim final : public Simulator {
 public:
  SimulatorMeta init(const Json& params) override {
    if (!params.empty()) throw SimFault("bad_params", "controller-sim takes no init parameters");
    SimulatorMeta meta;
    meta.step_size = kStepSize;
    meta.models["Ctl"] = ModelMeta{{}, {"v_pu"}, {"curtailment"}};
    return meta;
  }

  std::vector<EntityRecord> create(const std::string& model, const std::vector<std::string>& ids,
                                   const Json& params) override {
    reject_unknown_params(params, {});
    ctls_.check_fresh(ids);
    std::vector<EntityRecord> out;
    for (const auto& id : ids) {
      ctls_.add(id, Ctl{});
      out.push_back({id, model, Json::object(), false});
    }
    return out;
  }

  void step(std::int64_t, const StepInputs& inputs) override {
    for (const auto& [eid, attrs] : inputs) {
      Ctl& c = ctls_.at(eid);
      for (const auto& [attr, values] : attrs) {
        if (attr != "v_pu") unknown_attr(eid, attr);
        if (values.empty()) continue;
        double v = numeric_input(values.front(), attr);
        for (const auto& sv : values) v = std::min(v, numeric_input(sv, attr));
        c.v_pu = v;
      }
    }
    for (auto& [_, c] : ctls_.items()) c.curtailment = controller_curtailment(c.v_pu);
  }

  OutputData get_data(const OutputRequest& wanted) override {
    OutputData out;
    for (const auto& [eid, attrs] : wanted) {
      Ctl& c = ctls_.at(eid);
      auto& slot = out[eid];
      for (const auto& attr : attrs) {
        if (attr != "curtailment") unknown_attr(eid, attr);
        slot[attr] = c.curtailment;
      }
    }
    return out;
  }

 private:
  struct Ctl {
    double v_pu = 1.0;
    double curtailment = 1.0;
  };
  Table<Ctl> ctls_;
};

// --------------------------------------------------------------------------
// collector-sim

class CollectorSim final : public Simulator {
 public:
  explicit CollectorSim(SimulatorContext ctx) : ctx_(std::move(ctx)) {}

  SimulatorMeta init(const Json& params) override {
    if (!params.empty()) throw SimFault("bad_params", "collector-sim takes no init parameters");
    SimulatorMeta meta;
    meta.step_size = kStepSize;
    meta.models["Collector"] = ModelMeta{{param("out_file", "string", "JSON lines output file")}, {"*"}, {}};
    return meta;
  }

  std::vector<EntityRecord> create(const std::string& model, const std::vector<std::string>& ids,
                                   const Json& params) override {
    reject_unknown_params(params, {"out_file"});
    auto it = params.find("out_file");
    if (it == params.end() || !it->is_string()) throw SimFault("bad_params", "Collector needs 'out_file'");
    sinks_.check_fresh(ids);
    std::vector<Sink> opened;
    for (const auto& id : ids) {
      auto path = resolve(ctx_, it->get<std::string>());
      auto out = std::make_shared<std::ofstream>(path, std::ios::trunc);
      if (!*out) throw SimFault("io", "cannot open '" + it->get<std::string>() + "' for writing");
      *out << Json{{"header", true}, {"collector", id}}.dump() << "\n";
      out->flush();
      opened.push_back(Sink{out});
    }
    std::vector<EntityRecord> records;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      sinks_.add(ids[i], opened[i]);
      records.push_back({ids[i], model, Json::object(), false});
    }
    return records;
  }

  void step(std::int64_t time, const StepInputs& inputs) override {
    for (const auto& [eid, attrs] : inputs) {
      Sink& s = sinks_.at(eid);
      for (const auto& [attr, values] : attrs)
        for (const auto& sv : values)
          *s.out << Json{{"time", time}, {"sender", to_string(sv.sender)}, {"attr", attr}, {"value", sv.value}}.dump()
                 << "\n";
      s.out->flush();
      if (!*s.out) throw SimFault("io", "write failed for collector '" + eid + "'");
    }
  }

  OutputData get_data(const OutputRequest& wanted) override {
    OutputData out;
    for (const auto& [eid, attrs] : wanted) {
      sinks_.at(eid);
      if (!attrs.empty()) unknown_attr(eid, attrs.front());
      out[eid];
    }
    return out;
  }

 private:
  struct Sink {
    std::shared_ptr<std::ofstream> out;
  };
  SimulatorContext ctx_;
  Table<Sink> sinks_;
};

}  // namespace

std::unique_ptr<Simulator> make_grid_sim(const SimulatorContext& ctx) { return std::make_unique<GridSim>(ctx); }
std::unique_ptr<Simulator> make_pv_sim(const SimulatorContext&) { return std::make_unique<PvSim>(); }
std::unique_ptr<Simulator> make_controller_sim(const SimulatorContext&) { return std::make_unique<ControllerSim>(); }
std::unique_ptr<Simulator> make_collector_sim(const SimulatorContext& ctx) {
  return std::make_unique<CollectorSim>(ctx);
}

BuiltinCatalog reference_catalog() {
  BuiltinCatalog c;
  c.add("grid-sim", make_grid_sim);
  c.add("pv-sim", make_pv_sim);
  c.add("controller-sim", make_controller_sim);
  c.add("collector-sim", make_collector_sim);
  return c;
}

std::unique_ptr<Simulator> make_reference_sim(const std::string& key, const SimulatorContext& ctx) {
  auto catalog = reference_catalog();
  const SimulatorFactory* f = catalog.find(key);
  return f ? (*f)(ctx) : nullptr;
}

}  // namespace tessellate::sims
