#include "scenario/scenario.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace tessellate {

const SimulatorSpec* ScenarioDescription::find_simulator(const std::string& id) const {
  for (const auto& s : simulators)
    if (s.id == id) return &s;
  return nullptr;
}

const TesseraSpec* ScenarioDescription::find_tessera(const std::string& id) const {
  for (const auto& t : tesserae)
    if (t.id == id) return &t;
  return nullptr;
}

const ConnectionSpec* ScenarioDescription::find_connection(const std::string& id) const {
  for (const auto& c : connections)
    if (c.id == id) return &c;
  return nullptr;
}

const char* to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::Simulator: return "simulator";
    case ElementKind::Tessera: return "tessera";
    case ElementKind::Connection: return "connection";
  }
  return "?";
}

std::optional<ElementKind> element_kind_from_string(const std::string& s) {
  if (s == "simulator") return ElementKind::Simulator;
  if (s == "tessera") return ElementKind::Tessera;
  if (s == "connection") return ElementKind::Connection;
  return std::nullopt;
}

std::string to_string(const ElementId& e) {
  return std::string(to_string(e.kind)) + ":" + e.id;
}

const char* to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "eq";
    case CompareOp::Ne: return "ne";
    case CompareOp::Lt: return "lt";
    case CompareOp::Le: return "le";
    case CompareOp::Gt: return "gt";
    case CompareOp::Ge: return "ge";
  }
  return "?";
}

const char* to_string(Direction d) {
  return d == Direction::Forward ? "forward" : "backward";
}

const char* relation_kind(const Relation& r) {
  struct V {
    const char* operator()(const EmptyRelation&) const { return "empty"; }
    const char* operator()(const OneToOne&) const { return "one_to_one"; }
    const char* operator()(const RandomRelation&) const { return "random"; }
    const char* operator()(const ManyToOne&) const { return "many_to_one"; }
    const char* operator()(const ManualRelation&) const { return "manual"; }
    const char* operator()(const CompositionRelation&) const { return "composition"; }
  };
  return std::visit(V{}, r);
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

namespace {

Json source_to_json(const EntitySource& src) {
  struct V {
    Json operator()(const CreateFixed& s) const {
      return {{"kind", "create_fixed"}, {"count", s.count}, {"create_params", s.create_params}};
    }
    Json operator()(const CreateMatching& s) const {
      return {{"kind", "create_matching"}, {"size_of", s.size_of}, {"create_params", s.create_params}};
    }
    Json operator()(const Select& s) const {
      Json preds = Json::array();
      for (const auto& p : s.predicates)
        preds.push_back({{"key", p.key}, {"op", to_string(p.op)}, {"value", p.value}});
      return {{"kind", "select"}, {"id_pattern", s.id_pattern}, {"predicates", preds}};
    }
  };
  return std::visit(V{}, src);
}

}  // namespace

Json relation_to_json(const Relation& r) {
  struct V {
    Json operator()(const EmptyRelation&) const { return {{"kind", "empty"}}; }
    Json operator()(const OneToOne&) const { return {{"kind", "one_to_one"}}; }
    Json operator()(const RandomRelation& rr) const {
      return {{"kind", "random"}, {"allow_repeat", rr.allow_repeat}, {"seed", rr.seed}};
    }
    Json operator()(const ManyToOne&) const { return {{"kind", "many_to_one"}}; }
    Json operator()(const ManualRelation& m) const {
      Json pairs = Json::array();
      for (const auto& [s, t] : m.pairs) pairs.push_back(Json::array({s, t}));
      return {{"kind", "manual"}, {"pairs", pairs}};
    }
    Json operator()(const CompositionRelation& c) const {
      Json path = Json::array();
      for (const auto& step : c.path)
        path.push_back({{"connection", step.connection}, {"direction", to_string(step.direction)}});
      return {{"kind", "composition"}, {"path", path}};
    }
  };
  return std::visit(V{}, r);
}

Json simulator_to_json(const SimulatorSpec& s) {
  return {{"id", s.id},
          {"registry_key", s.registry_key},
          {"display_name", s.display_name},
          {"init_params", s.init_params}};
}

Json tessera_to_json(const TesseraSpec& t) {
  Json sources = Json::array();
  for (const auto& s : t.sources) sources.push_back(source_to_json(s));
  return {{"id", t.id},     {"name", t.name},   {"icon", t.icon},
          {"simulator", t.simulator_id}, {"model", t.model}, {"sources", sources}};
}

Json connection_to_json(const ConnectionSpec& c) {
  Json attrs = Json::array();
  for (const auto& a : c.attr_pairs) attrs.push_back({{"source", a.source}, {"target", a.target}});
  Json initial = Json::object();
  for (const auto& [k, v] : c.initial_values) initial[k] = v;
  return {{"id", c.id},
          {"source", c.source},
          {"target", c.target},
          {"attr_pairs", attrs},
          {"relation", relation_to_json(c.relation)},
          {"delayed", c.delayed},
          {"initial_values", initial}};
}

Json params_to_json(const ScenarioParams& p) {
  Json j = {{"end_time", p.end_time}, {"master_seed", p.master_seed}};
  if (p.real_time_factor) j["real_time_factor"] = *p.real_time_factor;
  return j;
}

Json description_to_json(const ScenarioDescription& d) {
  Json sims = Json::array();
  for (const auto& s : d.simulators) sims.push_back(simulator_to_json(s));
  Json tess = Json::array();
  for (const auto& t : d.tesserae) tess.push_back(tessera_to_json(t));
  Json conns = Json::array();
  for (const auto& c : d.connections) conns.push_back(connection_to_json(c));
  Json layout = Json::object();
  for (const auto& [id, pos] : d.layout) layout[id] = {{"x", pos.x}, {"y", pos.y}};
  return {{"format_version", kFormatVersion},
          {"simulators", sims},
          {"tesserae", tess},
          {"connections", conns},
          {"params", params_to_json(d.params)},
          {"layout", layout}};
}

std::string serialize_description(const ScenarioDescription& d) {
  // nlohmann objects are std::map backed, so key order is always sorted.
  return description_to_json(d).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(std::vector<ParseError>& errors) : errors_(errors) {}

  void fail(const std::string& path, std::string message) {
    errors_.push_back({path, 0, 0, std::move(message)});
  }

  // Checks that `j` is an object whose keys are all in `allowed`.
  bool object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [key, _] : j.items()) {
      bool known = std::any_of(allowed.begin(), allowed.end(),
                               [&](const char* a) { return key == a; });
      if (!known) fail(path + "/" + key, "unknown field '" + key + "'");
    }
    return true;
  }

  std::string string(const Json& obj, const char* key, const std::string& path,
                     std::optional<std::string> fallback = std::nullopt) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (!fallback) fail(path + "/" + key, std::string("missing field '") + key + "'");
      return fallback.value_or("");
    }
    if (!it->is_string()) {
      fail(path + "/" + key, "expected a string");
      return {};
    }
    return it->get<std::string>();
  }

  bool boolean(const Json& obj, const char* key, const std::string& path, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) {
      fail(path + "/" + key, "expected a boolean");
      return fallback;
    }
    return it->get<bool>();
  }

  std::int64_t integer(const Json& obj, const char* key, const std::string& path,
                       std::optional<std::int64_t> fallback = std::nullopt) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (!fallback) fail(path + "/" + key, std::string("missing field '") + key + "'");
      return fallback.value_or(0);
    }
    if (it->is_number_unsigned()) {
      auto v = it->get<std::uint64_t>();
      if (v > static_cast<std::uint64_t>(INT64_MAX)) {
        fail(path + "/" + key, "integer out of range");
        return 0;
      }
      return static_cast<std::int64_t>(v);
    }
    if (!it->is_number_integer()) {
      fail(path + "/" + key, "expected an integer");
      return 0;
    }
    return it->get<std::int64_t>();
  }

  std::uint64_t u64(const Json& obj, const char* key, const std::string& path, std::uint64_t fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (it->is_number_unsigned()) return it->get<std::uint64_t>();
    if (it->is_number_integer() && it->get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(it->get<std::int64_t>());
    fail(path + "/" + key, "expected an unsigned 64-bit integer");
    return fallback;
  }

  double number(const Json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return 0.0;
    }
    return j.get<double>();
  }

  Json map(const Json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) return Json::object();
    if (!it->is_object()) {
      fail(path + "/" + key, "expected an object");
      return Json::object();
    }
    return *it;
  }

  const Json* array(const Json& obj, const char* key, const std::string& path, bool required = false) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(path + "/" + key, std::string("missing field '") + key + "'");
      return nullptr;
    }
    if (!it->is_array()) {
      fail(path + "/" + key, "expected an array");
      return nullptr;
    }
    return &*it;
  }

  bool scalar(const Json& j, const std::string& path) {
    if (j.is_primitive()) return true;
    fail(path, "expected a JSON scalar");
    return false;
  }

 private:
  std::vector<ParseError>& errors_;
};

std::optional<CompareOp> compare_op_from(const std::string& s) {
  if (s == "eq") return CompareOp::Eq;
  if (s == "ne") return CompareOp::Ne;
  if (s == "lt") return CompareOp::Lt;
  if (s == "le") return CompareOp::Le;
  if (s == "gt") return CompareOp::Gt;
  if (s == "ge") return CompareOp::Ge;
  return std::nullopt;
}

std::optional<EntitySource> source_from(Reader& r, const Json& j, const std::string& path) {
  if (!j.is_object()) {
    r.fail(path, "expected an object");
    return std::nullopt;
  }
  std::string kind = r.string(j, "kind", path);
  if (kind == "create_fixed") {
    r.object(j, path, {"kind", "count", "create_params"});
    CreateFixed s;
    s.count = r.integer(j, "count", path);
    if (s.count < 0) r.fail(path + "/count", "count must be non-negative");
    s.create_params = r.map(j, "create_params", path);
    return s;
  }
  if (kind == "create_matching") {
    r.object(j, path, {"kind", "size_of", "create_params"});
    CreateMatching s;
    s.size_of = r.string(j, "size_of", path);
    s.create_params = r.map(j, "create_params", path);
    return s;
  }
  if (kind == "select") {
    r.object(j, path, {"kind", "id_pattern", "predicates"});
    Select s;
    s.id_pattern = r.string(j, "id_pattern", path, "*");
    if (const Json* preds = r.array(j, "predicates", path)) {
      for (std::size_t i = 0; i < preds->size(); ++i) {
        const Json& p = (*preds)[i];
        std::string pp = path + "/predicates/" + std::to_string(i);
        if (!r.object(p, pp, {"key", "op", "value"})) continue;
        Predicate pred;
        pred.key = r.string(p, "key", pp);
        std::string op = r.string(p, "op", pp);
        if (auto o = compare_op_from(op)) pred.op = *o;
        else if (!op.empty()) r.fail(pp + "/op", "unknown comparison '" + op + "'");
        if (p.contains("value")) {
          if (r.scalar(p["value"], pp + "/value")) pred.value = p["value"];
        } else {
          r.fail(pp + "/value", "missing field 'value'");
        }
        s.predicates.push_back(std::move(pred));
      }
    }
    return s;
  }
  if (!kind.empty()) r.fail(path + "/kind", "unknown entity source kind '" + kind + "'");
  return std::nullopt;
}

std::optional<Relation> relation_from(Reader& r, const Json& j, const std::string& path) {
  if (!j.is_object()) {
    r.fail(path, "expected an object");
    return std::nullopt;
  }
  std::string kind = r.string(j, "kind", path);
  if (kind == "empty") {
    r.object(j, path, {"kind"});
    return EmptyRelation{};
  }
  if (kind == "one_to_one") {
    r.object(j, path, {"kind"});
    return OneToOne{};
  }
  if (kind == "many_to_one") {
    r.object(j, path, {"kind"});
    return ManyToOne{};
  }
  if (kind == "random") {
    r.object(j, path, {"kind", "allow_repeat", "seed"});
    RandomRelation rr;
    rr.allow_repeat = r.boolean(j, "allow_repeat", path, false);
    rr.seed = r.u64(j, "seed", path, 0);
    return rr;
  }
  if (kind == "manual") {
    r.object(j, path, {"kind", "pairs"});
    ManualRelation m;
    if (const Json* pairs = r.array(j, "pairs", path)) {
      for (std::size_t i = 0; i < pairs->size(); ++i) {
        const Json& p = (*pairs)[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
          r.fail(path + "/pairs/" + std::to_string(i), "expected [source id, target id]");
          continue;
        }
        m.pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
      }
    }
    return m;
  }
  if (kind == "composition") {
    r.object(j, path, {"kind", "path"});
    CompositionRelation c;
    if (const Json* steps = r.array(j, "path", path, true)) {
      for (std::size_t i = 0; i < steps->size(); ++i) {
        const Json& s = (*steps)[i];
        std::string sp = path + "/path/" + std::to_string(i);
        if (!r.object(s, sp, {"connection", "direction"})) continue;
        CompositionStep step;
        step.connection = r.string(s, "connection", sp);
        std::string dir = r.string(s, "direction", sp, "forward");
        if (dir == "forward") step.direction = Direction::Forward;
        else if (dir == "backward") step.direction = Direction::Backward;
        else r.fail(sp + "/direction", "direction must be 'forward' or 'backward'");
        c.path.push_back(std::move(step));
      }
    }
    return c;
  }
  if (!kind.empty()) r.fail(path + "/kind", "unknown relation kind '" + kind + "'");
  return std::nullopt;
}

std::optional<SimulatorSpec> simulator_from(Reader& r, const Json& j, const std::string& path) {
  if (!r.object(j, path, {"id", "registry_key", "display_name", "init_params"})) return std::nullopt;
  SimulatorSpec s;
  s.id = r.string(j, "id", path);
  s.registry_key = r.string(j, "registry_key", path);
  s.display_name = r.string(j, "display_name", path, s.id);
  s.init_params = r.map(j, "init_params", path);
  return s;
}

std::optional<TesseraSpec> tessera_from(Reader& r, const Json& j, const std::string& path) {
  if (!r.object(j, path, {"id", "name", "icon", "simulator", "model", "sources"})) return std::nullopt;
  TesseraSpec t;
  t.id = r.string(j, "id", path);
  t.name = r.string(j, "name", path, t.id);
  t.icon = r.string(j, "icon", path, "");
  t.simulator_id = r.string(j, "simulator", path);
  t.model = r.string(j, "model", path);
  if (const Json* sources = r.array(j, "sources", path)) {
    for (std::size_t i = 0; i < sources->size(); ++i)
      if (auto s = source_from(r, (*sources)[i], path + "/sources/" + std::to_string(i)))
        t.sources.push_back(std::move(*s));
  }
  return t;
}

std::optional<ConnectionSpec> connection_from(Reader& r, const Json& j, const std::string& path) {
  if (!r.object(j, path, {"id", "source", "target", "attr_pairs", "relation", "delayed", "initial_values"}))
    return std::nullopt;
  ConnectionSpec c;
  c.id = r.string(j, "id", path);
  c.source = r.string(j, "source", path);
  c.target = r.string(j, "target", path);
  if (const Json* attrs = r.array(j, "attr_pairs", path)) {
    for (std::size_t i = 0; i < attrs->size(); ++i) {
      std::string ap = path + "/attr_pairs/" + std::to_string(i);
      const Json& a = (*attrs)[i];
      if (!r.object(a, ap, {"source", "target"})) continue;
      c.attr_pairs.push_back({r.string(a, "source", ap), r.string(a, "target", ap)});
    }
  }
  if (auto it = j.find("relation"); it != j.end()) {
    if (auto rel = relation_from(r, *it, path + "/relation")) c.relation = std::move(*rel);
  }
  c.delayed = r.boolean(j, "delayed", path, false);
  Json initial = r.map(j, "initial_values", path);
  for (const auto& [k, v] : initial.items()) {
    if (r.scalar(v, path + "/initial_values/" + k)) c.initial_values[k] = v;
  }
  return c;
}

std::optional<ScenarioParams> params_from(Reader& r, const Json& j, const std::string& path) {
  if (!r.object(j, path, {"end_time", "real_time_factor", "master_seed"})) return std::nullopt;
  ScenarioParams p;
  p.end_time = r.integer(j, "end_time", path, p.end_time);
  if (auto it = j.find("real_time_factor"); it != j.end() && !it->is_null())
    p.real_time_factor = r.number(*it, path + "/real_time_factor");
  p.master_seed = r.u64(j, "master_seed", path, 0);
  return p;
}

std::pair<int, int> line_and_column(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::optional<SimulatorSpec> simulator_from_json(const Json& j, std::vector<ParseError>& errors) {
  Reader r(errors);
  auto before = errors.size();
  auto s = simulator_from(r, j, "");
  return errors.size() == before ? s : std::nullopt;
}

std::optional<TesseraSpec> tessera_from_json(const Json& j, std::vector<ParseError>& errors) {
  Reader r(errors);
  auto before = errors.size();
  auto t = tessera_from(r, j, "");
  return errors.size() == before ? t : std::nullopt;
}

std::optional<ConnectionSpec> connection_from_json(const Json& j, std::vector<ParseError>& errors) {
  Reader r(errors);
  auto before = errors.size();
  auto c = connection_from(r, j, "");
  return errors.size() == before ? c : std::nullopt;
}

std::optional<ScenarioParams> params_from_json(const Json& j, std::vector<ParseError>& errors) {
  Reader r(errors);
  auto before = errors.size();
  auto p = params_from(r, j, "");
  return errors.size() == before ? p : std::nullopt;
}

ParseOutcome parse_description_json(const Json& doc) {
  ParseOutcome out;
  Reader r(out.errors);
  if (!r.object(doc, "", {"format_version", "simulators", "tesserae", "connections", "params", "layout"}))
    return out;

  auto version = doc.find("format_version");
  if (version == doc.end()) {
    r.fail("/format_version", "missing field 'format_version'");
  } else if (!version->is_number_integer() || version->get<std::int64_t>() != kFormatVersion) {
    r.fail("/format_version", "unsupported format_version (expected 1)");
  }

  ScenarioDescription d;
  if (const Json* sims = r.array(doc, "simulators", "")) {
    for (std::size_t i = 0; i < sims->size(); ++i)
      if (auto s = simulator_from(r, (*sims)[i], "/simulators/" + std::to_string(i)))
        d.simulators.push_back(std::move(*s));
  }
  if (const Json* tess = r.array(doc, "tesserae", "")) {
    for (std::size_t i = 0; i < tess->size(); ++i)
      if (auto t = tessera_from(r, (*tess)[i], "/tesserae/" + std::to_string(i)))
        d.tesserae.push_back(std::move(*t));
  }
  if (const Json* conns = r.array(doc, "connections", "")) {
    for (std::size_t i = 0; i < conns->size(); ++i)
      if (auto c = connection_from(r, (*conns)[i], "/connections/" + std::to_string(i)))
        d.connections.push_back(std::move(*c));
  }
  if (auto it = doc.find("params"); it != doc.end()) {
    if (auto p = params_from(r, *it, "/params")) d.params = *p;
  }
  if (auto it = doc.find("layout"); it != doc.end()) {
    if (!it->is_object()) {
      r.fail("/layout", "expected an object");
    } else {
      for (const auto& [id, pos] : it->items()) {
        std::string pp = "/layout/" + id;
        if (!r.object(pos, pp, {"x", "y"})) continue;
        NodePosition np;
        if (pos.contains("x")) np.x = r.number(pos["x"], pp + "/x");
        if (pos.contains("y")) np.y = r.number(pos["y"], pp + "/y");
        d.layout[id] = np;
      }
    }
  }

  if (out.errors.empty()) out.description = std::move(d);
  return out;
}

ParseOutcome parse_description(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    ParseOutcome out;
    auto [line, col] = line_and_column(text, e.byte);
    std::string msg = e.what();
    // Drop nlohmann's "[json.exception.parse_error.101] " prefix.
    if (auto pos = msg.find("] "); pos != std::string::npos) msg = msg.substr(pos + 2);
    out.errors.push_back({"", line, col, "syntax error: " + msg});
    return out;
  }
  return parse_description_json(doc);
}

std::string format_parse_errors(const std::vector<ParseError>& errors) {
  std::ostringstream os;
  for (const auto& e : errors) {
    if (e.line > 0) os << "line " << e.line << ", column " << e.column << ": ";
    else if (!e.path.empty()) os << e.path << ": ";
    os << e.message << "\n";
  }
  return os.str();
}

}  // namespace tessellate
