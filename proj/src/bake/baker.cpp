#include <algorithm>
#include <set>

#include "bake/orbit.hpp"
#include "relation/relation.hpp"

namespace tessellate {

const char* to_string(BakePhase phase) {
  switch (phase) {
    case BakePhase::Launch: return "launch";
    case BakePhase::Init: return "init";
    case BakePhase::ResolveSource: return "resolve_source";
    case BakePhase::ResolveRelation: return "resolve_relation";
    case BakePhase::Connect: return "connect";
  }
  return "?";
}

const char* to_string(ElementState::Kind kind) {
  switch (kind) {
    case ElementState::Kind::Ok: return "ok";
    case ElementState::Kind::Failed: return "failed";
    case ElementState::Kind::Blocked: return "blocked";
  }
  return "?";
}

const char* to_string(BakeMode mode) {
  switch (mode) {
    case BakeMode::Fresh: return "fresh";
    case BakeMode::Incremental: return "incremental";
    case BakeMode::FullReset: return "full_reset";
  }
  return "?";
}

void Orbit::shutdown() {
  for (auto& [id, sim] : simulators)
    if (sim.handle) sim.handle->stop();
}

const ElementState* Orbit::state_of(const ElementId& e) const {
  auto it = states.find(e);
  return it == states.end() ? nullptr : &it->second;
}

namespace {

struct FullResetRequired {
  std::string reason;
};

BakePhase phase_for(ElementKind kind) {
  switch (kind) {
    case ElementKind::Simulator: return BakePhase::Launch;
    case ElementKind::Tessera: return BakePhase::ResolveSource;
    case ElementKind::Connection: return BakePhase::ResolveRelation;
  }
  return BakePhase::Launch;
}

struct ElementFailure {
  BakePhase phase;
  std::string code;
  std::string message;
};

std::string entity_key(const std::string& sim, const std::string& entity) { return sim + "\x1f" + entity; }

// One bake pass. With a prior orbit it runs incrementally: live simulators,
// entities and connections of the prior are reused and only the difference
// reaches the world. Anything that cannot be expressed as an addition throws
// FullResetRequired.
class Baker {
 public:
  Baker(const ScenarioDescription& d, const BakeContext& ctx, const Orbit* prior)
      : d_(d), ctx_(ctx), prior_(prior) {
    out_.description = d;
    if (prior_) {
      out_.world_log = prior_->world_log;
      for (const auto& call : prior_->world_log)
        if (const auto* c = std::get_if<CreateCall>(&call))
          prior_creates_.emplace(entity_key(c->simulator_id, c->entity_id), c);
    }
  }

  Orbit& orbit() { return out_; }

  void run() {
    graph_ = build_dependency_graph(d_);
    const std::size_t n = graph_.nodes.size();
    Adjacency deps = graph_.deps;
    std::map<std::size_t, ElementFailure> failures;

    for (const auto& issue : validate_description(d_)) {
      if (!issue.element) continue;
      auto idx = graph_.index_of(*issue.element);
      if (!idx || failures.count(*idx)) continue;
      failures.emplace(*idx, ElementFailure{phase_for(issue.element->kind), issue.code, issue.message});
    }
    for (const auto& [i, _] : failures) deps[i].clear();
    auto cyclic = nodes_on_cycles(deps);
    for (std::size_t i = 0; i < n; ++i) {
      if (!cyclic[i]) continue;
      failures.emplace(i, ElementFailure{phase_for(graph_.nodes[i].kind), "dependency_cycle",
                                         "dependency cycle through " + to_string(graph_.nodes[i])});
      deps[i].clear();
    }

    for (std::size_t i : topological_order(deps).order) {
      const ElementId& e = graph_.nodes[i];
      if (auto f = failures.find(i); f != failures.end()) {
        fail(i, f->second);
        continue;
      }
      std::optional<std::size_t> blocker;
      for (std::size_t dep : deps[i])
        if (!out_.states.at(graph_.nodes[dep]).is_ok()) {
          blocker = dep;
          break;
        }
      if (blocker) {
        out_.states[e] = ElementState::blocked(graph_.nodes[*blocker]);
        continue;
      }
      std::optional<ElementFailure> failure;
      switch (e.kind) {
        case ElementKind::Simulator: failure = bake_simulator(*d_.find_simulator(e.id)); break;
        case ElementKind::Tessera: failure = bake_tessera(*d_.find_tessera(e.id)); break;
        case ElementKind::Connection: failure = bake_connection(*d_.find_connection(e.id)); break;
      }
      if (failure) fail(i, *failure);
      else out_.states[e] = ElementState::ok();
    }

    collect_problems();
    if (prior_) check_everything_reused();
  }

 private:
  void fail(std::size_t i, const ElementFailure& f) {
    out_.states[graph_.nodes[i]] = ElementState::failed();
    failures_.emplace(i, f);
  }

  std::optional<ElementFailure> bake_simulator(const SimulatorSpec& s) {
    if (prior_) {
      if (auto it = prior_->simulators.find(s.id); it != prior_->simulators.end()) {
        out_.simulators.emplace(s.id, it->second);
        out_.simulator_entities[s.id] = prior_->simulator_entities.count(s.id)
                                            ? prior_->simulator_entities.at(s.id)
                                            : std::map<std::string, EntityRecord>{};
        reused_sims_.insert(s.id);
        return std::nullopt;
      }
    }
    const RegistryEntry* entry = ctx_.registry.find(s.registry_key);
    if (!entry)
      return ElementFailure{BakePhase::Launch, "unknown_registry_key",
                            "no registry entry '" + s.registry_key + "'"};
    std::shared_ptr<SimulatorHandle> handle;
    try {
      handle = launch(*entry, s.id, ctx_.catalog, ctx_.launch);
    } catch (const SimFailure& f) {
      return ElementFailure{BakePhase::Launch, f.code(), f.what()};
    }
    out_.world_log.push_back(LaunchCall{s.id, s.registry_key});
    SimulatorMeta meta;
    try {
      meta = handle->init(s.init_params);
    } catch (const SimFailure& f) {
      // The process is gone, so the log must not claim it was launched.
      handle->stop();
      out_.world_log.pop_back();
      return ElementFailure{BakePhase::Init, f.code(), f.what()};
    }
    out_.world_log.push_back(InitCall{s.id, s.init_params});
    out_.simulators.emplace(s.id, LiveSimulator{handle, meta, s.registry_key, s.init_params});
    out_.simulator_entities[s.id];
    return std::nullopt;
  }

  // Returns the requested entity's record; children land in the
  // simulator's entity table.
  EntityRecord create_entity(const std::string& sim_id, const std::string& model, const std::string& entity_id,
                             const Json& params) {
    auto& table = out_.simulator_entities[sim_id];
    if (auto it = prior_creates_.find(entity_key(sim_id, entity_id)); it != prior_creates_.end()) {
      const CreateCall& c = *it->second;
      if (c.model != model || c.params != params)
        throw FullResetRequired{"entity '" + entity_id + "' in '" + sim_id + "' changed its parameters"};
      reused_creates_.insert(it->first);
      for (const auto& r : c.records) table[r.entity_id] = r;
      return c.records.front();
    }
    auto& live = out_.simulators.at(sim_id);
    std::vector<EntityRecord> records;
    try {
      records = live.handle->create(model, {entity_id}, params);
    } catch (const SimFailure&) {
      if (reused_sims_.count(sim_id))
        throw FullResetRequired{"create failed inside reused simulator '" + sim_id + "'"};
      throw;
    }
    for (const auto& r : records) table[r.entity_id] = r;
    out_.world_log.push_back(CreateCall{sim_id, model, entity_id, params, records});
    return records.front();
  }

  std::optional<ElementFailure> bake_tessera(const TesseraSpec& t) {
    const auto& live = out_.simulators.at(t.simulator_id);
    if (!live.meta.models.count(t.model))
      return ElementFailure{BakePhase::ResolveSource, "unknown_model",
                            "simulator '" + t.simulator_id + "' has no model '" + t.model + "'"};
    std::vector<ResolvedEntity> entities;
    std::set<EntityRef> seen;
    auto add = [&](EntityRecord r) {
      EntityRef ref{t.simulator_id, r.entity_id};
      if (seen.insert(ref).second) entities.push_back({std::move(ref), std::move(r)});
    };

    for (std::size_t si = 0; si < t.sources.size(); ++si) {
      const auto& src = t.sources[si];
      if (!is_create_source(src)) continue;
      std::int64_t count = 0;
      Json params;
      if (const auto* f = std::get_if<CreateFixed>(&src)) {
        count = f->count;
        params = f->create_params;
      } else {
        const auto& m = std::get<CreateMatching>(src);
        count = static_cast<std::int64_t>(out_.tesserae.at(m.size_of).size());
        params = m.create_params;
      }
      for (std::int64_t k = 0; k < count; ++k) {
        std::string id = t.id + "." + std::to_string(si) + "." + std::to_string(k);
        try {
          add(create_entity(t.simulator_id, t.model, id, params));
        } catch (const SimFailure& f) {
          return ElementFailure{BakePhase::ResolveSource, f.code(), f.what()};
        }
      }
    }
    for (const auto& src : t.sources) {
      const auto* sel = std::get_if<Select>(&src);
      if (!sel) continue;
      std::vector<EntityRecord> pool;
      for (const auto& [id, r] : out_.simulator_entities[t.simulator_id]) pool.push_back(r);
      for (auto& r : resolve_select(*sel, pool)) {
        if (r.model != t.model)
          return ElementFailure{BakePhase::ResolveSource, "model_mismatch",
                                "selected entity '" + r.entity_id + "' is a " + r.model + ", not a " + t.model};
        add(std::move(r));
      }
    }
    out_.tesserae.emplace(t.id, std::move(entities));
    return std::nullopt;
  }

  std::optional<ElementFailure> bake_connection(const ConnectionSpec& c) {
    const auto* src_spec = d_.find_tessera(c.source);
    const auto* dst_spec = d_.find_tessera(c.target);
    std::vector<EntityRef> src, dst;
    for (const auto& e : out_.tesserae.at(c.source)) src.push_back(e.ref);
    for (const auto& e : out_.tesserae.at(c.target)) dst.push_back(e.ref);
    std::map<std::string, PairSet> env;
    for (const auto& [id, rc] : out_.connections) env.emplace(id, rc.pairs);

    ResolvedRelation resolved;
    try {
      resolved = resolve_relation(c.relation, src, dst, env, c.id, d_.params.master_seed);
    } catch (const RelationError& err) {
      return ElementFailure{BakePhase::ResolveRelation, to_string(err.code()), err.what()};
    }

    const auto& src_meta = out_.simulators.at(src_spec->simulator_id).meta.models.at(src_spec->model);
    const auto& dst_meta = out_.simulators.at(dst_spec->simulator_id).meta.models.at(dst_spec->model);
    for (const auto& ap : c.attr_pairs) {
      if (!src_meta.provides_output(ap.source))
        return ElementFailure{BakePhase::Connect, "unknown_attr",
                              src_spec->model + " has no output '" + ap.source + "'"};
      if (!dst_meta.accepts_input(ap.target))
        return ElementFailure{BakePhase::Connect, "unknown_attr",
                              dst_spec->model + " has no input '" + ap.target + "'"};
    }

    ResolvedConnection rc{src_spec->simulator_id, dst_spec->simulator_id, resolved.pairs, resolved.dropped,
                          c.attr_pairs, c.delayed, c.initial_values};
    std::vector<EntityPair> added = rc.pairs.pairs();
    if (prior_) {
      if (auto it = prior_->connections.find(c.id); it != prior_->connections.end() && !it->second.pairs.empty()) {
        const auto& old = it->second;
        if (old.source_simulator != rc.source_simulator || old.target_simulator != rc.target_simulator ||
            old.attr_pairs != rc.attr_pairs || old.delayed != rc.delayed || old.initial_values != rc.initial_values)
          throw FullResetRequired{"connection '" + c.id + "' changed its wiring"};
        added.clear();
        for (const auto& p : old.pairs.pairs())
          if (!rc.pairs.contains(p)) throw FullResetRequired{"connection '" + c.id + "' lost pairs"};
        for (const auto& p : rc.pairs.pairs())
          if (!old.pairs.contains(p)) added.push_back(p);
        reused_connections_.insert(c.id);
      }
    }
    if (!added.empty())
      out_.world_log.push_back(ConnectCall{c.id, rc.source_simulator, rc.target_simulator, std::move(added),
                                           c.attr_pairs, c.delayed, c.initial_values});
    out_.connections.emplace(c.id, std::move(rc));
    return std::nullopt;
  }

  void collect_problems() {
    auto root_of = [&](ElementId e) {
      for (;;) {
        const auto& s = out_.states.at(e);
        if (s.kind != ElementState::Kind::Blocked) return e;
        e = *s.blocked_on;
      }
    };
    std::map<ElementId, std::vector<ElementId>> blocked_by_root;
    for (const auto& e : graph_.nodes)
      if (out_.states.at(e).kind == ElementState::Kind::Blocked) blocked_by_root[root_of(e)].push_back(e);
    for (const auto& [i, f] : failures_) {
      const ElementId& e = graph_.nodes[i];
      out_.problems.push_back({e, f.phase, f.code, f.message, blocked_by_root[e]});
    }
  }

  void check_everything_reused() {
    for (const auto& [id, _] : prior_->simulators)
      if (!reused_sims_.count(id)) throw FullResetRequired{"simulator '" + id + "' is no longer live"};
    for (const auto& [key, call] : prior_creates_)
      if (!reused_creates_.count(key))
        throw FullResetRequired{"entity '" + call->entity_id + "' in '" + call->simulator_id + "' was dropped"};
    for (const auto& [id, rc] : prior_->connections)
      if (!rc.pairs.empty() && !reused_connections_.count(id))
        throw FullResetRequired{"connection '" + id + "' was dropped"};
  }

  const ScenarioDescription& d_;
  const BakeContext& ctx_;
  const Orbit* prior_;
  Orbit out_;
  DependencyGraph graph_;
  std::map<std::size_t, ElementFailure> failures_;  // ordered by element index

  std::map<std::string, const CreateCall*> prior_creates_;
  std::set<std::string> reused_sims_;
  std::set<std::string> reused_creates_;
  std::set<std::string> reused_connections_;
};

std::optional<std::string> prior_incompatible(const Orbit& prior, const ScenarioDescription& d) {
  if (prior.ran && !prior.simulators.empty()) return "the simulators have already been run";
  for (const auto& [id, live] : prior.simulators) {
    const auto* s = d.find_simulator(id);
    if (!s) return "simulator '" + id + "' was removed";
    if (s->registry_key != live.registry_key || s->init_params != live.init_params)
      return "simulator '" + id + "' changed its launch parameters";
  }
  return std::nullopt;
}

}  // namespace

Orbit bake(const ScenarioDescription& d, const BakeContext& ctx) {
  Baker b(d, ctx, nullptr);
  b.run();
  b.orbit().mode = BakeMode::Fresh;
  return std::move(b.orbit());
}

Orbit rebake(Orbit prior, const ScenarioDescription& d_new, const BakeContext& ctx) {
  std::optional<std::string> reason = prior_incompatible(prior, d_new);
  if (!reason) {
    Baker b(d_new, ctx, &prior);
    try {
      b.run();
      b.orbit().mode = BakeMode::Incremental;
      return std::move(b.orbit());
    } catch (const FullResetRequired& r) {
      reason = r.reason;
      b.orbit().shutdown();
    }
  }
  prior.shutdown();
  Orbit fresh = bake(d_new, ctx);
  fresh.mode = BakeMode::FullReset;
  fresh.reset_reason = *reason;
  return fresh;
}

}  // namespace tessellate
