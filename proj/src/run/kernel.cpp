#include "run/kernel.hpp"

#include <chrono>
#include <deque>
#include <limits>
#include <set>
#include <thread>

namespace tessellate {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::string join_cycle(const std::vector<std::string>& c) {
  std::string out;
  for (const auto& s : c) out += (out.empty() ? "" : " -> ") + s;
  return out;
}

// Simulators with at least one live, non-delayed, value-carrying edge.
struct Dataflow {
  std::vector<std::string> sims;  // Ok simulators in document order
  Adjacency deps;                 // deps[i]: upstream simulators of sims[i]
};

bool carries_values(const ResolvedConnection& c) { return !c.pairs.empty() && !c.attr_pairs.empty(); }

Dataflow build_dataflow(const Orbit& o) {
  Dataflow g;
  std::map<std::string, std::size_t> index;
  for (const auto& s : o.description.simulators)
    if (o.simulators.count(s.id) && !index.count(s.id)) {
      index.emplace(s.id, g.sims.size());
      g.sims.push_back(s.id);
    }
  g.deps.resize(g.sims.size());
  for (const auto& [id, c] : o.connections) {
    if (c.delayed || !carries_values(c)) continue;
    auto src = index.find(c.source_simulator);
    auto dst = index.find(c.target_simulator);
    if (src == index.end() || dst == index.end()) continue;
    g.deps[dst->second].push_back(src->second);
  }
  for (auto& d : g.deps) {
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
  }
  return g;
}

// Walks upstream from a node on a cycle until a node repeats.
std::vector<std::string> witness_cycle(const Dataflow& g, const std::vector<bool>& cyclic) {
  std::size_t start = 0;
  while (!cyclic[start]) ++start;
  std::vector<std::size_t> path{start};
  std::map<std::size_t, std::size_t> pos{{start, 0}};
  for (;;) {
    std::size_t cur = path.back(), next = cur;
    for (std::size_t d : g.deps[cur])
      if (cyclic[d]) {
        next = d;
        break;
      }
    if (auto it = pos.find(next); it != pos.end()) {
      std::vector<std::string> out;
      // path runs against the dataflow direction; reverse it.
      for (std::size_t i = path.size(); i-- > it->second;) out.push_back(g.sims[path[i]]);
      out.push_back(out.front());
      return out;
    }
    pos.emplace(next, path.size());
    path.push_back(next);
  }
}

// At most `limit` events per second of wall time.
class RateLimiter {
 public:
  explicit RateLimiter(std::size_t limit) : limit_(limit) {}
  bool admit() {
    auto now = std::chrono::steady_clock::now();
    while (!sent_.empty() && now - sent_.front() >= std::chrono::seconds(1)) sent_.pop_front();
    if (sent_.size() >= limit_) return false;
    sent_.push_back(now);
    return true;
  }

 private:
  std::size_t limit_;
  std::deque<std::chrono::steady_clock::time_point> sent_;
};

}  // namespace

Json to_json(const RunEvent& e) {
  return std::visit(Overloaded{
                        [](const ProgressEvent& p) -> Json {
                          return {{"type", "progress"}, {"time", p.time}, {"end_time", p.end_time}};
                        },
                        [](const LogEvent& l) -> Json {
                          return {{"type", "log"}, {"level", l.level}, {"source", l.source}, {"message", l.message}};
                        },
                        [](const DoneEvent& d) -> Json { return {{"type", "done"}, {"final_time", d.final_time}}; },
                        [](const RunErrorEvent& r) -> Json {
                          return {{"type", "error"}, {"source", r.source}, {"message", r.message}};
                        },
                    },
                    e);
}

CycleError::CycleError(std::vector<std::string> cycle)
    : std::runtime_error("dataflow cycle: " + join_cycle(cycle)), cycle_(std::move(cycle)) {}

void check_dataflow(const Orbit& o) {
  Dataflow g = build_dataflow(o);
  auto cyclic = nodes_on_cycles(g.deps);
  if (std::find(cyclic.begin(), cyclic.end(), true) != cyclic.end()) throw CycleError(witness_cycle(g, cyclic));
}

std::vector<std::string> dataflow_order(const Orbit& o) {
  Dataflow g = build_dataflow(o);
  TopoResult topo = topological_order(g.deps);
  if (!topo.leftover.empty()) throw CycleError(witness_cycle(g, nodes_on_cycles(g.deps)));
  std::vector<std::string> out;
  for (std::size_t i : topo.order) out.push_back(g.sims[i]);
  return out;
}

void ValueCache::record(const EntityRef& e, const std::string& attr, std::int64_t time, Json value) {
  Slot& s = slots_[{e, attr}];
  if (s.current && s.current->first == time) {
    s.current->second = std::move(value);
    return;
  }
  s.previous = std::move(s.current);
  s.current.emplace(time, std::move(value));
}

const Json* ValueCache::latest(const EntityRef& e, const std::string& attr) const {
  auto it = slots_.find({e, attr});
  if (it == slots_.end() || !it->second.current) return nullptr;
  return &it->second.current->second;
}

const Json* ValueCache::before(const EntityRef& e, const std::string& attr, std::int64_t time) const {
  auto it = slots_.find({e, attr});
  if (it == slots_.end()) return nullptr;
  const Slot& s = it->second;
  if (s.current && s.current->first < time) return &s.current->second;
  if (s.previous && s.previous->first < time) return &s.previous->second;
  return nullptr;
}

std::size_t route_inputs(const std::string& connection_id, const ResolvedConnection& conn, const ValueCache& cache,
                         std::int64_t t, StepInputs& into) {
  std::size_t delivered = 0;
  for (const auto& [src, dst] : conn.pairs.pairs()) {
    for (const auto& ap : conn.attr_pairs) {
      const Json* value = nullptr;
      if (conn.delayed) {
        value = cache.before(src, ap.source, t);
        if (!value)
          if (auto it = conn.initial_values.find(ap.target); it != conn.initial_values.end()) value = &it->second;
        if (!value) continue;
      } else {
        value = cache.latest(src, ap.source);
        if (!value)
          throw MissingValue("connection '" + connection_id + "': no value of " + to_string(src) + "." + ap.source +
                             " at t=" + std::to_string(t));
      }
      into[dst.entity_id][ap.target].push_back(SenderValue{src, *value});
      ++delivered;
    }
  }
  return delivered;
}

RunSummary run(Orbit& o, const ScenarioParams& params, const EventSink& sink, const std::atomic<bool>* stop_signal) {
  const std::vector<std::string> order = dataflow_order(o);
  const std::int64_t end = params.end_time;
  RunSummary summary;
  o.ran = true;

  for (const auto& s : o.description.simulators)
    if (!o.simulators.count(s.id)) sink(LogEvent{"warning", s.id, "simulator is not baked and will not run"});
  for (const auto& c : o.description.connections)
    if (!o.connections.count(c.id)) sink(LogEvent{"warning", c.id, "connection is not baked and carries no data"});

  // Connections in document order, split by target and source simulator.
  std::map<std::string, std::vector<std::pair<std::string, const ResolvedConnection*>>> incoming;
  std::map<std::string, OutputRequest> wanted;
  std::set<std::string> seen;
  for (const auto& spec : o.description.connections) {
    auto it = o.connections.find(spec.id);
    if (it == o.connections.end() || !seen.insert(spec.id).second || !carries_values(it->second)) continue;
    const ResolvedConnection& c = it->second;
    incoming[c.target_simulator].emplace_back(spec.id, &c);
    auto& req = wanted[c.source_simulator];
    for (const auto& [src, dst] : c.pairs.pairs())
      for (const auto& ap : c.attr_pairs) {
        auto& attrs = req[src.entity_id];
        if (std::find(attrs.begin(), attrs.end(), ap.source) == attrs.end()) attrs.push_back(ap.source);
      }
  }

  std::map<std::string, std::int64_t> next_due;
  for (const auto& id : order) next_due[id] = 0;
  auto earliest = [&] {
    std::int64_t t = std::numeric_limits<std::int64_t>::max();
    for (const auto& [id, due] : next_due) t = std::min(t, due);
    return std::min(t, end);
  };

  ValueCache cache;
  RateLimiter progress_limit(10);
  const auto wall_start = std::chrono::steady_clock::now();
  std::int64_t lag_warned_at = -1;

  auto stopped = [&] { return stop_signal && stop_signal->load(); };

  while (earliest() < end) {
    const std::int64_t t = earliest();
    if (stopped()) {
      summary.outcome = RunSummary::Outcome::Stopped;
      break;
    }

    if (params.real_time_factor) {
      const double factor = *params.real_time_factor;
      auto target = wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double>(static_cast<double>(t) * factor));
      auto now = std::chrono::steady_clock::now();
      std::int64_t step = std::numeric_limits<std::int64_t>::max();
      for (const auto& id : order) step = std::min(step, o.simulators.at(id).meta.step_size);
      if (now - target > std::chrono::duration<double>(static_cast<double>(step) * factor) && lag_warned_at != t) {
        lag_warned_at = t;
        sink(LogEvent{"warning", "run", "running behind real time at t=" + std::to_string(t)});
      }
      while (std::chrono::steady_clock::now() < target && !stopped())
        std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(
            target - std::chrono::steady_clock::now(), std::chrono::milliseconds(20)));
      if (stopped()) {
        summary.outcome = RunSummary::Outcome::Stopped;
        break;
      }
    }

    for (const auto& sim : order) {
      if (next_due[sim] != t) continue;
      try {
        StepInputs inputs;
        for (const auto& [cid, conn] : incoming[sim]) route_inputs(cid, *conn, cache, t, inputs);
        auto& live = o.simulators.at(sim);
        std::int64_t next = live.handle->step(t, inputs);
        summary.step_times[sim].push_back(t);
        if (next <= t) throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error",
                                        "next_time " + std::to_string(next) + " does not advance past " +
                                            std::to_string(t));
        next_due[sim] = next;
        if (auto w = wanted.find(sim); w != wanted.end()) {
          OutputData data = live.handle->get_data(w->second);
          for (const auto& [eid, attrs] : data)
            for (const auto& [attr, value] : attrs) cache.record(EntityRef{sim, eid}, attr, t, value);
        }
      } catch (const std::exception& e) {
        summary.outcome = RunSummary::Outcome::Failed;
        summary.error = e.what();
        summary.final_time = t;
        sink(RunErrorEvent{sim, e.what()});
        return summary;
      }
    }
    if (progress_limit.admit()) sink(ProgressEvent{earliest(), end});
  }

  summary.final_time = earliest();
  sink(DoneEvent{summary.final_time});
  return summary;
}

}  // namespace tessellate
