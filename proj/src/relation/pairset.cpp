#include "relation/pairset.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace tessellate {

std::string to_string(const EntityRef& e) { return e.simulator_id + "/" + e.entity_id; }

PairSet::PairSet(std::vector<EntityPair> pairs) : pairs_(std::move(pairs)) {
  std::sort(pairs_.begin(), pairs_.end());
  pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
}

bool PairSet::contains(const EntityPair& p) const {
  return std::binary_search(pairs_.begin(), pairs_.end(), p);
}

PairSet invert_pairset(const PairSet& p) {
  std::vector<EntityPair> out;
  out.reserve(p.size());
  for (const auto& [a, b] : p.pairs()) out.emplace_back(b, a);
  return PairSet(std::move(out));
}

PairSet compose_pairsets(const std::vector<std::pair<PairSet, StepDirection>>& steps) {
  if (steps.empty()) throw std::invalid_argument("compose_pairsets: no steps");
  auto oriented = [](const std::pair<PairSet, StepDirection>& s) {
    return s.second == StepDirection::Backward ? invert_pairset(s.first) : s.first;
  };
  PairSet acc = oriented(steps.front());
  for (std::size_t i = 1; i < steps.size(); ++i) {
    PairSet next = oriented(steps[i]);
    // Index the right-hand side by its source entity.
    std::multimap<EntityRef, const EntityRef*> by_src;
    for (const auto& [b, c] : next.pairs()) by_src.emplace(b, &c);
    std::vector<EntityPair> joined;
    for (const auto& [a, b] : acc.pairs()) {
      auto [lo, hi] = by_src.equal_range(b);
      for (auto it = lo; it != hi; ++it) joined.emplace_back(a, *it->second);
    }
    acc = PairSet(std::move(joined));
  }
  return acc;
}

}  // namespace tessellate
