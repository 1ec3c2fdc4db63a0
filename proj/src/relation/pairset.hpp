#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tessellate {

// Address of one entity inside the live world.
struct EntityRef {
  std::string simulator_id;
  std::string entity_id;

  auto operator<=>(const EntityRef&) const = default;
  bool operator==(const EntityRef&) const = default;
};

std::string to_string(const EntityRef& e);

using EntityPair = std::pair<EntityRef, EntityRef>;

// Ordered, deduplicated set of (source, target) pairs. The pair list is always
// sorted lexicographically by (source, target).
class PairSet {
 public:
  PairSet() = default;
  explicit PairSet(std::vector<EntityPair> pairs);

  const std::vector<EntityPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  bool contains(const EntityPair& p) const;

  bool operator==(const PairSet&) const = default;

 private:
  std::vector<EntityPair> pairs_;
};

PairSet invert_pairset(const PairSet& p);

enum class StepDirection { Forward, Backward };

// Left-to-right relational join; backward steps are inverted first.
// Precondition: `steps` is non-empty.
PairSet compose_pairsets(const std::vector<std::pair<PairSet, StepDirection>>& steps);

}  // namespace tessellate
