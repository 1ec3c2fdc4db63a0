#include "relation/relation.hpp"

#include <numeric>
#include <set>

#include "relation/splitmix.hpp"

namespace tessellate {

const char* to_string(RelationErrorCode code) {
  switch (code) {
    case RelationErrorCode::SizeMismatch: return "SizeMismatch";
    case RelationErrorCode::TargetNotSingleton: return "TargetNotSingleton";
    case RelationErrorCode::InsufficientTargets: return "InsufficientTargets";
    case RelationErrorCode::UnknownEntity: return "UnknownEntity";
    case RelationErrorCode::MissingDependency: return "MissingDependency";
  }
  return "?";
}

namespace {

using Span = std::span<const EntityRef>;

PairSet one_to_one(Span src, Span dst) {
  if (src.size() != dst.size())
    throw RelationError(RelationErrorCode::SizeMismatch,
                        "one-to-one needs equal sizes, got " + std::to_string(src.size()) + " and " +
                            std::to_string(dst.size()));
  std::vector<EntityPair> pairs;
  for (std::size_t i = 0; i < src.size(); ++i) pairs.emplace_back(src[i], dst[i]);
  return PairSet(std::move(pairs));
}

PairSet many_to_one(Span src, Span dst) {
  if (dst.size() != 1)
    throw RelationError(RelationErrorCode::TargetNotSingleton,
                        "many-to-one needs exactly one target entity, got " + std::to_string(dst.size()));
  std::vector<EntityPair> pairs;
  for (const auto& s : src) pairs.emplace_back(s, dst[0]);
  return PairSet(std::move(pairs));
}

PairSet random_pairs(const RandomRelation& rel, Span src, Span dst, std::string_view conn_id,
                     std::uint64_t master_seed) {
  if (src.empty()) return {};
  if (dst.empty() || (!rel.allow_repeat && dst.size() < src.size()))
    throw RelationError(RelationErrorCode::InsufficientTargets,
                        "random relation needs " + std::string(rel.allow_repeat ? "at least one" : "at least " + std::to_string(src.size())) +
                            " target entities, got " + std::to_string(dst.size()));
  SplitMix64 rng = relation_stream(conn_id, rel.seed, master_seed);
  std::vector<EntityPair> pairs;
  if (rel.allow_repeat) {
    for (const auto& s : src) pairs.emplace_back(s, dst[uniform_index(rng, dst.size())]);
  } else {
    std::vector<std::size_t> order(dst.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i >= 1; --i) {
      std::size_t j = uniform_index(rng, i + 1);
      std::swap(order[i], order[j]);
    }
    for (std::size_t k = 0; k < src.size(); ++k) pairs.emplace_back(src[k], dst[order[k]]);
  }
  return PairSet(std::move(pairs));
}

const EntityRef* find_by_entity_id(Span list, const std::string& entity_id) {
  for (const auto& e : list)
    if (e.entity_id == entity_id) return &e;
  return nullptr;
}

PairSet manual(const ManualRelation& rel, Span src, Span dst) {
  std::vector<EntityPair> pairs;
  for (const auto& [s, t] : rel.pairs) {
    const EntityRef* a = find_by_entity_id(src, s);
    if (!a) throw RelationError(RelationErrorCode::UnknownEntity, "manual pair source '" + s + "' is not in the source tessera");
    const EntityRef* b = find_by_entity_id(dst, t);
    if (!b) throw RelationError(RelationErrorCode::UnknownEntity, "manual pair target '" + t + "' is not in the target tessera");
    pairs.emplace_back(*a, *b);
  }
  return PairSet(std::move(pairs));
}

ResolvedRelation composition(const CompositionRelation& rel, Span src, Span dst,
                             const std::map<std::string, PairSet>& env) {
  std::vector<std::pair<PairSet, StepDirection>> steps;
  for (const auto& step : rel.path) {
    auto it = env.find(step.connection);
    if (it == env.end())
      throw RelationError(RelationErrorCode::MissingDependency,
                          "composition step '" + step.connection + "' is not resolved");
    steps.emplace_back(it->second, step.direction == Direction::Forward ? StepDirection::Forward
                                                                        : StepDirection::Backward);
  }
  if (steps.empty()) return {};
  PairSet joined = compose_pairsets(steps);
  std::set<EntityRef> src_set(src.begin(), src.end()), dst_set(dst.begin(), dst.end());
  std::vector<EntityPair> kept;
  for (const auto& p : joined.pairs())
    if (src_set.count(p.first) && dst_set.count(p.second)) kept.push_back(p);
  ResolvedRelation out;
  out.dropped = joined.size() - kept.size();
  out.pairs = PairSet(std::move(kept));
  return out;
}

}  // namespace

ResolvedRelation resolve_relation(const Relation& rel, Span src, Span dst,
                                  const std::map<std::string, PairSet>& env,
                                  std::string_view connection_id, std::uint64_t master_seed) {
  struct V {
    Span src, dst;
    const std::map<std::string, PairSet>& env;
    std::string_view conn_id;
    std::uint64_t master_seed;

    ResolvedRelation operator()(const EmptyRelation&) const { return {}; }
    ResolvedRelation operator()(const OneToOne&) const { return {one_to_one(src, dst)}; }
    ResolvedRelation operator()(const RandomRelation& r) const {
      return {random_pairs(r, src, dst, conn_id, master_seed)};
    }
    ResolvedRelation operator()(const ManyToOne&) const { return {many_to_one(src, dst)}; }
    ResolvedRelation operator()(const ManualRelation& r) const { return {manual(r, src, dst)}; }
    ResolvedRelation operator()(const CompositionRelation& r) const {
      return composition(r, src, dst, env);
    }
  };
  return std::visit(V{src, dst, env, connection_id, master_seed}, rel);
}

}  // namespace tessellate
