#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>

#include "relation/pairset.hpp"
#include "scenario/scenario.hpp"

namespace tessellate {

enum class RelationErrorCode {
  SizeMismatch,
  TargetNotSingleton,
  InsufficientTargets,
  UnknownEntity,
  MissingDependency,
};

const char* to_string(RelationErrorCode code);

class RelationError : public std::runtime_error {
 public:
  RelationError(RelationErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  RelationErrorCode code() const { return code_; }

 private:
  RelationErrorCode code_;
};

struct ResolvedRelation {
  PairSet pairs;
  // Composition only: joined pairs discarded because an endpoint lies
  // outside the connection's own tesserae.
  std::size_t dropped = 0;
};

// Resolves `rel` against the ordered entity lists of the source and target
// tesserae. `env` maps connection ids to already resolved pair sets and must
// cover every connection a composition path names. Pure; throws
// RelationError.
ResolvedRelation resolve_relation(const Relation& rel, std::span<const EntityRef> src,
                                  std::span<const EntityRef> dst,
                                  const std::map<std::string, PairSet>& env,
                                  std::string_view connection_id, std::uint64_t master_seed);

}  // namespace tessellate
