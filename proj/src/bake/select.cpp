#include <algorithm>

#include "bake/orbit.hpp"

namespace tessellate {

bool glob_match(std::string_view pattern, std::string_view text) {
  // Iterative matcher with single-star backtracking.
  std::size_t p = 0, t = 0;
  std::size_t star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

bool predicate_holds(const Predicate& p, const Json& extra_info) {
  if (!extra_info.is_object()) return false;
  auto it = extra_info.find(p.key);
  if (it == extra_info.end()) return false;
  const Json& v = *it;
  switch (p.op) {
    case CompareOp::Eq: return v == p.value;
    case CompareOp::Ne: return v != p.value;
    default: break;
  }
  if (!v.is_number() || !p.value.is_number()) return false;
  double a = v.get<double>(), b = p.value.get<double>();
  switch (p.op) {
    case CompareOp::Lt: return a < b;
    case CompareOp::Le: return a <= b;
    case CompareOp::Gt: return a > b;
    case CompareOp::Ge: return a >= b;
    default: return false;
  }
}

std::vector<EntityRecord> resolve_select(const Select& source, const std::vector<EntityRecord>& records) {
  std::vector<EntityRecord> out;
  for (const auto& r : records) {
    if (!glob_match(source.id_pattern, r.entity_id)) continue;
    if (!std::all_of(source.predicates.begin(), source.predicates.end(),
                     [&](const Predicate& p) { return predicate_holds(p, r.extra_info); }))
      continue;
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const EntityRecord& a, const EntityRecord& b) { return a.entity_id < b.entity_id; });
  return out;
}

}  // namespace tessellate
