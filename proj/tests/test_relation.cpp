#include <doctest.h>

#include <array>
#include <random>
#include <set>

#include "relation/relation.hpp"
#include "relation/splitmix.hpp"
#include "oracles.hpp"

using namespace tessellate;

namespace {

std::vector<EntityRef> refs(const std::string& sim, const std::string& prefix, std::size_t n) {
  std::vector<EntityRef> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({sim, prefix + std::to_string(i + 1)});
  return out;
}

ResolvedRelation resolve(const Relation& r, const std::vector<EntityRef>& src, const std::vector<EntityRef>& dst,
                         const std::map<std::string, PairSet>& env = {}, std::string_view conn = "c1",
                         std::uint64_t master = 0) {
  return resolve_relation(r, src, dst, env, conn, master);
}

RelationErrorCode error_of(const Relation& r, const std::vector<EntityRef>& src, const std::vector<EntityRef>& dst) {
  try {
    resolve(r, src, dst);
  } catch (const RelationError& e) {
    return e.code();
  }
  FAIL("expected RelationError");
  return RelationErrorCode::MissingDependency;
}

PairSet random_pairset(std::mt19937_64& g, const std::vector<EntityRef>& a, const std::vector<EntityRef>& b) {
  std::vector<EntityPair> out;
  std::bernoulli_distribution keep(0.3);
  for (const auto& x : a)
    for (const auto& y : b)
      if (keep(g)) out.emplace_back(x, y);
  return PairSet(std::move(out));
}

}  // namespace

TEST_CASE("splitmix64 and fnv1a64 match the reference values") {
  SplitMix64 r(0x9E3779B97F4A7C15ull);
  CHECK(r.next() == 0x6e789e6aa1b965f4ull);
  CHECK(r.next() == 0x06c45d188009454full);
  CHECK(r.next() == 0xf88bb8a8724c81ecull);

  SplitMix64 u(0x9E3779B97F4A7C15ull);
  std::array<std::size_t, 3> got{uniform_index(u, 3), uniform_index(u, 3), uniform_index(u, 3)};
  CHECK(got == std::array<std::size_t, 3>{0, 1, 1});

  CHECK(fnv1a64("c1") == 0x08a27f07b54a6859ull);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
}

TEST_CASE("uniform_index is unbiased") {
  SplitMix64 r(12345);
  std::array<int, 5> counts{};
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) ++counts[uniform_index(r, 5)];
  for (int c : counts) CHECK(std::abs(c - draws / 5) < draws / 5 / 100);
}

TEST_CASE("one-to-one") {
  auto a = refs("s", "a", 3), b = refs("t", "b", 3);
  auto r = resolve(OneToOne{}, a, b).pairs;
  CHECK(r == PairSet({{a[0], b[0]}, {a[1], b[1]}, {a[2], b[2]}}));
  CHECK(resolve(OneToOne{}, {}, {}).pairs.empty());
  CHECK(error_of(OneToOne{}, a, refs("t", "b", 2)) == RelationErrorCode::SizeMismatch);
}

TEST_CASE("many-to-one") {
  auto a = refs("s", "a", 3), c = refs("db", "c", 1);
  CHECK(resolve(ManyToOne{}, a, c).pairs == PairSet({{a[0], c[0]}, {a[1], c[0]}, {a[2], c[0]}}));
  CHECK(resolve(ManyToOne{}, {}, c).pairs.empty());
  CHECK(error_of(ManyToOne{}, a, refs("db", "c", 2)) == RelationErrorCode::TargetNotSingleton);
  CHECK(error_of(ManyToOne{}, a, {}) == RelationErrorCode::TargetNotSingleton);
}

TEST_CASE("random relation reference values") {
  std::vector<EntityRef> a = {{"s", "a1"}, {"s", "a2"}};
  std::vector<EntityRef> b = {{"t", "b1"}, {"t", "b2"}, {"t", "b3"}};
  CHECK(resolve(RandomRelation{true, 7}, a, b).pairs == PairSet({{a[0], b[1]}, {a[1], b[0]}}));
  CHECK(resolve(RandomRelation{false, 7}, a, b).pairs == PairSet({{a[0], b[2]}, {a[1], b[0]}}));

  // Frozen table: connection "pv_bus", master seed 11, 4 sources, 6 targets.
  struct Row {
    std::uint64_t seed;
    std::array<std::size_t, 4> repeat, no_repeat;
  };
  const Row table[] = {
      {0, {0, 5, 1, 0}, {2, 4, 5, 3}}, {1, {2, 1, 0, 2}, {1, 0, 4, 5}}, {2, {2, 4, 1, 2}, {1, 0, 4, 3}},
      {3, {4, 1, 2, 4}, {5, 0, 1, 2}}, {4, {0, 1, 3, 4}, {2, 4, 1, 3}},
  };
  auto src = refs("pv", "p", 4), dst = refs("grid", "b", 6);
  for (const auto& row : table) {
    std::vector<EntityPair> rep, norep;
    for (std::size_t k = 0; k < 4; ++k) {
      rep.emplace_back(src[k], dst[row.repeat[k]]);
      norep.emplace_back(src[k], dst[row.no_repeat[k]]);
    }
    CHECK(resolve(RandomRelation{true, row.seed}, src, dst, {}, "pv_bus", 11).pairs == PairSet(rep));
    CHECK(resolve(RandomRelation{false, row.seed}, src, dst, {}, "pv_bus", 11).pairs == PairSet(norep));
  }
}

TEST_CASE("random relation errors and edges") {
  auto a = refs("s", "a", 3);
  CHECK(error_of(RandomRelation{false, 1}, a, refs("t", "b", 2)) == RelationErrorCode::InsufficientTargets);
  CHECK(error_of(RandomRelation{true, 1}, a, {}) == RelationErrorCode::InsufficientTargets);
  CHECK(resolve(RandomRelation{true, 1}, a, refs("t", "b", 1)).pairs.size() == 3);
  CHECK(resolve(RandomRelation{false, 1}, {}, {}).pairs.empty());
}

TEST_CASE("manual relation") {
  auto a = refs("s", "a", 2), b = refs("t", "b", 2);
  ManualRelation m{{{"a1", "b2"}, {"a2", "b2"}}};
  CHECK(resolve(m, a, b).pairs == PairSet({{a[0], b[1]}, {a[1], b[1]}}));
  CHECK(error_of(ManualRelation{{{"a9", "b1"}}}, a, b) == RelationErrorCode::UnknownEntity);
  CHECK(error_of(ManualRelation{{{"a1", "b9"}}}, a, b) == RelationErrorCode::UnknownEntity);
}

TEST_CASE("empty relation ignores sizes") {
  CHECK(resolve(EmptyRelation{}, refs("s", "a", 3), refs("t", "b", 5)).pairs.empty());
}

TEST_CASE("composition") {
  auto bus = refs("grid", "bus", 3), ctl = refs("ctl", "c", 3), pv = refs("pv", "p", 3);
  PairSet bus_ctl({{bus[0], ctl[0]}, {bus[1], ctl[1]}, {bus[2], ctl[2]}});
  PairSet ctl_pv({{ctl[0], pv[0]}, {ctl[1], pv[1]}, {ctl[2], pv[2]}});
  std::map<std::string, PairSet> env{{"bus_ctl", bus_ctl}, {"ctl_pv", ctl_pv}};
  CompositionRelation comp{{{"ctl_pv", Direction::Backward}, {"bus_ctl", Direction::Backward}}};
  auto r = resolve(comp, pv, bus, env);
  CHECK(r.pairs == PairSet({{pv[0], bus[0]}, {pv[1], bus[1]}, {pv[2], bus[2]}}));
  CHECK(r.dropped == 0);

  SUBCASE("pairs outside the connection's tesserae are dropped") {
    auto restricted = resolve(comp, {pv[0], pv[1]}, bus, env);
    CHECK(restricted.pairs.size() == 2);
    CHECK(restricted.dropped == 1);
  }
  SUBCASE("unresolved dependency") {
    CHECK_THROWS_AS(resolve(comp, pv, bus, {{"bus_ctl", bus_ctl}}), RelationError);
  }
}

TEST_CASE("property: inversion is an involution") {
  std::mt19937_64 g(1);
  for (int iter = 0; iter < 200; ++iter) {
    auto a = refs("s", "a", g() % 8), b = refs("t", "b", g() % 8);
    PairSet p = random_pairset(g, a, b);
    CHECK(invert_pairset(invert_pairset(p)) == p);
    CHECK(invert_pairset(p).size() == p.size());
  }
}

TEST_CASE("property: composition equals the nested-loop join") {
  std::mt19937_64 g(2);
  for (int iter = 0; iter < 300; ++iter) {
    std::size_t len = 1 + g() % 4;
    std::vector<std::vector<EntityRef>> sets;
    for (std::size_t i = 0; i <= len; ++i) sets.push_back(refs("s" + std::to_string(i), "e", g() % 6));
    std::vector<std::pair<PairSet, StepDirection>> steps;
    for (std::size_t i = 0; i < len; ++i) {
      bool backward = g() % 2;
      PairSet p = backward ? random_pairset(g, sets[i + 1], sets[i]) : random_pairset(g, sets[i], sets[i + 1]);
      steps.emplace_back(p, backward ? StepDirection::Backward : StepDirection::Forward);
    }
    CHECK(compose_pairsets(steps) == oracle::brute_join(steps));
  }
}

TEST_CASE("property: random relation replays and keeps its invariants") {
  std::mt19937_64 g(3);
  for (int iter = 0; iter < 300; ++iter) {
    std::size_t ns = g() % 11, nd = 1 + g() % 10;
    bool repeat = g() % 2;
    if (!repeat && nd < ns) std::swap(ns, nd);
    auto src = refs("s", "a", ns), dst = refs("t", "b", nd);
    std::uint64_t seed = g(), master = g() % 3;
    std::string conn = "conn" + std::to_string(g() % 5);
    PairSet p = resolve(RandomRelation{repeat, seed}, src, dst, {}, conn, master).pairs;
    CHECK(p == oracle::replay_random(src, dst, repeat, conn, seed, master));
    CHECK(p.size() == ns);
    std::set<EntityRef> sources, targets;
    for (const auto& [a, b] : p.pairs()) {
      sources.insert(a);
      targets.insert(b);
    }
    CHECK(sources.size() == ns);
    if (!repeat) CHECK(targets.size() == ns);
    // Same inputs, same answer.
    CHECK(resolve(RandomRelation{repeat, seed}, src, dst, {}, conn, master).pairs == p);
  }
}

TEST_CASE("property: errors exactly when preconditions fail") {
  std::mt19937_64 g(4);
  for (int iter = 0; iter < 300; ++iter) {
    auto src = refs("s", "a", g() % 11), dst = refs("t", "b", g() % 11);
    auto threw = [&](const Relation& r) -> std::optional<RelationErrorCode> {
      try {
        resolve(r, src, dst);
        return std::nullopt;
      } catch (const RelationError& e) {
        return e.code();
      }
    };
    CHECK(threw(OneToOne{}) == (src.size() != dst.size() ? std::optional(RelationErrorCode::SizeMismatch)
                                                         : std::nullopt));
    CHECK(threw(ManyToOne{}) == (dst.size() != 1 ? std::optional(RelationErrorCode::TargetNotSingleton)
                                                 : std::nullopt));
    bool short_no_repeat = !src.empty() && dst.size() < src.size();
    CHECK(threw(RandomRelation{false, 9}) ==
          (short_no_repeat ? std::optional(RelationErrorCode::InsufficientTargets) : std::nullopt));
    bool none = !src.empty() && dst.empty();
    CHECK(threw(RandomRelation{true, 9}) ==
          (none ? std::optional(RelationErrorCode::InsufficientTargets) : std::nullopt));
  }
}
