#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <tuple>

#include "lmkbqa/aspects.hpp"
#include "lmkbqa/candidate_gen.hpp"
#include "lmkbqa/errors.hpp"
#include "lmkbqa/toy_world.hpp"
#include "support.hpp"

using namespace lmkbqa;
using testing::kb_from;

namespace {

std::vector<EntityId> entities_of(const std::vector<CandidatePath>& paths) {
  std::vector<EntityId> out;
  for (const auto& p : paths) out.push_back(p.entity);
  return out;
}

// Enumerates every walk of one or two edges straight from the triple set and
// keeps, per endpoint, the shortest walk with the smallest (relations,
// intermediate).
std::vector<CandidatePath> brute_force_candidates(const KnowledgeGraph& kb, const EntityId& topic) {
  struct Step {
    PathStep step;
    EntityId to;
  };
  auto steps_from = [&](const EntityId& e) {
    std::vector<Step> out;
    for (const auto& t : kb.triples()) {
      if (t.subject == e) out.push_back({{t.predicate, Direction::kForward}, t.object});
      if (t.object == e) out.push_back({{t.predicate, Direction::kReverse}, t.subject});
    }
    return out;
  };
  using Key = std::tuple<std::size_t, std::vector<PathStep>, std::optional<EntityId>>;
  std::map<EntityId, Key> best;
  auto offer = [&](const EntityId& e, Key k) {
    if (e == topic) return;
    auto it = best.find(e);
    if (it == best.end() || k < it->second) best[e] = std::move(k);
  };
  for (const auto& s1 : steps_from(topic)) {
    offer(s1.to, {1, {s1.step}, std::nullopt});
    if (s1.to == topic) continue;
    for (const auto& s2 : steps_from(s1.to)) offer(s2.to, {2, {s1.step, s2.step}, s1.to});
  }
  std::vector<CandidatePath> out;
  for (std::size_t hops : {1u, 2u})
    for (const auto& [e, k] : best)
      if (std::get<0>(k) == hops) out.push_back({e, topic, std::get<1>(k), std::get<2>(k)});
  return out;
}

KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes, std::size_t max_edges) {
  const std::size_t nodes = 1 + rng() % max_nodes;
  const std::size_t edges = rng() % (max_edges + 1);
  KnowledgeGraph kb;
  for (std::size_t i = 0; i < edges; ++i) {
    const std::string s = "n" + std::to_string(rng() % nodes);
    const std::string o = "n" + std::to_string(rng() % nodes);
    kb.add_triple({s, "r" + std::to_string(rng() % 3), o});
  }
  return kb;
}

}  // namespace

TEST_CASE("identify_topic_entity") {
  SUBCASE("demonym alias links the running example to Jamaica") {
    auto kb = kb_from("", "/m/03_r3\tJamaica\n/m/03_r3\tjamaican\n/m/01428\tJamaican English\n");
    auto q = normalize_question("what does jamaican people speak ?");
    const auto m = identify_topic_entity(q.tokens, kb);
    CHECK(m.entity == "/m/03_r3");
    CHECK(m.span_begin == 2);
    CHECK(m.span_end == 3);
    CHECK(m.alias_len == 1);
  }
  SUBCASE("tie at the same span goes to the smaller id") {
    auto kb = kb_from("", "/m/b\tparis\n/m/a\tparis\n");
    CHECK(identify_topic_entity({"visit", "paris"}, kb).entity == "/m/a");
  }
  SUBCASE("longest actual match, not longest alias") {
    auto kb = kb_from("", "/m/play\thamlet\n/m/cigar\thamlet cigars\n");
    CHECK(identify_topic_entity({"who", "wrote", "hamlet"}, kb).entity == "/m/play");
  }
  SUBCASE("a longer match beats an earlier one") {
    auto kb = kb_from("", "/m/z\twhat\n/m/y\tnew york\n");
    CHECK(identify_topic_entity({"what", "is", "in", "new", "york"}, kb).entity == "/m/y");
  }
  SUBCASE("earliest span wins among equal lengths") {
    auto kb = kb_from("", "/m/a\tlondon\n/m/b\tparis\n");
    CHECK(identify_topic_entity({"paris", "or", "london"}, kb).entity == "/m/b");
  }
  SUBCASE("punctuated aliases match normalized questions") {
    auto kb = kb_from("", "/m/stl\tSt. Louis\n");
    CHECK(identify_topic_entity(normalize_question("where is St. Louis?").tokens, kb).entity == "/m/stl");
  }
  SUBCASE("no match") {
    auto kb = kb_from("", "/m/a\tlondon\n");
    CHECK_THROWS_AS(identify_topic_entity({"who", "are", "you"}, kb), NoTopicEntity);
  }
}

TEST_CASE("identify_topic_entity ignores question casing") {
  const auto world = toy::make_toy_world();
  const auto kb = toy::load_toy_kb(world);
  for (const auto& qa : world.questions) {
    std::string upper = qa.question;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    const auto a = identify_topic_entity(normalize_question(qa.question).tokens, kb);
    const auto b = identify_topic_entity(normalize_question(upper).tokens, kb);
    CHECK(a.entity == b.entity);
    CHECK(a.span_begin == b.span_begin);
  }
}

TEST_CASE("generate_candidates on hand-built graphs") {
  SUBCASE("chain") {
    auto kb = kb_from("a\tr\tb\nb\tr\tc\nc\tr\td\n");
    const auto c = generate_candidates(kb, "a");
    CHECK(entities_of(c) == std::vector<EntityId>{"b", "c"});
    CHECK(c[0].hops() == 1);
    CHECK_FALSE(c[0].intermediate.has_value());
    CHECK(c[1].hops() == 2);
    CHECK(c[1].intermediate == std::optional<EntityId>("b"));
  }
  SUBCASE("chain with a back edge makes d a reverse 1-hop") {
    auto kb = kb_from("a\tr\tb\nb\tr\tc\nc\tr\td\nd\tr\ta\n");
    const auto c = generate_candidates(kb, "a");
    CHECK(entities_of(c) == std::vector<EntityId>{"b", "d", "c"});
    CHECK(c[1].relations == std::vector<PathStep>{{"r", Direction::kReverse}});
  }
  SUBCASE("isolated topic") {
    KnowledgeGraph kb;
    kb.add_alias("a", "alone");
    CHECK(generate_candidates(kb, "a").empty());
    CHECK(generate_candidates(kb, "unknown").empty());
  }
  SUBCASE("cap keeps the first entries in order") {
    auto kb = kb_from("a\tr\tb\na\tr\tc\nb\tr\td\n");
    CHECK(entities_of(generate_candidates(kb, "a", 2)) == std::vector<EntityId>{"b", "c"});
    CHECK(generate_candidates(kb, "a", 0).empty());
  }
  SUBCASE("Jamaica reaches its language through a reverse edge") {
    const auto kb = toy::load_toy_kb(toy::make_toy_world());
    bool found = false;
    for (const auto& c : generate_candidates(kb, "/m/03_r3")) {
      if (c.entity != "/m/01428") continue;
      found = true;
      CHECK(c.relations ==
            std::vector<PathStep>{{"/language/human_language/countries_spoken_in", Direction::kReverse}});
    }
    CHECK(found);
  }
}

TEST_CASE("generate_candidates matches brute-force path enumeration") {
  std::mt19937_64 rng(20240611);
  for (int g = 0; g < 200; ++g) {
    const auto kb = random_graph(rng, 20, 60);
    for (const auto& topic : kb.entities()) {
      const auto got = generate_candidates(kb, topic);
      REQUIRE(got == brute_force_candidates(kb, topic));
      for (const auto& p : got) {
        CHECK(p.entity != topic);
        CHECK(p.intermediate.has_value() == (p.hops() == 2));
      }
    }
  }
}
