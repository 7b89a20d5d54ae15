#include <doctest.h>

#include <sstream>

#include "lmkbqa/errors.hpp"
#include "lmkbqa/kb_store.hpp"
#include "support.hpp"

using namespace lmkbqa;
using testing::kb_from;

namespace {
const char* kSpoken = "/language/human_language/countries_spoken_in";
const std::string kOneTriple = "/m/01428\t/language/human_language/countries_spoken_in\t/m/03_r3\n";
}  // namespace

TEST_CASE("load_kb reads a single Freebase triple") {
  auto kb = kb_from(kOneTriple, "/m/01428\tJamaican English\n/m/03_r3\tJamaica\n");
  CHECK(kb.size() == 1);
  CHECK(kb.triples().count(Triple{"/m/01428", kSpoken, "/m/03_r3"}) == 1);
  CHECK(kb.display_name("/m/01428") == "Jamaican English");
}

TEST_CASE("empty triples source gives an empty graph") {
  auto kb = kb_from("");
  CHECK(kb.size() == 0);
  CHECK(kb.neighbors("/m/x").empty());
  CHECK(kb.typed_objects("/m/x").empty());
  CHECK(kb.entities().empty());
}

TEST_CASE("duplicate lines collapse to one triple") {
  auto kb = kb_from(kOneTriple + kOneTriple);
  CHECK(kb.size() == 1);
  KnowledgeGraph g;
  CHECK(g.add_triple({"a", "r", "b"}));
  CHECK_FALSE(g.add_triple({"a", "r", "b"}));
}

TEST_CASE("comments and blank lines are skipped") {
  auto kb = kb_from("# header\n\n" + kOneTriple + "\n");
  CHECK(kb.size() == 1);
}

TEST_CASE("wrong field count raises MalformedLine with the line number") {
  CHECK_THROWS_AS(kb_from("a\tb\n"), MalformedLine);
  CHECK_THROWS_AS(kb_from("a\tb\tc\td\n"), MalformedLine);
  try {
    kb_from(kOneTriple + "oops\n");
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("neighbors") {
  SUBCASE("object side of the single triple sees a reverse edge") {
    auto kb = kb_from(kOneTriple);
    const auto n = kb.neighbors("/m/03_r3");
    REQUIRE(n.size() == 1);
    CHECK(n[0] == Neighbor{kSpoken, "/m/01428", Direction::kReverse});
    CHECK(kb.neighbors("/m/01428") == std::vector<Neighbor>{{kSpoken, "/m/03_r3", Direction::kForward}});
  }
  SUBCASE("isolated node") {
    KnowledgeGraph kb;
    kb.add_alias("lonely", "Lonely");
    CHECK(kb.neighbors("lonely").empty());
  }
  SUBCASE("self-loop appears once in each direction") {
    auto kb = kb_from("a\tr\ta\n");
    const auto n = kb.neighbors("a");
    REQUIRE(n.size() == 2);
    CHECK(n[0] == Neighbor{"r", "a", Direction::kForward});
    CHECK(n[1] == Neighbor{"r", "a", Direction::kReverse});
  }
  SUBCASE("forward group first, each group sorted") {
    auto kb = kb_from("x\tr2\tb\nx\tr1\tc\nz\tr0\tx\ny\tr0\tx\n");
    const auto n = kb.neighbors("x");
    REQUIRE(n.size() == 4);
    CHECK(n[0] == Neighbor{"r1", "c", Direction::kForward});
    CHECK(n[1] == Neighbor{"r2", "b", Direction::kForward});
    CHECK(n[2] == Neighbor{"r0", "y", Direction::kReverse});
    CHECK(n[3] == Neighbor{"r0", "z", Direction::kReverse});
  }
}

TEST_CASE("typed_objects") {
  auto kb = kb_from("person_x\tis_a\tperson\nb\tis_a\tzeta\nb\tis_a\talpha\nb\tlikes\tperson_x\n");
  CHECK(kb.typed_objects("person_x") == std::vector<EntityId>{"person"});
  CHECK(kb.typed_objects("b") == std::vector<EntityId>{"alpha", "zeta"});
  CHECK(kb.typed_objects("person").empty());
}

TEST_CASE("type relation is configurable") {
  std::istringstream t("a\t/type/object/type\tperson\na\tis_a\tthing\n"), n("");
  auto kb = load_kb(t, n, "/type/object/type");
  CHECK(kb.typed_objects("a") == std::vector<EntityId>{"person"});
}

TEST_CASE("display_tokens") {
  auto kb = kb_from(kOneTriple, "/m/01428\tJamaican English\n/m/01428\tPatois\n/m/ny\t  New   York \n");
  CHECK(kb.display_tokens("/m/01428") == Tokens{"jamaican", "english"});
  CHECK(kb.display_tokens("/m/abc_def") == Tokens{"abc", "def"});
  CHECK(kb.display_tokens("/m/ny") == Tokens{"new", "york"});
  CHECK(kb.display_name("/m/03_r3") == "/m/03_r3");
}

TEST_CASE("literal objects become named pseudo-entities") {
  CHECK(is_literal_object("1962"));
  CHECK(is_literal_object("\"Kingston\""));
  CHECK(is_literal_object("-3.5"));
  CHECK_FALSE(is_literal_object("/m/03_r3"));
  CHECK_FALSE(is_literal_object(""));
  auto kb = kb_from("/m/j\t/location/dated_location/date_founded\t1962\n");
  CHECK(kb.display_name("1962") == "1962");
  CHECK(kb.display_tokens("1962") == Tokens{"1962"});
}

TEST_CASE("names accumulate aliases in file order") {
  auto kb = kb_from("", "e\tFirst Name\ne\tsecond\n");
  const auto& idx = kb.alias_index().at("e");
  REQUIRE(idx.size() == 2);
  CHECK(idx[0] == Tokens{"first", "name"});
  CHECK(idx[1] == Tokens{"second"});
  CHECK(kb.contains("e"));
  CHECK_FALSE(kb.contains("f"));
}

TEST_CASE("write_triples and write_names round-trip") {
  auto kb = kb_from("a\tr\tb\nb\tis_a\tt\nc\tq\t\"lit\"\n", "a\tAlpha One\nb\tBeta\n");
  std::ostringstream t, n;
  kb.write_triples(t);
  kb.write_names(n);
  auto again = kb_from(t.str(), n.str());
  CHECK(again.triples() == kb.triples());
  CHECK(again.alias_index() == kb.alias_index());
  CHECK(again.entities() == kb.entities());
}

TEST_CASE("whitespace_tokens lowercases and splits") {
  CHECK(whitespace_tokens(" A\tb  C\n") == Tokens{"a", "b", "c"});
  CHECK(whitespace_tokens("   ").empty());
}
