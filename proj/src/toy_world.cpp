#include "lmkbqa/toy_world.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lmkbqa/errors.hpp"

namespace lmkbqa::toy {

namespace {

constexpr const char* kSpokenIn = "/language/human_language/countries_spoken_in";
constexpr const char* kCapital = "/location/country/capital";
constexpr const char* kCurrency = "/location/country/currency_used";
constexpr const char* kContainedBy = "/location/location/containedby";
constexpr const char* kBirthplace = "/people/person/place_of_birth";
constexpr const char* kNationality = "/people/person/nationality";

struct Country {
  const char* id;
  const char* name;
  const char* demonym;  // extra alias, may be null
  std::vector<std::pair<const char*, const char*>> languages;  // id, name
  std::pair<const char*, const char*> capital;
  std::pair<const char*, const char*> currency;
  std::pair<const char*, const char*> continent;
};

struct Person {
  const char* id;
  const char* name;
  const char* relation;
  const char* country;
  const char* question;
};

class Builder {
 public:
  void triple(const std::string& s, const std::string& p, const std::string& o) {
    triples_ << s << '\t' << p << '\t' << o << '\n';
  }
  void name(const std::string& e, const std::string& alias) { names_ << e << '\t' << alias << '\n'; }
  void typed(const std::string& e, const std::string& type) { triple(e, kTypeRelation, type); }
  void entity(const std::string& e, const std::string& alias, const std::string& type) {
    if (!declared_.insert(e).second) return;
    name(e, alias);
    typed(e, type);
  }
  std::string triples() const { return triples_.str(); }
  std::string names() const { return names_.str(); }

 private:
  std::ostringstream triples_, names_;
  std::set<std::string> declared_;
};

}  // namespace

ToyWorld make_toy_world() {
  const std::vector<Country> countries = {
      {"/m/03_r3", "Jamaica", "jamaican", {{"/m/01428", "Jamaican English"}}, {"/m/04xn_", "Kingston"},
       {"/m/04xc2m", "Jamaican Dollar"}, {"/m/059g4", "North America"}},
      {"/m/0f8l9c", "France", nullptr, {{"/m/064_8sq", "French"}}, {"/m/05qtj", "Paris"}, {"/m/02l6h", "Euro"},
       {"/m/02j9z", "Europe"}},
      {"/m/015fr", "Brazil", nullptr, {{"/m/05zjd", "Portuguese"}}, {"/m/01sfl", "Brasilia"},
       {"/m/03385m", "Brazilian Real"}, {"/m/06n3y", "South America"}},
      {"/m/03_3d", "Japan", nullptr, {{"/m/03_9r", "Japanese"}}, {"/m/07dfk", "Tokyo"}, {"/m/088n7", "Yen"},
       {"/m/0j0k", "Asia"}},
      {"/m/02k54", "Egypt", nullptr, {{"/m/0jzc", "Arabic"}}, {"/m/01w2v", "Cairo"}, {"/m/04ns8w", "Egyptian Pound"},
       {"/m/0dg3n1", "Africa"}},
      {"/m/0d060g", "Canada", nullptr, {{"/m/02h40lc", "English"}, {"/m/064_8sq", "French"}},
       {"/m/05ksh", "Ottawa"}, {"/m/0ptk_", "Canadian Dollar"}, {"/m/059g4", "North America"}},
  };
  const std::vector<Person> people = {
      {"/m/0bkf4", "Bob Marley", kBirthplace, "/m/03_r3", "where was bob marley born?"},
      {"/m/0b6cn1", "Usain Bolt", kNationality, "/m/03_r3", "what country is usain bolt from?"},
      {"/m/01h0d", "Pele", kBirthplace, "/m/015fr", "where was pele born?"},
      {"/m/0c8n0", "Zinedine Zidane", kNationality, "/m/0f8l9c", "what is the nationality of zinedine zidane?"},
  };

  Builder b;
  ToyWorld world;
  long next_id = 1;
  auto ask = [&](std::string question, std::vector<std::string> answers) {
    world.questions.push_back({next_id++, std::move(question), std::move(answers)});
  };

  std::map<std::string, std::pair<std::string, std::vector<std::string>>> speakers;  // language id -> name, countries
  for (const auto& c : countries) {
    b.entity(c.id, c.name, "/type/country");
    if (c.demonym) b.name(c.id, c.demonym);
    std::vector<std::string> language_names;
    for (const auto& [lid, lname] : c.languages) {
      b.entity(lid, lname, "/type/human_language");
      b.triple(lid, kSpokenIn, c.id);
      language_names.push_back(lname);
      speakers[lid].first = lname;
      speakers[lid].second.push_back(c.name);
    }
    b.entity(c.capital.first, c.capital.second, "/type/city");
    b.triple(c.id, kCapital, c.capital.first);
    b.entity(c.currency.first, c.currency.second, "/type/currency");
    b.triple(c.id, kCurrency, c.currency.first);
    b.entity(c.continent.first, c.continent.second, "/type/continent");
    b.triple(c.id, kContainedBy, c.continent.first);

    std::string lower = whitespace_tokens(c.name).front();
    if (c.demonym)
      ask(std::string("what does ") + c.demonym + " people speak?", language_names);
    else
      ask("what language do people in " + lower + " speak?", language_names);
    ask("what is the capital of " + lower + "?", {c.capital.second});
    ask("what money is used in " + lower + "?", {c.currency.second});
    ask("what continent is " + lower + " on?", {c.continent.second});
    ask("which country has " + join_tokens(whitespace_tokens(c.capital.second)) + " as its capital?", {c.name});
  }
  for (const auto& [lid, entry] : speakers)
    ask("where is " + join_tokens(whitespace_tokens(entry.first)) + " spoken?", entry.second);
  for (const auto& p : people) {
    b.entity(p.id, p.name, "/type/person");
    b.triple(p.id, p.relation, p.country);
    std::string country_name;
    for (const auto& c : countries)
      if (p.country == std::string(c.id)) country_name = c.name;
    ask(p.question, {country_name});
  }

  world.triples_tsv = b.triples();
  world.names_tsv = b.names();
  return world;
}

KnowledgeGraph load_toy_kb(const ToyWorld& world) {
  std::istringstream triples(world.triples_tsv), names(world.names_tsv);
  return load_kb(triples, names, kTypeRelation);
}

void write_toy_world(const ToyWorld& world, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / "triples.tsv") << world.triples_tsv;
  std::ofstream(fs::path(dir) / "names.tsv") << world.names_tsv;
  std::ofstream questions(fs::path(dir) / "questions.jsonl");
  write_dataset(world.questions, questions);
  if (!questions) throw Error("cannot write toy world into " + dir);
}

}  // namespace lmkbqa::toy
