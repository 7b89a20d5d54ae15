#include "lmkbqa/kb_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "lmkbqa/errors.hpp"

namespace lmkbqa {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string literal_text(const std::string& object) {
  if (object.size() >= 2 && object.front() == '"' && object.back() == '"')
    return object.substr(1, object.size() - 2);
  return object;
}

}  // namespace

Tokens whitespace_tokens(const std::string& text) {
  Tokens out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_literal_object(const std::string& object) {
  if (object.empty()) return false;
  const unsigned char c = object.front();
  return std::isdigit(c) || c == '-' || c == '+' || c == '"';
}

bool KnowledgeGraph::add_triple(Triple t) {
  if (t.subject.empty() || t.predicate.empty() || t.object.empty())
    throw Error("triple fields must be non-empty");
  auto [it, inserted] = triples_.insert(t);
  if (!inserted) return false;
  forward_[t.subject].insert({t.predicate, t.object});
  reverse_[t.object].insert({t.predicate, t.subject});
  if (is_literal_object(t.object) && !aliases_.contains(t.object)) add_alias(t.object, literal_text(t.object));
  return true;
}

void KnowledgeGraph::add_alias(const EntityId& e, const std::string& alias) {
  aliases_[e].push_back(alias);
  alias_tokens_[e].push_back(whitespace_tokens(alias));
}

bool KnowledgeGraph::contains(const EntityId& e) const {
  return forward_.contains(e) || reverse_.contains(e) || aliases_.contains(e);
}

std::vector<EntityId> KnowledgeGraph::entities() const {
  std::set<EntityId> all;
  for (const auto& [e, _] : forward_) all.insert(e);
  for (const auto& [e, _] : reverse_) all.insert(e);
  for (const auto& [e, _] : aliases_) all.insert(e);
  return {all.begin(), all.end()};
}

std::vector<Neighbor> KnowledgeGraph::neighbors(const EntityId& e) const {
  std::vector<Neighbor> out;
  if (auto it = forward_.find(e); it != forward_.end())
    for (const auto& edge : it->second) out.push_back({edge.relation, edge.entity, Direction::kForward});
  if (auto it = reverse_.find(e); it != reverse_.end())
    for (const auto& edge : it->second) out.push_back({edge.relation, edge.entity, Direction::kReverse});
  return out;
}

std::vector<EntityId> KnowledgeGraph::typed_objects(const EntityId& e) const {
  std::vector<EntityId> out;
  auto it = forward_.find(e);
  if (it == forward_.end()) return out;
  for (const auto& edge : it->second)
    if (edge.relation == type_relation_) out.push_back(edge.entity);
  std::sort(out.begin(), out.end());
  return out;
}

Tokens KnowledgeGraph::display_tokens(const EntityId& e) const {
  if (auto it = alias_tokens_.find(e); it != alias_tokens_.end() && !it->second.empty())
    return it->second.front();
  auto slash = e.find_last_of('/');
  std::string last = slash == std::string::npos ? e : e.substr(slash + 1);
  std::replace(last.begin(), last.end(), '_', ' ');
  return whitespace_tokens(last);
}

std::string KnowledgeGraph::display_name(const EntityId& e) const {
  if (auto it = aliases_.find(e); it != aliases_.end() && !it->second.empty()) return it->second.front();
  return e;
}

void KnowledgeGraph::write_triples(std::ostream& out) const {
  for (const auto& t : triples_) out << t.subject << '\t' << t.predicate << '\t' << t.object << '\n';
}

void KnowledgeGraph::write_names(std::ostream& out) const {
  for (const auto& [e, names] : aliases_)
    for (const auto& n : names) out << e << '\t' << n << '\n';
}

KnowledgeGraph load_kb(std::istream& triples, std::istream& names, const RelationId& type_relation) {
  KnowledgeGraph kb(type_relation);
  std::string line;
  std::size_t lineno = 0;
  // Names first so literal pseudo-entities do not shadow explicit aliases.
  while (std::getline(names, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty()) throw MalformedLine(lineno);
    kb.add_alias(fields[0], fields[1]);
  }
  lineno = 0;
  while (std::getline(triples, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw MalformedLine(lineno);
    kb.add_triple({fields[0], fields[1], fields[2]});
  }
  return kb;
}

KnowledgeGraph load_kb_files(const std::string& triples_path, const std::string& names_path,
                             const RelationId& type_relation) {
  std::ifstream triples(triples_path);
  if (!triples) throw Error("cannot open triples file " + triples_path);
  if (names_path.empty()) {
    std::istringstream none;
    return load_kb(triples, none, type_relation);
  }
  std::ifstream names(names_path);
  if (!names) throw Error("cannot open names file " + names_path);
  return load_kb(triples, names, type_relation);
}

}  // namespace lmkbqa
