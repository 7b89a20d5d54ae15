#pragma once

// Freebase-style triple store held fully in memory.
//
// Triples file: `subject<TAB>predicate<TAB>object`, one per line, `#` lines
// ignored. Names file: `entity_id<TAB>alias`, repeated ids accumulate aliases
// in file order. Objects that look like literals (leading digit, sign or a
// double quote) become pseudo-entities whose only alias is the literal text.

#include <compare>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace lmkbqa {

using EntityId = std::string;
using RelationId = std::string;
using Tokens = std::vector<std::string>;

struct Triple {
  EntityId subject;
  RelationId predicate;
  EntityId object;

  auto operator<=>(const Triple&) const = default;
};

enum class Direction { kForward, kReverse };

struct Neighbor {
  RelationId relation;
  EntityId entity;
  Direction direction;

  bool operator==(const Neighbor&) const = default;
};

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(RelationId type_relation) : type_relation_(std::move(type_relation)) {}

  // Inserts a triple; returns false when it was already present.
  bool add_triple(Triple t);
  void add_alias(const EntityId& e, const std::string& alias);

  std::size_t size() const { return triples_.size(); }
  const std::set<Triple>& triples() const { return triples_; }
  const RelationId& type_relation() const { return type_relation_; }

  bool contains(const EntityId& e) const;
  // Every entity mentioned by a triple or the names file, sorted.
  std::vector<EntityId> entities() const;

  // Forward edges first, then reverse; each group sorted by (relation, entity).
  std::vector<Neighbor> neighbors(const EntityId& e) const;
  std::vector<EntityId> typed_objects(const EntityId& e) const;

  Tokens display_tokens(const EntityId& e) const;
  // First alias verbatim, or the id itself when unnamed.
  std::string display_name(const EntityId& e) const;

  // entity -> alias token lists (lowercased, whitespace-split), file order.
  const std::map<EntityId, std::vector<Tokens>>& alias_index() const { return alias_tokens_; }

  // Writes the triples file format; names are written by write_names.
  void write_triples(std::ostream& out) const;
  void write_names(std::ostream& out) const;

 private:
  struct Edge {
    RelationId relation;
    EntityId entity;
    auto operator<=>(const Edge&) const = default;
  };

  RelationId type_relation_ = "is_a";
  std::set<Triple> triples_;
  std::map<EntityId, std::set<Edge>> forward_;
  std::map<EntityId, std::set<Edge>> reverse_;
  std::map<EntityId, std::vector<std::string>> aliases_;
  std::map<EntityId, std::vector<Tokens>> alias_tokens_;
};

KnowledgeGraph load_kb(std::istream& triples, std::istream& names, const RelationId& type_relation);
KnowledgeGraph load_kb_files(const std::string& triples_path, const std::string& names_path,
                             const RelationId& type_relation);

// Lowercase and split on ASCII whitespace.
Tokens whitespace_tokens(const std::string& text);
bool is_literal_object(const std::string& object);

}  // namespace lmkbqa
