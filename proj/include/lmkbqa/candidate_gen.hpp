#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lmkbqa/kb_store.hpp"

namespace lmkbqa {

struct TopicMatch {
  EntityId entity;
  std::size_t span_begin = 0;  // inclusive
  std::size_t span_end = 0;    // exclusive
  std::size_t alias_len = 0;
};

struct PathStep {
  RelationId relation;
  Direction direction;

  auto operator<=>(const PathStep& o) const {
    if (auto c = relation <=> o.relation; c != 0) return c;
    return static_cast<int>(direction) <=> static_cast<int>(o.direction);
  }
  bool operator==(const PathStep&) const = default;
};

struct CandidatePath {
  EntityId entity;
  EntityId topic;
  std::vector<PathStep> relations;  // topic-to-candidate order, size 1 or 2
  std::optional<EntityId> intermediate;

  std::size_t hops() const { return relations.size(); }
  bool operator==(const CandidatePath&) const = default;
};

inline constexpr std::size_t kDefaultCandidateCap = 512;

// Longest contiguous alias match; ties go to the earliest span, then the
// smallest entity id. Alias and question tokens are compared after the same
// normalization the question tokenizer applies.
TopicMatch identify_topic_entity(const Tokens& question_tokens, const KnowledgeGraph& kb);

// All entities within two edges of `topic` (either direction), topic
// excluded, one shortest path each. Ordered by hop count, then entity id;
// truncated to `cap`.
std::vector<CandidatePath> generate_candidates(const KnowledgeGraph& kb, const EntityId& topic,
                                               std::size_t cap = kDefaultCandidateCap);

}  // namespace lmkbqa
