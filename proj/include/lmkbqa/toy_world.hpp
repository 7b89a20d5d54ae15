#pragma once

// Small generated knowledge base in the shape of the Freebase country /
// language schema, with templated questions over it. Used by the overfit and
// determinism checks and by the sample data under data/toy.

#include <string>
#include <vector>

#include "lmkbqa/evaluation.hpp"
#include "lmkbqa/kb_store.hpp"

namespace lmkbqa::toy {

struct ToyWorld {
  std::string triples_tsv;
  std::string names_tsv;
  std::vector<QAPair> questions;
};

inline constexpr const char* kTypeRelation = "is_a";

ToyWorld make_toy_world();
KnowledgeGraph load_toy_kb(const ToyWorld& world);

// Writes triples.tsv, names.tsv and questions.jsonl into `dir`.
void write_toy_world(const ToyWorld& world, const std::string& dir);

}  // namespace lmkbqa::toy
