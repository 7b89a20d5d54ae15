#include "lmkbqa/candidate_gen.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "lmkbqa/aspects.hpp"
#include "lmkbqa/errors.hpp"

namespace lmkbqa {

namespace {

Tokens normalized(const Tokens& tokens) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto n = normalize_token(t);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

bool path_less(const CandidatePath& a, const CandidatePath& b) {
  if (a.relations.size() != b.relations.size()) return a.relations.size() < b.relations.size();
  if (a.relations != b.relations) return a.relations < b.relations;
  return a.intermediate < b.intermediate;
}

}  // namespace

TopicMatch identify_topic_entity(const Tokens& question_tokens, const KnowledgeGraph& kb) {
  const Tokens question = normalized(question_tokens);
  std::optional<TopicMatch> best;
  for (const auto& [entity, aliases] : kb.alias_index()) {
    for (const auto& raw_alias : aliases) {
      const Tokens alias = normalized(raw_alias);
      if (alias.empty() || alias.size() > question.size()) continue;
      for (std::size_t start = 0; start + alias.size() <= question.size(); ++start) {
        if (!std::equal(alias.begin(), alias.end(), question.begin() + start)) continue;
        TopicMatch m{entity, start, start + alias.size(), alias.size()};
        auto key = [](const TopicMatch& x) {
          return std::make_tuple(-static_cast<long>(x.alias_len), x.span_begin, std::cref(x.entity));
        };
        if (!best || key(m) < key(*best)) best = m;
        break;  // later starts of the same alias never win
      }
    }
  }
  if (!best) throw NoTopicEntity();
  return *best;
}

std::vector<CandidatePath> generate_candidates(const KnowledgeGraph& kb, const EntityId& topic,
                                               std::size_t cap) {
  std::map<EntityId, CandidatePath> first_hop;
  const auto topic_edges = kb.neighbors(topic);
  for (const auto& n : topic_edges) {
    if (n.entity == topic) continue;
    CandidatePath p{n.entity, topic, {{n.relation, n.direction}}, std::nullopt};
    auto [it, inserted] = first_hop.try_emplace(n.entity, p);
    if (!inserted && path_less(p, it->second)) it->second = p;
  }

  std::map<EntityId, CandidatePath> second_hop;
  for (const auto& [mid, mid_path] : first_hop) {
    for (const auto& n : kb.neighbors(mid)) {
      if (n.entity == topic || first_hop.contains(n.entity)) continue;
      CandidatePath p{n.entity, topic, {mid_path.relations.front(), {n.relation, n.direction}}, mid};
      auto [it, inserted] = second_hop.try_emplace(n.entity, p);
      if (!inserted && path_less(p, it->second)) it->second = p;
    }
  }

  std::vector<CandidatePath> out;
  out.reserve(first_hop.size() + second_hop.size());
  for (auto& [_, p] : first_hop) out.push_back(std::move(p));
  for (auto& [_, p] : second_hop) out.push_back(std::move(p));
  if (out.size() > cap) out.resize(cap);
  return out;
}

}  // namespace lmkbqa
