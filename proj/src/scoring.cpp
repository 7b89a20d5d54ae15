#include "lmkbqa/scoring.hpp"

#include <algorithm>
#include <exception>
#include <thread>

namespace lmkbqa {

PreparedQuestion prepare_question(const KnowledgeGraph& kb, const std::string& text, std::size_t candidate_cap) {
  PreparedQuestion q;
  q.question = normalize_question(text);
  q.delexicalized = delexicalize(q.question.tokens);
  q.topic = identify_topic_entity(q.question.tokens, kb);
  for (auto& path : generate_candidates(kb, q.topic.entity, candidate_cap)) {
    PreparedCandidate c;
    c.aspects = build_aspects(kb, path, q.question);
    c.sequence = assemble_sequence(q.delexicalized, c.aspects);
    c.path = std::move(path);
    q.candidates.push_back(std::move(c));
  }
  return q;
}

SequenceLayout layout_for(const TokenSequence& seq) {
  SequenceLayout l;
  l.question_begin = static_cast<long>(seq.question_begin());
  l.question_rows = static_cast<long>(seq.question_len);
  if (seq.context_len == 0) {
    l.context_begin = static_cast<long>(seq.question_len + 1);
    l.context_rows = 1;
  } else {
    l.context_begin = static_cast<long>(seq.context_begin());
    l.context_rows = static_cast<long>(seq.context_len);
  }
  return l;
}

double score_sequence(const Weights& w, const EmbeddingProvider& provider, const TokenSequence& seq) {
  return score_forward<double>(w, provider.embed(seq), layout_for(seq));
}

double score_candidate(const Weights& w, const EmbeddingProvider& provider, const Tokens& question,
                       const AnswerAspects& aspects) {
  return score_sequence(w, provider, assemble_sequence(question, aspects));
}

std::vector<std::pair<EntityId, double>> rank(std::vector<std::pair<EntityId, double>> scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return scored;
}

std::vector<EntityId> select_answers(const std::vector<std::pair<EntityId, double>>& ranked, double rel_threshold) {
  std::vector<EntityId> out;
  if (ranked.empty()) return out;
  const double top = ranked.front().second;
  if (top <= 0.0) return {ranked.front().first};
  const double cutoff = rel_threshold * top;
  for (const auto& [e, s] : ranked)
    if (s >= cutoff) out.push_back(e);
  return out;
}

ScoredAnswerSet score_prepared(const Weights& w, const EmbeddingProvider& provider, const PreparedQuestion& q,
                               const AnswerOptions& options) {
  ScoredAnswerSet out;
  out.topic = q.topic.entity;
  const std::size_t n = q.candidates.size();
  std::vector<double> scores(n);
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t begin) {
    try {
      for (std::size_t i = begin; i < n; i += threads) scores[i] = score_sequence(w, provider, q.candidates[i].sequence);
    } catch (...) {
      errors[begin] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<std::pair<EntityId, double>> scored;
  scored.reserve(n);
  for (std::size_t i = 0; i < n; ++i) scored.emplace_back(q.candidates[i].path.entity, scores[i]);
  out.ranked = rank(std::move(scored));
  out.selected = select_answers(out.ranked, options.threshold);
  return out;
}

ScoredAnswerSet answer_question(const Weights& w, const EmbeddingProvider& provider, const KnowledgeGraph& kb,
                                const std::string& question_text, const AnswerOptions& options) {
  return score_prepared(w, provider, prepare_question(kb, question_text, options.candidate_cap), options);
}

}  // namespace lmkbqa
