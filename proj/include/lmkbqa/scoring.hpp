#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lmkbqa/aspects.hpp"
#include "lmkbqa/candidate_gen.hpp"
#include "lmkbqa/embeddings.hpp"
#include "lmkbqa/model.hpp"

namespace lmkbqa {

inline constexpr double kAnswerThreshold = 0.7;

using Weights = ModelWeights<double>;

struct ScoredAnswerSet {
  EntityId topic;
  std::vector<std::pair<EntityId, double>> ranked;  // score desc, then id asc
  std::vector<EntityId> selected;                   // in ranked order
};

struct PreparedCandidate {
  CandidatePath path;
  AnswerAspects aspects;
  TokenSequence sequence;
};

// Everything about a question that does not depend on the weights.
struct PreparedQuestion {
  QuestionTokens question;
  Tokens delexicalized;
  TopicMatch topic;
  std::vector<PreparedCandidate> candidates;
};

struct AnswerOptions {
  double threshold = kAnswerThreshold;
  std::size_t candidate_cap = kDefaultCandidateCap;
  unsigned threads = 1;
};

// Throws EmptyQuestion / NoTopicEntity.
PreparedQuestion prepare_question(const KnowledgeGraph& kb, const std::string& text,
                                  std::size_t candidate_cap = kDefaultCandidateCap);

// Question rows follow <CLS>; context rows follow <SEP>, or are the <SEP>
// row alone when the context is empty.
SequenceLayout layout_for(const TokenSequence& seq);

double score_sequence(const Weights& w, const EmbeddingProvider& provider, const TokenSequence& seq);
double score_candidate(const Weights& w, const EmbeddingProvider& provider, const Tokens& question,
                       const AnswerAspects& aspects);

std::vector<std::pair<EntityId, double>> rank(std::vector<std::pair<EntityId, double>> scored);

// Everything scoring at least threshold * top when top > 0, else the top
// candidate alone.
std::vector<EntityId> select_answers(const std::vector<std::pair<EntityId, double>>& ranked,
                                     double rel_threshold = kAnswerThreshold);

ScoredAnswerSet score_prepared(const Weights& w, const EmbeddingProvider& provider, const PreparedQuestion& q,
                               const AnswerOptions& options = {});

ScoredAnswerSet answer_question(const Weights& w, const EmbeddingProvider& provider, const KnowledgeGraph& kb,
                                const std::string& question_text, const AnswerOptions& options = {});

}  // namespace lmkbqa
