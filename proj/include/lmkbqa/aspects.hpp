#pragma once

#include <cstddef>
#include <string>

#include "lmkbqa/candidate_gen.hpp"
#include "lmkbqa/kb_store.hpp"

namespace lmkbqa {

inline constexpr std::size_t kMaxQuestionTokens = 18;
inline constexpr std::size_t kMaxContextTokens = 96;
inline constexpr const char* kClsToken = "<CLS>";
inline constexpr const char* kSepToken = "<SEP>";

struct QuestionTokens {
  Tokens tokens;  // lowercased, punctuation-stripped, not delexicalized
  std::string raw;
};

struct AnswerAspects {
  Tokens type_tokens;
  Tokens path_tokens;
  Tokens context_tokens;

  bool operator==(const AnswerAspects&) const = default;
};

// <CLS> question <SEP> context
struct TokenSequence {
  Tokens tokens;
  std::size_t question_len = 0;
  std::size_t context_len = 0;

  std::size_t question_begin() const { return 1; }
  std::size_t context_begin() const { return question_len + 2; }
  std::string key() const;
};

// Lowercases and strips leading/trailing ASCII punctuation; may return "".
std::string normalize_token(const std::string& token);

QuestionTokens normalize_question(const std::string& text);

// Dates (1000..2100), other numerals and ordinals become <date>, <number>,
// <ordinal>. Idempotent.
Tokens delexicalize(const Tokens& tokens);

Tokens relation_tokens(const RelationId& relation);

// Longest common subsequence; among equally long ones, the DP backtrack takes
// the earliest usable position of `a`.
Tokens lcs(const Tokens& a, const Tokens& b);

AnswerAspects build_aspects(const KnowledgeGraph& kb, const CandidatePath& candidate,
                            const QuestionTokens& question);

// Question capped at 18 tokens; context is type ++ path ++ context capped at 96.
TokenSequence assemble_sequence(const Tokens& question, const AnswerAspects& aspects);

std::string join_tokens(const Tokens& tokens);

}  // namespace lmkbqa
