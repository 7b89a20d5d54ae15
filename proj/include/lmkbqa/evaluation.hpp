#pragma once

// Dataset: JSON Lines, one {"id": int, "question": string, "answers": [string]}
// per line. Answers are compared as case-folded, whitespace-normalized
// display strings.

#include <istream>
#include <set>
#include <string>
#include <vector>

#include "lmkbqa/scoring.hpp"

namespace lmkbqa {

struct QAPair {
  long id = 0;
  std::string question;
  std::vector<std::string> gold;
};

struct F1Score {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct QuestionResult {
  long id = 0;
  std::vector<std::string> predicted;  // display names, ranked order
  F1Score score;
  std::string error;  // non-empty when the pipeline could not answer
};

struct EvalReport {
  std::vector<QuestionResult> questions;
  double macro_f1 = 0;
};

std::vector<QAPair> parse_dataset(std::istream& in);
std::vector<QAPair> load_dataset(const std::string& path);
void write_dataset(const std::vector<QAPair>& data, std::ostream& out);

std::string normalize_answer(const std::string& s);
std::set<std::string> normalize_answers(const std::vector<std::string>& answers);

F1Score answer_f1(const std::set<std::string>& predicted, const std::set<std::string>& gold);
double macro_f1(const std::vector<double>& per_question);

EvalReport evaluate(const Weights& w, const EmbeddingProvider& provider, const KnowledgeGraph& kb,
                    const std::vector<QAPair>& dataset, const AnswerOptions& options = {});

}  // namespace lmkbqa
