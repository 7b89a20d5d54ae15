#include "lmkbqa/evaluation.hpp"

#include <fstream>
#include <json.hpp>
#include <numeric>

#include "lmkbqa/errors.hpp"

namespace lmkbqa {

std::vector<QAPair> parse_dataset(std::istream& in) {
  std::vector<QAPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      QAPair p;
      p.id = j.at("id").get<long>();
      p.question = j.at("question").get<std::string>();
      p.gold = j.at("answers").get<std::vector<std::string>>();
      if (p.question.find_first_not_of(" \t\r\n") == std::string::npos) throw MalformedRecord(lineno, "blank question");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(lineno, e.what());
    }
  }
  return out;
}

std::vector<QAPair> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path);
  return parse_dataset(in);
}

void write_dataset(const std::vector<QAPair>& data, std::ostream& out) {
  for (const auto& p : data)
    out << nlohmann::json{{"id", p.id}, {"question", p.question}, {"answers", p.gold}}.dump() << '\n';
}

std::string normalize_answer(const std::string& s) { return join_tokens(whitespace_tokens(s)); }

std::set<std::string> normalize_answers(const std::vector<std::string>& answers) {
  std::set<std::string> out;
  for (const auto& a : answers) {
    auto n = normalize_answer(a);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

F1Score answer_f1(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
  std::size_t hit = 0;
  for (const auto& p : predicted) hit += gold.count(p);
  F1Score s;
  s.precision = predicted.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(predicted.size());
  s.recall = gold.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

double macro_f1(const std::vector<double>& per_question) {
  if (per_question.empty()) throw EmptyList();
  return std::accumulate(per_question.begin(), per_question.end(), 0.0) / static_cast<double>(per_question.size());
}

EvalReport evaluate(const Weights& w, const EmbeddingProvider& provider, const KnowledgeGraph& kb,
                    const std::vector<QAPair>& dataset, const AnswerOptions& options) {
  if (dataset.empty()) throw EmptyDataset();
  EvalReport report;
  std::vector<double> f1s;
  for (const auto& pair : dataset) {
    QuestionResult r;
    r.id = pair.id;
    try {
      const auto answers = answer_question(w, provider, kb, pair.question, options);
      for (const auto& e : answers.selected) r.predicted.push_back(kb.display_name(e));
      r.score = answer_f1(normalize_answers(r.predicted), normalize_answers(pair.gold));
    } catch (const NoTopicEntity& e) {
      r.error = e.what();
    } catch (const EmptyQuestion& e) {
      r.error = e.what();
    }
    f1s.push_back(r.score.f1);
    report.questions.push_back(std::move(r));
  }
  report.macro_f1 = macro_f1(f1s);
  return report;
}

}  // namespace lmkbqa
