#include "lmkbqa/aspects.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <string_view>
#include <vector>

#include "lmkbqa/errors.hpp"

namespace lmkbqa {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// 42, 3.5, 1,000
bool is_numeral(std::string_view s) {
  if (s.empty() || !std::isdigit(static_cast<unsigned char>(s.front())) ||
      !std::isdigit(static_cast<unsigned char>(s.back())))
    return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const unsigned char c = s[i];
    if (std::isdigit(c)) continue;
    if ((c == '.' || c == ',') && std::isdigit(static_cast<unsigned char>(s[i + 1]))) continue;
    return false;
  }
  return true;
}

bool is_ordinal(std::string_view s) {
  static constexpr std::array<std::string_view, 10> kWords = {
      "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"};
  if (std::find(kWords.begin(), kWords.end(), s) != kWords.end()) return true;
  if (s.size() < 3) return false;
  const auto suffix = s.substr(s.size() - 2);
  return all_digits(s.substr(0, s.size() - 2)) &&
         (suffix == "st" || suffix == "nd" || suffix == "rd" || suffix == "th");
}

std::string delexicalize_token(const std::string& t) {
  if (all_digits(t) && t.size() == 4) {
    const int year = std::stoi(t);
    if (year >= 1000 && year <= 2100) return "<date>";
  }
  if (is_numeral(t)) return "<number>";
  if (is_ordinal(t)) return "<ordinal>";
  return t;
}

void append(Tokens& dst, const Tokens& src) { dst.insert(dst.end(), src.begin(), src.end()); }

}  // namespace

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string TokenSequence::key() const { return join_tokens(tokens); }

std::string normalize_token(const std::string& token) {
  std::size_t b = 0, e = token.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(token[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) {
    if (token[i] == '?') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(token[i]))));
  }
  return out;
}

QuestionTokens normalize_question(const std::string& text) {
  QuestionTokens q{{}, text};
  for (const auto& raw : whitespace_tokens(text)) {
    auto t = normalize_token(raw);
    if (!t.empty()) q.tokens.push_back(std::move(t));
  }
  if (q.tokens.empty()) throw EmptyQuestion();
  return q;
}

Tokens delexicalize(const Tokens& tokens) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(delexicalize_token(t));
  return out;
}

Tokens relation_tokens(const RelationId& relation) {
  std::vector<std::string> segments;
  std::string cur;
  for (char c : relation) {
    if (c == '/') {
      if (!cur.empty()) segments.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) segments.push_back(std::move(cur));
  if (segments.size() > 1) segments.erase(segments.begin());

  Tokens out;
  for (auto& seg : segments) {
    std::replace(seg.begin(), seg.end(), '_', ' ');
    append(out, whitespace_tokens(seg));
  }
  return out;
}

Tokens lcs(const Tokens& a, const Tokens& b) {
  const std::size_t n = a.size(), m = b.size();
  // suffix[i][j] = |lcs(a[i..], b[j..])|
  std::vector<std::size_t> suffix((n + 1) * (m + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return suffix[i * (m + 1) + j]; };
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      at(i, j) = a[i] == b[j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));

  Tokens out;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j] && at(i, j) == at(i + 1, j + 1) + 1) {
      out.push_back(a[i]);
      ++i, ++j;
    } else if (at(i, j + 1) == at(i, j)) {
      ++j;
    } else {
      ++i;
    }
  }
  return out;
}

AnswerAspects build_aspects(const KnowledgeGraph& kb, const CandidatePath& candidate,
                            const QuestionTokens& question) {
  AnswerAspects aspects;
  for (const auto& type : kb.typed_objects(candidate.entity)) append(aspects.type_tokens, kb.display_tokens(type));
  for (const auto& step : candidate.relations) append(aspects.path_tokens, relation_tokens(step.relation));

  std::set<EntityId> seen{candidate.entity, candidate.topic};
  if (candidate.intermediate) seen.insert(*candidate.intermediate);
  for (const auto& n : kb.neighbors(candidate.entity)) {
    if (!seen.insert(n.entity).second) continue;
    Tokens name;
    for (const auto& t : kb.display_tokens(n.entity)) {
      auto norm = normalize_token(t);
      if (!norm.empty()) name.push_back(std::move(norm));
    }
    append(aspects.context_tokens, delexicalize(lcs(name, question.tokens)));
  }
  return aspects;
}

TokenSequence assemble_sequence(const Tokens& question, const AnswerAspects& aspects) {
  TokenSequence seq;
  seq.question_len = std::min(question.size(), kMaxQuestionTokens);
  seq.tokens.reserve(2 + seq.question_len + kMaxContextTokens);
  seq.tokens.push_back(kClsToken);
  seq.tokens.insert(seq.tokens.end(), question.begin(), question.begin() + static_cast<long>(seq.question_len));
  seq.tokens.push_back(kSepToken);
  for (const Tokens* part : {&aspects.type_tokens, &aspects.path_tokens, &aspects.context_tokens}) {
    for (const auto& t : *part) {
      if (seq.context_len == kMaxContextTokens) break;
      seq.tokens.push_back(t);
      ++seq.context_len;
    }
  }
  return seq;
}

}  // namespace lmkbqa
