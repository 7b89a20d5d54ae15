#include "lmkbqa/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "lmkbqa/errors.hpp"

namespace lmkbqa {

void TrainingConfig::validate() const {
  if (!(lr > 0) || batch_size == 0 || !(margin > 0) || negatives_per_positive == 0 || !(lr_decay_factor > 0) ||
      patience_epochs == 0 || max_epochs == 0)
    throw Error("training config values must be positive");
  if (dropout < 0 || dropout >= 1) throw Error("dropout must lie in [0, 1)");
  if (!(answer_threshold > 0)) throw Error("answer threshold must be positive");
}

void adam_step(ModelWeights<double>& params, const ModelWeights<double>& grads, AdamState& state, double lr) {
  if (!(params.dims == grads.dims) || !(params.dims == state.m.dims)) throw ShapeMismatch("adam: dims differ");
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  visit_tensors(
      [&](const std::string& name, auto& p, const auto& g, auto& m, auto& v) {
        if (p.rows() != g.rows() || p.cols() != g.cols()) throw ShapeMismatch("adam: " + name);
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
      },
      params, grads, state.m, state.v);
}

double hinge_loss(double positive, const std::vector<double>& negatives, double margin) {
  double loss = 0;
  for (double n : negatives) loss += std::max(0.0, margin - positive + n);
  return loss;
}

TrainingInstance make_instance(const Tokens& question, const AnswerAspects& positive,
                               const std::vector<AnswerAspects>& negatives) {
  TrainingInstance inst;
  inst.positive = assemble_sequence(question, positive);
  for (const auto& n : negatives) inst.negatives.push_back(assemble_sequence(question, n));
  return inst;
}

namespace {

using Trace = CandidateTrace<double>;

double forward_sequence(const ModelWeights<double>& w, const EmbeddingProvider& provider, const TokenSequence& seq,
                        const Dropout& dropout, Trace* trace) {
  return score_forward<double>(w, provider.embed(seq), layout_for(seq), dropout, trace);
}

}  // namespace

double backward(const ModelWeights<double>& w, const EmbeddingProvider& provider,
                const std::vector<TrainingInstance>& batch, double margin, ModelWeights<double>& grads,
                double dropout_rate, std::mt19937_64* rng) {
  if (batch.empty()) return 0.0;
  const Dropout dropout{dropout_rate, rng};
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0;
  for (const auto& inst : batch) {
    Trace pos;
    const double pos_score = forward_sequence(w, provider, inst.positive, dropout, &pos);
    std::vector<Trace> negs(inst.negatives.size());
    double dpos = 0;
    for (std::size_t k = 0; k < inst.negatives.size(); ++k) {
      const double neg_score = forward_sequence(w, provider, inst.negatives[k], dropout, &negs[k]);
      const double hinge = margin - pos_score + neg_score;
      if (hinge > 0) {
        total += hinge;
        dpos -= scale;
        score_backward<double>(w, negs[k], scale, grads);
      }
    }
    if (dpos != 0) score_backward<double>(w, pos, dpos, grads);
  }
  return total * scale;
}

double batch_loss(const ModelWeights<double>& w, const EmbeddingProvider& provider,
                  const std::vector<TrainingInstance>& batch, double margin) {
  if (batch.empty()) return 0.0;
  double total = 0;
  for (const auto& inst : batch) {
    const double pos = score_sequence(w, provider, inst.positive);
    std::vector<double> negs;
    for (const auto& n : inst.negatives) negs.push_back(score_sequence(w, provider, n));
    total += hinge_loss(pos, negs, margin);
  }
  return total / static_cast<double>(batch.size());
}

double GradCheckReport::max_rel_error() const {
  double m = 0;
  for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
  return m;
}

GradCheckReport compare_gradients(const ModelWeights<double>& w, const ModelWeights<double>& analytic,
                                  const ExtendedLoss& loss, double step, double tol) {
  GradCheckReport report;
  auto probe = cast_weights<Extended>(w);
  std::vector<std::tuple<std::string, Extended*, const double*, long>> views;
  visit_tensors([&](const std::string& name, auto& p, const auto& g) { views.emplace_back(name, p.data(), g.data(), p.size()); },
                probe, analytic);
  const Extended h = step;
  for (const auto& [name, p, g, size] : views) {
    TensorCheck check{name, 0.0, true};
    for (long i = 0; i < size; ++i) {
      const Extended saved = p[i];
      p[i] = saved + h;
      const Extended up = loss(probe);
      p[i] = saved - h;
      const Extended down = loss(probe);
      p[i] = saved;
      const double numeric = static_cast<double>((up - down) / (2 * h));
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), 1e-8});
      check.max_rel_error = std::max(check.max_rel_error, std::abs(g[i] - numeric) / denom);
    }
    check.passed = check.max_rel_error < tol;
    report.passed = report.passed && check.passed;
    report.tensors.push_back(std::move(check));
  }
  return report;
}

Extended batch_loss_extended(const ModelWeights<Extended>& w, const EmbeddingProvider& provider,
                             const std::vector<TrainingInstance>& batch, double margin) {
  if (batch.empty()) return 0;
  auto score = [&](const TokenSequence& seq) {
    return score_forward<Extended>(w, provider.embed(seq).cast<Extended>(), layout_for(seq));
  };
  Extended total = 0;
  for (const auto& inst : batch) {
    const Extended pos = score(inst.positive);
    for (const auto& n : inst.negatives) total += std::max<Extended>(0, Extended(margin) - pos + score(n));
  }
  return total / static_cast<Extended>(batch.size());
}

GradCheckReport grad_check(const ModelWeights<double>& w, const EmbeddingProvider& provider,
                           const std::vector<TrainingInstance>& instances, double margin, double step, double tol) {
  auto analytic = zero_weights<double>(w.dims);
  backward(w, provider, instances, margin, analytic);
  return compare_gradients(
      w, analytic, [&](const ModelWeights<Extended>& p) { return batch_loss_extended(p, provider, instances, margin); },
      step, tol);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

GradCheckCase random_grad_check_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelDims dims;
  dims.embedding_dim = 6;
  dims.width = 8;
  dims.heads = 2;
  dims.ffn_dim = 12;
  dims.blocks = 1;

  auto weights = init_weights<double>(dims, rng());
  // Non-trivial norm parameters and biases so every path carries gradient.
  visit_tensors(
      [&](const std::string& name, auto& t) {
        if (name.ends_with("_gain") || name.ends_with("_bias"))
          for (long i = 0; i < t.size(); ++i) t.data()[i] += 0.2 * (2 * unit_uniform(rng) - 1);
      },
      weights);

  static const Tokens kVocab = {"what", "does", "jamaican", "people", "speak", "language",
                                "country", "human", "spoken", "in", "capital", "city"};
  auto random_tokens = [&](std::size_t max_len) {
    Tokens t(1 + uniform_index(rng, max_len));
    for (auto& tok : t) tok = kVocab[uniform_index(rng, kVocab.size())];
    return t;
  };
  // Sequences are <CLS> q <SEP> c; q and c stay within 6 tokens each.
  const Tokens question = random_tokens(4);
  auto aspects = [&] { return AnswerAspects{{}, random_tokens(3), random_tokens(2)}; };
  const std::vector<AnswerAspects> negatives = {aspects(), aspects()};
  GradCheckCase c{std::move(weights), EmbeddingProvider::stub(dims.embedding_dim, rng()), {}};
  c.instances.push_back(make_instance(question, aspects(), negatives));
  return c;
}

std::vector<std::size_t> sample_negatives(const std::vector<PreparedCandidate>& candidates,
                                          const std::set<EntityId>& gold, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (!gold.contains(candidates[i].path.entity)) pool.push_back(i);
  const std::size_t take = std::min(k, pool.size());
  for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  pool.resize(take);
  return pool;
}

double PlateauSchedule::update(double validation_score) {
  if (validation_score > best_ + min_delta_) {
    best_ = validation_score;
    stale_ = 0;
  } else if (++stale_ >= patience_) {
    lr_ *= factor_;
    stale_ = 0;
  }
  return lr_;
}

std::vector<std::optional<PreparedExample>> prepare_examples(const KnowledgeGraph& kb,
                                                             const std::vector<QAPair>& data,
                                                             std::size_t candidate_cap) {
  std::vector<std::optional<PreparedExample>> out;
  out.reserve(data.size());
  for (const auto& pair : data) {
    try {
      PreparedExample ex{prepare_question(kb, pair.question, candidate_cap), {}, normalize_answers(pair.gold)};
      for (const auto& c : ex.question.candidates)
        if (ex.gold_answers.contains(normalize_answer(kb.display_name(c.path.entity)))) ex.gold.insert(c.path.entity);
      out.emplace_back(std::move(ex));
    } catch (const NoTopicEntity&) {
      out.emplace_back(std::nullopt);
    } catch (const EmptyQuestion&) {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

double validation_f1(const ModelWeights<double>& w, const EmbeddingProvider& provider, const KnowledgeGraph& kb,
                     const std::vector<std::optional<PreparedExample>>& examples, double threshold) {
  std::vector<double> f1s;
  AnswerOptions options;
  options.threshold = threshold;
  for (const auto& ex : examples) {
    if (!ex) {
      f1s.push_back(0.0);
      continue;
    }
    const auto answers = score_prepared(w, provider, ex->question, options);
    std::vector<std::string> names;
    for (const auto& e : answers.selected) names.push_back(kb.display_name(e));
    f1s.push_back(answer_f1(normalize_answers(names), ex->gold_answers).f1);
  }
  return macro_f1(f1s);
}

TrainResult train(ModelWeights<double> weights, const EmbeddingProvider& provider, const KnowledgeGraph& kb,
                  const std::vector<QAPair>& train_set, const std::vector<QAPair>& validation_set,
                  const TrainingConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || validation_set.empty()) throw EmptyDataset();

  std::vector<PreparedExample> examples;
  for (auto& ex : prepare_examples(kb, train_set))
    if (ex && !ex->gold.empty() && ex->gold.size() < ex->question.candidates.size()) examples.push_back(std::move(*ex));
  if (examples.empty()) throw EmptyDataset();
  const auto validation = prepare_examples(kb, validation_set);

  std::mt19937_64 rng(config.seed);
  AdamState adam(weights.dims);
  PlateauSchedule schedule(config.lr, config.lr_decay_factor, config.patience_epochs, config.min_delta);
  TrainResult result;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    const double lr = schedule.lr();
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<TrainingInstance> batch;
      for (std::size_t b = start; b < std::min(order.size(), start + config.batch_size); ++b) {
        const auto& ex = examples[order[b]];
        const auto& cands = ex.question.candidates;
        for (std::size_t c = 0; c < cands.size(); ++c) {
          if (!ex.gold.contains(cands[c].path.entity)) continue;
          TrainingInstance inst;
          inst.positive = cands[c].sequence;
          for (auto n : sample_negatives(cands, ex.gold, config.negatives_per_positive, rng))
            inst.negatives.push_back(cands[n].sequence);
          batch.push_back(std::move(inst));
        }
      }
      auto grads = zero_weights<double>(weights.dims);
      epoch_loss += backward(weights, provider, batch, config.margin, grads, config.dropout, &rng);
      adam_step(weights, grads, adam, lr);
      ++batches;
    }

    EpochRecord record{epoch, epoch_loss / static_cast<double>(batches),
                       validation_f1(weights, provider, kb, validation, config.answer_threshold), lr};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    schedule.update(record.val_f1);
    if (config.target_f1 > 0 && record.val_f1 >= config.target_f1) break;
  }
  result.weights = std::move(weights);
  return result;
}

std::pair<std::vector<QAPair>, std::vector<QAPair>> split_train_validation(std::vector<QAPair> data,
                                                                           std::uint64_t seed,
                                                                           double train_fraction) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = data.size(); i > 1; --i) std::swap(data[i - 1], data[uniform_index(rng, i)]);
  auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.size())));
  if (data.size() > 1) cut = std::clamp<std::size_t>(cut, 1, data.size() - 1);
  std::vector<QAPair> validation(data.begin() + static_cast<long>(cut), data.end());
  data.resize(cut);
  return {std::move(data), std::move(validation)};
}

}  // namespace lmkbqa
