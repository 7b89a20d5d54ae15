#pragma once

// Pairwise-hinge training of the scorer with hand-written reverse-mode
// gradients and Adam, plus a central-difference gradient checker.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lmkbqa/evaluation.hpp"
#include "lmkbqa/scoring.hpp"

namespace lmkbqa {

struct TrainingConfig {
  double lr = 0.01;
  std::size_t batch_size = 4;
  double dropout = 0.3;
  double margin = 0.5;
  std::size_t negatives_per_positive = 8;
  double lr_decay_factor = 0.1;
  std::size_t patience_epochs = 3;
  double min_delta = 1e-4;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 1;
  double answer_threshold = kAnswerThreshold;
  // Stop once validation macro-F1 reaches this value; 0 disables.
  double target_f1 = 0.0;

  void validate() const;
};

struct AdamState {
  ModelWeights<double> m, v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const ModelDims& dims) : m(zero_weights<double>(dims)), v(zero_weights<double>(dims)) {}
};

void adam_step(ModelWeights<double>& params, const ModelWeights<double>& grads, AdamState& state, double lr);

double hinge_loss(double positive, const std::vector<double>& negatives, double margin);

// One positive candidate and its sampled negatives for a single question.
struct TrainingInstance {
  TokenSequence positive;
  std::vector<TokenSequence> negatives;
};

TrainingInstance make_instance(const Tokens& question, const AnswerAspects& positive,
                               const std::vector<AnswerAspects>& negatives);

// Mean hinge loss over `batch`; gradients of that mean are added to `grads`.
// Dropout masks are drawn from `rng` when `dropout_rate` > 0.
double backward(const ModelWeights<double>& w, const EmbeddingProvider& provider,
                const std::vector<TrainingInstance>& batch, double margin, ModelWeights<double>& grads,
                double dropout_rate = 0.0, std::mt19937_64* rng = nullptr);

double batch_loss(const ModelWeights<double>& w, const EmbeddingProvider& provider,
                  const std::vector<TrainingInstance>& batch, double margin);

struct TensorCheck {
  std::string name;
  double max_rel_error = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  bool passed = true;
  double max_rel_error() const;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;

// The finite-difference side runs in extended precision: with a 1e-5 step,
// double roundoff in an O(1) loss is ~1e-11, which would dominate the 1e-8
// floor below for parameters whose true gradient is (near) zero.
using Extended = long double;
using ExtendedLoss = std::function<Extended(const ModelWeights<Extended>&)>;

// Compares `analytic` against central differences of `loss` at `w`, scalar
// by scalar: |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport compare_gradients(const ModelWeights<double>& w, const ModelWeights<double>& analytic,
                                  const ExtendedLoss& loss, double step = kGradCheckStep,
                                  double tol = kGradCheckTolerance);

// Hinge loss of `batch` at extended precision, no dropout.
Extended batch_loss_extended(const ModelWeights<Extended>& w, const EmbeddingProvider& provider,
                             const std::vector<TrainingInstance>& batch, double margin);

// Dropout is off for the check.
GradCheckReport grad_check(const ModelWeights<double>& w, const EmbeddingProvider& provider,
                           const std::vector<TrainingInstance>& instances, double margin,
                           double step = kGradCheckStep, double tol = kGradCheckTolerance);

// Random tiny model and instance for gradient verification: width 8, 2 heads,
// question and context of at most 6 tokens each.
struct GradCheckCase {
  ModelWeights<double> weights;
  EmbeddingProvider provider;
  std::vector<TrainingInstance> instances;
};
GradCheckCase random_grad_check_case(std::uint64_t seed);

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

// Up to k indices of non-gold candidates, without replacement.
std::vector<std::size_t> sample_negatives(const std::vector<PreparedCandidate>& candidates,
                                          const std::set<EntityId>& gold, std::size_t k, std::mt19937_64& rng);

// Learning rate that shrinks by `factor` after `patience` epochs without a
// validation improvement larger than `min_delta`.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, double factor, std::size_t patience, double min_delta)
      : lr_(lr), factor_(factor), patience_(patience), min_delta_(min_delta) {}

  double lr() const { return lr_; }
  // Returns the learning rate for the next epoch.
  double update(double validation_score);

 private:
  double lr_, factor_;
  std::size_t patience_;
  double min_delta_;
  double best_ = -1.0;
  std::size_t stale_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double val_f1 = 0;
  double lr = 0;  // rate used during the epoch
};

struct TrainResult {
  ModelWeights<double> weights;
  std::vector<EpochRecord> history;
};

// Training example: prepared question plus gold entity ids among its candidates.
struct PreparedExample {
  PreparedQuestion question;
  std::set<EntityId> gold;
  std::set<std::string> gold_answers;  // normalized strings
};

// Questions the pipeline cannot prepare are dropped from training and scored
// as F1 = 0 during validation.
std::vector<std::optional<PreparedExample>> prepare_examples(const KnowledgeGraph& kb,
                                                             const std::vector<QAPair>& data,
                                                             std::size_t candidate_cap = kDefaultCandidateCap);

double validation_f1(const ModelWeights<double>& w, const EmbeddingProvider& provider, const KnowledgeGraph& kb,
                     const std::vector<std::optional<PreparedExample>>& examples, double threshold);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(ModelWeights<double> weights, const EmbeddingProvider& provider, const KnowledgeGraph& kb,
                  const std::vector<QAPair>& train_set, const std::vector<QAPair>& validation_set,
                  const TrainingConfig& config, const EpochCallback& on_epoch = {});

// Deterministic 80/20 split after a seeded shuffle.
std::pair<std::vector<QAPair>, std::vector<QAPair>> split_train_validation(std::vector<QAPair> data,
                                                                           std::uint64_t seed,
                                                                           double train_fraction = 0.8);

}  // namespace lmkbqa
