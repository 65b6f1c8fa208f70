#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "htds/config.hpp"
#include "htds/corpus.hpp"
#include "htds/metrics.hpp"
#include "htds/model.hpp"
#include "htds/tokenizer.hpp"

namespace htds {

// One stay ready for the model: selected, meta-indexed chunks and a 0/1
// target per label. A stay with no usable text has no chunks; its
// prediction is 0.5 for every label and it contributes no gradient.
struct Example {
  std::string stay_id;
  std::vector<Chunk> chunks;
  std::vector<double> targets;
};

Example make_example(const HospitalStay& stay, std::size_t n_labels, const Vocabulary& vocab,
                     const CategoryTable& categories, const ModelConfig& model,
                     const SelectionStrategy& strategy, NotesMode notes);

std::vector<Example> make_examples(const std::vector<const HospitalStay*>& stays, std::size_t n_labels,
                                   const Vocabulary& vocab, const CategoryTable& categories,
                                   const ModelConfig& model, const SelectionStrategy& strategy,
                                   NotesMode notes);

// Vocabulary from the training split, categories from the whole corpus, and
// the model config completed with vocab/label/category sizes.
struct PreparedData {
  Vocabulary vocab;
  CategoryTable categories;
  ModelConfig model;
  std::vector<Example> train, dev, test;
};

PreparedData prepare_data(const Corpus& corpus, const RunConfig& cfg);

// Mean over labels of -[y log p + (1 - y) log(1 - p)], p clamped to
// [1e-12, 1 - 1e-12].
double bce_loss(std::span<const double> probs, std::span<const double> targets);

std::vector<double> predict(const ModelParams& params, const ModelConfig& cfg, const Example& ex);

// Probabilities for every example; parallel over examples.
PredictionSet predict_all(const ModelParams& params, const ModelConfig& cfg,
                          const std::vector<Example>& examples);

// Decoupled weight decay Adam with bias correction.
class AdamW {
 public:
  AdamW(const ModelParams& shape, const TrainConfig& cfg);

  void step(ModelParams& params, const ModelParams& grads, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::size_t t_ = 0;
  ModelParams m_, v_;
};

// Adds scale * d(loss)/d(params) for each example into grads; returns the
// sum of the example losses.
double accumulate_gradients(const ModelParams& params, const ModelConfig& cfg,
                            std::span<const Example* const> examples, double scale, ModelParams& grads);

// One optimizer update from the mean gradient over all examples of all
// micro-batches. Returns the mean loss. On a non-finite loss or gradient
// throws NumericError and leaves params and optimizer untouched.
double train_step(ModelParams& params, AdamW& opt, const ModelConfig& cfg,
                  const std::vector<std::vector<const Example*>>& micro_batches, double lr);

struct ThresholdChoice {
  double threshold = 0.0;
  double micro_f1 = 0.0;
};

// Grid point maximizing micro-F1; the smallest wins ties.
ThresholdChoice optimize_threshold(const PredictionSet& dev, const ThresholdGrid& grid);

struct EarlyStopState {
  std::size_t patience = 0;  // 0 never stops
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_improvement = 0;

  // Records an epoch score; true on strict improvement.
  bool update(double score, std::size_t epoch);
  bool should_stop() const { return patience > 0 && since_improvement >= patience; }
};

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_micro_f1 = 0.0;
  double threshold = 0.0;
  bool improved = false;
};

struct TrainingLog {
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;

  // One JSON object per line, in training order.
  std::string to_jsonl() const;
};

struct FitResult {
  ModelParams params;  // best epoch
  double threshold = 0.5;
  double dev_micro_f1 = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  TrainingLog log;
};

// Steps per epoch = ceil(|train| / effective_batch); the last batch of an
// epoch may be short. Epochs are 1-based in the log.
FitResult fit(const std::vector<Example>& train, const std::vector<Example>& dev,
              const ModelConfig& model, const TrainConfig& cfg,
              const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace htds
